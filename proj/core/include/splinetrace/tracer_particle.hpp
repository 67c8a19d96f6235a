#pragma once

#include "splinetrace/flowdata.hpp"
#include "splinetrace/geometry.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace splinetrace {

enum class TraceDirection { Forward, Backward, Both };

/// A particle inserted at (possibly fractional) step `tau` at position `rho`.
struct TraceSeed {
    double tau = 0.0;
    Vec3 rho;
    TraceDirection direction = TraceDirection::Both;
};

struct TraceOptions {
    std::size_t neighbors = 8;
    double power = 2.0;
};

/// Positions of a traced particle at consecutive steps first_step..last_step().
struct TracedPathline {
    TraceSeed seed;
    std::size_t first_step = 0;
    std::vector<Vec3> positions;
    /// Number of interpolation steps performed (one per traced step).
    std::size_t iterations = 0;

    std::size_t last_step() const { return first_step + positions.size() - 1; }
    const Vec3& at_step(std::size_t step) const { return positions[step - first_step]; }
    Vec3& at_step(std::size_t step) { return positions[step - first_step]; }
};

/// Interpolation-based tracing over raw particles. Each step advances the
/// inserted particle by the IDW-weighted displacement of its K nearest
/// particles at the current step; neighbors are searched again at every step.
TracedPathline trace_particle(const PathlineSet& set, const TraceSeed& seed, const TraceOptions& options = {});

/// Many seeds at once. Per-step neighbor indexes are built once and shared by
/// every seed; results match tracing each seed alone.
std::vector<TracedPathline> trace_particles(const PathlineSet& set, std::span<const TraceSeed> seeds,
                                            const TraceOptions& options = {});

}  // namespace splinetrace
