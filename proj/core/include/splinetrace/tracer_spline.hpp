#pragma once

#include "splinetrace/bspline.hpp"
#include "splinetrace/tracer_particle.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace splinetrace {

/// Anchor knot index d of a curve at parameter u: the smallest
/// d in [floor(k/2), n+k-1-ceil(k/2)] with t_d >= u. u at the start of the
/// domain maps to the lower bound and u at the end to the upper bound.
std::size_t anchor_index(const SplineCurve& curve, double u);

/// Smallest and largest valid anchor index of a curve.
std::size_t anchor_lower(const SplineCurve& curve);
std::size_t anchor_upper(const SplineCurve& curve);

/// A new B-spline reconstructed from the knots and control points of the
/// neighboring fitted curves.
struct TracedSpline {
    /// End-clamped curve; knots().size() == num_control_points() + order().
    SplineCurve curve;
    /// Reconstructed knot t_r of every emitted (knot, control point) pair.
    std::vector<double> pair_knots;
    TraceSeed seed;
    /// Normalized seed time.
    double seed_u = 0.0;
    /// Interpolation iterations: seed reconstruction plus one per step.
    std::size_t iterations = 0;
    /// Monotone-projection repairs of reconstructed knots.
    std::size_t knot_repairs = 0;
    /// Pairs dropped so that no knot exceeds multiplicity k at the ends.
    std::size_t trimmed_pairs = 0;
};

/// Control-point tracing. The seed knot and control point come from the
/// neighbors of rho among all curves evaluated at u; every later pair comes
/// from the neighbors of the current reconstructed control point among the
/// curves' current control points, whose anchors advance one per iteration.
TracedSpline trace_spline(const SplineSet& set, const TraceSeed& seed, const TraceOptions& options = {});

/// Many seeds at once. Seeds sharing a start step share the per-iteration
/// control-point index (their anchor frontiers coincide); results match
/// tracing each seed alone.
std::vector<TracedSpline> trace_splines(const SplineSet& set, std::span<const TraceSeed> seeds,
                                        const TraceOptions& options = {});

struct TracedSample {
    /// Fractional step index of the sample.
    double step = 0.0;
    Vec3 position;
};

/// num_samples == 0: evaluates at every step of the source data whose
/// normalized time lies in the curve's domain. Otherwise num_samples evenly
/// spaced parameters spanning the domain (2 gives the two endpoints).
std::vector<TracedSample> sample_traced(const TracedSpline& traced, std::span<const double> time_of_step,
                                        std::size_t num_samples = 0);

}  // namespace splinetrace
