#pragma once

#include "splinetrace/geometry.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace splinetrace {

/// Trajectories of many particles sampled at the same m output steps.
///
/// Positions are stored pathline-major: all steps of pathline 0, then all
/// steps of pathline 1, and so on. Immutable after construction.
class PathlineSet {
public:
    /// Validates shape and finiteness. An empty time_of_step means the
    /// identity mapping (physical time == step index).
    PathlineSet(std::size_t num_pathlines, std::size_t num_timesteps, std::vector<Vec3> positions,
                std::vector<double> time_of_step = {});

    std::size_t num_pathlines() const { return num_pathlines_; }
    std::size_t num_timesteps() const { return num_timesteps_; }

    const Vec3& at(std::size_t pathline, std::size_t step) const {
        return positions_[pathline * num_timesteps_ + step];
    }
    std::span<const Vec3> pathline(std::size_t pathline) const {
        return {positions_.data() + pathline * num_timesteps_, num_timesteps_};
    }
    std::span<const Vec3> positions() const { return positions_; }
    std::span<const double> time_of_step() const { return time_of_step_; }
    const Box3& bounds() const { return bounds_; }

    /// Positions of every pathline at one step, in pathline order.
    std::vector<Vec3> load_step(std::size_t step) const;

    /// Maps a (possibly fractional) step index to [0,1] via time_of_step.
    double normalized_time(double step) const;

    /// New set holding the listed pathlines in the given order.
    PathlineSet subset(std::span<const std::size_t> ids) const;

    friend bool operator==(const PathlineSet&, const PathlineSet&) = default;

private:
    std::size_t num_pathlines_;
    std::size_t num_timesteps_;
    std::vector<Vec3> positions_;
    std::vector<double> time_of_step_;
    Box3 bounds_;
};

enum class FlowKind { DoubleGyre, ABCFlow, UniformTranslation };

/// Analytic velocity field used to synthesize ground-truth pathlines.
struct FlowFieldSpec {
    FlowKind kind = FlowKind::DoubleGyre;
    std::map<std::string, double> parameters;
    Box3 domain;
    double t_start = 0.0;
    double t_end = 1.0;
    /// Clamp trajectories to the domain. Off for fields without a closed domain
    /// (ABC is periodic, uniform translation is unbounded); the domain then only
    /// bounds seeding.
    bool bounded = true;

    /// A=0.1, epsilon=0.25, omega=2*pi/10 on [0,2]x[0,1]x{0}, t in [0,10].
    static FlowFieldSpec double_gyre(double A = 0.1, double epsilon = 0.25, double omega = 0.6283185307179586,
                                     double t_start = 0.0, double t_end = 10.0);
    /// Steady ABC flow on [0,2pi]^3 with A=sqrt(3), B=sqrt(2), C=1.
    static FlowFieldSpec abc_flow(double A = 1.7320508075688772, double B = 1.4142135623730951, double C = 1.0,
                                  double t_start = 0.0, double t_end = 2.0);
    static FlowFieldSpec uniform_translation(const Vec3& velocity, double t_start = 0.0, double t_end = 1.0);

    /// Throws if a parameter required by kind is missing or the time span is degenerate.
    void validate() const;
    Vec3 velocity(const Vec3& p, double t) const;
};

std::string to_string(FlowKind kind);
FlowKind flow_kind_from_string(const std::string& name);

struct GeneratedPathlines {
    PathlineSet pathlines;
    /// One flag per pathline; set when the trajectory was clamped to the domain.
    std::vector<std::uint8_t> clamped;
};

/// Seeds num_pathlines particles uniformly in spec.domain (deterministic in
/// rng_seed) and integrates each with classical RK4, `substeps` sub-intervals
/// per output step. Output step j sits at t_start + j*(t_end-t_start)/(m-1).
GeneratedPathlines generate_pathlines(const FlowFieldSpec& spec, std::size_t num_pathlines,
                                      std::size_t num_timesteps, std::size_t substeps, std::uint64_t rng_seed);

/// One RK4 integration of a single particle, recording num_timesteps outputs.
/// Returns true if the trajectory was clamped.
bool integrate_pathline(const FlowFieldSpec& spec, const Vec3& seed, std::size_t num_timesteps,
                        std::size_t substeps, std::span<Vec3> out, std::size_t pathline_id = 0);

enum class PathlineFormat { Csv, Binary };

/// Binary when the extension is .pln/.bin, CSV otherwise.
PathlineFormat pathline_format_for(const std::filesystem::path& path);

PathlineSet read_pathlines(const std::filesystem::path& path, PathlineFormat format);
void write_pathlines(const PathlineSet& set, const std::filesystem::path& path, PathlineFormat format);

/// Fixed PLN1 header size; payload follows immediately.
inline constexpr std::size_t kPln1HeaderBytes = 32;

}  // namespace splinetrace
