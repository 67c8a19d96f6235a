#pragma once

#include "splinetrace/bspline.hpp"
#include "splinetrace/flowdata.hpp"
#include "splinetrace/tracer_particle.hpp"
#include "splinetrace/tracer_spline.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace splinetrace {

/// Fitting error of a spline set against the pathlines it was fitted from.
struct FitErrorReport {
    /// sqrt(mean over pathlines of |rho_ij - C_i(u_j)|^2) for each step j.
    std::vector<double> rmse_by_step;
    double aggregate_rmse = 0.0;
    /// Bounding-box diagonal of the pathline set, the "data range".
    double data_range = 0.0;
    double percent_of_range = 0.0;
};

/// Spatial error only; 4D chord-length curves are evaluated at their own
/// fitting parameters and compared on xyz.
FitErrorReport eval_fitting(const PathlineSet& set, const SplineSet& splines);

struct TrainTestSplit {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

/// Deterministic disjoint split; the test side holds max(1, round(fraction*count)) ids.
TrainTestSplit split_pathlines(std::size_t count, double test_fraction, std::uint64_t split_seed);

struct TracingConfig {
    double test_fraction = 0.25;
    std::vector<std::size_t> seed_steps{0};
    TraceOptions trace;
    std::uint64_t split_seed = 1;
};

/// Both tracers started from the held-out pathlines at one seed step.
struct SeedStepResult {
    std::size_t seed_step = 0;
    std::vector<double> particle_rmse_by_step;
    std::vector<double> spline_rmse_by_step;
    double particle_aggregate_rmse = 0.0;
    double spline_aggregate_rmse = 0.0;
    double particle_seconds = 0.0;
    double spline_seconds = 0.0;
    /// Mean interpolation iterations per seed.
    double particle_iterations = 0.0;
    double spline_iterations = 0.0;
};

struct EvalReport {
    FitErrorReport fit;
    TrainTestSplit split;
    std::vector<SeedStepResult> traces;
    double fit_seconds = 0.0;
    double particle_trace_seconds = 0.0;
    double spline_trace_seconds = 0.0;
    std::size_t particle_iterations = 0;
    std::size_t spline_iterations = 0;
    std::size_t knot_repair_count = 0;
    std::size_t trimmed_pairs = 0;
    /// |C_traced(u_seed) - rho| over all spline seeds.
    double seed_deviation_mean = 0.0;
    double seed_deviation_max = 0.0;
};

/// Holds out a random test fraction of pathlines, removes them from both the
/// particle set and the spline set, seeds both tracers from every held-out
/// trajectory at each seed step (tracing both directions), and measures
/// per-step RMSE against the held-out truth.
EvalReport eval_tracing(const PathlineSet& set, const SplineSet& splines, const TracingConfig& config);

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
};

/// Ordinary least squares y = slope*x + intercept with coefficient of determination.
LinearFit linear_regression(std::span<const double> x, std::span<const double> y);

struct BenchConfig {
    std::vector<std::size_t> control_point_counts{10, 25, 50, 100};
    int order = 4;
    TraceOptions trace;
    std::size_t repetitions = 3;
};

struct BenchRow {
    std::size_t control_points = 0;
    double fit_seconds = 0.0;
    double spline_trace_seconds = 0.0;
    /// spline_trace_seconds / particle_trace_seconds.
    double ratio = 0.0;
    double spline_iterations = 0.0;
};

struct BenchReport {
    std::vector<BenchRow> rows;
    double particle_trace_seconds = 0.0;
    double particle_iterations = 0.0;
    LinearFit spline_time_vs_control_points;
    /// max/min - 1 over the per-n fit times.
    double fit_time_spread = 0.0;
};

/// Fit and trace timings per control-point count. Each measurement is the
/// median of `repetitions` runs after one discarded warm-up run.
BenchReport bench_timing(const PathlineSet& training, std::span<const TraceSeed> seeds, const BenchConfig& config);

}  // namespace splinetrace
