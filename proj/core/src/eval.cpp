#include "splinetrace/eval.hpp"

#include "splinetrace/error.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

namespace splinetrace {

namespace {

const char* const kModule = "eval";

[[noreturn]] void fail(const std::string& message) { throw Error(kModule, message); }

template <class F>
double seconds_of(F&& f) {
    const auto start = std::chrono::steady_clock::now();
    f();
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t mid = v.size() / 2;
    return v.size() % 2 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

/// Accumulates squared errors per step.
struct StepErrors {
    explicit StepErrors(std::size_t m) : sum(m, 0.0), count(m, 0) {}

    void add(std::size_t step, double sq) {
        sum[step] += sq;
        ++count[step];
    }
    std::vector<double> rmse() const {
        std::vector<double> out(sum.size(), 0.0);
        for (std::size_t j = 0; j < sum.size(); ++j)
            out[j] = count[j] ? std::sqrt(sum[j] / static_cast<double>(count[j])) : 0.0;
        return out;
    }
    double aggregate() const {
        const double s = std::accumulate(sum.begin(), sum.end(), 0.0);
        const auto c = std::accumulate(count.begin(), count.end(), std::size_t{0});
        return c ? std::sqrt(s / static_cast<double>(c)) : 0.0;
    }

    std::vector<double> sum;
    std::vector<std::size_t> count;
};

}  // namespace

FitErrorReport eval_fitting(const PathlineSet& set, const SplineSet& splines) {
    if (set.num_pathlines() != splines.size())
        fail("spline set has " + std::to_string(splines.size()) + " curves for " + std::to_string(set.num_pathlines()) +
             " pathlines");
    const std::size_t m = set.num_timesteps();
    StepErrors errors(m);
    for (std::size_t i = 0; i < set.num_pathlines(); ++i) {
        const auto line = set.pathline(i);
        const Parameterization param = parameterize(line, set.time_of_step(), splines.curves[i].param_kind());
        for (std::size_t j = 0; j < m; ++j)
            errors.add(j, squared_norm(line[j] - evaluate3(splines.curves[i], param.params[j])));
    }
    FitErrorReport out;
    out.rmse_by_step = errors.rmse();
    out.aggregate_rmse = errors.aggregate();
    out.data_range = set.bounds().diagonal();
    out.percent_of_range = out.data_range > 0.0 ? 100.0 * out.aggregate_rmse / out.data_range : 0.0;
    return out;
}

TrainTestSplit split_pathlines(std::size_t count, double test_fraction, std::uint64_t split_seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) fail("test fraction must lie in (0, 1)");
    std::vector<std::size_t> ids(count);
    std::iota(ids.begin(), ids.end(), std::size_t{0});
    // Fisher-Yates with an explicit generator so the split is portable.
    std::mt19937_64 rng(split_seed);
    for (std::size_t i = count; i > 1; --i) std::swap(ids[i - 1], ids[rng() % i]);
    const auto test = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(count))));
    if (test >= count) fail("test split leaves no training pathlines");
    TrainTestSplit split;
    split.test.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(test));
    split.train.assign(ids.begin() + static_cast<std::ptrdiff_t>(test), ids.end());
    std::sort(split.test.begin(), split.test.end());
    std::sort(split.train.begin(), split.train.end());
    return split;
}

EvalReport eval_tracing(const PathlineSet& set, const SplineSet& splines, const TracingConfig& config) {
    if (set.num_pathlines() != splines.size())
        fail("spline set has " + std::to_string(splines.size()) + " curves for " + std::to_string(set.num_pathlines()) +
             " pathlines");
    const std::size_t m = set.num_timesteps();
    EvalReport report;
    report.fit_seconds = splines.fit_seconds;
    report.fit = eval_fitting(set, splines);
    report.split = split_pathlines(set.num_pathlines(), config.test_fraction, config.split_seed);
    if (report.split.train.size() < config.trace.neighbors + 1)
        fail("test split leaves " + std::to_string(report.split.train.size()) + " training curves; need at least K+1 = " +
             std::to_string(config.trace.neighbors + 1));

    const PathlineSet train = set.subset(report.split.train);
    SplineSet train_splines = splines.subset(report.split.train);
    if (train_splines.time_of_step.empty())
        train_splines.time_of_step.assign(set.time_of_step().begin(), set.time_of_step().end());

    double deviation_sum = 0.0;
    std::size_t deviation_count = 0;
    for (std::size_t seed_step : config.seed_steps) {
        if (seed_step >= m) fail("seed step " + std::to_string(seed_step) + " outside the data");
        std::vector<TraceSeed> seeds;
        for (std::size_t id : report.split.test)
            seeds.push_back({static_cast<double>(seed_step), set.at(id, seed_step), TraceDirection::Both});

        SeedStepResult result;
        result.seed_step = seed_step;
        std::vector<TracedPathline> particles;
        std::vector<TracedSpline> traced;
        result.particle_seconds = seconds_of([&] { particles = trace_particles(train, seeds, config.trace); });
        result.spline_seconds = seconds_of([&] { traced = trace_splines(train_splines, seeds, config.trace); });

        StepErrors particle_err(m);
        StepErrors spline_err(m);
        std::size_t particle_iters = 0;
        std::size_t spline_iters = 0;
        for (std::size_t s = 0; s < seeds.size(); ++s) {
            const std::size_t id = report.split.test[s];
            const TracedPathline& p = particles[s];
            for (std::size_t j = p.first_step; j <= p.last_step(); ++j)
                particle_err.add(j, squared_norm(p.at_step(j) - set.at(id, j)));
            particle_iters += p.iterations;

            const TracedSpline& t = traced[s];
            for (const TracedSample& sample : sample_traced(t, train_splines.time_of_step)) {
                const auto j = static_cast<std::size_t>(sample.step);
                spline_err.add(j, squared_norm(sample.position - set.at(id, j)));
            }
            spline_iters += t.iterations;
            report.knot_repair_count += t.knot_repairs;
            report.trimmed_pairs += t.trimmed_pairs;
            const double dev = distance(evaluate3(t.curve, std::clamp(t.seed_u, t.curve.domain_begin(), t.curve.domain_end())),
                                        seeds[s].rho);
            deviation_sum += dev;
            report.seed_deviation_max = std::max(report.seed_deviation_max, dev);
            ++deviation_count;
        }
        result.particle_rmse_by_step = particle_err.rmse();
        result.spline_rmse_by_step = spline_err.rmse();
        result.particle_aggregate_rmse = particle_err.aggregate();
        result.spline_aggregate_rmse = spline_err.aggregate();
        result.particle_iterations = static_cast<double>(particle_iters) / static_cast<double>(seeds.size());
        result.spline_iterations = static_cast<double>(spline_iters) / static_cast<double>(seeds.size());

        report.particle_trace_seconds += result.particle_seconds;
        report.spline_trace_seconds += result.spline_seconds;
        report.particle_iterations += particle_iters;
        report.spline_iterations += spline_iters;
        report.traces.push_back(std::move(result));
    }
    report.seed_deviation_mean = deviation_count ? deviation_sum / static_cast<double>(deviation_count) : 0.0;
    return report;
}

LinearFit linear_regression(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) fail("regression needs at least two (x, y) pairs");
    const auto n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxx = 0.0;
    double sxy = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0) fail("regression needs distinct x values");
    LinearFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    fit.r2 = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
    return fit;
}

BenchReport bench_timing(const PathlineSet& training, std::span<const TraceSeed> seeds, const BenchConfig& config) {
    if (config.control_point_counts.size() < 2) fail("benchmark needs at least two control-point counts");
    if (config.repetitions < 1) fail("benchmark needs at least one repetition");
    if (seeds.empty()) fail("benchmark needs at least one seed");

    BenchReport report;
    {
        std::vector<double> times;
        std::vector<TracedPathline> traced;
        for (std::size_t rep = 0; rep <= config.repetitions; ++rep) {
            const double t = seconds_of([&] { traced = trace_particles(training, seeds, config.trace); });
            if (rep > 0) times.push_back(t);
        }
        report.particle_trace_seconds = median(times);
        double iters = 0.0;
        for (const auto& p : traced) iters += static_cast<double>(p.iterations);
        report.particle_iterations = iters / static_cast<double>(traced.size());
    }

    // Round-robin over n so slow drift in machine load hits every n alike.
    const std::size_t counts = config.control_point_counts.size();
    std::vector<std::vector<double>> fit_times(counts);
    std::vector<std::vector<double>> trace_times(counts);
    std::vector<double> spline_iterations(counts, 0.0);
    for (std::size_t rep = 0; rep <= config.repetitions; ++rep) {
        for (std::size_t c = 0; c < counts; ++c) {
            KnotPlacementConfig knots;
            knots.num_control_points = config.control_point_counts[c];
            SplineSet splines;
            std::vector<TracedSpline> traced;
            const double tf = seconds_of([&] { splines = fit_all(training, config.order, knots, ParamKind::Time); });
            const double tt = seconds_of([&] { traced = trace_splines(splines, seeds, config.trace); });
            if (rep == 0) {
                double iters = 0.0;
                for (const auto& t : traced) iters += static_cast<double>(t.iterations);
                spline_iterations[c] = iters / static_cast<double>(traced.size());
                continue;
            }
            fit_times[c].push_back(tf);
            trace_times[c].push_back(tt);
        }
    }
    for (std::size_t c = 0; c < counts; ++c) {
        BenchRow row;
        row.control_points = config.control_point_counts[c];
        row.fit_seconds = median(fit_times[c]);
        row.spline_trace_seconds = median(trace_times[c]);
        row.ratio = row.spline_trace_seconds / report.particle_trace_seconds;
        row.spline_iterations = spline_iterations[c];
        report.rows.push_back(row);
    }

    std::vector<double> x;
    std::vector<double> y;
    double fit_min = report.rows.front().fit_seconds;
    double fit_max = fit_min;
    for (const BenchRow& row : report.rows) {
        x.push_back(static_cast<double>(row.control_points));
        y.push_back(row.spline_trace_seconds);
        fit_min = std::min(fit_min, row.fit_seconds);
        fit_max = std::max(fit_max, row.fit_seconds);
    }
    report.spline_time_vs_control_points = linear_regression(x, y);
    report.fit_time_spread = fit_min > 0.0 ? fit_max / fit_min - 1.0 : 0.0;
    return report;
}

}  // namespace splinetrace
