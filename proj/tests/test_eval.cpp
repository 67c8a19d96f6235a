#include "oracles.hpp"

#include "splinetrace/error.hpp"
#include "splinetrace/eval.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

using namespace splinetrace;

namespace {

KnotPlacementConfig with_n(std::size_t n) {
    KnotPlacementConfig c;
    c.num_control_points = n;
    return c;
}

const GeneratedPathlines& gyre() {
    static const GeneratedPathlines gen = generate_pathlines(FlowFieldSpec::double_gyre(), 240, 200, 5, 51);
    return gen;
}

PathlineSet identical_cubics(std::size_t count, std::size_t m) {
    std::vector<Vec3> pos;
    for (std::size_t i = 0; i < count; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            const double s = static_cast<double>(j) / static_cast<double>(m - 1);
            pos.push_back({0.3 + s * s * s, 0.5 - s * s, 2.0 * s});
        }
    return PathlineSet(count, m, pos);
}

}  // namespace

TEST(EvalFitting, ExactlyRepresentableDataHasZeroError) {
    const auto gen = generate_pathlines(FlowFieldSpec::uniform_translation({0.1, 0.2, -0.3}), 30, 40, 2, 4);
    const SplineSet splines = fit_all(gen.pathlines, 4, with_n(8), ParamKind::Time);
    const FitErrorReport r = eval_fitting(gen.pathlines, splines);
    ASSERT_EQ(r.rmse_by_step.size(), 40u);
    for (double e : r.rmse_by_step) EXPECT_LE(e, 1e-10);
    EXPECT_LE(r.aggregate_rmse, 1e-10);
    EXPECT_DOUBLE_EQ(r.data_range, gen.pathlines.bounds().diagonal());
}

TEST(EvalFitting, MatchesDirectRmse) {
    const PathlineSet& set = gyre().pathlines;
    const SplineSet splines = fit_all(set, 4, with_n(15), ParamKind::Time);
    const FitErrorReport r = eval_fitting(set, splines);
    for (std::size_t j : {0u, 73u, 199u}) {
        double sum = 0.0;
        for (std::size_t i = 0; i < set.num_pathlines(); ++i) {
            const Vec3 d = set.at(i, j) - evaluate3(splines.curves[i], j / 199.0);
            sum += dot(d, d);
        }
        EXPECT_NEAR(r.rmse_by_step[j], std::sqrt(sum / set.num_pathlines()), 1e-12);
    }
    EXPECT_NEAR(r.percent_of_range, 100.0 * r.aggregate_rmse / r.data_range, 1e-12);
}

TEST(EvalFitting, MoreControlPointsAndTimeParameterization) {
    const PathlineSet& set = gyre().pathlines;
    const double coarse = eval_fitting(set, fit_all(set, 4, with_n(10), ParamKind::Time)).aggregate_rmse;
    const double fine = eval_fitting(set, fit_all(set, 4, with_n(100), ParamKind::Time)).aggregate_rmse;
    EXPECT_LT(fine, coarse / 10.0);
    const double chord = eval_fitting(set, fit_all(set, 4, with_n(25), ParamKind::ChordLength4D)).aggregate_rmse;
    const double time = eval_fitting(set, fit_all(set, 4, with_n(25), ParamKind::Time)).aggregate_rmse;
    EXPECT_LE(time, chord);
}

TEST(EvalFitting, RejectsMismatchedCounts) {
    const PathlineSet& set = gyre().pathlines;
    const std::vector<std::size_t> ids{0, 1, 2};
    const SplineSet few = fit_all(set.subset(ids), 4, with_n(10), ParamKind::Time);
    EXPECT_THROW(eval_fitting(set, few), Error);
}

TEST(Split, DisjointDeterministicAndSized) {
    const TrainTestSplit a = split_pathlines(1000, 0.25, 7);
    const TrainTestSplit b = split_pathlines(1000, 0.25, 7);
    EXPECT_EQ(a.train, b.train);
    EXPECT_EQ(a.test, b.test);
    EXPECT_EQ(a.test.size(), 250u);
    EXPECT_EQ(a.train.size(), 750u);
    std::set<std::size_t> all(a.train.begin(), a.train.end());
    all.insert(a.test.begin(), a.test.end());
    EXPECT_EQ(all.size(), 1000u);
    EXPECT_TRUE(std::is_sorted(a.test.begin(), a.test.end()));
    EXPECT_NE(split_pathlines(1000, 0.25, 8).test, a.test);
    EXPECT_EQ(split_pathlines(10, 0.01, 1).test.size(), 1u);
    EXPECT_THROW(split_pathlines(10, 0.0, 1), Error);
    EXPECT_THROW(split_pathlines(10, 1.0, 1), Error);
}

TEST(EvalTracing, IdenticalPathlinesTraceExactly) {
    const PathlineSet set = identical_cubics(12, 60);
    const SplineSet splines = fit_all(set, 4, with_n(10), ParamKind::Time);
    TracingConfig config;
    config.test_fraction = 0.05;
    config.seed_steps = {0, 30};
    const EvalReport r = eval_tracing(set, splines, config);
    ASSERT_EQ(r.split.test.size(), 1u);
    ASSERT_EQ(r.traces.size(), 2u);
    for (const SeedStepResult& t : r.traces) {
        for (double e : t.particle_rmse_by_step) EXPECT_EQ(e, 0.0);
        for (double e : t.spline_rmse_by_step) EXPECT_LE(e, 1e-9);
    }
    EXPECT_LE(r.seed_deviation_max, 1e-9);
}

TEST(EvalTracing, NeedsEnoughTrainingCurves) {
    const PathlineSet set = identical_cubics(9, 30);
    const SplineSet splines = fit_all(set, 4, with_n(6), ParamKind::Time);
    TracingConfig config;
    config.test_fraction = 0.1;
    EXPECT_THROW(eval_tracing(set, splines, config), Error);
    config.trace.neighbors = 4;
    EXPECT_NO_THROW(eval_tracing(set, splines, config));
}

TEST(EvalTracing, MidSeedHasLowerPeakErrorAndCountsIterations) {
    const PathlineSet& set = gyre().pathlines;
    const SplineSet splines = fit_all(set, 4, with_n(20), ParamKind::Time);
    TracingConfig config;
    config.seed_steps = {0, 100};
    const EvalReport r = eval_tracing(set, splines, config);
    ASSERT_EQ(r.traces.size(), 2u);
    ASSERT_EQ(r.split.test.size(), 60u);
    const auto peak = [](const std::vector<double>& v) { return *std::max_element(v.begin(), v.end()); };
    EXPECT_LT(peak(r.traces[1].particle_rmse_by_step), peak(r.traces[0].particle_rmse_by_step));
    EXPECT_LT(peak(r.traces[1].spline_rmse_by_step), peak(r.traces[0].spline_rmse_by_step));
    EXPECT_EQ(r.traces[0].particle_rmse_by_step[0], 0.0);
    EXPECT_EQ(r.traces[1].particle_rmse_by_step[100], 0.0);

    for (const SeedStepResult& t : r.traces) {
        EXPECT_DOUBLE_EQ(t.particle_iterations, 199.0);
        EXPECT_GT(t.spline_iterations, 15.0);
        EXPECT_LT(t.spline_iterations, 25.0);
        EXPECT_GT(t.particle_seconds, 0.0);
        EXPECT_GT(t.spline_seconds, 0.0);
        for (double e : t.spline_rmse_by_step) EXPECT_GE(e, 0.0);
    }
    EXPECT_EQ(r.particle_iterations, 2u * 60u * 199u);
    EXPECT_EQ(r.knot_repair_count, 0u);
}

TEST(LinearRegression, RecoversExactLineAndScoresNoise) {
    const std::vector<double> x{10, 25, 50, 100};
    std::vector<double> y;
    for (double v : x) y.push_back(0.5 * v + 3.0);
    const LinearFit f = linear_regression(x, y);
    EXPECT_NEAR(f.slope, 0.5, 1e-14);
    EXPECT_NEAR(f.intercept, 3.0, 1e-12);
    EXPECT_NEAR(f.r2, 1.0, 1e-14);
    const std::vector<double> noisy{8.0, 16.0, 26.0, 55.0};
    EXPECT_NEAR(linear_regression(x, noisy).r2, oracle::r_squared(x, noisy), 1e-12);
    EXPECT_THROW(linear_regression(std::vector<double>{1.0}, std::vector<double>{1.0}), Error);
    EXPECT_THROW(linear_regression(std::vector<double>{2.0, 2.0}, std::vector<double>{1.0, 3.0}), Error);
}

TEST(BenchTiming, ProducesOneRowPerCount) {
    const PathlineSet& set = gyre().pathlines;
    std::vector<TraceSeed> seeds;
    for (std::size_t i = 0; i < 5; ++i) seeds.push_back({0.0, set.at(i, 0)});
    const std::vector<std::size_t> ids{5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16, 17, 18, 19, 20, 21, 22, 23, 24};
    BenchConfig config;
    config.control_point_counts = {10, 20};
    config.repetitions = 1;
    const BenchReport r = bench_timing(set.subset(ids), seeds, config);
    ASSERT_EQ(r.rows.size(), 2u);
    EXPECT_EQ(r.rows[0].control_points, 10u);
    EXPECT_EQ(r.rows[1].control_points, 20u);
    EXPECT_DOUBLE_EQ(r.particle_iterations, 199.0);
    for (const BenchRow& row : r.rows) {
        EXPECT_GT(row.fit_seconds, 0.0);
        EXPECT_GT(row.spline_trace_seconds, 0.0);
        EXPECT_NEAR(row.ratio, row.spline_trace_seconds / r.particle_trace_seconds, 1e-12);
    }
    EXPECT_LT(r.rows[0].spline_iterations, r.rows[1].spline_iterations);

    config.control_point_counts = {10};
    EXPECT_THROW(bench_timing(set.subset(ids), seeds, config), Error);
    config.control_point_counts = {10, 20};
    EXPECT_THROW(bench_timing(set.subset(ids), {}, config), Error);
}
