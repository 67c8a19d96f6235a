#include "splinetrace/bspline.hpp"
#include "splinetrace/flowdata.hpp"
#include "splinetrace/neighbors.hpp"
#include "splinetrace/tracer_particle.hpp"
#include "splinetrace/tracer_spline.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace splinetrace;

namespace {

KnotPlacementConfig with_n(std::size_t n) {
    KnotPlacementConfig c;
    c.num_control_points = n;
    return c;
}

const GeneratedPathlines& gyre() {
    static const GeneratedPathlines gen = generate_pathlines(FlowFieldSpec::double_gyre(), 1000, 400, 10, 42);
    return gen;
}

std::vector<double> identity_times(std::size_t m) {
    std::vector<double> t(m);
    for (std::size_t j = 0; j < m; ++j) t[j] = static_cast<double>(j);
    return t;
}

std::vector<TraceSeed> seeds(std::size_t count) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> x(0.05, 1.95);
    std::uniform_real_distribution<double> y(0.05, 0.95);
    std::vector<TraceSeed> out(count);
    for (auto& s : out) s = {0.0, {x(rng), y(rng), 0.0}, TraceDirection::Forward};
    return out;
}

}  // namespace

static void BM_Evaluate(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const CurveFit fit = fit_curve(gyre().pathlines.pathline(0), identity_times(400), 4, with_n(n), ParamKind::Time);
    double u = 0.0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(evaluate3(fit.curve, u));
        u += 0.000731;
        if (u > 1.0) u -= 1.0;
    }
}
BENCHMARK(BM_Evaluate)->Arg(10)->Arg(100);

static void BM_FitCurve(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto times = identity_times(400);
    const auto line = gyre().pathlines.pathline(3);
    for (auto _ : state) benchmark::DoNotOptimize(fit_curve(line, times, 4, with_n(n), ParamKind::Time));
}
BENCHMARK(BM_FitCurve)->Arg(10)->Arg(25)->Arg(50)->Arg(100);

static void BM_KdTreeBuild(benchmark::State& state) {
    const auto step = gyre().pathlines.load_step(200);
    for (auto _ : state) benchmark::DoNotOptimize(NeighborIndex(step));
}
BENCHMARK(BM_KdTreeBuild);

static void BM_KdTreeQuery(benchmark::State& state) {
    const auto step = gyre().pathlines.load_step(200);
    const NeighborIndex index(step);
    const auto K = static_cast<std::size_t>(state.range(0));
    std::vector<Neighbor> out;
    std::size_t i = 0;
    for (auto _ : state) {
        index.knn(step[i % step.size()] + Vec3{1e-3, 1e-3, 0.0}, K, out);
        benchmark::DoNotOptimize(out.data());
        ++i;
    }
}
BENCHMARK(BM_KdTreeQuery)->Arg(8)->Arg(32);

static void BM_TraceParticles(benchmark::State& state) {
    const auto s = seeds(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(trace_particles(gyre().pathlines, s));
}
BENCHMARK(BM_TraceParticles)->Arg(50)->Unit(benchmark::kMillisecond);

static void BM_TraceSplines(benchmark::State& state) {
    static std::map<std::size_t, SplineSet> fitted;
    const auto n = static_cast<std::size_t>(state.range(0));
    auto it = fitted.find(n);
    if (it == fitted.end()) it = fitted.emplace(n, fit_all(gyre().pathlines, 4, with_n(n), ParamKind::Time)).first;
    const auto s = seeds(50);
    for (auto _ : state) benchmark::DoNotOptimize(trace_splines(it->second, s));
}
BENCHMARK(BM_TraceSplines)->Arg(10)->Arg(25)->Arg(50)->Arg(100)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
