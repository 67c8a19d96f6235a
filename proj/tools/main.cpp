#include "cli_support.hpp"

#include "splinetrace/bspline.hpp"
#include "splinetrace/error.hpp"
#include "splinetrace/eval.hpp"
#include "splinetrace/flowdata.hpp"
#include "splinetrace/parallel.hpp"
#include "splinetrace/tracer_particle.hpp"
#include "splinetrace/tracer_spline.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cstdio>
#include <iostream>
#include <numeric>

namespace {

using namespace splinetrace;
using nlohmann::json;

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

PathlineSet load_pathlines(const std::string& path) {
    spdlog::info("reading pathlines from {}", path);
    return read_pathlines(path, pathline_format_for(path));
}

struct GenArgs {
    std::string flow = "double-gyre";
    std::size_t pathlines = 1000;
    std::size_t steps = 400;
    std::size_t substeps = 10;
    std::uint64_t seed = 1;
    std::string velocity = "1,0,0";
    std::string out;
};

void run_gen(const GenArgs& a, const CLI::App& app) {
    FlowFieldSpec spec;
    switch (flow_kind_from_string(a.flow)) {
    case FlowKind::DoubleGyre: spec = FlowFieldSpec::double_gyre(); break;
    case FlowKind::ABCFlow: spec = FlowFieldSpec::abc_flow(); break;
    case FlowKind::UniformTranslation: {
        const TraceSeed v = cli::parse_seed("0," + a.velocity, TraceDirection::Both);
        spec = FlowFieldSpec::uniform_translation(v.rho);
        break;
    }
    }
    spdlog::info("integrating {} pathlines x {} steps ({} substeps)", a.pathlines, a.steps, a.substeps);
    const GeneratedPathlines gen = generate_pathlines(spec, a.pathlines, a.steps, a.substeps, a.seed);
    const auto clamped = static_cast<std::size_t>(std::count(gen.clamped.begin(), gen.clamped.end(), 1));
    if (clamped > 0) spdlog::warn("{} pathlines left the domain and were clamped", clamped);
    write_pathlines(gen.pathlines, a.out, pathline_format_for(a.out));
    cli::write_sidecar(a.out, {{"config", cli::config_echo(app)},
                               {"num_pathlines", a.pathlines},
                               {"num_timesteps", a.steps},
                               {"clamped_pathlines", clamped}});
    spdlog::info("wrote {}", a.out);
}

struct FitArgs {
    std::string in;
    std::string out;
    std::size_t control_points = 100;
    int order = 4;
    std::string param = "time";
    std::size_t smoothing = 2;
};

void run_fit(const FitArgs& a, const CLI::App& app) {
    const PathlineSet set = load_pathlines(a.in);
    KnotPlacementConfig config;
    config.num_control_points = a.control_points;
    config.feature_smoothing_width = a.smoothing;
    const SplineSet splines = fit_all(set, a.order, config, cli::parse_param(a.param));
    const FitErrorReport fit = eval_fitting(set, splines);
    spdlog::info("fitted {} curves in {:.3f}s, aggregate RMSE {:.3e} ({:.3e}% of range)", splines.size(),
                 splines.fit_seconds, fit.aggregate_rmse, fit.percent_of_range);
    write_splines(splines, a.out);
    cli::write_sidecar(a.out, {{"config", cli::config_echo(app)},
                               {"num_curves", splines.size()},
                               {"num_timesteps", set.num_timesteps()},
                               {"aggregate_rmse", fit.aggregate_rmse},
                               {"fit_seconds", splines.fit_seconds}});
    spdlog::info("wrote {}", a.out);
}

struct TraceArgs {
    std::string method = "spline";
    std::string in;
    std::vector<std::string> seeds;
    std::size_t neighbors = 8;
    double power = 2.0;
    std::string direction = "both";
    std::string out;
    std::string samples_out;
    std::size_t samples = 0;
    std::size_t time_steps = 0;
};

void run_trace(const TraceArgs& a, const CLI::App& app) {
    const TraceDirection direction = cli::parse_direction(a.direction);
    std::vector<TraceSeed> seeds;
    for (const std::string& s : a.seeds) seeds.push_back(cli::parse_seed(s, direction));
    const TraceOptions options{a.neighbors, a.power};
    const json meta = {{"config", cli::config_echo(app)}};

    if (a.method == "particle") {
        const PathlineSet set = load_pathlines(a.in);
        const auto traced = trace_particles(set, seeds, options);
        cli::write_traced_csv(a.out, traced);
        cli::write_sidecar(a.out, meta);
        spdlog::info("traced {} seeds over raw particles; wrote {}", seeds.size(), a.out);
        return;
    }
    if (a.method != "spline") throw cli::UsageError("unknown method '" + a.method + "' (expected particle or spline)");

    std::size_t steps = a.time_steps;
    if (steps == 0) {
        const auto side = cli::read_sidecar(a.in);
        if (side && side->contains("num_timesteps")) steps = side->at("num_timesteps").get<std::size_t>();
    }
    if (steps < 2)
        throw cli::UsageError("the step count of '" + a.in + "' is unknown: pass --time-steps or keep its .meta.json");
    SplineSet splines = read_splines(a.in, steps);
    const auto traced = trace_splines(splines, seeds, options);

    SplineSet out;
    out.order = splines.order;
    out.time_of_step = splines.time_of_step;
    for (const TracedSpline& t : traced) out.curves.push_back(t.curve);
    write_splines(out, a.out);
    json side = meta;
    side["num_timesteps"] = steps;
    cli::write_sidecar(a.out, side);
    if (!a.samples_out.empty()) {
        std::vector<std::vector<TracedSample>> samples;
        for (const TracedSpline& t : traced) samples.push_back(sample_traced(t, splines.time_of_step, a.samples));
        cli::write_samples_csv(a.samples_out, samples);
        cli::write_sidecar(a.samples_out, meta);
    }
    spdlog::info("traced {} seeds over control points; wrote {}", seeds.size(), a.out);
}

struct EvalArgs {
    std::string pathlines;
    std::string splines;
    double test_frac = 0.25;
    std::string seed_steps = "0,half";
    std::uint64_t split_seed = 1;
    std::size_t neighbors = 8;
    double power = 2.0;
    std::string report;
    std::string csv;
};

SplineSet load_splines_for(const std::string& path, const PathlineSet& set) {
    SplineSet splines = read_splines(path, set.num_timesteps());
    splines.time_of_step.assign(set.time_of_step().begin(), set.time_of_step().end());
    if (const auto side = cli::read_sidecar(path); side && side->contains("fit_seconds"))
        splines.fit_seconds = side->at("fit_seconds").get<double>();
    return splines;
}

void run_eval(const EvalArgs& a, const CLI::App& app) {
    const PathlineSet set = load_pathlines(a.pathlines);
    const SplineSet splines = load_splines_for(a.splines, set);
    TracingConfig config;
    config.test_fraction = a.test_frac;
    config.seed_steps = cli::parse_steps(a.seed_steps, set.num_timesteps());
    config.split_seed = a.split_seed;
    config.trace = {a.neighbors, a.power};
    const EvalReport report = eval_tracing(set, splines, config);
    for (const SeedStepResult& r : report.traces)
        spdlog::info("seed step {}: RMSE particle {:.4e} spline {:.4e}; time particle {:.3f}s spline {:.3f}s",
                     r.seed_step, r.particle_aggregate_rmse, r.spline_aggregate_rmse, r.particle_seconds,
                     r.spline_seconds);
    json doc = cli::to_json(report);
    doc["config"] = cli::config_echo(app);
    cli::write_json(a.report, doc);
    if (!a.csv.empty()) cli::write_eval_csv(a.csv, report);
    spdlog::info("wrote {}", a.report);
}

struct BenchArgs {
    std::string pathlines;
    std::string cp = "10,25,50,100";
    int order = 4;
    double test_frac = 0.25;
    std::uint64_t split_seed = 1;
    std::string seed_steps = "0";
    std::size_t neighbors = 8;
    double power = 2.0;
    std::size_t repetitions = 3;
    std::string report;
    std::string csv;
};

void run_bench(const BenchArgs& a, const CLI::App& app) {
    const PathlineSet set = load_pathlines(a.pathlines);
    const TrainTestSplit split = split_pathlines(set.num_pathlines(), a.test_frac, a.split_seed);
    const PathlineSet training = set.subset(split.train);
    std::vector<TraceSeed> seeds;
    for (std::size_t step : cli::parse_steps(a.seed_steps, set.num_timesteps()))
        for (std::size_t id : split.test) seeds.push_back({static_cast<double>(step), set.at(id, step), TraceDirection::Both});
    BenchConfig config;
    config.control_point_counts = cli::parse_counts(a.cp);
    config.order = a.order;
    config.trace = {a.neighbors, a.power};
    config.repetitions = a.repetitions;
    const BenchReport report = bench_timing(training, seeds, config);
    for (const BenchRow& r : report.rows)
        spdlog::info("n={}: fit {:.4f}s, spline trace {:.4f}s, ratio {:.3f}", r.control_points, r.fit_seconds,
                     r.spline_trace_seconds, r.ratio);
    json doc = cli::to_json(report);
    doc["config"] = cli::config_echo(app);
    cli::write_json(a.report, doc);
    if (!a.csv.empty()) cli::write_bench_csv(a.csv, report);
    spdlog::info("wrote {}", a.report);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Fit B-splines to pathline sets and trace new pathlines through control points."};
    app.option_defaults()->always_capture_default();
    app.require_subcommand(1);
    app.fallthrough();

    std::size_t threads = 0;
    std::string log_level = "info";
    app.add_option("--threads", threads, "Worker threads (0 = available parallelism)");
    app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off")
        ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));

    GenArgs gen;
    CLI::App* gen_cmd = app.add_subcommand("gen", "Generate ground-truth pathlines from an analytic flow");
    gen_cmd->add_option("--flow", gen.flow, "double-gyre, abc or uniform")
        ->check(CLI::IsMember({"double-gyre", "abc", "uniform"}));
    gen_cmd->add_option("--pathlines", gen.pathlines, "Number of pathlines")->check(CLI::PositiveNumber);
    gen_cmd->add_option("--steps", gen.steps, "Output time steps")->check(CLI::Range(2, 1 << 30));
    gen_cmd->add_option("--substeps", gen.substeps, "RK4 sub-intervals per output step")->check(CLI::PositiveNumber);
    gen_cmd->add_option("--seed", gen.seed, "Seed for the particle sampler");
    gen_cmd->add_option("--velocity", gen.velocity, "vx,vy,vz for --flow uniform");
    gen_cmd->add_option("--out", gen.out, "Output file (.pln binary, otherwise CSV)")->required();

    FitArgs fit;
    CLI::App* fit_cmd = app.add_subcommand("fit", "Fit one B-spline per pathline");
    fit_cmd->add_option("--in", fit.in, "Pathline file")->required()->check(CLI::ExistingFile);
    fit_cmd->add_option("--out", fit.out, "Output SPL1 file")->required();
    fit_cmd->add_option("--control-points", fit.control_points, "Control points per curve")->check(CLI::PositiveNumber);
    fit_cmd->add_option("--order", fit.order, "Spline order k (degree k-1)")->check(CLI::Range(1, 16));
    fit_cmd->add_option("--param", fit.param, "time or chord4d")->check(CLI::IsMember({"time", "chord4d"}));
    fit_cmd->add_option("--smoothing", fit.smoothing, "Half-width of the knot-feature moving average");

    TraceArgs trace;
    CLI::App* trace_cmd = app.add_subcommand("trace", "Trace new pathlines from seed points");
    trace_cmd->add_option("--method", trace.method, "particle or spline")->check(CLI::IsMember({"particle", "spline"}));
    trace_cmd->add_option("--in", trace.in, "Pathline file (particle) or SPL1 file (spline)")
        ->required()
        ->check(CLI::ExistingFile);
    trace_cmd->add_option("--seed", trace.seeds, "tau,x,y,z (repeatable)")->required();
    trace_cmd->add_option("--neighbors", trace.neighbors, "Neighbor count K")->check(CLI::PositiveNumber);
    trace_cmd->add_option("--power", trace.power, "IDW power")->check(CLI::PositiveNumber);
    trace_cmd->add_option("--direction", trace.direction, "forward, backward or both")
        ->check(CLI::IsMember({"forward", "backward", "both"}));
    trace_cmd->add_option("--out", trace.out, "Traced output (CSV for particle, SPL1 for spline)")->required();
    trace_cmd->add_option("--samples-out", trace.samples_out, "Spline only: sampled positions as CSV");
    trace_cmd->add_option("--samples", trace.samples, "Spline only: evenly spaced samples (0 = data steps)");
    trace_cmd->add_option("--time-steps", trace.time_steps, "Spline only: step count of the fitted data");

    EvalArgs ev;
    CLI::App* eval_cmd = app.add_subcommand("eval", "Fitting and tracing accuracy against held-out pathlines");
    eval_cmd->add_option("--pathlines", ev.pathlines, "Pathline file")->required()->check(CLI::ExistingFile);
    eval_cmd->add_option("--splines", ev.splines, "SPL1 file fitted from the same pathlines")
        ->required()
        ->check(CLI::ExistingFile);
    eval_cmd->add_option("--test-frac", ev.test_frac, "Held-out fraction")->check(CLI::Range(0.0, 1.0));
    eval_cmd->add_option("--seed-steps", ev.seed_steps, "Comma list of seed steps; 'half' and 'last' allowed");
    eval_cmd->add_option("--split-seed", ev.split_seed, "Seed for the train/test split");
    eval_cmd->add_option("--neighbors", ev.neighbors, "Neighbor count K")->check(CLI::PositiveNumber);
    eval_cmd->add_option("--power", ev.power, "IDW power")->check(CLI::PositiveNumber);
    eval_cmd->add_option("--report", ev.report, "JSON report path")->required();
    eval_cmd->add_option("--csv", ev.csv, "Directory for per-step CSV series");

    BenchArgs bench;
    CLI::App* bench_cmd = app.add_subcommand("bench", "Fit and trace timings over control-point counts");
    bench_cmd->add_option("--pathlines", bench.pathlines, "Pathline file")->required()->check(CLI::ExistingFile);
    bench_cmd->add_option("--cp", bench.cp, "Comma list of control-point counts");
    bench_cmd->add_option("--order", bench.order, "Spline order k")->check(CLI::Range(1, 16));
    bench_cmd->add_option("--test-frac", bench.test_frac, "Fraction of pathlines used as seeds")
        ->check(CLI::Range(0.0, 1.0));
    bench_cmd->add_option("--split-seed", bench.split_seed, "Seed for the train/test split");
    bench_cmd->add_option("--seed-steps", bench.seed_steps, "Comma list of seed steps");
    bench_cmd->add_option("--neighbors", bench.neighbors, "Neighbor count K")->check(CLI::PositiveNumber);
    bench_cmd->add_option("--power", bench.power, "IDW power")->check(CLI::PositiveNumber);
    bench_cmd->add_option("--repetitions", bench.repetitions, "Timed repetitions after one warm-up")
        ->check(CLI::PositiveNumber);
    bench_cmd->add_option("--report", bench.report, "JSON report path")->required();
    bench_cmd->add_option("--csv", bench.csv, "Directory for bench.csv");

    std::string info_path;
    CLI::App* info_cmd = app.add_subcommand("info", "Print format, counts and bounds of a PLN1, SPL1 or CSV file");
    info_cmd->add_option("file", info_path, "File to inspect")->required()->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        if (code == 0) return 0;
        std::cerr << app.help();
        return kExitUsage;
    }

    auto logger = spdlog::stderr_color_mt("splinetrace");
    spdlog::set_default_logger(logger);
    spdlog::set_level(spdlog::level::from_str(log_level));
    set_max_threads(threads);

    try {
        if (*gen_cmd) run_gen(gen, *gen_cmd);
        if (*fit_cmd) run_fit(fit, *fit_cmd);
        if (*trace_cmd) run_trace(trace, *trace_cmd);
        if (*eval_cmd) run_eval(ev, *eval_cmd);
        if (*bench_cmd) run_bench(bench, *bench_cmd);
        if (*info_cmd) std::cout << cli::describe_file(info_path);
    } catch (const cli::UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    }
    return 0;
}
