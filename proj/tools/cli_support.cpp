#include "cli_support.hpp"

#include "splinetrace/bspline.hpp"
#include "splinetrace/error.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>

namespace splinetrace::cli {

namespace {

using nlohmann::json;

std::vector<std::string> split(const std::string& text, char sep) {
    std::vector<std::string> parts;
    std::string part;
    std::istringstream is(text);
    while (std::getline(is, part, sep)) parts.push_back(part);
    return parts;
}

double to_double(const std::string& s, const std::string& what) {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw UsageError("invalid " + what + " '" + s + "'");
    return v;
}

std::size_t to_count(const std::string& s, const std::string& what) {
    std::size_t v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw UsageError("invalid " + what + " '" + s + "'");
    return v;
}

void add_options(const CLI::App& app, json& out) {
    for (const CLI::Option* opt : app.get_options()) {
        const std::string name = opt->get_single_name();
        if (name.empty() || name == "help") continue;
        const auto& results = opt->results();
        if (results.empty()) {
            const std::string def = opt->get_default_str();
            out[name] = def.empty() ? json() : json(def);
        } else if (results.size() == 1) {
            out[name] = results.front();
        } else {
            out[name] = results;
        }
    }
}

using FileCloser = int (*)(std::FILE*);

std::unique_ptr<std::FILE, FileCloser> open_out(const std::filesystem::path& path) {
    std::unique_ptr<std::FILE, FileCloser> f(std::fopen(path.string().c_str(), "w"), &std::fclose);
    if (!f) throw Error("cli", "cannot open '" + path.string() + "' for writing");
    return f;
}

std::string box_text(const Box3& b) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "[%.9g, %.9g] x [%.9g, %.9g] x [%.9g, %.9g]", b.lo.x, b.hi.x, b.lo.y, b.hi.y, b.lo.z,
                  b.hi.z);
    return buf;
}

}  // namespace

nlohmann::json config_echo(const CLI::App& app) {
    json echo;
    echo["subcommand"] = app.get_name();
    json options = json::object();
    add_options(app, options);
    echo["options"] = options;
    if (const CLI::App* parent = app.get_parent()) {
        json global = json::object();
        add_options(*parent, global);
        echo["global"] = global;
    }
    return echo;
}

std::filesystem::path sidecar_path(const std::filesystem::path& artifact) {
    return std::filesystem::path(artifact.string() + ".meta.json");
}

void write_sidecar(const std::filesystem::path& artifact, const nlohmann::json& meta) {
    write_json(sidecar_path(artifact), meta);
}

std::optional<nlohmann::json> read_sidecar(const std::filesystem::path& artifact) {
    std::ifstream is(sidecar_path(artifact));
    if (!is) return std::nullopt;
    try {
        return json::parse(is);
    } catch (const json::exception&) {
        return std::nullopt;
    }
}

void write_json(const std::filesystem::path& path, const nlohmann::json& doc) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path);
    if (!os) throw Error("cli", "cannot open '" + path.string() + "' for writing");
    os << doc.dump(2) << '\n';
    if (!os) throw Error("cli", "write to '" + path.string() + "' failed");
}

TraceSeed parse_seed(const std::string& text, TraceDirection direction) {
    const auto parts = split(text, ',');
    if (parts.size() != 4) throw UsageError("--seed expects tau,x,y,z, got '" + text + "'");
    return {to_double(parts[0], "seed step"),
            {to_double(parts[1], "seed x"), to_double(parts[2], "seed y"), to_double(parts[3], "seed z")},
            direction};
}

TraceDirection parse_direction(const std::string& text) {
    if (text == "forward") return TraceDirection::Forward;
    if (text == "backward") return TraceDirection::Backward;
    if (text == "both") return TraceDirection::Both;
    throw UsageError("unknown direction '" + text + "'");
}

ParamKind parse_param(const std::string& text) {
    if (text == "time") return ParamKind::Time;
    if (text == "chord4d") return ParamKind::ChordLength4D;
    throw UsageError("unknown parameterization '" + text + "'");
}

std::vector<std::size_t> parse_steps(const std::string& text, std::size_t num_timesteps) {
    std::vector<std::size_t> steps;
    for (const std::string& part : split(text, ',')) {
        if (part == "half")
            steps.push_back(num_timesteps / 2);
        else if (part == "last")
            steps.push_back(num_timesteps - 1);
        else
            steps.push_back(to_count(part, "seed step"));
    }
    if (steps.empty()) throw UsageError("empty step list");
    return steps;
}

std::vector<std::size_t> parse_counts(const std::string& text) {
    std::vector<std::size_t> counts;
    for (const std::string& part : split(text, ',')) counts.push_back(to_count(part, "count"));
    if (counts.empty()) throw UsageError("empty count list");
    return counts;
}

void write_traced_csv(const std::filesystem::path& path, std::span<const TracedPathline> traced) {
    auto f = open_out(path);
    std::fprintf(f.get(), "pathline_id,step,x,y,z\n");
    for (std::size_t s = 0; s < traced.size(); ++s)
        for (std::size_t j = traced[s].first_step; j <= traced[s].last_step(); ++j) {
            const Vec3& p = traced[s].at_step(j);
            std::fprintf(f.get(), "%zu,%zu,%.17g,%.17g,%.17g\n", s, j, p.x, p.y, p.z);
        }
}

void write_samples_csv(const std::filesystem::path& path, std::span<const std::vector<TracedSample>> samples) {
    auto f = open_out(path);
    std::fprintf(f.get(), "pathline_id,step,x,y,z\n");
    for (std::size_t s = 0; s < samples.size(); ++s)
        for (const TracedSample& t : samples[s])
            std::fprintf(f.get(), "%zu,%.17g,%.17g,%.17g,%.17g\n", s, t.step, t.position.x, t.position.y, t.position.z);
}

nlohmann::json to_json(const FitErrorReport& fit) {
    return {{"aggregate_rmse", fit.aggregate_rmse},
            {"data_range", fit.data_range},
            {"data_range_definition", "bounding-box diagonal"},
            {"percent_of_range", fit.percent_of_range},
            {"rmse_by_step", fit.rmse_by_step}};
}

nlohmann::json to_json(const EvalReport& report) {
    json traces = json::array();
    for (const SeedStepResult& r : report.traces) {
        traces.push_back({{"seed_step", r.seed_step},
                          {"particle", {{"aggregate_rmse", r.particle_aggregate_rmse},
                                        {"seconds", r.particle_seconds},
                                        {"mean_iterations", r.particle_iterations},
                                        {"rmse_by_step", r.particle_rmse_by_step}}},
                          {"spline", {{"aggregate_rmse", r.spline_aggregate_rmse},
                                      {"seconds", r.spline_seconds},
                                      {"mean_iterations", r.spline_iterations},
                                      {"rmse_by_step", r.spline_rmse_by_step}}}});
    }
    return {{"fit", to_json(report.fit)},
            {"split", {{"train", report.split.train.size()}, {"test", report.split.test}}},
            {"traces", traces},
            {"timing", {{"fit_seconds", report.fit_seconds},
                        {"particle_trace_seconds", report.particle_trace_seconds},
                        {"spline_trace_seconds", report.spline_trace_seconds}}},
            {"iteration_counts", {{"particle", report.particle_iterations}, {"spline", report.spline_iterations}}},
            {"knot_repair_count", report.knot_repair_count},
            {"trimmed_pairs", report.trimmed_pairs},
            {"seed_deviation", {{"mean", report.seed_deviation_mean}, {"max", report.seed_deviation_max}}}};
}

nlohmann::json to_json(const BenchReport& report) {
    json rows = json::array();
    for (const BenchRow& r : report.rows)
        rows.push_back({{"control_points", r.control_points},
                        {"fit_seconds", r.fit_seconds},
                        {"spline_trace_seconds", r.spline_trace_seconds},
                        {"ratio", r.ratio},
                        {"mean_spline_iterations", r.spline_iterations}});
    return {{"rows", rows},
            {"particle_trace_seconds", report.particle_trace_seconds},
            {"mean_particle_iterations", report.particle_iterations},
            {"spline_time_vs_control_points", {{"slope", report.spline_time_vs_control_points.slope},
                                               {"intercept", report.spline_time_vs_control_points.intercept},
                                               {"r2", report.spline_time_vs_control_points.r2}}},
            {"fit_time_spread", report.fit_time_spread}};
}

void write_eval_csv(const std::filesystem::path& dir, const EvalReport& report) {
    std::filesystem::create_directories(dir);
    {
        auto f = open_out(dir / "fit_rmse.csv");
        std::fprintf(f.get(), "step,rmse\n");
        for (std::size_t j = 0; j < report.fit.rmse_by_step.size(); ++j)
            std::fprintf(f.get(), "%zu,%.17g\n", j, report.fit.rmse_by_step[j]);
    }
    auto f = open_out(dir / "trace_rmse.csv");
    std::fprintf(f.get(), "seed_step,step,particle_rmse,spline_rmse\n");
    for (const SeedStepResult& r : report.traces)
        for (std::size_t j = 0; j < r.particle_rmse_by_step.size(); ++j)
            std::fprintf(f.get(), "%zu,%zu,%.17g,%.17g\n", r.seed_step, j, r.particle_rmse_by_step[j],
                         r.spline_rmse_by_step[j]);
}

void write_bench_csv(const std::filesystem::path& dir, const BenchReport& report) {
    std::filesystem::create_directories(dir);
    auto f = open_out(dir / "bench.csv");
    std::fprintf(f.get(), "control_points,fit_seconds,spline_trace_seconds,particle_trace_seconds,ratio\n");
    for (const BenchRow& r : report.rows)
        std::fprintf(f.get(), "%zu,%.9g,%.9g,%.9g,%.9g\n", r.control_points, r.fit_seconds, r.spline_trace_seconds,
                     report.particle_trace_seconds, r.ratio);
}

std::string describe_file(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error("cli", "cannot open '" + path.string() + "'");
    char magic[4] = {};
    is.read(magic, 4);
    const std::string tag(magic, static_cast<std::size_t>(is.gcount()));
    is.close();

    std::ostringstream os;
    if (tag == "SPL1") {
        const SplineSet set = read_splines(path, 0);
        std::size_t min_n = set.curves.front().num_control_points();
        std::size_t max_n = min_n;
        Box3 box;
        for (const SplineCurve& c : set.curves) {
            min_n = std::min(min_n, c.num_control_points());
            max_n = std::max(max_n, c.num_control_points());
            for (std::size_t i = 0; i < c.num_control_points(); ++i) box.expand(c.control_point3(i));
        }
        os << "format: SPL1\n"
           << "num_curves: " << set.size() << '\n'
           << "order: " << set.order << '\n'
           << "dim: " << set.dim << '\n'
           << "param: " << (set.param_kind == ParamKind::Time ? "time" : "chord4d") << '\n'
           << "control_points: " << min_n;
        if (max_n != min_n) os << ".." << max_n;
        os << '\n' << "control_point_bounds: " << box_text(box) << '\n';
    } else {
        const PathlineFormat format = tag == "PLN1" ? PathlineFormat::Binary : PathlineFormat::Csv;
        const PathlineSet set = read_pathlines(path, format);
        os << "format: " << (format == PathlineFormat::Binary ? "PLN1" : "CSV") << '\n'
           << "num_pathlines: " << set.num_pathlines() << '\n'
           << "num_timesteps: " << set.num_timesteps() << '\n'
           << "bounds: " << box_text(set.bounds()) << '\n';
    }
    if (const auto meta = read_sidecar(path)) os << "config: " << meta->dump() << '\n';
    return os.str();
}

}  // namespace splinetrace::cli
