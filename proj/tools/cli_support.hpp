#pragma once

#include "splinetrace/eval.hpp"
#include "splinetrace/flowdata.hpp"
#include "splinetrace/tracer_particle.hpp"
#include "splinetrace/tracer_spline.hpp"

#include <json.hpp>

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace CLI {
class App;
}

namespace splinetrace::cli {

/// Thrown for malformed flag values that CLI11 cannot validate on its own.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Every option of `app` (and of its parent, for global flags) with the value
/// it ended up with, defaults included.
nlohmann::json config_echo(const CLI::App& app);

/// `<artifact>.meta.json`: the config echo that accompanies a binary artifact.
std::filesystem::path sidecar_path(const std::filesystem::path& artifact);
void write_sidecar(const std::filesystem::path& artifact, const nlohmann::json& meta);
std::optional<nlohmann::json> read_sidecar(const std::filesystem::path& artifact);

void write_json(const std::filesystem::path& path, const nlohmann::json& doc);

/// "tau,x,y,z".
TraceSeed parse_seed(const std::string& text, TraceDirection direction);
TraceDirection parse_direction(const std::string& text);
ParamKind parse_param(const std::string& text);

/// Comma list of step indices; "half" means m/2 and "last" means m-1.
std::vector<std::size_t> parse_steps(const std::string& text, std::size_t num_timesteps);
std::vector<std::size_t> parse_counts(const std::string& text);

/// `pathline_id,step,x,y,z` rows; `step` is absolute in the source data.
void write_traced_csv(const std::filesystem::path& path, std::span<const TracedPathline> traced);
void write_samples_csv(const std::filesystem::path& path, std::span<const std::vector<TracedSample>> samples);

nlohmann::json to_json(const FitErrorReport& fit);
nlohmann::json to_json(const EvalReport& report);
nlohmann::json to_json(const BenchReport& report);

void write_eval_csv(const std::filesystem::path& dir, const EvalReport& report);
void write_bench_csv(const std::filesystem::path& dir, const BenchReport& report);

/// Human-readable summary of a PLN1, SPL1 or pathline CSV file.
std::string describe_file(const std::filesystem::path& path);

}  // namespace splinetrace::cli
