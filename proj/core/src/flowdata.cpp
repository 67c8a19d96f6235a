#include "splinetrace/flowdata.hpp"

#include "splinetrace/error.hpp"
#include "splinetrace/parallel.hpp"
#include "binary_io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <optional>
#include <random>

namespace splinetrace {

using detail::get_u32;
using detail::get_u64;
using detail::put_f64;
using detail::put_u32;
using detail::put_u64;

namespace {

const char* const kModule = "flowdata";

[[noreturn]] void fail(const std::string& message) { throw Error(kModule, message); }

}  // namespace

// --- PathlineSet ---

PathlineSet::PathlineSet(std::size_t num_pathlines, std::size_t num_timesteps, std::vector<Vec3> positions,
                         std::vector<double> time_of_step)
    : num_pathlines_(num_pathlines),
      num_timesteps_(num_timesteps),
      positions_(std::move(positions)),
      time_of_step_(std::move(time_of_step)) {
    if (num_pathlines_ < 1) fail("a pathline set needs at least one pathline");
    if (num_timesteps_ < 2) fail("a pathline set needs at least two time steps, got " + std::to_string(num_timesteps_));
    if (positions_.size() != num_pathlines_ * num_timesteps_)
        fail("expected " + std::to_string(num_pathlines_ * num_timesteps_) + " positions, got " +
             std::to_string(positions_.size()));
    for (std::size_t i = 0; i < positions_.size(); ++i) {
        if (!is_finite(positions_[i]))
            fail("non-finite position at pathline " + std::to_string(i / num_timesteps_) + " step " +
                 std::to_string(i % num_timesteps_));
        bounds_.expand(positions_[i]);
    }
    if (time_of_step_.empty()) {
        time_of_step_.resize(num_timesteps_);
        for (std::size_t j = 0; j < num_timesteps_; ++j) time_of_step_[j] = static_cast<double>(j);
    }
    if (time_of_step_.size() != num_timesteps_) fail("time_of_step must have one entry per step");
    for (std::size_t j = 1; j < num_timesteps_; ++j)
        if (!(time_of_step_[j] > time_of_step_[j - 1])) fail("time_of_step must be strictly increasing");
}

std::vector<Vec3> PathlineSet::load_step(std::size_t step) const {
    std::vector<Vec3> out(num_pathlines_);
    for (std::size_t i = 0; i < num_pathlines_; ++i) out[i] = at(i, step);
    return out;
}

double PathlineSet::normalized_time(double step) const {
    const double last = static_cast<double>(num_timesteps_ - 1);
    if (!(step >= 0.0 && step <= last)) fail("step " + std::to_string(step) + " outside [0, " + std::to_string(last) + "]");
    const auto lo = static_cast<std::size_t>(std::floor(step));
    const std::size_t hi = std::min(lo + 1, num_timesteps_ - 1);
    const double frac = step - static_cast<double>(lo);
    const double t = time_of_step_[lo] + frac * (time_of_step_[hi] - time_of_step_[lo]);
    if (step == last) return 1.0;
    return (t - time_of_step_.front()) / (time_of_step_.back() - time_of_step_.front());
}

PathlineSet PathlineSet::subset(std::span<const std::size_t> ids) const {
    std::vector<Vec3> pos;
    pos.reserve(ids.size() * num_timesteps_);
    for (std::size_t id : ids) {
        if (id >= num_pathlines_) fail("subset id " + std::to_string(id) + " out of range");
        const auto line = pathline(id);
        pos.insert(pos.end(), line.begin(), line.end());
    }
    return PathlineSet(ids.size(), num_timesteps_, std::move(pos), time_of_step_);
}

// --- flow fields ---

FlowFieldSpec FlowFieldSpec::double_gyre(double A, double epsilon, double omega, double t_start, double t_end) {
    FlowFieldSpec s;
    s.kind = FlowKind::DoubleGyre;
    s.parameters = {{"A", A}, {"epsilon", epsilon}, {"omega", omega}};
    s.domain = Box3::from_corners({0.0, 0.0, 0.0}, {2.0, 1.0, 0.0});
    s.t_start = t_start;
    s.t_end = t_end;
    s.bounded = true;
    return s;
}

FlowFieldSpec FlowFieldSpec::abc_flow(double A, double B, double C, double t_start, double t_end) {
    FlowFieldSpec s;
    s.kind = FlowKind::ABCFlow;
    s.parameters = {{"A", A}, {"B", B}, {"C", C}};
    const double two_pi = 2.0 * std::numbers::pi;
    s.domain = Box3::from_corners({0.0, 0.0, 0.0}, {two_pi, two_pi, two_pi});
    s.t_start = t_start;
    s.t_end = t_end;
    s.bounded = false;
    return s;
}

FlowFieldSpec FlowFieldSpec::uniform_translation(const Vec3& velocity, double t_start, double t_end) {
    FlowFieldSpec s;
    s.kind = FlowKind::UniformTranslation;
    s.parameters = {{"vx", velocity.x}, {"vy", velocity.y}, {"vz", velocity.z}};
    s.domain = Box3::from_corners({0.0, 0.0, 0.0}, {1.0, 1.0, 1.0});
    s.t_start = t_start;
    s.t_end = t_end;
    s.bounded = false;
    return s;
}

void FlowFieldSpec::validate() const {
    std::vector<const char*> required;
    switch (kind) {
        case FlowKind::DoubleGyre: required = {"A", "epsilon", "omega"}; break;
        case FlowKind::ABCFlow: required = {"A", "B", "C"}; break;
        case FlowKind::UniformTranslation: required = {"vx", "vy", "vz"}; break;
    }
    for (const char* name : required)
        if (!parameters.contains(name)) fail(to_string(kind) + " requires parameter '" + name + "'");
    if (!(t_end > t_start)) fail("time span must be non-degenerate");
    if (domain.empty()) fail("flow domain is empty");
}

Vec3 FlowFieldSpec::velocity(const Vec3& p, double t) const {
    using std::numbers::pi;
    switch (kind) {
        case FlowKind::DoubleGyre: {
            const double A = parameters.at("A");
            const double eps = parameters.at("epsilon");
            const double omega = parameters.at("omega");
            const double a = eps * std::sin(omega * t);
            const double b = 1.0 - 2.0 * a;
            const double f = a * p.x * p.x + b * p.x;
            const double dfdx = 2.0 * a * p.x + b;
            return {-pi * A * std::sin(pi * f) * std::cos(pi * p.y),
                    pi * A * std::cos(pi * f) * std::sin(pi * p.y) * dfdx, 0.0};
        }
        case FlowKind::ABCFlow: {
            const double A = parameters.at("A");
            const double B = parameters.at("B");
            const double C = parameters.at("C");
            return {A * std::sin(p.z) + C * std::cos(p.y), B * std::sin(p.x) + A * std::cos(p.z),
                    C * std::sin(p.y) + B * std::cos(p.x)};
        }
        case FlowKind::UniformTranslation:
            return {parameters.at("vx"), parameters.at("vy"), parameters.at("vz")};
    }
    return {};
}

std::string to_string(FlowKind kind) {
    switch (kind) {
        case FlowKind::DoubleGyre: return "double-gyre";
        case FlowKind::ABCFlow: return "abc";
        case FlowKind::UniformTranslation: return "uniform";
    }
    return "unknown";
}

FlowKind flow_kind_from_string(const std::string& name) {
    if (name == "double-gyre") return FlowKind::DoubleGyre;
    if (name == "abc") return FlowKind::ABCFlow;
    if (name == "uniform") return FlowKind::UniformTranslation;
    fail("unknown flow '" + name + "' (expected double-gyre, abc or uniform)");
}

// --- generation ---

bool integrate_pathline(const FlowFieldSpec& spec, const Vec3& seed, std::size_t num_timesteps,
                        std::size_t substeps, std::span<Vec3> out, std::size_t pathline_id) {
    const double dt_out = (spec.t_end - spec.t_start) / static_cast<double>(num_timesteps - 1);
    const double h = dt_out / static_cast<double>(substeps);
    bool clamped = false;
    Vec3 p = seed;
    out[0] = p;
    for (std::size_t j = 1; j < num_timesteps; ++j) {
        const double t_base = spec.t_start + static_cast<double>(j - 1) * dt_out;
        for (std::size_t s = 0; s < substeps; ++s) {
            const double t = t_base + static_cast<double>(s) * h;
            const Vec3 k1 = spec.velocity(p, t);
            const Vec3 k2 = spec.velocity(p + (0.5 * h) * k1, t + 0.5 * h);
            const Vec3 k3 = spec.velocity(p + (0.5 * h) * k2, t + 0.5 * h);
            const Vec3 k4 = spec.velocity(p + h * k3, t + h);
            if (!is_finite(k1) || !is_finite(k2) || !is_finite(k3) || !is_finite(k4))
                fail("non-finite velocity on pathline " + std::to_string(pathline_id) + " at step " +
                     std::to_string(j));
            p += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            if (spec.bounded && !spec.domain.contains(p)) {
                p = spec.domain.clamp(p);
                clamped = true;
            }
        }
        out[j] = p;
    }
    return clamped;
}

GeneratedPathlines generate_pathlines(const FlowFieldSpec& spec, std::size_t num_pathlines,
                                      std::size_t num_timesteps, std::size_t substeps, std::uint64_t rng_seed) {
    spec.validate();
    if (num_timesteps < 2) fail("num_timesteps must be at least 2, got " + std::to_string(num_timesteps));
    if (substeps < 1) fail("substeps must be at least 1");
    if (num_pathlines < 1) fail("num_pathlines must be at least 1");

    // Seeds are drawn serially so the set does not depend on thread count.
    std::mt19937_64 rng(rng_seed);
    const auto unit = [&rng] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
    std::vector<Vec3> seeds(num_pathlines);
    for (auto& s : seeds) {
        for (int a = 0; a < 3; ++a) s[a] = spec.domain.lo[a] + unit() * (spec.domain.hi[a] - spec.domain.lo[a]);
    }

    std::vector<Vec3> positions(num_pathlines * num_timesteps);
    std::vector<std::uint8_t> clamped(num_pathlines, 0);
    std::vector<std::optional<std::string>> errors(num_pathlines);
    parallel_for(num_pathlines, [&](std::size_t i) {
        try {
            const std::span<Vec3> out(positions.data() + i * num_timesteps, num_timesteps);
            clamped[i] = integrate_pathline(spec, seeds[i], num_timesteps, substeps, out, i) ? 1 : 0;
        } catch (const Error& e) {
            errors[i] = e.what();
        }
    });
    for (const auto& e : errors)
        if (e) throw Error(kModule, e->substr(std::string(kModule).size() + 2));

    return {PathlineSet(num_pathlines, num_timesteps, std::move(positions)), std::move(clamped)};
}

// --- I/O ---

PathlineFormat pathline_format_for(const std::filesystem::path& path) {
    const auto ext = path.extension().string();
    return (ext == ".pln" || ext == ".bin") ? PathlineFormat::Binary : PathlineFormat::Csv;
}

namespace {

void write_binary(const PathlineSet& set, std::ostream& os) {
    os.write("PLN1", 4);
    put_u32(os, 1);
    put_u32(os, static_cast<std::uint32_t>(set.num_pathlines()));
    put_u32(os, static_cast<std::uint32_t>(set.num_timesteps()));
    put_u64(os, 0);
    put_u64(os, kPln1HeaderBytes);
    for (const Vec3& p : set.positions()) {
        put_f64(os, p.x);
        put_f64(os, p.y);
        put_f64(os, p.z);
    }
}

PathlineSet read_binary(std::istream& is) {
    char magic[4];
    if (!is.read(magic, 4) || std::string(magic, 4) != "PLN1") fail("not a PLN1 file (bad magic)");
    const std::uint32_t version = get_u32(is, kModule);
    if (version != 1) fail("unsupported PLN1 version " + std::to_string(version));
    const std::size_t n = get_u32(is, kModule);
    const std::size_t m = get_u32(is, kModule);
    get_u64(is, kModule);  // reserved
    const std::uint64_t offset = get_u64(is, kModule);
    if (offset < kPln1HeaderBytes) fail("invalid PLN1 payload offset");
    is.seekg(static_cast<std::streamoff>(offset));
    std::vector<Vec3> pos(n * m);
    for (std::size_t i = 0; i < pos.size(); ++i) {
        for (int a = 0; a < 3; ++a) pos[i][a] = detail::get_f64(is, kModule);
        if (!is_finite(pos[i]))
            fail("NaN position at pathline " + std::to_string(i / m) + " step " + std::to_string(i % m));
    }
    return PathlineSet(n, m, std::move(pos));
}

void write_csv(const PathlineSet& set, std::ostream& os) {
    os << "pathline_id,step,x,y,z\n";
    char buf[160];
    for (std::size_t i = 0; i < set.num_pathlines(); ++i) {
        for (std::size_t j = 0; j < set.num_timesteps(); ++j) {
            const Vec3& p = set.at(i, j);
            std::snprintf(buf, sizeof(buf), "%zu,%zu,%.17g,%.17g,%.17g\n", i, j, p.x, p.y, p.z);
            os << buf;
        }
    }
}

double parse_double(std::string_view field, std::size_t line_no) {
    double v = 0.0;
    const auto* first = field.data();
    const auto* last = field.data() + field.size();
    while (first < last && *first == ' ') ++first;
    const auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc()) fail("line " + std::to_string(line_no) + ": cannot parse number '" + std::string(field) + "'");
    return v;
}

std::size_t parse_index(std::string_view field, std::size_t line_no) {
    std::size_t v = 0;
    const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
    if (res.ec != std::errc()) fail("line " + std::to_string(line_no) + ": cannot parse index '" + std::string(field) + "'");
    return v;
}

PathlineSet read_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) fail("empty CSV file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "pathline_id,step,x,y,z") fail("unexpected CSV header '" + line + "'");

    std::vector<std::vector<Vec3>> lines;
    std::size_t line_no = 1;
    while (std::getline(is, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string_view> fields;
        std::string_view rest(line);
        for (std::size_t pos; (pos = rest.find(',')) != std::string_view::npos; rest.remove_prefix(pos + 1))
            fields.push_back(rest.substr(0, pos));
        fields.push_back(rest);
        if (fields.size() != 5) fail("line " + std::to_string(line_no) + ": expected 5 fields");
        const std::size_t id = parse_index(fields[0], line_no);
        const std::size_t step = parse_index(fields[1], line_no);
        const Vec3 p{parse_double(fields[2], line_no), parse_double(fields[3], line_no), parse_double(fields[4], line_no)};
        if (!is_finite(p))
            fail("NaN position at pathline " + std::to_string(id) + " step " + std::to_string(step) + " (line " +
                 std::to_string(line_no) + ")");
        if (id == lines.size()) lines.emplace_back();
        if (id + 1 != lines.size()) fail("line " + std::to_string(line_no) + ": rows not sorted by pathline_id");
        if (step != lines.back().size())
            fail("line " + std::to_string(line_no) + ": rows of pathline " + std::to_string(id) + " not sorted by step");
        lines.back().push_back(p);
    }
    if (lines.empty()) fail("CSV file contains no pathlines");
    const std::size_t m = lines.front().size();
    std::vector<Vec3> pos;
    pos.reserve(lines.size() * m);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (lines[i].size() != m)
            fail("ragged pathline " + std::to_string(i) + ": " + std::to_string(lines[i].size()) + " steps, expected " +
                 std::to_string(m));
        pos.insert(pos.end(), lines[i].begin(), lines[i].end());
    }
    return PathlineSet(lines.size(), m, std::move(pos));
}

}  // namespace

PathlineSet read_pathlines(const std::filesystem::path& path, PathlineFormat format) {
    std::ifstream is(path, std::ios::binary);
    if (!is) fail("cannot open '" + path.string() + "'");
    return format == PathlineFormat::Binary ? read_binary(is) : read_csv(is);
}

void write_pathlines(const PathlineSet& set, const std::filesystem::path& path, PathlineFormat format) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) fail("cannot open '" + path.string() + "' for writing");
    if (format == PathlineFormat::Binary)
        write_binary(set, os);
    else
        write_csv(set, os);
    if (!os) fail("write to '" + path.string() + "' failed");
}

}  // namespace splinetrace
