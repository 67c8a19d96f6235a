#include "splinetrace/bspline.hpp"

#include "splinetrace/error.hpp"
#include "splinetrace/flowdata.hpp"
#include "splinetrace/parallel.hpp"
#include "binary_io.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <optional>
#include <string>

namespace splinetrace {

namespace {

const char* const kModule = "bspline";
constexpr int kMaxOrder = 16;
constexpr int kMaxDim = 4;

[[noreturn]] void fail(const std::string& message) { throw Error(kModule, message); }

/// Last index j with t_j < t_{j+1}.
std::size_t last_nonempty_span(std::span<const double> knots) {
    for (std::size_t j = knots.size() - 1; j-- > 0;)
        if (knots[j] < knots[j + 1]) return j;
    return 0;
}

double order1(std::size_t i, double u, std::span<const double> knots, std::size_t closing_span) {
    if (knots[i] <= u && u < knots[i + 1]) return 1.0;
    if (u == knots.back() && i == closing_span) return 1.0;
    return 0.0;
}

double cox_de_boor(std::size_t i, int k, double u, std::span<const double> knots, std::size_t closing_span) {
    if (k == 1) return order1(i, u, knots, closing_span);
    double value = 0.0;
    const double left_den = knots[i + k - 1] - knots[i];
    if (left_den > 0.0) value += (u - knots[i]) / left_den * cox_de_boor(i, k - 1, u, knots, closing_span);
    const double right_den = knots[i + k] - knots[i + 1];
    if (right_den > 0.0) value += (knots[i + k] - u) / right_den * cox_de_boor(i + 1, k - 1, u, knots, closing_span);
    return value;
}

void check_order(int k) {
    if (k < 1 || k > kMaxOrder) fail("order must be in [1, " + std::to_string(kMaxOrder) + "], got " + std::to_string(k));
}

}  // namespace

// --- SplineCurve ---

SplineCurve::SplineCurve(int order, int dim, std::vector<double> knots, std::vector<double> control_points,
                         ParamKind param_kind)
    : order_(order), dim_(dim), knots_(std::move(knots)), control_points_(std::move(control_points)),
      param_kind_(param_kind) {
    check_order(order_);
    if (dim_ != 3 && dim_ != 4) fail("curve dimension must be 3 or 4, got " + std::to_string(dim_));
    if (control_points_.size() % static_cast<std::size_t>(dim_) != 0)
        fail("control point array is not a multiple of the dimension");
    const std::size_t n = num_control_points();
    const auto k = static_cast<std::size_t>(order_);
    if (n < k) fail("need at least k=" + std::to_string(k) + " control points, got " + std::to_string(n));
    if (knots_.size() != n + k)
        fail("expected " + std::to_string(n + k) + " knots, got " + std::to_string(knots_.size()));
    for (double t : knots_)
        if (!std::isfinite(t)) fail("non-finite knot");
    for (double c : control_points_)
        if (!std::isfinite(c)) fail("non-finite control point");
    for (std::size_t i = 1; i < knots_.size(); ++i)
        if (knots_[i] < knots_[i - 1]) fail("knots must be non-decreasing (index " + std::to_string(i) + ")");
    const double a = knots_.front();
    const double b = knots_.back();
    if (!(a < b)) fail("knot vector spans an empty parameter range");
    if (a < 0.0 || b > 1.0) fail("knots must lie in [0,1]");
    for (std::size_t i = 0; i < k; ++i) {
        if (knots_[i] != a) fail("knot vector is not clamped at the start");
        if (knots_[n + i] != b) fail("knot vector is not clamped at the end");
    }
}

// --- basis and evaluation ---

double basis(std::size_t i, int k, double u, std::span<const double> knots) {
    check_order(k);
    if (knots.size() < static_cast<std::size_t>(k) + 1) fail("knot vector too short for order " + std::to_string(k));
    const std::size_t n = knots.size() - static_cast<std::size_t>(k);
    if (i >= n) fail("basis index " + std::to_string(i) + " out of range [0, " + std::to_string(n - 1) + "]");
    return cox_de_boor(i, k, u, knots, last_nonempty_span(knots));
}

std::size_t find_span(std::span<const double> knots, std::size_t n, int k, double u) {
    const auto first = static_cast<std::size_t>(k - 1);
    if (u >= knots[n]) {
        std::size_t s = n - 1;
        while (s > first && !(knots[s] < knots[s + 1])) --s;
        return s;
    }
    const auto it = std::upper_bound(knots.begin(), knots.end(), u);
    const auto idx = static_cast<std::size_t>(it - knots.begin());
    const std::size_t s = idx == 0 ? 0 : idx - 1;
    return std::clamp(s, first, n - 1);
}

void nonzero_basis(std::size_t span, double u, int k, std::span<const double> knots, std::span<double> out) {
    std::array<double, kMaxOrder> left{};
    std::array<double, kMaxOrder> right{};
    out[0] = 1.0;
    for (int j = 1; j < k; ++j) {
        left[j] = u - knots[span + 1 - j];
        right[j] = knots[span + j] - u;
        double saved = 0.0;
        for (int r = 0; r < j; ++r) {
            const double den = right[r + 1] + left[j - r];
            const double temp = den != 0.0 ? out[r] / den : 0.0;
            out[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        out[j] = saved;
    }
}

namespace {

/// Span lookup for non-decreasing parameter sweeps: walks forward from the
/// previous span instead of searching, so a sweep costs O(m + n).
class SpanCursor {
public:
    SpanCursor(std::span<const double> knots, std::size_t n, int k)
        : knots_(knots), n_(n), k_(k), span_(static_cast<std::size_t>(k - 1)) {}

    std::size_t operator()(double u) {
        if (u < knots_[span_] || u >= knots_[n_]) {
            span_ = find_span(knots_, n_, k_, u);
            return span_;
        }
        while (span_ + 1 < n_ && knots_[span_ + 1] <= u) ++span_;
        return span_;
    }

private:
    std::span<const double> knots_;
    std::size_t n_;
    int k_;
    std::size_t span_;
};

void de_boor(const SplineCurve& curve, std::size_t s, double u, std::span<double> out) {
    const int k = curve.order();
    const int dim = curve.dim();
    const auto knots = curve.knots();
    const int p = k - 1;

    // de Boor triangle over the k active control points.
    std::array<std::array<double, kMaxDim>, kMaxOrder> d{};
    for (int j = 0; j <= p; ++j) {
        const auto cp = curve.control_point(s - static_cast<std::size_t>(p) + static_cast<std::size_t>(j));
        for (int c = 0; c < dim; ++c) d[j][c] = cp[c];
    }
    for (int r = 1; r <= p; ++r) {
        for (int j = p; j >= r; --j) {
            const double lo = knots[static_cast<std::size_t>(j) + s - static_cast<std::size_t>(p)];
            const double hi = knots[static_cast<std::size_t>(j + 1 - r) + s];
            const double alpha = hi > lo ? (u - lo) / (hi - lo) : 0.0;
            for (int c = 0; c < dim; ++c) d[j][c] = (1.0 - alpha) * d[j - 1][c] + alpha * d[j][c];
        }
    }
    for (int c = 0; c < dim; ++c) out[c] = d[p][c];
}

}  // namespace

void evaluate_into(const SplineCurve& curve, double u, std::span<double> out) {
    if (!(u >= curve.domain_begin() && u <= curve.domain_end()))
        fail("parameter " + std::to_string(u) + " outside the curve domain [" + std::to_string(curve.domain_begin()) +
             ", " + std::to_string(curve.domain_end()) + "]");
    de_boor(curve, find_span(curve.knots(), curve.num_control_points(), curve.order(), u), u, out);
}

std::vector<double> evaluate(const SplineCurve& curve, double u) {
    std::vector<double> out(static_cast<std::size_t>(curve.dim()));
    evaluate_into(curve, u, out);
    return out;
}

Vec3 evaluate3(const SplineCurve& curve, double u) {
    std::array<double, kMaxDim> out{};
    evaluate_into(curve, u, std::span<double>(out.data(), static_cast<std::size_t>(curve.dim())));
    return {out[0], out[1], out[2]};
}

// --- parameterization ---

namespace {

std::vector<double> normalized_times(std::size_t m, std::span<const double> time_of_step) {
    std::vector<double> u(m);
    if (time_of_step.empty()) {
        for (std::size_t j = 0; j < m; ++j) u[j] = static_cast<double>(j) / static_cast<double>(m - 1);
    } else {
        if (time_of_step.size() != m) fail("time_of_step has " + std::to_string(time_of_step.size()) +
                                           " entries for a pathline of " + std::to_string(m) + " points");
        const double t0 = time_of_step.front();
        const double span = time_of_step.back() - t0;
        for (std::size_t j = 0; j < m; ++j) u[j] = (time_of_step[j] - t0) / span;
    }
    u.front() = 0.0;
    u.back() = 1.0;
    return u;
}

/// Time column scaled so the time span matches the largest spatial extent.
std::vector<double> scaled_time(std::span<const Vec3> pathline, std::span<const double> time_of_step) {
    Box3 box;
    for (const Vec3& p : pathline) box.expand(p);
    const double extent = box.max_extent();
    std::vector<double> t = normalized_times(pathline.size(), time_of_step);
    for (double& v : t) v *= extent;
    return t;
}

}  // namespace

Parameterization parameterize(std::span<const Vec3> pathline, std::span<const double> time_of_step, ParamKind kind) {
    const std::size_t m = pathline.size();
    if (m < 2) fail("parameterization needs at least two points, got " + std::to_string(m));
    Parameterization result;
    result.params = normalized_times(m, time_of_step);
    if (kind == ParamKind::Time) return result;

    const std::vector<double> ts = scaled_time(pathline, time_of_step);
    std::vector<double> cumulative(m, 0.0);
    for (std::size_t j = 1; j < m; ++j) {
        const Vec3 d = pathline[j] - pathline[j - 1];
        const double dt = ts[j] - ts[j - 1];
        cumulative[j] = cumulative[j - 1] + std::sqrt(squared_norm(d) + dt * dt);
    }
    const double total = cumulative.back();
    if (!(total > 0.0)) {
        result.fell_back_to_time = true;
        return result;
    }
    for (std::size_t j = 0; j < m; ++j) result.params[j] = cumulative[j] / total;
    result.params.front() = 0.0;
    result.params.back() = 1.0;
    return result;
}

std::vector<double> fitting_rows(std::span<const Vec3> pathline, std::span<const double> time_of_step, ParamKind kind) {
    const std::size_t dim = kind == ParamKind::Time ? 3 : 4;
    std::vector<double> rows(pathline.size() * dim);
    std::vector<double> ts;
    if (kind == ParamKind::ChordLength4D) ts = scaled_time(pathline, time_of_step);
    for (std::size_t j = 0; j < pathline.size(); ++j) {
        for (int a = 0; a < 3; ++a) rows[j * dim + static_cast<std::size_t>(a)] = pathline[j][a];
        if (dim == 4) rows[j * dim + 3] = ts[j];
    }
    return rows;
}

// --- knot placement ---

FeatureSamples knot_feature(std::span<const double> rows, int dim, std::span<const double> params, int k) {
    check_order(k);
    const std::size_t m = params.size();
    const auto kk = static_cast<std::size_t>(k);
    const auto d = static_cast<std::size_t>(dim);
    FeatureSamples out;
    if (m <= kk) return out;
    double factorial = 1.0;
    for (int i = 2; i <= k; ++i) factorial *= i;

    std::vector<double> table((kk + 1) * d);
    out.location.resize(m - kk);
    out.value.resize(m - kk);
    for (std::size_t j = 0; j + kk < m; ++j) {
        for (std::size_t l = 0; l <= kk; ++l)
            for (std::size_t c = 0; c < d; ++c) table[l * d + c] = rows[(j + l) * d + c];
        for (std::size_t r = 1; r <= kk; ++r) {
            for (std::size_t l = 0; l + r <= kk; ++l) {
                const double den = params[j + l + r] - params[j + l];
                for (std::size_t c = 0; c < d; ++c) {
                    const double diff = table[(l + 1) * d + c] - table[l * d + c];
                    table[l * d + c] = den > 0.0 ? diff / den : 0.0;
                }
            }
        }
        double sq = 0.0;
        for (std::size_t c = 0; c < d; ++c) sq += table[c] * table[c];
        out.location[j] = 0.5 * (params[j] + params[j + kk]);
        out.value[j] = std::pow(factorial * std::sqrt(sq), 1.0 / static_cast<double>(k));
    }
    return out;
}

bool schoenberg_whitney_ok(std::span<const double> knots, std::span<const double> params, int k) {
    const auto kk = static_cast<std::size_t>(k);
    if (knots.size() <= kk) return false;
    const std::size_t n = knots.size() - kk;
    const std::size_t m = params.size();
    if (m < n) return false;
    std::size_t l = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double lo = knots[i];
        const double hi = knots[i + kk];
        if (!(hi > lo)) return false;
        // Basis i is non-zero at its left end only when i == 0 and at its
        // right end only when i == n-1 (clamped ends, right-closed last span).
        while (l < m && !(params[l] > lo || (i == 0 && params[l] >= lo))) ++l;
        if (l == m) return false;
        if (!(params[l] < hi || (i == n - 1 && params[l] <= hi))) return false;
        ++l;
    }
    return true;
}

namespace {

std::vector<double> clamped_with_interior(std::span<const double> interior, std::size_t k) {
    std::vector<double> knots(k, 0.0);
    knots.insert(knots.end(), interior.begin(), interior.end());
    knots.insert(knots.end(), k, 1.0);
    return knots;
}

/// Classic data-averaged interior knots; always Schoenberg-Whitney feasible for m >= n.
std::vector<double> averaged_interior(std::span<const double> params, std::size_t n, std::size_t k) {
    const std::size_t m = params.size();
    const std::size_t count = n - k;
    std::vector<double> interior(count);
    const double d = static_cast<double>(m) / static_cast<double>(n - k + 1);
    for (std::size_t j = 1; j <= count; ++j) {
        const double jd = static_cast<double>(j) * d;
        const auto i = static_cast<std::size_t>(jd);
        const double alpha = jd - static_cast<double>(i);
        interior[j - 1] = (1.0 - alpha) * params[i - 1] + alpha * params[std::min(i, m - 1)];
    }
    return interior;
}

std::size_t first_param_above(std::span<const double> params, double t) {
    return static_cast<std::size_t>(std::upper_bound(params.begin(), params.end(), t) - params.begin());
}

/// Moves interior knots to data midpoints until every basis function owns a
/// distinct data parameter. Returns the number of knot moves.
std::size_t enforce_schoenberg_whitney(std::vector<double>& knots, std::span<const double> params, std::size_t n,
                                       std::size_t k) {
    const std::size_t m = params.size();
    std::size_t moves = 0;
    const auto mid = [&](std::size_t i) { return 0.5 * (params[i] + params[i + 1]); };

    // Necessary counting bounds: j-k+1 parameters below t_j, n-j above it.
    for (std::size_t j = k; j < n; ++j) {
        const double lo = mid(j - k);
        const double hi = mid(m - n + j - 1);
        const double clamped = std::clamp(knots[j], lo, hi);
        if (clamped != knots[j]) {
            knots[j] = clamped;
            ++moves;
        }
    }
    const auto restore_increasing = [&](std::size_t from) {
        for (std::size_t j = from; j < n; ++j) {
            if (knots[j] > knots[j - 1]) continue;
            const std::size_t p = first_param_above(params, knots[j - 1]);
            if (p + 1 >= m) return;
            knots[j] = mid(p);
            ++moves;
        }
    };
    restore_increasing(k + 1);

    std::size_t l = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double lo = knots[i];
        while (l < m && !(params[l] > lo || (i == 0 && params[l] >= lo))) ++l;
        if (l == m) break;
        const std::size_t right = i + k;
        const bool inside = params[l] < knots[right] || (i == n - 1 && params[l] <= knots[right]);
        if (!inside && right >= k && right < n && l + 1 < m) {
            knots[right] = mid(l);
            ++moves;
            restore_increasing(right + 1);
        }
        ++l;
    }
    return moves;
}

}  // namespace

KnotPlacement place_knots(std::span<const double> rows, int dim, std::span<const double> params,
                          const KnotPlacementConfig& config, int k) {
    check_order(k);
    const std::size_t n = config.num_control_points;
    const auto kk = static_cast<std::size_t>(k);
    const std::size_t m = params.size();
    if (n < kk) fail("num_control_points (" + std::to_string(n) + ") must be at least the order " + std::to_string(k));
    if (m < n) fail("insufficient data points: " + std::to_string(m) + " points for " + std::to_string(n) + " control points");
    if (rows.size() != m * static_cast<std::size_t>(dim)) fail("data rows do not match the parameter count");

    KnotPlacement result;
    const std::size_t count = n - kk;
    if (count == 0) {
        result.knots = clamped_with_interior({}, kk);
        return result;
    }

    std::vector<double> interior(count);
    const FeatureSamples feature = knot_feature(rows, dim, params, k);

    // A feature this small relative to the data is round-off: the data is a
    // polynomial of degree < k.
    double scale = 0.0;
    for (double v : rows) scale = std::max(scale, std::abs(v));
    const double h = 1.0 / static_cast<double>(m - 1);
    double max_raw = 0.0;
    for (double f : feature.value) max_raw = std::max(max_raw, std::pow(f, static_cast<double>(k)));
    const bool degenerate = feature.value.empty() || scale == 0.0 || max_raw * std::pow(h, k) <= 1e-10 * scale;

    if (degenerate) {
        result.uniform_fallback = true;
        for (std::size_t j = 1; j <= count; ++j) interior[j - 1] = static_cast<double>(j) / static_cast<double>(count + 1);
    } else {
        const std::size_t samples = feature.value.size();
        const std::size_t w = config.feature_smoothing_width;
        std::vector<double> smooth(samples);
        for (std::size_t j = 0; j < samples; ++j) {
            const std::size_t a = j >= w ? j - w : 0;
            const std::size_t b = std::min(samples - 1, j + w);
            double sum = 0.0;
            for (std::size_t i = a; i <= b; ++i) sum += feature.value[i];
            smooth[j] = sum / static_cast<double>(b - a + 1);
        }
        const double floor = 1e-12 * *std::max_element(smooth.begin(), smooth.end());
        for (double& v : smooth) v += floor;

        std::vector<double> xs{0.0};
        std::vector<double> fs{smooth.front()};
        for (std::size_t j = 0; j < samples; ++j) {
            xs.push_back(feature.location[j]);
            fs.push_back(smooth[j]);
        }
        xs.push_back(1.0);
        fs.push_back(smooth.back());
        std::vector<double> cumulative(xs.size(), 0.0);
        for (std::size_t j = 1; j < xs.size(); ++j)
            cumulative[j] = cumulative[j - 1] + 0.5 * (fs[j] + fs[j - 1]) * (xs[j] - xs[j - 1]);
        const double total = cumulative.back();

        std::size_t seg = 0;
        for (std::size_t j = 1; j <= count; ++j) {
            const double q = total * static_cast<double>(j) / static_cast<double>(count + 1);
            while (seg + 2 < cumulative.size() && cumulative[seg + 1] < q) ++seg;
            const double span = cumulative[seg + 1] - cumulative[seg];
            const double frac = span > 0.0 ? (q - cumulative[seg]) / span : 0.0;
            interior[j - 1] = xs[seg] + frac * (xs[seg + 1] - xs[seg]);
        }
    }

    result.knots = clamped_with_interior(interior, kk);
    result.nudged_knots = enforce_schoenberg_whitney(result.knots, params, n, kk);
    if (!schoenberg_whitney_ok(result.knots, params, k)) {
        result.averaged_fallback = true;
        result.knots = clamped_with_interior(averaged_interior(params, n, kk), kk);
        if (!schoenberg_whitney_ok(result.knots, params, k))
            fail("no Schoenberg-Whitney feasible knot vector for " + std::to_string(m) + " parameters and " +
                 std::to_string(n) + " control points (repeated parameters?)");
    }
    return result;
}

// --- fitting ---

SplineCurve fit_with_knots(std::span<const double> rows, int dim, std::span<const double> params,
                           std::vector<double> knots, int k, ParamKind kind) {
    check_order(k);
    const auto kk = static_cast<std::size_t>(k);
    const auto d = static_cast<std::size_t>(dim);
    if (knots.size() <= kk) fail("knot vector too short");
    const std::size_t n = knots.size() - kk;
    const std::size_t m = params.size();
    if (m < n) fail("insufficient data points: " + std::to_string(m) + " points for " + std::to_string(n) + " control points");
    if (rows.size() != m * d) fail("data rows do not match the parameter count");

    // Upper-triangular band R (row i holds columns i..i+k-1) and rotated rhs.
    std::vector<double> band(n * kk, 0.0);
    std::vector<double> rhs(n * d, 0.0);
    std::array<double, kMaxOrder> h{};
    std::array<double, kMaxDim> y{};
    SpanCursor cursor(knots, n, k);
    for (std::size_t j = 0; j < m; ++j) {
        const double u = params[j];
        if (u < knots.front() || u > knots.back()) fail("parameter outside the knot range");
        const std::size_t s = cursor(u);
        nonzero_basis(s, u, k, knots, std::span<double>(h.data(), kk));
        for (std::size_t c = 0; c < d; ++c) y[c] = rows[j * d + c];
        const std::size_t c0 = s + 1 - kk;
        for (std::size_t i = 0; i < kk; ++i) {
            const double piv = h[i];
            if (piv == 0.0) continue;
            const std::size_t col = c0 + i;
            double* r = band.data() + col * kk;
            const double ww = std::hypot(r[0], piv);
            const double cs = r[0] / ww;
            const double sn = piv / ww;
            r[0] = ww;
            for (std::size_t c = 0; c < d; ++c) {
                const double z = rhs[col * d + c];
                rhs[col * d + c] = cs * z + sn * y[c];
                y[c] = cs * y[c] - sn * z;
            }
            for (std::size_t l = i + 1; l < kk; ++l) {
                const double a = r[l - i];
                r[l - i] = cs * a + sn * h[l];
                h[l] = cs * h[l] - sn * a;
            }
        }
    }

    double max_diag = 0.0;
    for (std::size_t i = 0; i < n; ++i) max_diag = std::max(max_diag, std::abs(band[i * kk]));
    for (std::size_t i = 0; i < n; ++i) {
        if (!(std::abs(band[i * kk]) > 1e-12 * max_diag))
            fail("rank-deficient collocation matrix: control point " + std::to_string(i) +
                 " has no supporting data (Schoenberg-Whitney violated)");
    }

    std::vector<double> control(n * d, 0.0);
    for (std::size_t i = n; i-- > 0;) {
        for (std::size_t c = 0; c < d; ++c) {
            double acc = rhs[i * d + c];
            for (std::size_t l = 1; l < kk && i + l < n; ++l) acc -= band[i * kk + l] * control[(i + l) * d + c];
            control[i * d + c] = acc / band[i * kk];
        }
    }
    return SplineCurve(k, dim, std::move(knots), std::move(control), kind);
}

double spatial_rmse(const SplineCurve& curve, std::span<const Vec3> pathline, std::span<const double> params) {
    if (pathline.size() != params.size()) fail("pathline and parameter counts differ");
    SpanCursor cursor(curve.knots(), curve.num_control_points(), curve.order());
    std::array<double, kMaxDim> point{};
    const std::span<double> out(point.data(), static_cast<std::size_t>(curve.dim()));
    double sum = 0.0;
    for (std::size_t j = 0; j < pathline.size(); ++j) {
        const double u = params[j];
        if (!(u >= curve.domain_begin() && u <= curve.domain_end())) fail("parameter outside the curve domain");
        de_boor(curve, cursor(u), u, out);
        sum += squared_norm(pathline[j] - Vec3{point[0], point[1], point[2]});
    }
    return std::sqrt(sum / static_cast<double>(pathline.size()));
}

CurveFit fit_curve(std::span<const Vec3> pathline, std::span<const double> time_of_step, int k,
                   const KnotPlacementConfig& config, ParamKind kind) {
    Parameterization param = parameterize(pathline, time_of_step, kind);
    const int dim = kind == ParamKind::Time ? 3 : 4;
    const std::vector<double> rows = fitting_rows(pathline, time_of_step, kind);
    KnotPlacement placement = place_knots(rows, dim, param.params, config, k);
    SplineCurve curve = fit_with_knots(rows, dim, param.params, placement.knots, k, kind);
    const double rmse = spatial_rmse(curve, pathline, param.params);
    return {std::move(curve), std::move(param.params), rmse, std::move(placement), param.fell_back_to_time};
}

// --- SplineSet ---

double SplineSet::normalized_time(double step) const {
    const std::size_t m = time_of_step.size();
    if (m < 2) fail("spline set does not know the step count of its source data");
    const double last = static_cast<double>(m - 1);
    if (!(step >= 0.0 && step <= last)) fail("step " + std::to_string(step) + " outside [0, " + std::to_string(last) + "]");
    if (step == last) return 1.0;
    const auto lo = static_cast<std::size_t>(std::floor(step));
    const double frac = step - static_cast<double>(lo);
    const double t = time_of_step[lo] + frac * (time_of_step[std::min(lo + 1, m - 1)] - time_of_step[lo]);
    return (t - time_of_step.front()) / (time_of_step.back() - time_of_step.front());
}

SplineSet SplineSet::subset(std::span<const std::size_t> ids) const {
    SplineSet out;
    out.order = order;
    out.dim = dim;
    out.param_kind = param_kind;
    out.time_of_step = time_of_step;
    out.fit_seconds = fit_seconds;
    for (std::size_t id : ids) {
        if (id >= curves.size()) fail("subset id " + std::to_string(id) + " out of range");
        out.curves.push_back(curves[id]);
        if (id < residual_rmse.size()) out.residual_rmse.push_back(residual_rmse[id]);
    }
    return out;
}

SplineSet fit_all(const PathlineSet& set, int k, const KnotPlacementConfig& config, ParamKind kind) {
    const auto start = std::chrono::steady_clock::now();
    const std::size_t count = set.num_pathlines();
    std::vector<std::optional<CurveFit>> fits(count);
    std::vector<std::optional<std::string>> errors(count);
    parallel_for(count, [&](std::size_t i) {
        try {
            fits[i] = fit_curve(set.pathline(i), set.time_of_step(), k, config, kind);
        } catch (const Error& e) {
            errors[i] = e.what();
        }
    });
    for (std::size_t i = 0; i < count; ++i)
        if (errors[i]) fail("pathline " + std::to_string(i) + ": " + *errors[i]);

    SplineSet out;
    out.order = k;
    out.dim = kind == ParamKind::Time ? 3 : 4;
    out.param_kind = kind;
    out.time_of_step.assign(set.time_of_step().begin(), set.time_of_step().end());
    out.curves.reserve(count);
    out.residual_rmse.reserve(count);
    for (auto& f : fits) {
        out.residual_rmse.push_back(f->rmse);
        out.curves.push_back(std::move(f->curve));
    }
    out.fit_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
}

// --- SPL1 ---

void write_splines(const SplineSet& set, const std::filesystem::path& path) {
    using namespace detail;
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) fail("cannot open '" + path.string() + "' for writing");
    os.write("SPL1", 4);
    put_u32(os, 1);
    put_u32(os, static_cast<std::uint32_t>(set.curves.size()));
    put_u32(os, static_cast<std::uint32_t>(set.order));
    put_u32(os, static_cast<std::uint32_t>(set.dim));
    for (const SplineCurve& c : set.curves) {
        if (c.order() != set.order || c.dim() != set.dim) fail("curve order/dimension differs from the set");
        put_u32(os, static_cast<std::uint32_t>(c.num_control_points()));
        for (double t : c.knots()) put_f64(os, t);
        for (double v : c.control_points()) put_f64(os, v);
    }
    if (!os) fail("write to '" + path.string() + "' failed");
}

SplineSet read_splines(const std::filesystem::path& path, std::size_t num_timesteps) {
    using namespace detail;
    std::ifstream is(path, std::ios::binary);
    if (!is) fail("cannot open '" + path.string() + "'");
    char magic[4];
    if (!is.read(magic, 4) || std::string(magic, 4) != "SPL1") fail("not an SPL1 file (bad magic)");
    const std::uint32_t version = get_u32(is, kModule);
    if (version != 1) fail("unsupported SPL1 version " + std::to_string(version));
    SplineSet set;
    const std::uint32_t count = get_u32(is, kModule);
    set.order = static_cast<int>(get_u32(is, kModule));
    set.dim = static_cast<int>(get_u32(is, kModule));
    check_order(set.order);
    if (set.dim != 3 && set.dim != 4) fail("SPL1 dimension must be 3 or 4");
    set.param_kind = set.dim == 3 ? ParamKind::Time : ParamKind::ChordLength4D;
    const auto kk = static_cast<std::size_t>(set.order);
    const auto d = static_cast<std::size_t>(set.dim);
    set.curves.reserve(count);
    for (std::uint32_t c = 0; c < count; ++c) {
        const std::size_t n = get_u32(is, kModule);
        if (n > (std::size_t{1} << 26)) fail("implausible control point count in curve " + std::to_string(c));
        std::vector<double> knots(n + kk);
        for (double& t : knots) t = get_f64(is, kModule);
        std::vector<double> cps(n * d);
        for (double& v : cps) v = get_f64(is, kModule);
        try {
            set.curves.emplace_back(set.order, set.dim, std::move(knots), std::move(cps), set.param_kind);
        } catch (const Error& e) {
            fail("curve " + std::to_string(c) + ": " + e.what());
        }
    }
    if (num_timesteps >= 2) {
        set.time_of_step.resize(num_timesteps);
        std::iota(set.time_of_step.begin(), set.time_of_step.end(), 0.0);
    }
    return set;
}

}  // namespace splinetrace
