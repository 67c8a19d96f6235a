#pragma once

#include "splinetrace/geometry.hpp"

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace splinetrace {

class PathlineSet;

enum class ParamKind { Time, ChordLength4D };

/// Clamped B-spline curve of order k (degree k-1) with n control points of
/// dimension 3 or 4 and n+k knots.
///
/// Fitted curves live on [0,1]. Partial traced curves may be clamped on a
/// sub-range [a,b] of [0,1]; the first k knots equal a and the last k equal b.
class SplineCurve {
public:
    SplineCurve(int order, int dim, std::vector<double> knots, std::vector<double> control_points,
                ParamKind param_kind = ParamKind::Time);

    int order() const { return order_; }
    int dim() const { return dim_; }
    ParamKind param_kind() const { return param_kind_; }
    std::size_t num_control_points() const { return control_points_.size() / static_cast<std::size_t>(dim_); }

    std::span<const double> knots() const { return knots_; }
    double knot(std::size_t i) const { return knots_[i]; }
    double domain_begin() const { return knots_.front(); }
    double domain_end() const { return knots_.back(); }

    /// Row-major n x dim.
    std::span<const double> control_points() const { return control_points_; }
    std::span<const double> control_point(std::size_t i) const {
        return {control_points_.data() + i * static_cast<std::size_t>(dim_), static_cast<std::size_t>(dim_)};
    }
    /// Spatial part (first three coordinates) of control point i.
    Vec3 control_point3(std::size_t i) const {
        const auto p = control_point(i);
        return {p[0], p[1], p[2]};
    }

    friend bool operator==(const SplineCurve&, const SplineCurve&) = default;

private:
    int order_;
    int dim_;
    std::vector<double> knots_;
    std::vector<double> control_points_;
    ParamKind param_kind_;
};

// --- basis and evaluation ---

/// B_{i,k}(u) by the Cox-de Boor recursion, 0/0 terms taken as 0. At the last
/// knot the final non-degenerate order-1 span is treated as closed, so the last
/// basis function equals 1 there. Throws when i >= knots.size() - k.
double basis(std::size_t i, int k, double u, std::span<const double> knots);

/// Knot span s in [k-1, n-1] with t_s <= u < t_{s+1}; u at the last knot maps
/// to the last non-empty span.
std::size_t find_span(std::span<const double> knots, std::size_t n, int k, double u);

/// The k basis values B_{s-k+1,k}(u) .. B_{s,k}(u) that can be non-zero on span s.
void nonzero_basis(std::size_t span, double u, int k, std::span<const double> knots, std::span<double> out);

/// C(u) by local de Boor evaluation. Throws outside the curve's domain.
std::vector<double> evaluate(const SplineCurve& curve, double u);
void evaluate_into(const SplineCurve& curve, double u, std::span<double> out);
/// Spatial part of C(u).
Vec3 evaluate3(const SplineCurve& curve, double u);

// --- parameterization ---

struct Parameterization {
    std::vector<double> params;
    /// ChordLength4D fell back to Time because the particle never moved.
    bool fell_back_to_time = false;
};

/// Time: normalized time_of_step. ChordLength4D: cumulative length of
/// (x, y, z, t_scaled) normalized to [0,1], where t_scaled maps the time span
/// onto the largest spatial extent of the pathline's bounding box.
Parameterization parameterize(std::span<const Vec3> pathline, std::span<const double> time_of_step, ParamKind kind);

/// Data rows fed to the fitter: xyz for Time, xyzt (scaled as above) for ChordLength4D.
std::vector<double> fitting_rows(std::span<const Vec3> pathline, std::span<const double> time_of_step, ParamKind kind);

// --- knot placement ---

struct KnotPlacementConfig {
    std::size_t num_control_points = 100;
    /// Half-width of the centered moving average applied to the feature function.
    std::size_t feature_smoothing_width = 2;
    enum class Fallback { Uniform } fallback = Fallback::Uniform;
};

struct KnotPlacement {
    std::vector<double> knots;
    /// The feature function vanished and uniform interior knots were used.
    bool uniform_fallback = false;
    /// Interior knots moved to restore Schoenberg-Whitney feasibility.
    std::size_t nudged_knots = 0;
    /// Nudging was not enough and data-averaged knots were used instead.
    bool averaged_fallback = false;
};

/// Clamped knot vector (n+k knots) with interior knots at equal increments of
/// the cumulative feature function. The feature is the k-th divided-difference
/// magnitude of the data raised to 1/k, smoothed, floored at 1e-12*max and
/// integrated with the trapezoid rule. `rows` is row-major with `dim` columns.
KnotPlacement place_knots(std::span<const double> rows, int dim, std::span<const double> params,
                          const KnotPlacementConfig& config, int k);

/// The feature samples used by place_knots, before smoothing: value f_j located
/// at the midpoint of [u_j, u_{j+k}]. Exposed for diagnostics and tests.
struct FeatureSamples {
    std::vector<double> location;
    std::vector<double> value;
};
FeatureSamples knot_feature(std::span<const double> rows, int dim, std::span<const double> params, int k);

/// True when the n basis functions can be matched to distinct increasing data
/// parameters inside their supports, i.e. the least-squares system has full rank.
bool schoenberg_whitney_ok(std::span<const double> knots, std::span<const double> params, int k);

// --- fitting ---

/// Least-squares control points for fixed knots, by Givens QR on the banded
/// collocation matrix. Throws when the system is rank deficient.
SplineCurve fit_with_knots(std::span<const double> rows, int dim, std::span<const double> params,
                           std::vector<double> knots, int k, ParamKind kind = ParamKind::Time);

struct CurveFit {
    SplineCurve curve;
    std::vector<double> params;
    /// Spatial RMSE of the curve at the fitting parameters.
    double rmse = 0.0;
    KnotPlacement placement;
    bool param_fell_back = false;
};

CurveFit fit_curve(std::span<const Vec3> pathline, std::span<const double> time_of_step, int k,
                   const KnotPlacementConfig& config, ParamKind kind);

/// Spatial RMSE of a curve against the data it was fitted to.
double spatial_rmse(const SplineCurve& curve, std::span<const Vec3> pathline, std::span<const double> params);

/// Every fitted trajectory of a pathline set plus the metadata tracing needs.
struct SplineSet {
    int order = 4;
    int dim = 3;
    ParamKind param_kind = ParamKind::Time;
    std::vector<SplineCurve> curves;
    /// Time of each output step of the source data; maps seed steps to u.
    std::vector<double> time_of_step;
    std::vector<double> residual_rmse;
    double fit_seconds = 0.0;

    std::size_t size() const { return curves.size(); }
    std::size_t num_timesteps() const { return time_of_step.size(); }
    /// (possibly fractional) step index -> u in [0,1].
    double normalized_time(double step) const;
    SplineSet subset(std::span<const std::size_t> ids) const;
};

/// fit_curve over every pathline, in parallel. All-or-nothing: the first
/// failing pathline (lowest id) aborts the whole fit.
SplineSet fit_all(const PathlineSet& set, int k, const KnotPlacementConfig& config, ParamKind kind);

/// SPL1 binary layout, little-endian.
void write_splines(const SplineSet& set, const std::filesystem::path& path);
/// time_of_step is not part of SPL1; pass the source step count (identity
/// times) or 0 to leave it empty.
SplineSet read_splines(const std::filesystem::path& path, std::size_t num_timesteps);

}  // namespace splinetrace
