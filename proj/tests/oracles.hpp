#pragma once

// Reference implementations used only by tests. They favor the most literal
// formulation over speed and share no code with the library.

#include "splinetrace/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <random>
#include <utility>
#include <vector>

namespace oracle {

/// All order-k basis values at u from the full Cox-de Boor table, built
/// bottom-up from order 1. The order-1 indicator is half-open except on the
/// last non-empty interval, which also owns its right end.
inline std::vector<double> basis_all(const std::vector<double>& t, int k, double u) {
    const std::size_t count1 = t.size() - 1;
    std::size_t last = 0;
    for (std::size_t i = 0; i + 1 < t.size(); ++i)
        if (t[i] < t[i + 1]) last = i;
    std::vector<double> b(count1, 0.0);
    for (std::size_t i = 0; i < count1; ++i) {
        if (t[i] <= u && u < t[i + 1]) b[i] = 1.0;
        if (i == last && u == t[i + 1]) b[i] = 1.0;
    }
    for (int order = 2; order <= k; ++order) {
        std::vector<double> next(t.size() - static_cast<std::size_t>(order), 0.0);
        for (std::size_t i = 0; i < next.size(); ++i) {
            const double a = t[i + order - 1] - t[i];
            const double c = t[i + order] - t[i + 1];
            const double left = a == 0.0 ? 0.0 : (u - t[i]) / a * b[i];
            const double right = c == 0.0 ? 0.0 : (t[i + order] - u) / c * b[i + 1];
            next[i] = left + right;
        }
        b = std::move(next);
    }
    return b;
}

/// Sum over every control point, no locality.
inline std::vector<double> evaluate_naive(const std::vector<double>& t, int k, const std::vector<double>& control,
                                          int dim, double u) {
    const std::vector<double> b = basis_all(t, k, u);
    std::vector<double> out(static_cast<std::size_t>(dim), 0.0);
    for (std::size_t i = 0; i < b.size(); ++i)
        for (int c = 0; c < dim; ++c) out[c] += b[i] * control[i * static_cast<std::size_t>(dim) + c];
    return out;
}

/// Clamped knot vector with uniform interior knots.
inline std::vector<double> clamped_uniform(std::size_t n, int k) {
    std::vector<double> t(static_cast<std::size_t>(k), 0.0);
    const std::size_t interior = n - static_cast<std::size_t>(k);
    for (std::size_t j = 1; j <= interior; ++j) t.push_back(static_cast<double>(j) / static_cast<double>(interior + 1));
    t.insert(t.end(), static_cast<std::size_t>(k), 1.0);
    return t;
}

/// Clamped knot vector with random strictly increasing interior knots.
inline std::vector<double> clamped_random(std::size_t n, int k, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::vector<double> interior(n - static_cast<std::size_t>(k));
    for (double& v : interior) v = uni(rng);
    std::sort(interior.begin(), interior.end());
    std::vector<double> t(static_cast<std::size_t>(k), 0.0);
    t.insert(t.end(), interior.begin(), interior.end());
    t.insert(t.end(), static_cast<std::size_t>(k), 1.0);
    return t;
}

/// K nearest by full sort on (distance, owner).
inline std::vector<std::pair<std::size_t, double>> knn_sorted(const std::vector<splinetrace::Vec3>& points,
                                                              const splinetrace::Vec3& q, std::size_t K) {
    std::vector<std::pair<std::size_t, double>> all;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const double dx = points[i].x - q.x;
        const double dy = points[i].y - q.y;
        const double dz = points[i].z - q.z;
        all.emplace_back(i, std::sqrt(dx * dx + dy * dy + dz * dz));
    }
    std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second < b.second : a.first < b.first;
    });
    all.resize(std::min(K, all.size()));
    return all;
}

inline double max_abs_diff(const splinetrace::Vec3& a, const splinetrace::Vec3& b) {
    return std::max({std::abs(a.x - b.x), std::abs(a.y - b.y), std::abs(a.z - b.z)});
}

/// Pearson R^2 of y against x.
inline double r_squared(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0;
    double sxx = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    return sxy * sxy / (sxx * syy);
}

}  // namespace oracle
