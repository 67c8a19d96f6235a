#include "splinetrace/tracer_spline.hpp"

#include "splinetrace/error.hpp"
#include "splinetrace/neighbors.hpp"
#include "splinetrace/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

namespace splinetrace {

namespace {

const char* const kModule = "tracer_spline";
constexpr double kKnotEpsilon = 1e-9;

[[noreturn]] void fail(const std::string& message) { throw Error(kModule, message); }

std::size_t half_down(const SplineCurve& c) { return static_cast<std::size_t>(c.order() / 2); }

/// One reconstructed (knot, control point) pair.
struct Pair {
    double knot;
    Vec3 point;
};

struct SeedState {
    Pair seed{};
    Pair current{};
    bool active = false;
    std::vector<Pair> forward;
    std::vector<Pair> backward;
    std::size_t repairs = 0;
    std::vector<Neighbor> scratch;
};

/// Frontier of every curve after `r` iterations in one direction.
std::vector<std::size_t> frontier(const SplineSet& set, const std::vector<std::size_t>& start, std::size_t r,
                                  bool forward) {
    std::vector<std::size_t> d(start.size());
    for (std::size_t i = 0; i < start.size(); ++i) {
        const SplineCurve& c = set.curves[i];
        d[i] = forward ? std::min(start[i] + r, anchor_upper(c))
                       : (start[i] >= anchor_lower(c) + r ? start[i] - r : anchor_lower(c));
    }
    return d;
}

void sweep(const SplineSet& set, const std::vector<std::size_t>& start, std::vector<SeedState>& states,
           const std::vector<std::size_t>& members, bool forward, const TraceOptions& options, double snap) {
    for (std::size_t s : members) {
        states[s].active = true;
        states[s].current = states[s].seed;
    }
    const std::size_t count = set.size();
    std::vector<Vec3> control(count);
    for (std::size_t r = 0;; ++r) {
        const bool any = std::any_of(members.begin(), members.end(), [&](std::size_t s) { return states[s].active; });
        if (!any) break;
        const std::vector<std::size_t> d = frontier(set, start, r, forward);
        for (std::size_t i = 0; i < count; ++i) control[i] = set.curves[i].control_point3(d[i] - half_down(set.curves[i]));
        const NeighborIndex index(control);

        parallel_for(members.size(), [&](std::size_t a) {
            SeedState& st = states[members[a]];
            if (!st.active) return;
            index.knn(st.current.point, options.neighbors, st.scratch);
            const auto movable = [&](std::size_t i) {
                const SplineCurve& c = set.curves[i];
                return forward ? d[i] < anchor_upper(c) : d[i] > anchor_lower(c);
            };
            if (std::none_of(st.scratch.begin(), st.scratch.end(), [&](const Neighbor& nb) { return movable(nb.owner); })) {
                st.active = false;
                return;
            }
            const NeighborWeights w = idw_weights(st.scratch, options.power, snap);
            double dt = 0.0;
            Vec3 at_next;
            Vec3 at_cur;
            for (std::size_t j = 0; j < w.owners.size(); ++j) {
                const std::size_t i = w.owners[j];
                const SplineCurve& c = set.curves[i];
                const std::size_t di = d[i];
                const std::size_t h = half_down(c);
                const Vec3 p_cur = c.control_point3(di - h);
                at_cur += w.weights[j] * p_cur;
                if (movable(i)) {
                    const std::size_t dn = forward ? di + 1 : di - 1;
                    dt += w.weights[j] * (c.knot(dn) - c.knot(di));
                    at_next += w.weights[j] * c.control_point3(dn - h);
                } else {
                    // Frozen at the end of its range: zero displacement.
                    at_next += w.weights[j] * p_cur;
                }
            }
            Pair next{st.current.knot + dt, at_next + (st.current.point - at_cur)};
            if (forward ? next.knot < st.current.knot : next.knot > st.current.knot) {
                next.knot = forward ? st.current.knot + kKnotEpsilon : st.current.knot - kKnotEpsilon;
                ++st.repairs;
            }
            // Round-off can push a knot that is exactly on the clamped end just
            // past it; only a real overshoot ends the sweep.
            bool done = false;
            if (forward && next.knot > 1.0) {
                done = next.knot > 1.0 + kKnotEpsilon;
                next.knot = 1.0;
            } else if (!forward && next.knot < 0.0) {
                done = next.knot < -kKnotEpsilon;
                next.knot = 0.0;
            }
            (forward ? st.forward : st.backward).push_back(next);
            st.current = next;
            if (done) st.active = false;
        });
    }
}

TracedSpline assemble(const SplineSet& set, const TraceSeed& seed, double u, SeedState& st) {
    const int k = set.order;
    const auto kk = static_cast<std::size_t>(k);
    const std::size_t h = kk / 2;
    const bool fwd = seed.direction != TraceDirection::Backward;
    const bool bwd = seed.direction != TraceDirection::Forward;

    std::vector<Pair> pairs(st.backward.rbegin(), st.backward.rend());
    pairs.push_back(st.seed);
    pairs.insert(pairs.end(), st.forward.begin(), st.forward.end());

    const std::size_t iterations = pairs.size();
    std::size_t trimmed = 0;

    const double lo = bwd ? 0.0 : pairs.front().knot;
    const double hi = fwd ? 1.0 : pairs.back().knot;
    for (Pair& p : pairs) p.knot = std::clamp(p.knot, lo, hi);

    // Keep end multiplicity at exactly k: the pair that would land on full
    // knot position k (or n-1) must be strictly inside (lo, hi).
    while (pairs.size() > kk && pairs[kk - h].knot <= lo) {
        pairs.erase(pairs.begin() + static_cast<std::ptrdiff_t>(kk - h));
        ++trimmed;
    }
    while (pairs.size() > kk && pairs[pairs.size() - 1 - h].knot >= hi) {
        pairs.erase(pairs.end() - 1 - static_cast<std::ptrdiff_t>(h));
        ++trimmed;
    }
    const std::size_t n = pairs.size();
    if (n < kk || !(hi > lo))
        fail("traced range too short for an order-" + std::to_string(k) + " curve (" + std::to_string(n) + " pairs)");

    std::vector<double> knots(h, lo);
    std::vector<double> pair_knots;
    std::vector<double> control;
    control.reserve(3 * n);
    for (const Pair& p : pairs) {
        knots.push_back(p.knot);
        pair_knots.push_back(p.knot);
        control.insert(control.end(), {p.point.x, p.point.y, p.point.z});
    }
    knots.resize(n + kk, hi);
    for (std::size_t i = 0; i < kk; ++i) {
        knots[i] = lo;
        knots[n + i] = hi;
    }
    return {SplineCurve(k, 3, std::move(knots), std::move(control), ParamKind::Time),
            std::move(pair_knots), seed, u, iterations, st.repairs, trimmed};
}

}  // namespace

std::size_t anchor_lower(const SplineCurve& curve) { return half_down(curve); }

std::size_t anchor_upper(const SplineCurve& curve) {
    const auto k = static_cast<std::size_t>(curve.order());
    return curve.num_control_points() + k - 1 - (k + 1) / 2;
}

std::size_t anchor_index(const SplineCurve& curve, double u) {
    const std::size_t lo = anchor_lower(curve);
    const std::size_t hi = anchor_upper(curve);
    if (u <= curve.domain_begin()) return lo;
    if (u >= curve.domain_end()) return hi;
    const auto knots = curve.knots();
    const auto it = std::lower_bound(knots.begin() + static_cast<std::ptrdiff_t>(lo),
                                     knots.begin() + static_cast<std::ptrdiff_t>(hi) + 1, u);
    return std::min(static_cast<std::size_t>(it - knots.begin()), hi);
}

std::vector<TracedSpline> trace_splines(const SplineSet& set, std::span<const TraceSeed> seeds,
                                        const TraceOptions& options) {
    if (set.curves.empty()) fail("cannot trace in an empty spline set");
    if (options.neighbors < 1) fail("neighbor count must be at least 1");
    for (const SplineCurve& c : set.curves) {
        if (c.dim() != 3 || c.param_kind() != ParamKind::Time)
            fail("control-point tracing needs 3D time-parameterized curves");
        if (c.order() != set.order) fail("all curves must share the set's order");
    }
    Box3 box;
    for (const SplineCurve& c : set.curves)
        for (std::size_t i = 0; i < c.num_control_points(); ++i) box.expand(c.control_point3(i));
    const double snap = snap_distance_for(box.diagonal());

    std::map<double, std::vector<std::size_t>> groups;
    for (std::size_t s = 0; s < seeds.size(); ++s) {
        if (!is_finite(seeds[s].rho)) fail("seed position is not finite");
        groups[seeds[s].tau].push_back(s);
    }

    std::vector<SeedState> states(seeds.size());
    std::vector<double> seed_u(seeds.size(), 0.0);
    const std::size_t count = set.size();
    for (const auto& [tau, members] : groups) {
        const double u = set.normalized_time(tau);
        std::vector<Vec3> on_curve(count);
        std::vector<std::size_t> anchors(count);
        parallel_for(count, [&](std::size_t i) {
            on_curve[i] = evaluate3(set.curves[i], u);
            anchors[i] = anchor_index(set.curves[i], u);
        });
        const NeighborIndex index(on_curve);

        // Seed pair: t_r = sum w t_{i,d_i}, P = sum w (P_{i,d_i-h} - C_i(u)) + rho.
        parallel_for(members.size(), [&](std::size_t a) {
            const std::size_t s = members[a];
            SeedState& st = states[s];
            seed_u[s] = u;
            index.knn(seeds[s].rho, options.neighbors, st.scratch);
            const NeighborWeights w = idw_weights(st.scratch, options.power, snap);
            double t = 0.0;
            Vec3 at_control;
            Vec3 at_curve;
            for (std::size_t j = 0; j < w.owners.size(); ++j) {
                const std::size_t i = w.owners[j];
                const SplineCurve& c = set.curves[i];
                t += w.weights[j] * c.knot(anchors[i]);
                at_control += w.weights[j] * c.control_point3(anchors[i] - half_down(c));
                at_curve += w.weights[j] * on_curve[i];
            }
            st.seed = {t, at_control + (seeds[s].rho - at_curve)};
        });

        std::vector<std::size_t> fwd;
        std::vector<std::size_t> bwd;
        for (std::size_t s : members) {
            if (seeds[s].direction != TraceDirection::Backward) fwd.push_back(s);
            if (seeds[s].direction != TraceDirection::Forward) bwd.push_back(s);
        }
        sweep(set, anchors, states, fwd, true, options, snap);
        sweep(set, anchors, states, bwd, false, options, snap);
    }

    std::vector<TracedSpline> out;
    out.reserve(seeds.size());
    for (std::size_t s = 0; s < seeds.size(); ++s) out.push_back(assemble(set, seeds[s], seed_u[s], states[s]));
    return out;
}

TracedSpline trace_spline(const SplineSet& set, const TraceSeed& seed, const TraceOptions& options) {
    return std::move(trace_splines(set, std::span<const TraceSeed>(&seed, 1), options).front());
}

std::vector<TracedSample> sample_traced(const TracedSpline& traced, std::span<const double> time_of_step,
                                        std::size_t num_samples) {
    const std::size_t m = time_of_step.size();
    if (m < 2) fail("sampling needs the step times of the source data");
    const double t0 = time_of_step.front();
    const double span = time_of_step.back() - t0;
    std::vector<double> u_of_step(m);
    for (std::size_t j = 0; j < m; ++j) u_of_step[j] = (time_of_step[j] - t0) / span;
    u_of_step.front() = 0.0;
    u_of_step.back() = 1.0;

    const double a = traced.curve.domain_begin();
    const double b = traced.curve.domain_end();
    std::vector<TracedSample> out;
    if (num_samples == 0) {
        for (std::size_t j = 0; j < m; ++j)
            if (u_of_step[j] >= a && u_of_step[j] <= b)
                out.push_back({static_cast<double>(j), evaluate3(traced.curve, u_of_step[j])});
        return out;
    }
    for (std::size_t i = 0; i < num_samples; ++i) {
        const double u = num_samples == 1 ? a
                                          : (i + 1 == num_samples ? b
                                                                  : a + (b - a) * static_cast<double>(i) /
                                                                            static_cast<double>(num_samples - 1));
        const auto it = std::upper_bound(u_of_step.begin(), u_of_step.end(), u);
        const std::size_t hi = std::min(static_cast<std::size_t>(it - u_of_step.begin()), m - 1);
        const std::size_t lo = hi == 0 ? 0 : hi - 1;
        const double width = u_of_step[hi] - u_of_step[lo];
        const double step = width > 0.0 ? static_cast<double>(lo) + (u - u_of_step[lo]) / width : static_cast<double>(lo);
        out.push_back({step, evaluate3(traced.curve, u)});
    }
    return out;
}

}  // namespace splinetrace
