#include "splinetrace/tracer_particle.hpp"

#include "splinetrace/error.hpp"
#include "splinetrace/neighbors.hpp"
#include "splinetrace/parallel.hpp"

#include <cmath>
#include <map>
#include <memory>
#include <string>

namespace splinetrace {

namespace {

const char* const kModule = "tracer_particle";

std::size_t seed_step(const PathlineSet& set, const TraceSeed& seed) {
    const double last = static_cast<double>(set.num_timesteps() - 1);
    if (!(seed.tau >= 0.0 && seed.tau <= last))
        throw Error(kModule, "seed step " + std::to_string(seed.tau) + " outside [0, " + std::to_string(last) + "]");
    if (seed.tau != std::floor(seed.tau))
        throw Error(kModule, "particle tracing needs an integer seed step, got " + std::to_string(seed.tau));
    if (!is_finite(seed.rho)) throw Error(kModule, "seed position is not finite");
    return static_cast<std::size_t>(seed.tau);
}

/// Step snapshots and their k-d trees, loaded on first use.
class StepCache {
public:
    explicit StepCache(const PathlineSet& set) : set_(set), entries_(set.num_timesteps()) {}

    const std::vector<Vec3>& positions(std::size_t step) { return entry(step).positions; }
    const NeighborIndex& index(std::size_t step) { return *entry(step).index; }

private:
    struct Entry {
        std::vector<Vec3> positions;
        std::unique_ptr<NeighborIndex> index;
    };

    Entry& entry(std::size_t step) {
        Entry& e = entries_[step];
        if (!e.index) {
            e.positions = set_.load_step(step);
            e.index = std::make_unique<NeighborIndex>(e.positions);
        }
        return e;
    }

    const PathlineSet& set_;
    std::vector<Entry> entries_;
};

/// One interpolation step written as sum_i w_i f_i(next) + (x - sum_i w_i f_i(cur)),
/// which is exact when a single neighbor carries all the weight and sits on x.
Vec3 advance(const Vec3& x, const NeighborWeights& w, const std::vector<Vec3>& cur, const std::vector<Vec3>& next) {
    Vec3 at_next;
    Vec3 at_cur;
    for (std::size_t i = 0; i < w.owners.size(); ++i) {
        at_next += w.weights[i] * next[w.owners[i]];
        at_cur += w.weights[i] * cur[w.owners[i]];
    }
    return at_next + (x - at_cur);
}

}  // namespace

std::vector<TracedPathline> trace_particles(const PathlineSet& set, std::span<const TraceSeed> seeds,
                                            const TraceOptions& options) {
    if (options.neighbors < 1) throw Error(kModule, "neighbor count must be at least 1");
    const std::size_t m = set.num_timesteps();
    const double snap = snap_distance_for(set.bounds().diagonal());

    std::vector<TracedPathline> out(seeds.size());
    std::vector<std::size_t> start(seeds.size());
    for (std::size_t s = 0; s < seeds.size(); ++s) {
        start[s] = seed_step(set, seeds[s]);
        const bool fwd = seeds[s].direction != TraceDirection::Backward;
        const bool bwd = seeds[s].direction != TraceDirection::Forward;
        out[s].seed = seeds[s];
        out[s].first_step = bwd ? 0 : start[s];
        const std::size_t last = fwd ? m - 1 : start[s];
        out[s].positions.resize(last - out[s].first_step + 1);
        out[s].at_step(start[s]) = seeds[s].rho;
    }

    StepCache cache(set);
    // Sweep forward through all steps; a seed joins at its own start step.
    std::vector<std::size_t> active;
    std::vector<std::vector<Neighbor>> scratch(seeds.size());
    for (std::size_t step = 0; step + 1 < m; ++step) {
        active.clear();
        for (std::size_t s = 0; s < seeds.size(); ++s)
            if (seeds[s].direction != TraceDirection::Backward && step >= start[s]) active.push_back(s);
        if (active.empty()) continue;
        const NeighborIndex& index = cache.index(step);
        const auto& cur = cache.positions(step);
        const auto& next = cache.positions(step + 1);
        parallel_for(active.size(), [&](std::size_t a) {
            const std::size_t s = active[a];
            TracedPathline& t = out[s];
            const Vec3 x = t.at_step(step);
            index.knn(x, options.neighbors, scratch[s]);
            const NeighborWeights w = idw_weights(scratch[s], options.power, snap);
            t.at_step(step + 1) = advance(x, w, cur, next);
            ++t.iterations;
        });
    }
    for (std::size_t step = m - 1; step > 0; --step) {
        active.clear();
        for (std::size_t s = 0; s < seeds.size(); ++s)
            if (seeds[s].direction != TraceDirection::Forward && step <= start[s]) active.push_back(s);
        if (active.empty()) continue;
        const NeighborIndex& index = cache.index(step);
        const auto& cur = cache.positions(step);
        const auto& prev = cache.positions(step - 1);
        parallel_for(active.size(), [&](std::size_t a) {
            const std::size_t s = active[a];
            TracedPathline& t = out[s];
            const Vec3 x = t.at_step(step);
            index.knn(x, options.neighbors, scratch[s]);
            const NeighborWeights w = idw_weights(scratch[s], options.power, snap);
            t.at_step(step - 1) = advance(x, w, cur, prev);
            ++t.iterations;
        });
    }
    return out;
}

TracedPathline trace_particle(const PathlineSet& set, const TraceSeed& seed, const TraceOptions& options) {
    return std::move(trace_particles(set, std::span<const TraceSeed>(&seed, 1), options).front());
}

}  // namespace splinetrace
