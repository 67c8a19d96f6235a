#include "oracles.hpp"

#include "splinetrace/error.hpp"
#include "splinetrace/eval.hpp"
#include "splinetrace/flowdata.hpp"
#include "splinetrace/parallel.hpp"
#include "splinetrace/tracer_particle.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace splinetrace;

namespace {

PathlineSet shifted(const PathlineSet& set, const Vec3& c) {
    std::vector<Vec3> pos(set.positions().begin(), set.positions().end());
    for (auto& p : pos) p += c;
    const auto t = set.time_of_step();
    return PathlineSet(set.num_pathlines(), set.num_timesteps(), pos, std::vector<double>(t.begin(), t.end()));
}

const GeneratedPathlines& gyre() {
    static const GeneratedPathlines gen = generate_pathlines(FlowFieldSpec::double_gyre(), 120, 80, 5, 31);
    return gen;
}

}  // namespace

TEST(TraceParticle, SeedOnAParticleReproducesIt) {
    const PathlineSet& set = gyre().pathlines;
    for (auto dir : {TraceDirection::Forward, TraceDirection::Backward, TraceDirection::Both}) {
        for (std::size_t id : {0u, 17u, 119u}) {
            const TraceSeed seed{40.0, set.at(id, 40), dir};
            const TracedPathline t = trace_particle(set, seed);
            for (std::size_t s = t.first_step; s <= t.last_step(); ++s) EXPECT_EQ(t.at_step(s), set.at(id, s));
        }
    }
}

TEST(TraceParticle, DirectionControlsCoverage) {
    const PathlineSet& set = gyre().pathlines;
    const Vec3 rho{1.0, 0.5, 0.0};
    const auto fwd = trace_particle(set, {30.0, rho, TraceDirection::Forward});
    EXPECT_EQ(fwd.first_step, 30u);
    EXPECT_EQ(fwd.last_step(), 79u);
    EXPECT_EQ(fwd.iterations, 49u);
    const auto bwd = trace_particle(set, {30.0, rho, TraceDirection::Backward});
    EXPECT_EQ(bwd.first_step, 0u);
    EXPECT_EQ(bwd.last_step(), 30u);
    EXPECT_EQ(bwd.iterations, 30u);
    const auto both = trace_particle(set, {30.0, rho, TraceDirection::Both});
    EXPECT_EQ(both.positions.size(), 80u);
    EXPECT_EQ(both.iterations, 79u);
    EXPECT_EQ(both.at_step(30), rho);
    for (std::size_t s = 30; s < 80; ++s) EXPECT_EQ(both.at_step(s), fwd.at_step(s));
    for (std::size_t s = 0; s <= 30; ++s) EXPECT_EQ(both.at_step(s), bwd.at_step(s));
}

TEST(TraceParticle, UniformTranslationIsExact) {
    const Vec3 v{0.3, -0.2, 0.1};
    const auto gen = generate_pathlines(FlowFieldSpec::uniform_translation(v), 60, 40, 2, 8);
    const PathlineSet& set = gen.pathlines;
    const Vec3 rho = 0.5 * (set.at(3, 10) + set.at(9, 10)) + Vec3{0.01, 0.02, -0.03};
    const auto t = trace_particle(set, {10.0, rho});
    for (std::size_t s = 0; s < 40; ++s) {
        const Vec3 expected = rho + (set.at(0, s) - set.at(0, 10));
        EXPECT_LE(oracle::max_abs_diff(t.at_step(s), expected), 1e-12) << "step " << s;
    }
}

TEST(TraceParticle, TranslationEquivariance) {
    const PathlineSet& set = gyre().pathlines;
    const Vec3 c{0.5, -0.25, 0.125};
    const PathlineSet moved = shifted(set, c);
    const Vec3 rho{0.7, 0.3, 0.0};
    const auto a = trace_particle(set, {20.0, rho});
    const auto b = trace_particle(moved, {20.0, rho + c});
    for (std::size_t s = 0; s < 80; ++s) EXPECT_LE(oracle::max_abs_diff(b.at_step(s), a.at_step(s) + c), 1e-12);
}

TEST(TraceParticle, BatchMatchesSingleAndIsThreadIndependent) {
    const PathlineSet& set = gyre().pathlines;
    std::vector<TraceSeed> seeds;
    for (int i = 0; i < 12; ++i)
        seeds.push_back({double(i * 6), {0.1 + 0.15 * i, 0.2 + 0.05 * i, 0.0},
                         static_cast<TraceDirection>(i % 3)});
    set_max_threads(1);
    const auto serial = trace_particles(set, seeds);
    set_max_threads(4);
    const auto threaded = trace_particles(set, seeds);
    set_max_threads(0);
    for (std::size_t s = 0; s < seeds.size(); ++s) {
        EXPECT_EQ(serial[s].positions, threaded[s].positions);
        const auto alone = trace_particle(set, seeds[s]);
        EXPECT_EQ(alone.positions, serial[s].positions);
        EXPECT_EQ(alone.first_step, serial[s].first_step);
        EXPECT_EQ(alone.iterations, serial[s].iterations);
    }
}

TEST(TraceParticle, SingleNeighborFollowsNearestDisplacement) {
    const PathlineSet& set = gyre().pathlines;
    const Vec3 rho = set.at(5, 0) + Vec3{1e-3, 0, 0};
    TraceOptions one;
    one.neighbors = 1;
    const auto t = trace_particle(set, {0.0, rho, TraceDirection::Forward}, one);
    const auto first = set.load_step(0);
    const auto nn = oracle::knn_sorted(first, rho, 1);
    EXPECT_EQ(t.at_step(1), set.at(nn[0].first, 1) + (rho - set.at(nn[0].first, 0)));
}

TEST(TraceParticle, RejectsBadSeeds) {
    const PathlineSet& set = gyre().pathlines;
    EXPECT_THROW(trace_particle(set, {-1.0, {0, 0, 0}}), Error);
    EXPECT_THROW(trace_particle(set, {80.0, {0, 0, 0}}), Error);
    EXPECT_THROW(trace_particle(set, {2.5, {0, 0, 0}}), Error);
    EXPECT_THROW(trace_particle(set, {0.0, {std::nan(""), 0, 0}}), Error);
    TraceOptions none;
    none.neighbors = 0;
    EXPECT_THROW(trace_particle(set, {0.0, {0, 0, 0}}, none), Error);
    none.neighbors = 4;
    none.power = -1.0;
    EXPECT_THROW(trace_particle(set, {0.0, {0, 0, 0}}, none), Error);
}

TEST(TraceParticle, HeldOutErrorGrowsAwayFromSeedAndStaysSmall) {
    const FlowFieldSpec spec = FlowFieldSpec::double_gyre();
    const auto gen = generate_pathlines(spec, 500, 200, 5, 32);
    const auto split = split_pathlines(500, 0.1, 3);
    ASSERT_EQ(split.test.size(), 50u);
    const PathlineSet train = gen.pathlines.subset(split.train);

    std::vector<TraceSeed> seeds;
    for (std::size_t id : split.test) seeds.push_back({100.0, gen.pathlines.at(id, 100)});
    const auto traced = trace_particles(train, seeds);

    // Squared error summed per offset from the seed step, both sides pooled.
    std::vector<double> sq(101, 0.0);
    std::vector<double> count(101, 0.0);
    double total = 0.0;
    for (std::size_t s = 0; s < seeds.size(); ++s) {
        for (std::size_t step = 0; step < 200; ++step) {
            const Vec3 d = traced[s].at_step(step) - gen.pathlines.at(split.test[s], step);
            const std::size_t offset = step > 100 ? step - 100 : 100 - step;
            sq[offset] += dot(d, d);
            count[offset] += 1.0;
            total += dot(d, d);
        }
    }
    EXPECT_EQ(sq[0], 0.0);
    const auto band = [&](std::size_t lo, std::size_t hi) {
        double a = 0.0;
        double c = 0.0;
        for (std::size_t d = lo; d <= hi; ++d) {
            a += sq[d];
            c += count[d];
        }
        return std::sqrt(a / c);
    };
    EXPECT_LT(band(1, 20), band(40, 60));
    EXPECT_LT(band(40, 60), band(80, 100));
    const double window_rmse = std::sqrt(total / (200.0 * seeds.size()));
    EXPECT_LT(window_rmse, 0.05 * spec.domain.diagonal());
}
