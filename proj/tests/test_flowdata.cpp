#include "oracles.hpp"
#include "temp_dir.hpp"

#include "splinetrace/error.hpp"
#include "splinetrace/flowdata.hpp"
#include "splinetrace/parallel.hpp"

#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

using namespace splinetrace;

namespace {

std::vector<char> file_bytes(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream os(path);
    os << text;
}

std::string error_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.what();
    }
    return {};
}

double max_error(std::span<const Vec3> a, std::span<const Vec3> b) {
    double e = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) e = std::max(e, oracle::max_abs_diff(a[j], b[j]));
    return e;
}

}  // namespace

TEST(PathlineSet, ValidatesShape) {
    EXPECT_THROW(PathlineSet(0, 2, {}), Error);
    EXPECT_THROW(PathlineSet(1, 1, {Vec3{}}), Error);
    EXPECT_THROW(PathlineSet(1, 2, {Vec3{}}), Error);
    EXPECT_THROW(PathlineSet(1, 2, {Vec3{}, Vec3{std::nan(""), 0, 0}}), Error);
    EXPECT_THROW(PathlineSet(1, 2, {Vec3{}, Vec3{}}, {1.0, 1.0}), Error);
    EXPECT_NO_THROW(PathlineSet(1, 2, {Vec3{}, Vec3{}}, {0.0, 0.5}));
}

TEST(PathlineSet, BoundsContainEveryPosition) {
    const auto gen = generate_pathlines(FlowFieldSpec::abc_flow(), 20, 30, 2, 3);
    for (const Vec3& p : gen.pathlines.positions()) EXPECT_TRUE(gen.pathlines.bounds().contains(p));
}

TEST(PathlineSet, IdentityTimesNormalize) {
    const PathlineSet set(1, 5, std::vector<Vec3>(5));
    EXPECT_DOUBLE_EQ(set.normalized_time(0.0), 0.0);
    EXPECT_DOUBLE_EQ(set.normalized_time(2.0), 0.5);
    EXPECT_DOUBLE_EQ(set.normalized_time(4.0), 1.0);
    EXPECT_THROW(set.normalized_time(4.5), Error);
}

TEST(PathlineSet, SubsetKeepsOrder) {
    std::vector<Vec3> pos;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 2; ++j) pos.push_back({double(i), double(j), 0});
    const PathlineSet set(3, 2, pos);
    const std::vector<std::size_t> ids{2, 0};
    const PathlineSet sub = set.subset(ids);
    ASSERT_EQ(sub.num_pathlines(), 2u);
    EXPECT_EQ(sub.at(0, 1), (Vec3{2, 1, 0}));
    EXPECT_EQ(sub.at(1, 0), (Vec3{0, 0, 0}));
}

TEST(Generate, UniformTranslationIsExactlyAffine) {
    const Vec3 v{1, 0, 0};
    const auto gen = generate_pathlines(FlowFieldSpec::uniform_translation(v, 0.0, 1.0), 5, 11, 4, 9);
    for (std::size_t i = 0; i < 5; ++i) {
        const Vec3 rho0 = gen.pathlines.at(i, 0);
        for (std::size_t j = 0; j < 11; ++j) {
            const Vec3 expected = rho0 + (static_cast<double>(j) / 10.0) * v;
            EXPECT_LE(oracle::max_abs_diff(gen.pathlines.at(i, j), expected), 1e-12) << "pathline " << i << " step " << j;
        }
        EXPECT_EQ(gen.clamped[i], 0);
    }
}

TEST(Generate, DoubleGyreMatchesFinerIntegration) {
    const FlowFieldSpec spec = FlowFieldSpec::double_gyre();
    const Vec3 seed{0.7, 0.4, 0.0};
    std::vector<Vec3> coarse(101);
    std::vector<Vec3> fine(101);
    integrate_pathline(spec, seed, 101, 10, coarse);
    integrate_pathline(spec, seed, 101, 100, fine);
    EXPECT_LE(max_error(coarse, fine), 1e-6);
}

TEST(Generate, Rk4ConvergesAtFourthOrder) {
    const FlowFieldSpec spec = FlowFieldSpec::double_gyre();
    const Vec3 seed{1.3, 0.2, 0.0};
    const std::size_t m = 41;
    std::vector<Vec3> reference(m);
    integrate_pathline(spec, seed, m, 160, reference);
    double previous = 0.0;
    for (std::size_t substeps : {1, 2, 4, 8, 16}) {
        std::vector<Vec3> out(m);
        integrate_pathline(spec, seed, m, substeps, out);
        const double err = max_error(out, reference);
        if (previous > 0.0) EXPECT_GE(previous / err, 8.0) << "substeps " << substeps;
        previous = err;
    }
}

TEST(Generate, RejectsBadArguments) {
    EXPECT_THROW(generate_pathlines(FlowFieldSpec::double_gyre(), 10, 1, 10, 1), Error);
    EXPECT_THROW(generate_pathlines(FlowFieldSpec::double_gyre(), 10, 5, 0, 1), Error);
    EXPECT_THROW(generate_pathlines(FlowFieldSpec::double_gyre(), 0, 5, 1, 1), Error);
    FlowFieldSpec missing = FlowFieldSpec::double_gyre();
    missing.parameters.erase("A");
    EXPECT_THROW(generate_pathlines(missing, 1, 5, 1, 1), Error);
    FlowFieldSpec degenerate = FlowFieldSpec::double_gyre();
    degenerate.t_end = degenerate.t_start;
    EXPECT_THROW(generate_pathlines(degenerate, 1, 5, 1, 1), Error);
}

TEST(Generate, NonFiniteVelocityNamesPathlineAndStep) {
    const auto spec = FlowFieldSpec::uniform_translation({std::numeric_limits<double>::infinity(), 0, 0});
    const std::string msg = error_of([&] { generate_pathlines(spec, 3, 4, 1, 1); });
    EXPECT_NE(msg.find("non-finite velocity on pathline 0 at step 1"), std::string::npos) << msg;
}

TEST(Generate, ClampsAndFlagsWhenBounded) {
    FlowFieldSpec spec = FlowFieldSpec::uniform_translation({5, 0, 0});
    spec.bounded = true;
    const auto gen = generate_pathlines(spec, 4, 6, 2, 5);
    for (std::size_t i = 0; i < 4; ++i) {
        EXPECT_EQ(gen.clamped[i], 1);
        EXPECT_DOUBLE_EQ(gen.pathlines.at(i, 5).x, 1.0);
    }
}

TEST(Generate, DeterministicAcrossThreadCounts) {
    const auto spec = FlowFieldSpec::double_gyre();
    set_max_threads(1);
    const auto a = generate_pathlines(spec, 64, 50, 5, 11);
    set_max_threads(4);
    const auto b = generate_pathlines(spec, 64, 50, 5, 11);
    set_max_threads(0);
    EXPECT_EQ(a.pathlines, b.pathlines);
    const auto c = generate_pathlines(spec, 64, 50, 5, 12);
    EXPECT_FALSE(a.pathlines == c.pathlines);
}

TEST(FlowKindNames, RoundTrip) {
    for (FlowKind k : {FlowKind::DoubleGyre, FlowKind::ABCFlow, FlowKind::UniformTranslation})
        EXPECT_EQ(flow_kind_from_string(to_string(k)), k);
    EXPECT_THROW(flow_kind_from_string("vortex"), Error);
}

TEST(BinaryFormat, SizeAndHeaderLayout) {
    TempDir dir;
    const PathlineSet set(1, 2, {Vec3{1, 2, 3}, Vec3{4, 5, 6}});
    write_pathlines(set, dir / "a.pln", PathlineFormat::Binary);
    const auto bytes = file_bytes(dir / "a.pln");
    ASSERT_EQ(bytes.size(), 32u + 2 * 3 * 8);
    EXPECT_EQ(std::string(bytes.data(), 4), "PLN1");
    const auto u32 = [&](std::size_t at) {
        std::uint32_t v = 0;
        for (int b = 3; b >= 0; --b) v = (v << 8) | static_cast<unsigned char>(bytes[at + static_cast<std::size_t>(b)]);
        return v;
    };
    EXPECT_EQ(u32(4), 1u);
    EXPECT_EQ(u32(8), 1u);
    EXPECT_EQ(u32(12), 2u);
    EXPECT_EQ(u32(16), 0u);
    EXPECT_EQ(u32(20), 0u);
    EXPECT_EQ(u32(24), 32u);
    EXPECT_EQ(u32(28), 0u);
    double first = 0.0;
    std::memcpy(&first, bytes.data() + 32, 8);
    EXPECT_EQ(first, 1.0);
}

TEST(BinaryFormat, RoundTripIsBitExact) {
    TempDir dir;
    const auto gen = generate_pathlines(FlowFieldSpec::double_gyre(), 30, 40, 3, 2);
    write_pathlines(gen.pathlines, dir / "g.pln", PathlineFormat::Binary);
    const PathlineSet back = read_pathlines(dir / "g.pln", PathlineFormat::Binary);
    EXPECT_EQ(back, gen.pathlines);
}

TEST(BinaryFormat, RejectsCorruptFiles) {
    TempDir dir;
    write_text(dir / "bad.pln", "PLNX and then some");
    EXPECT_THROW(read_pathlines(dir / "bad.pln", PathlineFormat::Binary), Error);
    const PathlineSet set(1, 2, {Vec3{1, 2, 3}, Vec3{4, 5, 6}});
    write_pathlines(set, dir / "t.pln", PathlineFormat::Binary);
    auto bytes = file_bytes(dir / "t.pln");
    bytes.resize(bytes.size() - 8);
    std::ofstream(dir / "t.pln", std::ios::binary).write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    EXPECT_THROW(read_pathlines(dir / "t.pln", PathlineFormat::Binary), Error);
}

TEST(BinaryFormat, NanPayloadReportsLocation) {
    TempDir dir;
    const PathlineSet set(2, 2, {Vec3{}, Vec3{}, Vec3{}, Vec3{}});
    write_pathlines(set, dir / "n.pln", PathlineFormat::Binary);
    auto bytes = file_bytes(dir / "n.pln");
    const double nan = std::nan("");
    std::memcpy(bytes.data() + 32 + 3 * 24 + 8, &nan, 8);
    std::ofstream(dir / "n.pln", std::ios::binary).write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    const std::string msg = error_of([&] { read_pathlines(dir / "n.pln", PathlineFormat::Binary); });
    EXPECT_NE(msg.find("pathline 1 step 1"), std::string::npos) << msg;
}

TEST(CsvFormat, ParsesTwoByThree) {
    TempDir dir;
    write_text(dir / "p.csv",
               "pathline_id,step,x,y,z\n"
               "0,0,0.0,0.0,0.0\n0,1,0.1,0.0,0.0\n0,2,0.2,0.0,0.0\n"
               "1,0,1.0,1.0,0.0\n1,1,1.1,1.0,0.0\n1,2,1.2,1.0,0.0\n");
    const PathlineSet set = read_pathlines(dir / "p.csv", PathlineFormat::Csv);
    EXPECT_EQ(set.num_pathlines(), 2u);
    EXPECT_EQ(set.num_timesteps(), 3u);
    EXPECT_EQ(set.at(1, 2), (Vec3{1.2, 1.0, 0.0}));
}

TEST(CsvFormat, RaggedNamesPathline) {
    TempDir dir;
    write_text(dir / "r.csv",
               "pathline_id,step,x,y,z\n"
               "0,0,0,0,0\n0,1,0,0,0\n0,2,0,0,0\n"
               "1,0,1,1,0\n1,1,1,1,0\n");
    const std::string msg = error_of([&] { read_pathlines(dir / "r.csv", PathlineFormat::Csv); });
    EXPECT_NE(msg.find("ragged pathline 1"), std::string::npos) << msg;
}

TEST(CsvFormat, NanReportsLocation) {
    TempDir dir;
    write_text(dir / "n.csv", "pathline_id,step,x,y,z\n0,0,0,0,0\n0,1,0,nan,0\n");
    const std::string msg = error_of([&] { read_pathlines(dir / "n.csv", PathlineFormat::Csv); });
    EXPECT_NE(msg.find("pathline 0 step 1"), std::string::npos) << msg;
}

TEST(CsvFormat, RejectsUnsortedRowsAndBadHeader) {
    TempDir dir;
    write_text(dir / "u.csv", "pathline_id,step,x,y,z\n0,1,0,0,0\n0,0,0,0,0\n");
    EXPECT_THROW(read_pathlines(dir / "u.csv", PathlineFormat::Csv), Error);
    write_text(dir / "h.csv", "id,t,x,y,z\n0,0,0,0,0\n0,1,0,0,0\n");
    EXPECT_THROW(read_pathlines(dir / "h.csv", PathlineFormat::Csv), Error);
}

TEST(CsvFormat, RoundTripWithinRelativeTolerance) {
    TempDir dir;
    const auto gen = generate_pathlines(FlowFieldSpec::abc_flow(), 7, 9, 3, 4);
    write_pathlines(gen.pathlines, dir / "g.csv", PathlineFormat::Csv);
    const PathlineSet back = read_pathlines(dir / "g.csv", PathlineFormat::Csv);
    ASSERT_EQ(back.num_pathlines(), 7u);
    ASSERT_EQ(back.num_timesteps(), 9u);
    for (std::size_t i = 0; i < back.positions().size(); ++i)
        for (int a = 0; a < 3; ++a) {
            const double x = gen.pathlines.positions()[i][a];
            EXPECT_LE(std::abs(back.positions()[i][a] - x), 1e-12 * std::max(1.0, std::abs(x)));
        }
}

TEST(Formats, ChosenByExtension) {
    EXPECT_EQ(pathline_format_for("x.pln"), PathlineFormat::Binary);
    EXPECT_EQ(pathline_format_for("x.bin"), PathlineFormat::Binary);
    EXPECT_EQ(pathline_format_for("x.csv"), PathlineFormat::Csv);
}
