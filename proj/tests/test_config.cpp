#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "kppflow/config.hpp"
#include "kppflow/svg.hpp"
#include "kppflow/sweep.hpp"

using namespace kppflow;

namespace {

SweepConfig parse(const std::string& text) {
    std::istringstream is(text);
    return parse_config(is, "test.ini");
}

ConfigError parse_error(const std::string& text) {
    try {
        parse(text);
    } catch (const ConfigError& e) {
        return e;
    }
    ADD_FAILURE() << "expected ConfigError";
    return ConfigError("", 0, "", "");
}

}  // namespace

TEST(Config, FullFile) {
    const auto c = parse(R"(# comment
[run]
mode = speed
output = out-dir
jobs = 3

[grid]
resolution = 32
resolution_3d = 16

[flow.sh]
kind = shear
sin = 1, 0.5

[flow.gap]
kind = gap
delta = 0.3
exponent = 2

[flow.c3]
kind = cellular3d

[sweep]
directions = (1,0) (0,1) (1,0,0)
amplitudes = 1 10 100
f_prime0 = 1, 0.25

[tolerances]
cell = 1e-9
)");
    EXPECT_EQ(c.mode, "speed");
    EXPECT_EQ(c.output, "out-dir");
    EXPECT_EQ(c.jobs, 3);
    ASSERT_EQ(c.flows.size(), 3u);
    EXPECT_EQ(c.flows[0].id, "sh");
    EXPECT_EQ(c.flows[0].resolution, (std::vector<int>{32, 32}));
    EXPECT_EQ(c.flows[0].directions.size(), 2u);
    EXPECT_EQ(std::get<flows::Shear>(c.flows[0].spec).sin_coef, (std::vector<double>{1.0, 0.5}));
    EXPECT_DOUBLE_EQ(std::get<flows::GapFlow>(c.flows[1].spec).delta, 0.3);
    EXPECT_EQ(c.flows[2].dim, 3);
    EXPECT_EQ(c.flows[2].resolution, (std::vector<int>{16, 16, 16}));
    ASSERT_EQ(c.flows[2].directions.size(), 1u);
    EXPECT_EQ(c.flows[2].directions[0].size(), 3u);
    EXPECT_EQ(c.amplitudes, (std::vector<double>{1, 10, 100}));
    EXPECT_EQ(c.f_prime0, (std::vector<double>{1, 0.25}));
    EXPECT_DOUBLE_EQ(c.cell.tol, 1e-9);
    EXPECT_EQ(c.simulate_amplitudes, c.amplitudes);
}

TEST(Config, DefaultsToFirstAxis) {
    const auto c = parse("[flow.a]\nkind = cellular\n");
    ASSERT_EQ(c.flows.size(), 1u);
    EXPECT_EQ(c.flows[0].directions, (std::vector<std::vector<double>>{{1.0, 0.0}}));
    EXPECT_EQ(c.mode, "sweep");
    EXPECT_EQ(c.amplitudes, (std::vector<double>{0.0}));
}

TEST(Config, UnknownKeyReportsLine) {
    const auto e = parse_error("[flow.a]\nkind = cellular\n\n[sweep]\namplitudez = 1\n");
    EXPECT_EQ(e.line(), 5);
    EXPECT_EQ(e.key(), "sweep.amplitudez");
    EXPECT_NE(std::string(e.what()).find("test.ini:5"), std::string::npos);
}

TEST(Config, BadNumberReportsLine) {
    const auto e = parse_error("[flow.a]\nkind = gap\ndelta = 0.2x\n");
    EXPECT_EQ(e.line(), 3);
    EXPECT_NE(std::string(e.what()).find("0.2x"), std::string::npos);
}

TEST(Config, SchemaViolations) {
    EXPECT_EQ(parse_error("[flow.a]\nkind = shear\nexponent = 2\n").line(), 3);
    EXPECT_EQ(parse_error("[flow.a]\nkind = vortex\n").line(), 2);
    EXPECT_EQ(parse_error("[flow.a]\nkind = cellular\n[bogus]\nx = 1\n").line(), 3);
    EXPECT_EQ(parse_error("[run]\nmode = fast\n[flow.a]\nkind = cellular\n").line(), 2);
    EXPECT_EQ(parse_error("[flow.a]\nkind = cellular\n[sweep]\namplitudes = -1\n").line(), 4);
    EXPECT_EQ(parse_error("[flow.a]\nkind = cellular\nresolution = 48\n").line(), 3);
    EXPECT_EQ(parse_error("[flow.a]\nkind = cellular\ndirections = (1,0,0)\n").line(), 3);
    EXPECT_EQ(parse_error("[flow.a]\nkind = cellular\n[classify]\namplitudes = 4, 16\n").line(), 4);
    EXPECT_EQ(parse_error("[flow.a]\nkind = cellular\n[sweep]\nclassify = maybe\n").line(), 4);
    EXPECT_EQ(parse_error("[flow.a]\nkind = cellular3d\ndim = 2\n").line(), 3);
    EXPECT_THROW(parse("[sweep]\namplitudes = 1\n"), ConfigError);
    EXPECT_THROW(parse("[flow.a]\nkind\n"), ConfigError);
}

TEST(Config, JobsFromEnvironment) {
    ::setenv("KPPFLOW_JOBS", "5", 1);
    EXPECT_EQ(default_jobs(), 5);
    ::setenv("KPPFLOW_JOBS", "zero", 1);
    EXPECT_GE(default_jobs(), 1);
    ::unsetenv("KPPFLOW_JOBS");
}

TEST(Config, CustomStreamFile) {
    const auto dir = std::filesystem::temp_directory_path() / "kppflow_cfg_test";
    std::filesystem::create_directories(dir);
    const auto g = TorusGrid::unit(2, 16);
    ScalarField H(g);
    for (std::size_t i = 0; i < H.size(); ++i) {
        const auto x = g.node(i);
        H[i] = std::sin(2 * std::numbers::pi * x[0]) * std::sin(2 * std::numbers::pi * x[1]) /
               (2 * std::numbers::pi);
    }
    const auto path = (dir / "h.kpf").string();
    write_field(path, H);
    const auto c = parse("[flow.h]\nkind = custom_stream\nfile = " + path + "\n");
    EXPECT_EQ(c.flows[0].resolution, (std::vector<int>{16, 16}));
    EXPECT_NO_THROW(c.flows[0].build());
    EXPECT_EQ(parse_error("[flow.h]\nkind = custom_stream\nfile = " + (dir / "missing").string() + "\n").line(), 3);
}

TEST(Svg, LogAxesDropNonPositive) {
    const auto s = line_chart_svg({{"a", {0.0, 1.0, 10.0}, {1.0, 2.0, 4.0}}}, {"t<1>", "A", "D", true, true});
    EXPECT_NE(s.find("<polyline"), std::string::npos);
    EXPECT_NE(s.find("t&lt;1&gt;"), std::string::npos);
    size_t circles = 0;
    for (size_t p = s.find("<circle"); p != std::string::npos; p = s.find("<circle", p + 1))
        ++circles;
    EXPECT_EQ(circles, 2u);
}

TEST(Sweep, ShearRecordsAndSummary) {
    auto c = parse("[run]\noutput =\n[grid]\nresolution = 32\n[flow.sh]\nkind = shear\n"
                   "[sweep]\ndirections = (1,0) (0,1)\namplitudes = 10, 0\n");
    c.output.clear();
    c.mode = "speed";
    const auto r = run_sweep(c, 2);
    EXPECT_EQ(r.exit_code(), 0);
    ASSERT_EQ(r.records.size(), 4u);
    const double k = 1.0 / (8 * std::numbers::pi * std::numbers::pi);
    EXPECT_NEAR(r.records[0].D_e, 1 + 100 * k, 1e-8);
    EXPECT_NEAR(r.records[1].D_e, 1.0, 1e-12);
    EXPECT_NEAR(r.records[1].c_star, 2.0, 1e-6);
    EXPECT_NEAR(r.records[2].D_e, 1.0, 1e-8);
    for (const auto& rec : r.records)
        EXPECT_NEAR(rec.ratio, rec.c_star / std::sqrt(rec.D_e), 1e-12);
    EXPECT_NE(r.summary.find("[PASS] D_e >= 1 (4/4)"), std::string::npos);
    EXPECT_NE(r.summary.find("hard failures: 0"), std::string::npos);
    const auto csv = records_csv(r.records);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), kRecordHeader);
}

TEST(Sweep, BuildFailureIsHard) {
    auto c = parse("[grid]\nresolution = 8\n[flow.a]\nkind = cellular\n");
    c.output.clear();
    c.mode = "validate";
    c.flows[0].spec = flows::CustomStream{ScalarField(TorusGrid::unit(3, 8))};
    const auto r = run_sweep(c, 1);
    EXPECT_EQ(r.exit_code(), 1);
}
