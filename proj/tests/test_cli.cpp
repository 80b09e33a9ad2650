#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "kppflow/kppflow.hpp"

using namespace kppflow;
namespace fs = std::filesystem;

namespace {

fs::path work_dir() {
    static const fs::path d = [] {
        auto p = fs::temp_directory_path() / "kppflow_cli_test";
        fs::remove_all(p);
        fs::create_directories(p);
        return p;
    }();
    return d;
}

std::string binary() {
    const char* b = std::getenv("KPPFLOW_BIN");
    return b ? b : "kppflow";
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::stringstream s;
    s << is.rdbuf();
    return s.str();
}

fs::path write_config(const std::string& name, const std::string& text) {
    const auto p = work_dir() / name;
    std::ofstream(p) << text;
    return p;
}

struct Run {
    int code;
    std::string err;
};

Run run(const std::string& args) {
    const auto err = work_dir() / "stderr.txt";
    const std::string cmd = binary() + " " + args + " > /dev/null 2> " + err.string();
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(err)};
}

std::vector<std::map<std::string, std::string>> read_csv(const fs::path& p) {
    std::ifstream is(p);
    std::string line;
    std::getline(is, line);
    std::vector<std::string> head;
    {
        std::stringstream ss(line);
        for (std::string f; std::getline(ss, f, ',');)
            head.push_back(f);
    }
    std::vector<std::map<std::string, std::string>> rows;
    while (std::getline(is, line)) {
        std::map<std::string, std::string> row;
        std::size_t col = 0;
        std::string f;
        bool quoted = false;
        for (std::size_t i = 0; i <= line.size(); ++i) {
            const char c = i < line.size() ? line[i] : ',';
            if (c == '"') {
                quoted = !quoted;
            } else if (c == ',' && !quoted) {
                if (col < head.size())
                    row[head[col]] = f;
                ++col;
                f.clear();
            } else {
                f += c;
            }
        }
        rows.push_back(row);
    }
    return rows;
}

}  // namespace

TEST(Cli, ShearDiffusivityMatchesClosedForm) {
    const auto cfg = write_config("shear.ini", "[grid]\nresolution = 64\n[flow.shear]\nkind = shear\n"
                                               "[sweep]\ndirections = (1,0) (0,1)\namplitudes = 1, 10, 100\n");
    const auto out = work_dir() / "shear";
    ASSERT_EQ(run("diffusivity " + cfg.string() + " -o " + out.string()).code, 0);
    const auto rows = read_csv(out / "records.csv");
    ASSERT_EQ(rows.size(), 6u);
    for (const auto& r : rows) {
        const double A = std::stod(r.at("A")), D = std::stod(r.at("D_e"));
        const double expect = r.at("e") == "1;0" ? 1 + A * A / (8 * std::numbers::pi * std::numbers::pi) : 1.0;
        EXPECT_NEAR(D, expect, 1e-6 * expect) << "A=" << A << " e=" << r.at("e");
    }
    EXPECT_TRUE(fs::exists(out / "plots" / "D_shear.svg"));
    EXPECT_TRUE(fs::exists(out / "summary.txt"));
}

TEST(Cli, ZeroAmplitudeSpeed) {
    const auto cfg = write_config("still.ini", "[grid]\nresolution = 32\n[flow.c]\nkind = cellular\n"
                                               "[sweep]\namplitudes = 0\nf_prime0 = 1, 0.25, 4\n");
    const auto out = work_dir() / "still";
    ASSERT_EQ(run("speed " + cfg.string() + " -o " + out.string()).code, 0);
    const auto rows = read_csv(out / "records.csv");
    ASSERT_EQ(rows.size(), 3u);
    for (const auto& r : rows) {
        const double fp = std::stod(r.at("f_prime0"));
        EXPECT_NEAR(std::stod(r.at("c_star")), 2 * std::sqrt(fp), 1e-6);
        EXPECT_NEAR(std::stod(r.at("D_e")), 1.0, 1e-12);
        EXPECT_NEAR(std::stod(r.at("ratio_normalized")), 1.0, 1e-6);
    }
}

TEST(Cli, ClassifyMatchesLibrary) {
    const std::string text = "[grid]\nresolution = 64\n[flow.cellular]\nkind = cellular\n"
                             "[flow.gap]\nkind = gap\ndelta = 0.25\n[classify]\namplitudes = 4, 16, 64\n";
    const auto cfg = write_config("classify.ini", text);
    const auto out = work_dir() / "classify";
    ASSERT_EQ(run("classify " + cfg.string() + " -o " + out.string()).code, 0);
    const auto j = nlohmann::json::parse(slurp(out / "classification.json"));
    ASSERT_EQ(j.size(), 2u);
    EXPECT_EQ(j[0]["flow"], "cellular");
    EXPECT_EQ(j[0]["verdict"], "Diverging");

    const auto parsed = load_config(cfg.string());
    const auto lib = classify_direction(parsed.flows[1].build(), {1.0, 0.0}, {4, 16, 64});
    EXPECT_EQ(j[1]["flow"], "gap");
    EXPECT_EQ(j[1]["verdict"], to_string(lib.verdict));
    EXPECT_NEAR(j[1]["growth_per_factor_4"].get<double>(), lib.growth_4, 1e-12);
    const auto rows = read_csv(out / "classification.csv");
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(rows[1].at("verdict"), to_string(lib.verdict));
}

TEST(Cli, RerunsAreByteIdentical) {
    const auto cfg = write_config("rerun.ini", "[grid]\nresolution = 32\n[flow.c]\nkind = cellular\n"
                                               "[flow.s]\nkind = shear\n"
                                               "[sweep]\ndirections = (1,0) (1,1)\namplitudes = 0, 3, 12\n");
    const auto a = work_dir() / "rerun_a", b = work_dir() / "rerun_b";
    ASSERT_EQ(run("speed " + cfg.string() + " -j 1 -o " + a.string()).code, 0);
    ASSERT_EQ(run("speed " + cfg.string() + " -j 3 -o " + b.string()).code, 0);
    int compared = 0;
    for (const auto& ent : fs::recursive_directory_iterator(a)) {
        if (!ent.is_regular_file() || ent.path().filename() == "summary.txt")
            continue;
        const auto rel = fs::relative(ent.path(), a);
        EXPECT_EQ(slurp(ent.path()), slurp(b / rel)) << rel;
        ++compared;
    }
    EXPECT_GT(compared, 5);
}

TEST(Cli, MalformedConfigReportsLine) {
    const auto cfg = write_config("bad.ini", "[flow.c]\nkind = cellular\n\n[sweep]\namplitudes = 1, two\n");
    const auto r = run("speed " + cfg.string() + " -o " + (work_dir() / "bad").string());
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("bad.ini:5"), std::string::npos) << r.err;
    EXPECT_NE(r.err.find("amplitudes"), std::string::npos) << r.err;
    EXPECT_NE(run("speed " + (work_dir() / "missing.ini").string()).code, 0);
    EXPECT_NE(run("").code, 0);
}

TEST(Cli, DivergentCustomFlowIsHardFailure) {
    const auto g = TorusGrid::unit(2, 16);
    VectorField u(g);
    for (std::size_t i = 0; i < g.size(); ++i)
        u[0][i] = std::sin(2 * std::numbers::pi * g.node(i)[0]);
    const auto field = work_dir() / "divergent.kpf";
    write_field(field.string(), u);
    const auto cfg = write_config("div.ini", "[flow.d]\nkind = custom_velocity\nfile = " + field.string() + "\n");
    const auto r = run("validate " + cfg.string() + " -o " + (work_dir() / "div").string());
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("divergence"), std::string::npos) << r.err;
}
