// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "endodemand/cli.hpp"
#include "endodemand/closed_forms.hpp"

using namespace endodemand;
namespace fs = std::filesystem;

namespace {

const fs::path kSource = ENDODEMAND_SOURCE_DIR;

struct RunResult {
    int code = -1;
    std::string out;
    std::string err;
};

RunResult run_cli(std::vector<std::string> args) {
    std::ostringstream out, err;
    RunResult r;
    r.code = cli::run(args, out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

std::string config(const char* name) { return (kSource / "configs" / name).string(); }

// Runs the installed binary through the shell and captures stdout.
RunResult run_binary(const std::string& args) {
    RunResult r;
    std::string cmd = std::string("\"") + ENDODEMAND_CLI_PATH + "\" " + args + " 2>/dev/null";
    std::unique_ptr<FILE, int (*)(FILE*)> pipe(popen(cmd.c_str(), "r"), pclose);
    if (!pipe) return r;
    std::array<char, 4096> buf{};
    std::size_t n;
    while ((n = fread(buf.data(), 1, buf.size(), pipe.get())) > 0) r.out.append(buf.data(), n);
    int status = pclose(pipe.release());
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::vector<std::string> lines(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    for (std::string l; std::getline(in, l);) out.push_back(l);
    return out;
}

std::vector<std::string> fields(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream in(line);
    for (std::string f; std::getline(in, f, ',');) out.push_back(f);
    return out;
}

std::string body_without_header(const std::string& csv) {
    auto pos = csv.find('\n');
    return pos == std::string::npos ? std::string() : csv.substr(pos + 1);
}

bool as_number(const std::string& s, double& v) {
    char* end = nullptr;
    v = std::strtod(s.c_str(), &end);
    return !s.empty() && end == s.c_str() + s.size();
}

void expect_csv_close(const std::string& got, const std::string& want, double rel) {
    auto g = lines(got), w = lines(want);
    ASSERT_EQ(g.size(), w.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        auto gf = fields(g[i]), wf = fields(w[i]);
        ASSERT_EQ(gf.size(), wf.size()) << "line " << i;
        for (std::size_t j = 0; j < gf.size(); ++j) {
            double a, b;
            if (as_number(gf[j], a) && as_number(wf[j], b))
                EXPECT_NEAR(a, b, rel * std::max(1.0, std::abs(b))) << "line " << i << " field " << j;
            else
                EXPECT_EQ(gf[j], wf[j]) << "line " << i << " field " << j;
        }
    }
}

void expect_json_close(const Json& got, const Json& want, double rel, const std::string& path = "$") {
    if (want.is_number() && got.is_number()) {
        double a = got.get<double>(), b = want.get<double>();
        EXPECT_NEAR(a, b, rel * std::max(1.0, std::abs(b))) << path;
        return;
    }
    ASSERT_EQ(got.type(), want.type()) << path;
    if (want.is_object()) {
        ASSERT_EQ(got.size(), want.size()) << path;
        for (const auto& [k, v] : want.items()) {
            ASSERT_TRUE(got.contains(k)) << path << "." << k;
            expect_json_close(got.at(k), v, rel, path + "." + k);
        }
    } else if (want.is_array()) {
        ASSERT_EQ(got.size(), want.size()) << path;
        for (std::size_t i = 0; i < want.size(); ++i) expect_json_close(got[i], want[i], rel, path + "[" + std::to_string(i) + "]");
    } else {
        EXPECT_EQ(got, want) << path;
    }
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

}  // namespace

TEST(Cli, PriceOnThreeEquilibria) {
    auto r = run_cli({"price", "-c", config("three_equilibria.json")});
    ASSERT_EQ(r.code, 0) << r.err;
    auto j = Json::parse(r.out);
    auto res = j.at("result");
    EXPECT_NEAR(res.at("selected").get<double>(), 0.08403, 1e-4);
    ASSERT_EQ(res.at("roots").size(), 3u);
    EXPECT_NEAR(res.at("roots")[1].get<double>(), 1.38977, 1e-4);
    EXPECT_NEAR(res.at("roots")[2].get<double>(), 1.98985, 1e-4);
    EXPECT_TRUE(res.at("certificates").empty());
    EXPECT_EQ(j.at("meta").at("version"), kVersion);
    EXPECT_EQ(j.at("meta").at("config_hash").get<std::string>().size(), 16u);
}

TEST(Cli, RootsHonorsGridAndTolerance) {
    auto r = run_cli({"roots", "-c", config("three_equilibria.json"), "--grid", "4097", "--tol", "1e-12"});
    ASSERT_EQ(r.code, 0) << r.err;
    auto res = Json::parse(r.out).at("result");
    EXPECT_EQ(res.at("count"), 3);
    EXPECT_EQ(res.at("grid"), 4097);
    EXPECT_EQ(res.at("tol").get<double>(), 1e-12);
}

TEST(Cli, MissingVariableExitsWithDomainError) {
    auto r = run_cli({"price", "-c", config("missing_variable.json")});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("'Y'"), std::string::npos) << r.err;
}

TEST(Cli, UsageErrors) {
    EXPECT_EQ(run_cli({}).code, 2);
    EXPECT_EQ(run_cli({"price"}).code, 2);
    EXPECT_EQ(run_cli({"bogus"}).code, 2);
    EXPECT_EQ(run_cli({"price", "-c", "/nonexistent.json"}).code, 2);
    EXPECT_EQ(run_cli({"demand", "--law", "lognormal", "--sigma", "0.5", "--eta", "1"}).code, 2);  // no seed
    EXPECT_EQ(run_cli({"demand", "--law", "poisson", "--lambda", "2"}).code, 2);                   // no profile
    EXPECT_EQ(run_cli({"demand", "--law", "poisson", "--lambda", "2", "--alpha", "1", "--eta", "1"}).code, 2);
    EXPECT_EQ(run_cli({"--help"}).code, 0);
}

TEST(Cli, PoissonDemandVanishesAtDepth) {
    auto r = run_cli({"demand", "--law", "poisson", "--lambda", "2", "--alpha", "1"});
    ASSERT_EQ(r.code, 0) << r.err;
    auto ls = lines(r.out);
    ASSERT_GE(ls.size(), 3u);
    EXPECT_EQ(ls[0].rfind("# endodemand ", 0), 0u);
    EXPECT_EQ(ls[1], "s,f,f_bar,in_domain");
    bool seen = false;
    for (std::size_t i = 2; i < ls.size(); ++i) {
        auto f = fields(ls[i]);
        ASSERT_EQ(f.size(), 4u);
        double s = std::stod(f[0]);
        auto want = poisson_curves(EsscherMarket(1.0), 2.0, s);
        EXPECT_NEAR(std::stod(f[1]), want.f, 1e-8);
        EXPECT_NEAR(std::stod(f[2]), want.f_bar, 1e-8);
        if (s == 1.0) {
            seen = true;
            EXPECT_NEAR(std::stod(f[1]), 0.0, 1e-8);
        }
    }
    EXPECT_TRUE(seen);
}

TEST(Cli, ExplicitSGrid) {
    auto r = run_cli({"closed-form", "--law", "gamma", "--k", "2", "--theta", "1", "--alpha", "1", "--s-grid", "0",
                      "1", "2"});
    ASSERT_EQ(r.code, 0) << r.err;
    auto ls = lines(r.out);
    ASSERT_EQ(ls.size(), 5u);
    auto f = fields(ls[3]);
    EXPECT_EQ(std::stod(f[0]), 1.0);
    EXPECT_EQ(std::stod(f[1]), 0.5);
    EXPECT_EQ(std::stod(f[2]), 1.0);
}

TEST(Cli, SampledRunsAreDeterministic) {
    std::vector<std::string> args{"demand", "--law", "lognormal", "--sigma", "0.5", "--eta", "1", "--x", "2",
                                  "--seed", "7", "--samples", "5000", "--points", "9"};
    auto a = run_cli(args), b = run_cli(args);
    ASSERT_EQ(a.code, 0) << a.err;
    EXPECT_EQ(a.out, b.out);
    args[10] = "8";
    auto c = run_cli(args);
    EXPECT_NE(body_without_header(a.out), body_without_header(c.out));
}

TEST(Cli, BinaryMatchesInProcessRun) {
    auto r = run_binary("price -c \"" + config("three_equilibria.json") + "\"");
    ASSERT_EQ(r.code, 0);
    auto in = run_cli({"price", "-c", config("three_equilibria.json")});
    EXPECT_EQ(r.out, in.out);
    EXPECT_EQ(run_binary("price -c \"" + config("missing_variable.json") + "\"").code, 2);
}

TEST(Cli, WritesOutputFile) {
    auto path = fs::temp_directory_path() / "endodemand_cli_test.csv";
    fs::remove(path);
    auto r = run_cli({"closed-form", "--law", "poisson", "--lambda", "1", "--alpha", "1", "-o", path.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(r.out.empty());
    EXPECT_NE(slurp(path).find("s,f,f_bar,in_domain"), std::string::npos);
    fs::remove(path);
}

TEST(Cli, EquilibriumAndRuinLimit) {
    auto e = run_cli({"equilibrium", "-c", config("exponential_agents.json")});
    ASSERT_EQ(e.code, 0) << e.err;
    auto res = Json::parse(e.out).at("result");
    for (const auto& r : res.at("foc_residuals")) EXPECT_LT(r.get<double>(), 1e-6);
    auto rl = run_cli({"ruin-limit", "-c", config("power_market.json")});
    ASSERT_EQ(rl.code, 0) << rl.err;
    auto prices = Json::parse(rl.out).at("result").at("prices");
    for (std::size_t i = 1; i < prices.size(); ++i) EXPECT_GE(prices[i].get<double>(), prices[i - 1].get<double>() - 1e-12);
}

struct GoldenCase {
    const char* file;
    std::vector<std::string> args;
};

class Golden : public ::testing::TestWithParam<int> {};

std::vector<GoldenCase> golden_cases() {
    return {
        {"price_three_equilibria.json", {"price", "-c", config("three_equilibria.json")}},
        {"roots_power_market.json", {"roots", "-c", config("power_market.json")}},
        {"demand_poisson.csv", {"demand", "--law", "poisson", "--lambda", "2", "--alpha", "1", "--points", "13"}},
        {"demand_power_config.csv", {"demand", "-c", config("power_market.json"), "--s-max", "4", "--points", "9"}},
        {"closed_form_bernoulli.csv", {"closed-form", "--law", "bernoulli", "--p", "0.3", "--alpha", "2", "--points", "7"}},
        {"cross_impact_config.csv", {"cross-impact", "-c", config("cross_impact.json"), "--s-max", "2", "--points", "3"}},
        {"liquidity_power_market.json", {"liquidity", "-c", config("power_market.json")}},
        {"equilibrium_mixed_power.json", {"equilibrium", "-c", config("mixed_power_agents.json")}},
        {"ruin_limit_power_market.json", {"ruin-limit", "-c", config("power_market.json")}},
        {"figure_three_equilibria.csv", {"--figure", "appendix-c"}},
    };
}

TEST_P(Golden, MatchesPinnedOutput) {
    auto gc = golden_cases()[static_cast<std::size_t>(GetParam())];
    auto r = run_cli(gc.args);
    ASSERT_EQ(r.code, 0) << r.err;
    auto path = kSource / "tests" / "golden" / gc.file;
    ASSERT_TRUE(fs::exists(path)) << path;
    auto want = slurp(path);
    if (path.extension() == ".json") {
        auto got = Json::parse(r.out);
        got.erase("meta");
        expect_json_close(got, Json::parse(want), 1e-9);
    } else {
        EXPECT_EQ(lines(r.out)[0].rfind("# endodemand ", 0), 0u);
        expect_csv_close(body_without_header(r.out), want, 1e-9);
    }
}

INSTANTIATE_TEST_SUITE_P(Cli, Golden, ::testing::Range(0, 10), [](const auto& info) {
    std::string n = golden_cases()[static_cast<std::size_t>(info.param)].file;
    for (char& ch : n)
        if (!std::isalnum(static_cast<unsigned char>(ch))) ch = '_';
    return n;
});
