#include <doctest.h>

#include <fstream>
#include <json.hpp>
#include <sstream>

#include "manipsim/cli.hpp"
#include "manipsim/pricing.hpp"
#include "support.hpp"

using namespace manipsim;
namespace fs = std::filesystem;

namespace {

struct Result {
    int code;
    std::string out, err;
};

Result cli_run(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::vector<std::string> lines(const std::string& text) {
    std::vector<std::string> v;
    std::istringstream in(text);
    for (std::string l; std::getline(in, l);) v.push_back(l);
    return v;
}

std::vector<double> cells(const std::string& line) {
    std::vector<double> v;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');) v.push_back(std::stod(c));
    return v;
}

}  // namespace

TEST_CASE("coeffs writes the table and the admissibility report") {
    const auto dir = testing::scratch_dir("cli_coeffs");
    const auto r = cli_run({"coeffs", "--model", "3", "--lambda", "0.1", "--out", dir.string()});
    CHECK(r.code == cli::kOk);
    const auto table = lines(slurp(dir / "coeffs_model3.csv"));
    CHECK(table.size() == 10002);
    CHECK(table.front().rfind("t,Av,Bv,Cv,Dv,Ev,Fv,Aw,Bw", 0) == 0);
    CHECK(r.out.find("wrote") != std::string::npos);

    const auto m = nlohmann::json::parse(slurp(dir / "manifest.json"));
    CHECK(m["command"] == "coeffs");
    CHECK(m["params"]["lambda"] == 0.1);
    CHECK(m["admissibility"]["bound_column"] == "Bw");
    CHECK(m["admissibility"]["bound_margin"].get<double>() == doctest::Approx(0.011113).epsilon(1e-4));
    CHECK(m["admissibility"]["admissible"] == true);
    CHECK(slurp(dir / "admissibility.txt").find("admissible = true") != std::string::npos);
}

TEST_CASE("coeffs error codes") {
    const auto dir = testing::scratch_dir("cli_coeffs_err");
    const auto bad_t = cli_run({"coeffs", "--T", "0", "--out", dir.string()});
    CHECK(bad_t.code == cli::kConfigError);
    CHECK(bad_t.err.find("T > 0 required") != std::string::npos);

    const auto tmax = cli_run({"coeffs", "--g", "0.01", "--out", dir.string()});
    CHECK(tmax.code == cli::kInadmissible);
    CHECK(tmax.err.find("T >= T_max") != std::string::npos);

    CHECK(cli_run({"coeffs", "--model", "2", "--lambda", "-1", "--out", dir.string()}).code == cli::kInadmissible);
    const auto bw = cli_run({"coeffs", "--model", "3", "--lambda", "0.2", "--out", dir.string()});
    CHECK(bw.code == cli::kInadmissible);
    const auto m = nlohmann::json::parse(slurp(dir / "manifest.json"));
    CHECK(m["admissibility"]["bound_margin"].get<double>() < 0.0);

    CHECK(cli_run({"coeffs", "--model", "4"}).code == cli::kConfigError);
    CHECK(cli_run({"coeffs", "--bogus", "1"}).code == cli::kConfigError);
    CHECK(cli_run({"nothing"}).code == cli::kConfigError);
    CHECK(cli_run({}).code == cli::kConfigError);
    CHECK(cli_run({"coeffs", "--config", "/nonexistent.cfg"}).code == cli::kConfigError);
    CHECK(cli_run({"--help"}).code == cli::kOk);
}

TEST_CASE("config files and flag overrides") {
    const auto dir = testing::scratch_dir("cli_config");
    RawParams raw = reference_params(ModelKind::Model2, 0.3);
    raw.q0 = 2.0;
    {
        std::ofstream f(dir / "run.cfg");
        f << format_config(raw);
    }
    const auto r = cli_run({"coeffs", "--config", (dir / "run.cfg").string(), "--sigma", "0.5", "--out",
                            (dir / "o").string()});
    REQUIRE(r.code == cli::kOk);
    const auto m = nlohmann::json::parse(slurp(dir / "o" / "manifest.json"));
    CHECK(m["params"]["model"] == 2);
    CHECK(m["params"]["lambda"] == 0.3);
    CHECK(m["params"]["q0"] == 2.0);
    CHECK(m["params"]["sigma"] == 0.5);

    {
        std::ofstream f(dir / "bad.cfg");
        f << "s0 = 10\nunknown = 3\n";
    }
    const auto bad = cli_run({"coeffs", "--config", (dir / "bad.cfg").string(), "--out", dir.string()});
    CHECK(bad.code == cli::kConfigError);
    CHECK(bad.err.find("unknown") != std::string::npos);
}

TEST_CASE("simulate") {
    const auto dir = testing::scratch_dir("cli_sim");
    const std::vector<std::string> base{"simulate", "--steps", "200", "--paths", "2000", "--seed", "9", "--threads",
                                        "2"};
    auto args = base;
    for (auto s : {"--fig1", "--emit-paths", "3", "--out"}) args.push_back(s);
    args.push_back((dir / "a").string());
    REQUIRE(cli_run(args).code == cli::kOk);
    for (auto lam : {"-0.1", "0", "1"}) {
        CHECK(fs::exists(dir / "a" / (std::string("fig_sim_lambda") + lam + ".csv")));
        CHECK(lines(slurp(dir / "a" / (std::string("paths_lambda") + lam + ".csv"))).size() == 1 + 3 * 201);
    }
    CHECK(lines(slurp(dir / "a" / "fig_sim_lambda1.csv")).size() == 202);

    // Same seed, different thread count: byte-identical output.
    args.back() = (dir / "b").string();
    args[8] = "1";
    REQUIRE(cli_run(args).code == cli::kOk);
    for (auto name : {"fig_sim_lambda1.csv", "paths_lambda0.csv", "sim_summary.csv"}) {
        CHECK(slurp(dir / "a" / name) == slurp(dir / "b" / name));
    }

    // Under Q production has no drift: E[q_T] = q0.
    auto q = base;
    for (auto s : {"--measure", "Q", "--q0", "3", "--out"}) q.push_back(s);
    q.push_back((dir / "q").string());
    REQUIRE(cli_run(q).code == cli::kOk);
    bool found = false;
    for (const auto& l : lines(slurp(dir / "q" / "sim_summary.csv"))) {
        if (l.find(",terminal_q,") == std::string::npos) continue;
        found = true;
        const auto first = l.find(",terminal_q,") + 12;
        const auto v = cells(l.substr(first));
        CHECK(std::abs(v[0] - 3.0) < 4 * v[1]);
    }
    CHECK(found);

    CHECK(cli_run({"simulate", "--measure", "R"}).code == cli::kConfigError);
    CHECK(cli_run({"simulate", "--paths", "0"}).code == cli::kConfigError);
}

TEST_CASE("sweep") {
    const auto dir = testing::scratch_dir("cli_sweep");
    const auto r = cli_run({"sweep", "--lambda-min", "0.37", "--lambda-max", "0.37", "--points", "1", "--steps",
                            "1000", "--out", dir.string()});
    REQUIRE(r.code == cli::kOk);
    const auto rows = lines(slurp(dir / "fig_v0w0.csv"));
    REQUIRE(rows.size() == 3);  // header, baseline and the requested point
    CHECK(rows[0] == "lambda,h0,h0_z0,E_hT_P,E_hT_se,v0,w0");
    const auto v = cells(rows[2]);
    const auto p = testing::fig1(ModelKind::Model1, 0.37);
    const auto c = build_coefficients(p, 1000);
    CHECK(v[0] == 0.37);
    CHECK(v[1] == price_h(p, c, 0.0, p.q0()));
    CHECK(v[5] == value_functions(p, c).v0);
    CHECK(cells(rows[1])[0] == 0.0);

    const auto h0 = lines(slurp(dir / "fig_h0.csv"));
    CHECK(cells(h0[2])[1] == price_h(p.with_q0(q_star(p)), c, 0.0, q_star(p)));
    CHECK(fs::exists(dir / "fig_ana.csv"));
}

TEST_CASE("verify quick suite") {
    const auto dir = testing::scratch_dir("cli_verify");
    const auto r = cli_run({"verify", "--lambda", "1", "--out", dir.string()});
    CHECK(r.code == cli::kOk);
    const auto checks = lines(slurp(dir / "checks.csv"));
    CHECK(checks[0] == "check,statistic,threshold,status");
    CHECK(checks.size() >= 4);
    for (std::size_t i = 1; i < checks.size(); ++i) CHECK(checks[i].find("FAIL") == std::string::npos);
    CHECK(fs::exists(dir / "report.txt"));
}

TEST_CASE("rerun reproduces outputs") {
    const auto dir = testing::scratch_dir("cli_rerun");
    REQUIRE(cli_run({"simulate", "--model", "2", "--lambda", "0.5", "--steps", "100", "--paths", "500", "--seed",
                     "4", "--out", (dir / "first").string()})
                .code == cli::kOk);
    const auto rr = cli_run({"rerun", (dir / "first" / "manifest.json").string(), "--out", (dir / "second").string()});
    REQUIRE(rr.code == cli::kOk);
    for (auto name : {"fig_sim.csv", "sim_summary.csv"}) {
        CHECK(slurp(dir / "first" / name) == slurp(dir / "second" / name));
    }
    CHECK(cli_run({"rerun", (dir / "missing.json").string()}).code == cli::kConfigError);
}

TEST_CASE("default output directory") {
    ::setenv("MANIPSIM_OUT", "/tmp/manipsim_env_out", 1);
    CHECK(cli::default_out_dir() == "/tmp/manipsim_env_out");
    ::unsetenv("MANIPSIM_OUT");
    CHECK(cli::default_out_dir() == "manipsim_out");
    CHECK(cli::fig1_lambdas(3) == std::vector<double>{-0.05, 0.0, 0.1});
}
