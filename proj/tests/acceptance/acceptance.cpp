// Acceptance gate: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Usage: acceptance <scratch dir> [--only N,M,...]

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "manipsim/cli.hpp"
#include "manipsim/pricing.hpp"
#include "manipsim/verify.hpp"

using namespace manipsim;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what) {
        if (!ok) pass = false;
        detail << "\n    " << (ok ? "ok   " : "FAIL ") << what;
    }
};

std::string num(double x, int prec = 6) {
    std::ostringstream s;
    s << std::setprecision(prec) << x;
    return s.str();
}

ModelParams fig1(ModelKind kind, double lambda, AdmissibilityMode mode = AdmissibilityMode::Enforce) {
    return ModelParams::validate(reference_params(kind, lambda), mode);
}

// ------------------------------------------------------------------ CSV helpers

struct Csv {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    std::size_t col(const std::string& name) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return i;
        throw std::runtime_error("missing column " + name);
    }
};

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');) out.push_back(c);
    return out;
}

Csv read_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    Csv csv;
    std::string line;
    std::getline(in, line);
    csv.header = split(line);
    while (std::getline(in, line)) {
        std::vector<double> row;
        for (const auto& c : split(line)) row.push_back(c == "nan" ? NAN : std::stod(c));
        csv.rows.push_back(std::move(row));
    }
    return csv;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

int cli(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    if (code != cli::kOk) std::cerr << "  manipsim " << args[0] << " exited " << code << ": " << err.str();
    return code;
}

// ------------------------------------------------------------------ criteria

Outcome closed_form() {
    Outcome o;
    for (double lam : {-0.1, 0.0, 0.2, 1.0}) {
        // The coefficient table stores the closed form, so the Riccati is integrated here on its own.
        const auto p = fig1(ModelKind::Model1, lam);
        const TimeGrid grid(p.T(), kDefaultSteps);
        OdeSystem sys{{"D"}, [&p](double, std::span<const double> y, std::span<double> dy) {
                          dy[0] = model1_D_rhs(p, y[0]);
                      }, {0.0}};
        const auto rk4 = integrate_backward(sys, grid);
        double err = 0.0;
        for (std::size_t k = 0; k < grid.size(); ++k)
            err = std::max(err, std::abs(rk4.at(k, 0) - model1_D_closed(p, grid.at(k))));
        o.require(err <= 1e-8, "lambda=" + num(lam) + " max|D_rk4 - D_closed| = " + num(err, 3));
    }
    return o;
}

Outcome identities() {
    Outcome o;
    auto max_diff = [](const std::vector<double>& x, const std::vector<double>& y, double scale = 1.0) {
        double m = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) m = std::max(m, std::abs(x[i] - scale * y[i]));
        return m;
    };
    for (double lam : {-0.1, 0.0, 0.1, 1.0}) {
        const auto c1 = build_coefficients(fig1(ModelKind::Model1, lam));
        const auto c2 = build_coefficients(fig1(ModelKind::Model2, lam));
        const auto c3 = build_coefficients(fig1(ModelKind::Model3, lam));
        const double s0 = fig1(ModelKind::Model1, lam).s0();
        const double d12 = max_diff(c1.table.column("D"), c2.table.column("A"));
        const double d13 = max_diff(c1.table.column("D"), c3.table.column("Av"));
        const double d23 = max_diff(c2.table.column("C"), c3.table.column("Cv"));
        const double e13 = max_diff(c1.table.column("E"), c3.table.column("Cv"), s0);
        const std::string tag = "lambda=" + num(lam) + " ";
        o.require(d12 <= 1e-8, tag + "M1.D vs M2.A " + num(d12, 3));
        o.require(d13 <= 1e-8, tag + "M1.D vs M3.Av " + num(d13, 3));
        o.require(d23 <= 1e-8, tag + "M2.C vs M3.Cv " + num(d23, 3));
        o.require(e13 <= 1e-8, tag + "M1.E vs s0*M3.Cv " + num(e13, 3));
    }
    return o;
}

Outcome hjb() {
    Outcome o;
    const std::map<ModelKind, std::vector<double>> lambdas{{ModelKind::Model1, {-0.1, 0.0, 1.0}},
                                                           {ModelKind::Model2, {-0.1, 0.0, 1.0}},
                                                           {ModelKind::Model3, {-0.05, 0.0, 0.1}}};
    for (const auto& [kind, lams] : lambdas) {
        for (double lam : lams) {
            const auto p = fig1(kind, lam);
            const auto rep = hjb_residual(p, build_coefficients(p), default_state_grid(p));
            o.require(rep.max_abs_residual <= 1e-6, std::string(to_string(kind)) + " lambda=" + num(lam) +
                                                        " residual " + num(rep.max_abs_residual, 3) + " (" +
                                                        std::to_string(rep.points) + " states)");
        }
    }
    return o;
}

Outcome fair_pricing() {
    Outcome o;
    const std::map<ModelKind, std::vector<double>> lambdas{{ModelKind::Model1, {-0.1, 0.0, 0.2, 1.0}},
                                                           {ModelKind::Model2, {-0.1, 0.0, 0.2, 1.0}},
                                                           {ModelKind::Model3, {-0.05, 0.0, 0.1}}};
    for (const auto& [kind, lams] : lambdas) {
        for (double lam : lams) {
            const auto p = fig1(kind, lam);
            const auto c = build_coefficients(p, kDefaultSteps);
            SimConfig cfg;
            cfg.n_paths = 100000;
            cfg.n_steps = kDefaultSteps;
            cfg.measure = Measure::Q;
            cfg.seed = 20240401;
            cfg.record_moments = false;
            const auto est = estimate(Functional::TerminalPayoff, simulate(p, c, cfg));
            const double h0 = price_h(p, c, 0.0, p.q0(), p.s0());
            const double z = (est.mean - h0) / est.std_error;
            o.require(std::abs(z) <= 3.0, std::string(to_string(kind)) + " lambda=" + num(lam) + " h0=" + num(h0, 8) +
                                              " E^Q[h_T]=" + num(est.mean, 8) + " SE=" + num(est.std_error, 3) +
                                              " z=" + num(z, 3));
        }
    }
    return o;
}

Outcome martingale() {
    Outcome o;
    for (double lam : {-0.1, 0.0, 1.0}) {
        const auto p = fig1(ModelKind::Model1, lam).with_q0(3.0);
        const auto c = build_coefficients(p, kDefaultSteps);
        SimConfig cfg;
        cfg.n_paths = 40000;
        cfg.n_steps = kDefaultSteps;
        cfg.measure = Measure::Q;
        cfg.seed = 77;
        cfg.record_moments = false;
        const auto e = simulate(p, c, cfg);
        const auto m1 = estimate(Functional::TerminalQ, e);
        const auto m2 = estimate(Functional::TerminalQSquared, e);

        // q0^2 + int sigma^2 (1 + sigma^2 D / g) dt by the trapezoid rule on the table.
        const auto D = c.table.column("D");
        std::vector<double> f(D.size());
        const double s2 = p.sigma() * p.sigma();
        for (std::size_t k = 0; k < D.size(); ++k) f[k] = s2 * (1.0 + s2 * D[k] / p.g());
        const double second = p.q0() * p.q0() + tail_trapezoid(c.table.grid(), f)[0];

        const double z1 = (m1.mean - p.q0()) / m1.std_error, z2 = (m2.mean - second) / m2.std_error;
        const std::string tag = "lambda=" + num(lam) + " ";
        o.require(std::abs(z1) <= 3.0, tag + "E[q_T]=" + num(m1.mean) + " vs q0=" + num(p.q0()) + " z=" + num(z1, 3));
        o.require(std::abs(z2) <= 3.0,
                  tag + "E[q_T^2]=" + num(m2.mean) + " vs " + num(second) + " z=" + num(z2, 3));
    }
    return o;
}

Outcome threshold() {
    Outcome o;
    const double star = lambda_threshold(fig1(ModelKind::Model1, 0.0));
    o.require(std::abs(star - 0.2) < 1e-12, "lambda* = " + num(star, 15));
    auto z0 = [](double lam) {
        const auto p = fig1(ModelKind::Model1, lam);
        return Policy(p, build_coefficients(p)).row(0).z;
    };
    const double below = z0(0.19), above = z0(0.21);
    o.require(below < 0.0, "z(0) at lambda=0.19 is " + num(below, 4));
    o.require(above > 0.0, "z(0) at lambda=0.21 is " + num(above, 4));
    const auto c = build_coefficients(fig1(ModelKind::Model1, 0.2));
    double dmax = 0.0;
    for (double d : c.table.column("D")) dmax = std::max(dmax, std::abs(d));
    o.require(dmax <= 1e-10, "max|D| at lambda=0.2 is " + num(dmax, 3));
    return o;
}

Outcome positivity() {
    Outcome o;
    for (double lam : {-1.0, -0.1, 0.0, 0.1, 1.0}) {
        const std::string tag = "lambda=" + num(lam) + " ";
        try {
            const auto p = fig1(ModelKind::Model2, lam);
            const auto c = build_coefficients(p);
            const Policy pol(p, c);
            double zmin = INFINITY;
            for (const auto& r : pol.rows()) zmin = std::min(zmin, r.z);
            o.require(zmin >= 0.0, tag + "min z = " + num(zmin, 4));
        } catch (const DivergenceError& e) {
            o.require(false, tag + "no solution on [0,T]: " + e.what());
        }
    }
    return o;
}

Outcome perturbation() {
    Outcome o;
    const std::vector<std::pair<ModelKind, double>> cases{
        {ModelKind::Model1, 1.0}, {ModelKind::Model2, 1.0}, {ModelKind::Model3, 0.1}};
    for (const auto& [kind, lam] : cases) {
        const auto p = fig1(kind, lam);
        const auto c = build_coefficients(p, kDefaultSteps);
        PerturbationSpec spec;
        spec.eps = {0.25, -0.25, 0.5, -0.5};
        spec.channels = {Deviation::UAdd, Deviation::ZShift};
        SimConfig cfg;
        cfg.n_paths = 100000;
        cfg.n_steps = kDefaultSteps;
        cfg.seed = 4242;
        const auto rep = perturbation_test(p, c, spec, cfg);
        for (const auto& r : rep.results) {
            const std::string what = std::string(to_string(kind)) + " lambda=" + num(lam) + " " + r.player + " " +
                                     std::string(to_string(r.spec.kind)) + " eps=" + num(r.spec.eps);
            if (r.status == CheckStatus::Skipped) {
                o.detail << "\n    skip " << what << " (inadmissible: reaches z <= -1)";
                continue;
            }
            const double z = r.diff.std_error > 0 ? r.diff.mean / r.diff.std_error : 0.0;
            o.require(r.status == CheckStatus::Pass,
                      what + " diff=" + num(r.diff.mean, 4) + " SE=" + num(r.diff.std_error, 3) + " z=" + num(z, 3));
        }
    }
    return o;
}

Outcome figures(const fs::path& dir) {
    Outcome o;
    const std::string steps = std::to_string(kDefaultSteps);

    // (a) mean production path, Model 1 at the figure lambdas.
    const auto sim = dir / "fig_sim";
    if (cli({"simulate", "--model", "1", "--fig1", "--paths", "10000", "--seed", "1", "--out", sim.string()}) != 0) {
        o.require(false, "(a) simulate failed");
    } else {
        const double qs = q_star(fig1(ModelKind::Model1, 0.0));
        for (double lam : cli::fig1_lambdas(1)) {
            std::ostringstream name;
            name << "fig_sim_lambda" << lam << ".csv";
            const auto csv = read_csv(sim / name.str());
            const auto jq = csv.col("q_mean");
            const double mid = csv.rows[csv.rows.size() / 2][jq];
            const double end = csv.rows.back()[jq];
            const std::string tag = "(a) lambda=" + num(lam) + " ";
            o.require(std::abs(mid - qs) < 0.5, tag + "q_mean(T/2)=" + num(mid, 4) + " near q*=" + num(qs));
            if (lam == 0.0) {
                o.require(std::abs(end - qs) < 0.5, tag + "q_mean(T)=" + num(end, 4) + " stays at q*");
            } else {
                // q_T - q* carries sign(lambda), so S_tilde departs with the opposite sign.
                o.require((end - qs) * lam > 0 && std::abs(end - qs) > 1.0,
                          tag + "q_mean(T)-q*=" + num(end - qs, 4) + " has the sign of lambda");
            }
        }
    }

    // Sweeps: fig_v0w0.csv at q0 = 0, fig_h0.csv at q0 = q*.
    auto sweep = [&](int model, const std::string& assignment) {
        const auto out = dir / ("sweep_m" + std::to_string(model) + assignment);
        const int code = cli({"sweep", "--model", std::to_string(model), "--assignment", assignment, "--out",
                              out.string(), "--steps", steps});
        return code == 0 ? out : fs::path{};
    };
    auto baseline = [](const Csv& csv) -> const std::vector<double>* {
        for (const auto& r : csv.rows)
            if (r[0] == 0.0) return &r;
        return nullptr;
    };

    // (b) Model 1 v0(lambda) >= v0(0) for lambda > 0.
    if (const auto d = sweep(1, "v"); d.empty()) {
        o.require(false, "(b) sweep failed");
    } else {
        const auto csv = read_csv(d / "fig_v0w0.csv");
        const auto* base = baseline(csv);
        const auto jv = csv.col("v0");
        std::size_t n = 0, bad = 0;
        double worst = INFINITY;
        for (const auto& r : csv.rows) {
            if (!(r[0] > 0) || std::isnan(r[jv])) continue;
            ++n;
            worst = std::min(worst, r[jv] - (*base)[jv]);
            bad += r[jv] < (*base)[jv];
        }
        o.require(base && n > 0 && bad == 0, "(b) Model 1: " + std::to_string(n) + " lambdas > 0, min v0-v0(0) = " +
                                                 num(worst, 4));
    }

    // (c) Model 2 h0 >= h0 with z = 0 for every swept lambda.
    if (const auto d = sweep(2, "v"); d.empty()) {
        o.require(false, "(c) sweep failed");
    } else {
        for (const auto* file : {"fig_v0w0.csv", "fig_h0.csv"}) {
            const auto csv = read_csv(d / file);
            const auto jh = csv.col("h0"), jz = csv.col("h0_z0");
            std::size_t n = 0, skipped = 0, bad = 0;
            double worst = INFINITY;
            for (const auto& r : csv.rows) {
                if (std::isnan(r[jh])) {
                    ++skipped;
                    continue;
                }
                ++n;
                worst = std::min(worst, r[jh] - r[jz]);
                bad += r[jh] < r[jz] - 1e-12;
            }
            o.require(n > 0 && bad == 0, std::string("(c) Model 2 ") + file + ": " + std::to_string(n) +
                                             " lambdas, min h0-h0_z0 = " + num(worst, 4) + ", " +
                                             std::to_string(skipped) + " without a solution");
        }
    }

    // (d) Model 3 at q0 = q*: some lambda < 0 with v0 and w0 both above their lambda = 0 values.
    bool any_assignment = false;
    for (const std::string assignment : {"v", "w"}) {
        const auto d = sweep(3, assignment);
        if (d.empty()) continue;
        const auto csv = read_csv(d / "fig_h0.csv");
        const auto* base = baseline(csv);
        const auto jv = csv.col("v0"), jw = csv.col("w0");
        std::size_t n = 0;
        double best_w = -INFINITY, best_v = -INFINITY;
        bool found = false;
        for (const auto& r : csv.rows) {
            if (!(r[0] < 0) || std::isnan(r[jv])) continue;
            ++n;
            best_v = std::max(best_v, r[jv] - (*base)[jv]);
            best_w = std::max(best_w, r[jw] - (*base)[jw]);
            found = found || (r[jv] > (*base)[jv] && r[jw] > (*base)[jw]);
        }
        any_assignment = any_assignment || found;
        o.detail << "\n    info (d) assignment " << assignment << ": " << n
                 << " lambdas < 0, max v0-v0(0) = " << num(best_v, 4) << ", max w0-w0(0) = " << num(best_w, 4)
                 << (found ? ", joint gain found" : ", no joint gain");
    }
    o.require(any_assignment, "(d) Model 3: lambda < 0 with v0 > v0(0) and w0 > w0(0)");

    // (e) Model 3 sign(z(0)) = -sign(lambda) at the figure lambdas, read from the coefficient tables.
    for (double lam : cli::fig1_lambdas(3)) {
        const auto d = dir / ("coeffs_m3_" + num(lam));
        if (cli({"coeffs", "--model", "3", "--lambda", num(lam, 17), "--out", d.string(), "--steps", steps}) != 0) {
            o.require(false, "(e) coeffs failed at lambda=" + num(lam));
            continue;
        }
        const auto csv = read_csv(d / "coeffs_model3.csv");
        const auto p = fig1(ModelKind::Model3, lam);
        const double z0 = p.sigma() * p.sigma() * csv.rows.front()[csv.col("Bw")] / p.g();
        const int sz = (z0 > 0) - (z0 < 0), sl = (lam > 0) - (lam < 0);
        o.require(sz == -sl, "(e) lambda=" + num(lam) + " z(0)=" + num(z0, 4));
    }
    return o;
}

Outcome determinism(const fs::path& dir) {
    Outcome o;
    const auto first = dir / "first", second = dir / "second", third = dir / "third";
    const std::vector<std::string> sim{"simulate", "--model", "2", "--fig1", "--paths", "5000", "--steps", "2000",
                                       "--seed", "99", "--emit-paths", "2", "--out"};
    auto a = sim;
    a.push_back(first.string());
    auto b = sim;
    b.push_back(second.string());
    const bool ran = cli(a) == 0 && cli(b) == 0 &&
                     cli({"rerun", (first / "manifest.json").string(), "--out", third.string()}) == 0 &&
                     cli({"sweep", "--model", "3", "--points", "9", "--paths", "500", "--seed", "5", "--steps", "1000",
                          "--out", (first / "sweep").string()}) == 0 &&
                     cli({"rerun", (first / "sweep" / "manifest.json").string(), "--out",
                          (second / "sweep").string()}) == 0;
    o.require(ran, "runs completed");
    if (!ran) return o;
    std::size_t compared = 0, differ = 0;
    for (const auto& entry : fs::recursive_directory_iterator(first)) {
        if (entry.path().extension() != ".csv") continue;
        const auto rel = fs::relative(entry.path(), first);
        for (const auto& other : {second, third}) {
            if (!fs::exists(other / rel)) continue;
            ++compared;
            if (slurp(entry.path()) != slurp(other / rel)) {
                ++differ;
                o.detail << "\n    differs: " << (other / rel).string();
            }
        }
    }
    o.require(compared >= 10 && differ == 0,
              std::to_string(compared) + " CSV pairs compared byte-for-byte, " + std::to_string(differ) + " differ");
    return o;
}

}  // namespace

int main(int argc, char** argv) {
    const fs::path dir = argc > 1 ? argv[1] : "acceptance_out";
    std::set<int> only;
    for (int i = 2; i + 1 < argc; ++i) {
        if (std::string(argv[i]) != "--only") continue;
        std::stringstream ss(argv[i + 1]);
        for (std::string n; std::getline(ss, n, ',');) only.insert(std::stoi(n));
    }
    fs::remove_all(dir);
    fs::create_directories(dir);

    struct Criterion {
        int id;
        std::string name;
        double budget_s;  // 0 = none
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria{
        {1, "closed-form D vs RK4", 1, closed_form},
        {2, "cross-model identities", 5, identities},
        {3, "HJB residuals", 5, hjb},
        {4, "fair pricing under Q", 300, fair_pricing},
        {5, "Q-martingale and Ito isometry", 60, martingale},
        {6, "volatility threshold law", 0, threshold},
        {7, "Model 2 volatility positivity", 0, positivity},
        {8, "optimality by perturbation", 600, perturbation},
        {9, "figure-level reproduction", 600, [&] { return figures(dir / "figures"); }},
        {10, "determinism", 0, [&] { return determinism(dir / "determinism"); }},
    };

    int failed = 0;
    std::ostringstream summary;
    for (const auto& c : criteria) {
        if (!only.empty() && !only.count(c.id)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o.require(false, std::string("exception: ") + e.what());
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (c.budget_s > 0) o.require(secs < c.budget_s, "runtime " + num(secs, 3) + " s < " + num(c.budget_s) + " s");
        std::ostringstream line;
        line << "criterion " << std::setw(2) << c.id << ": " << (o.pass ? "PASS" : "FAIL") << "  " << c.name << "  ("
             << std::fixed << std::setprecision(2) << secs << " s)";
        std::cout << line.str() << o.detail.str() << "\n" << std::flush;
        summary << line.str() << "\n";
        failed += !o.pass;
    }
    std::cout << "\n" << summary.str() << (failed ? std::to_string(failed) + " criteria failed\n" : "all criteria passed\n");
    return failed ? 1 : 0;
}
