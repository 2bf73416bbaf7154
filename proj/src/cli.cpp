#include "manipsim/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <tuple>

#include <CLI11.hpp>
#include <json.hpp>

#include "manipsim/coeffs.hpp"
#include "manipsim/csv.hpp"
#include "manipsim/pricing.hpp"
#include "manipsim/simulate.hpp"
#include "manipsim/verify.hpp"

#ifndef MANIPSIM_VERSION
#define MANIPSIM_VERSION "unknown"
#endif

namespace manipsim::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

std::string default_out_dir() {
    const char* env = std::getenv("MANIPSIM_OUT");
    return env && *env ? std::string(env) : std::string("manipsim_out");
}

std::vector<double> fig1_lambdas(int model) {
    if (model == 3) return {-0.05, 0.0, 0.1};
    return {-0.1, 0.0, 1.0};
}

namespace {

std::string shortest(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return ec == std::errc() ? std::string(buf, ptr) : format_double(v);
}

std::string utc_timestamp() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

json params_json(const RawParams& r) {
    return json{{"s0", r.s0},         {"a", r.a},   {"g", r.g},   {"kappa", r.kappa},
                {"sigma", r.sigma},   {"T", r.T},   {"mu", r.mu}, {"lambda", r.lambda},
                {"q0", r.q0},         {"model", static_cast<int>(r.kind)}};
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(format_double(v)); }

/// Options shared by every model command. Explicit flags override the config file,
/// which overrides the reference parameter set.
struct Common {
    std::string config;
    int model = 1;
    RawParams values;
    std::map<std::string, CLI::Option*> given;
    std::string out;
    std::size_t steps = kDefaultSteps;
    unsigned threads = 0;

    void attach(CLI::App* app) {
        app->add_option("--config", config, "key = value parameter file");
        given["model"] = app->add_option("--model", model, "model 1, 2 or 3")->check(CLI::Range(1, 3));
        const std::pair<const char*, double*> fields[] = {
            {"s0", &values.s0}, {"a", &values.a},           {"g", &values.g},
            {"kappa", &values.kappa}, {"sigma", &values.sigma}, {"T", &values.T},
            {"mu", &values.mu}, {"lambda", &values.lambda}, {"q0", &values.q0},
        };
        for (auto [name, ptr] : fields) given[name] = app->add_option(std::string("--") + name, *ptr);
        app->add_option("--out", out, "output directory (default $MANIPSIM_OUT or ./manipsim_out)");
        app->add_option("--steps", steps, "coefficient grid steps")->check(CLI::PositiveNumber);
        app->add_option("--threads", threads, "worker threads, 0 = all cores");
    }

    RawParams resolve() const {
        RawParams r = config.empty() ? reference_params(ModelKind::Model1, 0.0) : load_config(config);
        auto set = [&](const char* name, double RawParams::*field) {
            if (given.at(name)->count() > 0) r.*field = values.*field;
        };
        set("s0", &RawParams::s0);
        set("a", &RawParams::a);
        set("g", &RawParams::g);
        set("kappa", &RawParams::kappa);
        set("sigma", &RawParams::sigma);
        set("T", &RawParams::T);
        set("mu", &RawParams::mu);
        set("lambda", &RawParams::lambda);
        set("q0", &RawParams::q0);
        if (given.at("model")->count() > 0) r.kind = model_kind_from_int(model);
        return r;
    }

    std::string out_dir() const { return out.empty() ? default_out_dir() : out; }

    /// Fully resolved argument list: re-running it needs no config file.
    std::vector<std::string> canonical(const std::string& command, const RawParams& r) const {
        return {command,        "--model", std::to_string(static_cast<int>(r.kind)),
                "--s0",         shortest(r.s0),    "--a",     shortest(r.a),
                "--g",          shortest(r.g),     "--kappa", shortest(r.kappa),
                "--sigma",      shortest(r.sigma), "--T",     shortest(r.T),
                "--mu",         shortest(r.mu),    "--lambda", shortest(r.lambda),
                "--q0",         shortest(r.q0),    "--out",   out_dir(),
                "--steps",      std::to_string(steps)};
    }
};

class Run {
public:
    Run(std::string command, const Common& common, const RawParams& raw, std::ostream& out)
        : dir_(common.out_dir()), out_(out) {
        fs::create_directories(dir_);
        manifest_["tool"] = "manipsim";
        manifest_["version"] = MANIPSIM_VERSION;
        manifest_["command"] = command;
        manifest_["argv"] = common.canonical(command, raw);
        manifest_["config_path"] = common.config;
        manifest_["params"] = params_json(raw);
        manifest_["seed"] = nullptr;
        manifest_["out_dir"] = dir_.string();
        manifest_["outputs"] = json::array();
    }

    void arg(const std::string& flag, const std::string& value) {
        manifest_["argv"].push_back(flag);
        if (!value.empty()) manifest_["argv"].push_back(value);
    }
    void seed(std::uint64_t s) { manifest_["seed"] = s; }
    json& extra(const std::string& key) { return manifest_[key]; }

    void write(const std::string& name, const std::function<void(std::ostream&)>& body) {
        write_file_atomic(dir_ / name, body);
        manifest_["outputs"].push_back(name);
        out_ << "wrote " << (dir_ / name).string() << "\n";
    }

    void finish() {
        manifest_["timestamp"] = utc_timestamp();
        write_file_atomic(dir_ / "manifest.json", [&](std::ostream& o) { o << manifest_.dump(2) << "\n"; });
    }

private:
    fs::path dir_;
    std::ostream& out_;
    json manifest_;
};

std::string_view bound_column(ModelKind kind) {
    switch (kind) {
        case ModelKind::Model1: return "D";
        case ModelKind::Model2: return "B";
        case ModelKind::Model3: return "Bw";
    }
    return "";
}

std::string_view riccati_column(ModelKind kind) {
    switch (kind) {
        case ModelKind::Model1: return "D";
        case ModelKind::Model2: return "A";
        case ModelKind::Model3: return "Av";
    }
    return "";
}

// ---------------------------------------------------------------- coeffs

int cmd_coeffs(const Common& common, std::ostream& out, std::ostream& err) {
    const RawParams raw = common.resolve();
    const auto p = ModelParams::validate(raw, AdmissibilityMode::ReportOnly);
    Run run("coeffs", common, raw, out);

    json adm;
    adm["model"] = static_cast<int>(p.kind());
    bool ok = true;
    std::string reason;
    if (p.kind() == ModelKind::Model1) {
        const auto rep = admissibility(p);
        adm["theta"] = rep.theta;
        adm["H"] = rep.H;
        adm["T_max"] = number_or_null(rep.t_max);
        adm["T_blowup"] = number_or_null(rep.t_blowup);
        ok = rep.admissible;
        reason = rep.reason;
    }
    std::optional<Coefficients> c;
    if (ok) {
        try {
            c = build_coefficients(p, common.steps);
        } catch (const DivergenceError& e) {
            ok = false;
            reason = e.what();
        }
    }
    if (c) {
        adm["bound_column"] = std::string(bound_column(p.kind()));
        adm["bound"] = -p.g() / (p.sigma() * p.sigma());
        adm["bound_min"] = c->bound_min;
        adm["bound_margin"] = c->bound_margin;
        adm["bound_t"] = c->bound_t;
        if (!c->bound_ok) {
            ok = false;
            std::ostringstream msg;
            msg << bound_column(p.kind()) << "(t) > -g/sigma^2 violated: min " << format_double(c->bound_min)
                << " at t = " << format_double(c->bound_t);
            reason = msg.str();
        }
        const std::string name = "coeffs_model" + std::to_string(static_cast<int>(p.kind())) + ".csv";
        run.write(name, [&](std::ostream& o) { write_csv(c->table, o); });
    }
    adm["admissible"] = ok;
    adm["reason"] = reason;
    run.extra("admissibility") = adm;
    run.write("admissibility.txt", [&](std::ostream& o) {
        for (const auto& [k, v] : adm.items()) {
            o << k << " = " << (v.is_string() ? v.get<std::string>() : v.dump()) << "\n";
        }
    });
    run.finish();
    if (!ok) {
        err << "inadmissible parameters: " << reason << "\n";
        return kInadmissible;
    }
    return kOk;
}

// ---------------------------------------------------------------- simulate

struct SimFlags {
    std::size_t paths = 10000;
    std::string measure = "P";
    std::uint64_t seed = 0;
    std::size_t emit_paths = 0;
    bool fig1 = false;
};

int cmd_simulate(const Common& common, const SimFlags& f, std::ostream& out) {
    const RawParams raw = common.resolve();
    const auto base = ModelParams::validate(raw, AdmissibilityMode::ReportOnly);
    Run run("simulate", common, raw, out);
    run.arg("--paths", std::to_string(f.paths));
    run.arg("--measure", f.measure);
    run.arg("--seed", std::to_string(f.seed));
    run.arg("--emit-paths", std::to_string(f.emit_paths));
    if (f.fig1) run.arg("--fig1", "");
    run.seed(f.seed);

    const int model = static_cast<int>(base.kind());
    const auto lambdas = f.fig1 ? fig1_lambdas(model) : std::vector<double>{raw.lambda};
    std::vector<Functional> functionals{Functional::TerminalQ, Functional::TerminalSTilde, Functional::TerminalPayoff,
                                        Functional::ProducerObjective, Functional::HedgeResidual};
    if (base.kind() == ModelKind::Model3) functionals.push_back(Functional::TraderObjective);

    std::ostringstream summary;
    summary << "lambda,h0,functional,mean,std_error,n\n";
    for (double lam : lambdas) {
        const auto p = base.with_lambda(lam);
        const auto c = build_coefficients(p, common.steps);
        SimConfig cfg;
        cfg.n_paths = f.paths;
        cfg.n_steps = common.steps;
        cfg.seed = f.seed;
        cfg.measure = measure_from_string(f.measure);
        cfg.keep_paths = f.emit_paths;
        cfg.threads = common.threads;
        const auto e = simulate(p, c, cfg);
        const std::string tag = f.fig1 ? "_lambda" + shortest(lam) : "";
        run.write("fig_sim" + tag + ".csv", [&](std::ostream& o) { write_mean_path_csv(e, o); });
        if (f.emit_paths > 0) run.write("paths" + tag + ".csv", [&](std::ostream& o) { write_paths_csv(e, o); });
        for (auto fn : functionals) {
            const auto m = estimate(fn, e);
            summary << format_double(lam) << ',' << format_double(e.h0) << ',' << to_string(fn) << ','
                    << format_double(m.mean) << ',' << format_double(m.std_error) << ',' << m.n << '\n';
        }
    }
    run.write("sim_summary.csv", [&](std::ostream& o) { o << summary.str(); });
    run.finish();
    return kOk;
}

// ---------------------------------------------------------------- sweep

struct SweepFlags {
    std::optional<double> lambda_min, lambda_max;
    std::size_t points = 57;
    std::size_t paths = 0;
    std::uint64_t seed = 0;
    std::string assignment = "v";
};

void write_ana_csv(const std::vector<std::tuple<double, double, PriceReport>>& rows, std::ostream& o) {
    o << "a,g,lambda,h0,h0_z0,E_hT_P,E_hT_se,v0,w0\n";
    for (const auto& [a, g, r] : rows) {
        const double nan = std::nan("");
        o << format_double(a) << ',' << format_double(g) << ',' << format_double(r.lambda) << ','
          << format_double(r.ok ? r.h0 : nan) << ',' << format_double(r.ok ? r.h0_no_manip : nan) << ','
          << format_double(r.ok && r.E_hT_P ? r.E_hT_P->mean : nan) << ','
          << format_double(r.ok && r.E_hT_P ? r.E_hT_P->std_error : nan) << ',' << format_double(r.ok ? r.v0 : nan)
          << ',' << format_double(r.ok ? r.w0 : nan) << '\n';
    }
}

int cmd_sweep(const Common& common, const SweepFlags& f, std::ostream& out, std::ostream& err) {
    const RawParams raw = common.resolve();
    const auto base = ModelParams::validate(raw, AdmissibilityMode::ReportOnly);
    Run run("sweep", common, raw, out);
    if (f.lambda_min) run.arg("--lambda-min", shortest(*f.lambda_min));
    if (f.lambda_max) run.arg("--lambda-max", shortest(*f.lambda_max));
    run.arg("--points", std::to_string(f.points));
    run.arg("--paths", std::to_string(f.paths));
    run.arg("--seed", std::to_string(f.seed));
    run.arg("--assignment", f.assignment);
    run.seed(f.seed);

    auto grid_for = [&](ModelKind kind) {
        const auto def = default_lambda_grid(kind);
        const double lo = f.lambda_min.value_or(def.front());
        const double hi = f.lambda_max.value_or(def.back());
        if (!(lo <= hi)) throw ParamError("lambda-min", "--lambda-min must not exceed --lambda-max");
        return with_baseline(linspace(lo, hi, f.points));
    };

    SweepOptions opt;
    opt.n_steps = common.steps;
    opt.assignment = f.assignment == "w" ? ValueAssignment::ProducerW : ValueAssignment::ProducerV;
    if (f.paths > 0) {
        SimConfig cfg;
        cfg.n_paths = f.paths;
        cfg.n_steps = common.steps;
        cfg.seed = f.seed;
        cfg.record_moments = false;
        cfg.threads = common.threads;
        opt.mc = cfg;
    }
    const auto lambdas = grid_for(base.kind());
    std::size_t skipped = 0;
    auto count = [&](const std::vector<PriceReport>& rs) {
        for (const auto& r : rs) {
            if (!r.ok) {
                ++skipped;
                err << "skipped lambda = " << shortest(r.lambda) << ": " << r.reason << "\n";
            }
        }
        return rs;
    };

    const auto v0w0 = count(sweep_lambda(base, lambdas, opt));
    run.write("fig_v0w0.csv", [&](std::ostream& o) { write_sweep_csv(v0w0, o); });

    RawParams at_star = raw;
    at_star.q0 = q_star(raw.s0, raw.a);
    const auto h0 = count(sweep_lambda(ModelParams::validate(at_star, AdmissibilityMode::ReportOnly), lambdas, opt));
    run.write("fig_h0.csv", [&](std::ostream& o) { write_sweep_csv(h0, o); });

    SweepOptions ana_opt = opt;
    ana_opt.mc.reset();
    const auto ana_lambdas = base.kind() == ModelKind::Model3 ? lambdas : grid_for(ModelKind::Model3);
    std::vector<std::tuple<double, double, PriceReport>> ana;
    for (double a : kAnaA) {
        for (double g : kAnaG) {
            RawParams r3 = raw;
            r3.kind = ModelKind::Model3;
            r3.a = a;
            r3.g = g;
            r3.q0 = q_star(raw.s0, a);
            for (auto& rep : count(sweep_lambda(ModelParams::validate(r3, AdmissibilityMode::ReportOnly),
                                                ana_lambdas, ana_opt))) {
                ana.emplace_back(a, g, std::move(rep));
            }
        }
    }
    run.write("fig_ana.csv", [&](std::ostream& o) { write_ana_csv(ana, o); });
    run.extra("skipped_lambdas") = skipped;
    run.finish();
    return kOk;
}

// ---------------------------------------------------------------- verify

struct VerifyFlags {
    std::string suite = "quick";
    std::size_t paths = 100000;
    std::uint64_t seed = 0;
};

CheckStatus threshold_status(double stat, double limit) {
    return stat <= limit ? CheckStatus::Pass : CheckStatus::Fail;
}

int cmd_verify(const Common& common, const VerifyFlags& f, std::ostream& out) {
    const RawParams raw = common.resolve();
    const auto p = ModelParams::validate(raw);
    Run run("verify", common, raw, out);
    run.arg("--suite", f.suite);
    run.arg("--paths", std::to_string(f.paths));
    run.arg("--seed", std::to_string(f.seed));
    run.seed(f.seed);

    const auto c = build_coefficients(p, common.steps);
    std::vector<CheckRow> rows;

    const auto hjb = hjb_residual(p, c, default_state_grid(p));
    rows.push_back({"hjb_pointwise", hjb.pointwise, 1e-6, threshold_status(hjb.pointwise, 1e-6)});
    rows.push_back({"hjb_consistency", hjb.consistency, 1e-6, threshold_status(hjb.consistency, 1e-6)});

    OdeSystem riccati{{"D"},
                      [&](double, std::span<const double> y, std::span<double> dy) { dy[0] = model1_D_rhs(p, y[0]); },
                      {0.0}};
    const auto rk4 = integrate_backward(riccati, c.table.grid());
    const auto closed = c.table.column(riccati_column(p.kind()));
    double dev = 0.0;
    for (std::size_t k = 0; k < closed.size(); ++k) dev = std::max(dev, std::abs(closed[k] - rk4.at(k, 0)));
    rows.push_back({"riccati_closed_vs_rk4", dev, 1e-8, threshold_status(dev, 1e-8)});
    rows.push_back({"volatility_bound_margin", c.bound_margin, 0.0,
                    c.bound_ok ? CheckStatus::Pass : CheckStatus::Fail});

    if (f.suite == "full") {
        SimConfig cfg;
        cfg.n_paths = f.paths;
        cfg.n_steps = common.steps;
        cfg.seed = f.seed;
        cfg.record_moments = false;
        cfg.threads = common.threads;
        const auto pert = perturbation_test(p, c, PerturbationSpec{}, cfg);
        for (const auto& r : pert.results) {
            const double zs = r.diff.std_error > 0.0 ? r.diff.mean / r.diff.std_error
                              : r.diff.mean < 0.0     ? -kInfinity
                                                      : 0.0;
            rows.push_back({"perturb_" + r.player + "_" + std::string(to_string(r.spec.kind)) + "_eps" +
                                shortest(r.spec.eps),
                            r.status == CheckStatus::Skipped ? std::nan("") : zs, -3.0, r.status});
        }
        if (p.kind() == ModelKind::Model1) {
            SimConfig xc = cfg;
            xc.record_moments = true;
            const auto x = cross_simulator_check(p, c, xc);
            rows.push_back({"cross_qT_mean", x.mean_z, x.threshold, threshold_status(x.mean_z, x.threshold)});
            rows.push_back({"cross_qT_variance", x.var_z, x.threshold, threshold_status(x.var_z, x.threshold)});
            rows.push_back({"cross_mean_path", x.mean_path_z, x.path_threshold,
                            threshold_status(x.mean_path_z, x.path_threshold)});
        }
    }

    run.write("checks.csv", [&](std::ostream& o) { write_checks_csv(rows, o); });
    bool failed = false;
    std::ostringstream report;
    for (const auto& r : rows) {
        report << to_string(r.status) << "  " << r.check << "  statistic = " << format_double(r.statistic)
               << "  threshold = " << format_double(r.threshold) << "\n";
        failed = failed || r.status == CheckStatus::Fail;
    }
    run.write("report.txt", [&](std::ostream& o) { o << report.str(); });
    out << report.str();
    run.extra("failed") = failed;
    run.finish();
    return failed ? kVerifyFailed : kOk;
}

// ---------------------------------------------------------------- rerun

int cmd_rerun(const std::string& manifest_path, const std::string& out_override, std::ostream& out,
              std::ostream& err) {
    std::ifstream in(manifest_path);
    if (!in) throw ParamError("", "cannot open manifest '" + manifest_path + "'");
    json m;
    try {
        m = json::parse(in);
    } catch (const json::exception& e) {
        throw ParamError("", "malformed manifest: " + std::string(e.what()));
    }
    if (!m.contains("argv") || !m["argv"].is_array()) throw ParamError("", "manifest has no argv");
    std::vector<std::string> args;
    for (const auto& a : m["argv"]) args.push_back(a.get<std::string>());
    if (args.empty() || args[0] == "rerun") throw ParamError("", "manifest argv is not a model command");
    if (!out_override.empty()) {
        auto it = std::find(args.begin(), args.end(), "--out");
        if (it != args.end() && it + 1 != args.end()) *(it + 1) = out_override;
    }
    return run(args, out, err);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app("Price-manipulation models: coefficients, simulation, pricing and verification", "manipsim");
    app.require_subcommand(1);
    app.set_version_flag("--version", MANIPSIM_VERSION);

    std::map<std::string, std::unique_ptr<Common>> commons;
    auto add = [&](const std::string& name, const std::string& help) {
        auto* sub = app.add_subcommand(name, help);
        commons[name] = std::make_unique<Common>();
        commons[name]->attach(sub);
        return sub;
    };

    add("coeffs", "write the coefficient table and admissibility report");

    SimFlags sim;
    auto* s = add("simulate", "Monte-Carlo paths under the optimal feedback");
    s->add_option("--paths", sim.paths)->check(CLI::PositiveNumber);
    s->add_option("--measure", sim.measure)->check(CLI::IsMember({"P", "Q"}));
    s->add_option("--seed", sim.seed);
    s->add_option("--emit-paths", sim.emit_paths, "store this many raw paths");
    s->add_flag("--fig1", sim.fig1, "run the three figure lambda scenarios");

    SweepFlags sw;
    auto* w = add("sweep", "price and value functions as a function of lambda");
    w->add_option("--lambda-min", sw.lambda_min);
    w->add_option("--lambda-max", sw.lambda_max);
    w->add_option("--points", sw.points)->check(CLI::PositiveNumber);
    w->add_option("--paths", sw.paths, "Monte-Carlo paths for E^P[h_T], 0 = off");
    w->add_option("--seed", sw.seed);
    w->add_option("--assignment", sw.assignment, "Model 3 producer block: v or w")->check(CLI::IsMember({"v", "w"}));

    VerifyFlags vf;
    auto* v = add("verify", "run the verification suite");
    v->add_option("--suite", vf.suite)->check(CLI::IsMember({"quick", "full"}));
    v->add_option("--paths", vf.paths)->check(CLI::Range(std::size_t{2}, std::size_t{0xffffffff}));
    v->add_option("--seed", vf.seed);

    std::string manifest_path, rerun_out;
    auto* r = app.add_subcommand("rerun", "repeat the command recorded in a manifest");
    r->add_option("manifest", manifest_path)->required();
    r->add_option("--out", rerun_out, "write to this directory instead of the recorded one");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kConfigError;
    }

    try {
        if (r->parsed()) return cmd_rerun(manifest_path, rerun_out, out, err);
        const std::string name = app.get_subcommands().front()->get_name();
        const Common& common = *commons.at(name);
        if (name == "coeffs") return cmd_coeffs(common, out, err);
        if (name == "simulate") return cmd_simulate(common, sim, out);
        if (name == "sweep") return cmd_sweep(common, sw, out, err);
        return cmd_verify(common, vf, out);
    } catch (const ParamError& e) {
        err << "config error: " << e.what() << "\n";
        return kConfigError;
    } catch (const AdmissibilityError& e) {
        err << "inadmissible parameters: " << e.what() << "\n";
        return kInadmissible;
    } catch (const DivergenceError& e) {
        err << "inadmissible parameters: " << e.what() << "\n";
        return kInadmissible;
    } catch (const std::invalid_argument& e) {
        err << "config error: " << e.what() << "\n";
        return kConfigError;
    } catch (const fs::filesystem_error& e) {
        err << "i/o error: " << e.what() << "\n";
        return kConfigError;
    }
}

}  // namespace manipsim::cli
