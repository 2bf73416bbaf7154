#include "manipsim/verify.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "manipsim/csv.hpp"
#include "manipsim/policy.hpp"
#include "manipsim/pricing.hpp"
#include "manipsim/rng.hpp"

namespace manipsim {

std::string_view to_string(CheckStatus s) {
    switch (s) {
        case CheckStatus::Pass: return "PASS";
        case CheckStatus::Fail: return "FAIL";
        case CheckStatus::Inconclusive: return "INCONCLUSIVE";
        case CheckStatus::Skipped: return "SKIPPED";
    }
    return "UNKNOWN";
}

std::string_view to_string(Deviation d) {
    switch (d) {
        case Deviation::UAdd: return "u_add";
        case Deviation::UMul: return "u_mul";
        case Deviation::ZShift: return "z_shift";
    }
    return "unknown";
}

StateGrid default_state_grid(const ModelParams& p) {
    StateGrid g;
    g.t = linspace(0.0, p.T(), 5);
    if (p.kind() == ModelKind::Model1) {
        g.q = linspace(-5.0, 25.0, 11);
        g.s = {p.s0()};
    } else {
        g.q = linspace(-5.0, 25.0, 5);
        g.s = linspace(0.0, 20.0, 5);
    }
    return g;
}

namespace {

// Quadratic form k0 q^2 + k1 s^2 + k2 q s + k3 q + k4 s + k5 and its partials.
struct Quad {
    double val, dq, ds, dss;
};

Quad quad2(std::span<const double> k, double q, double s) {
    return {k[0] * q * q + k[1] * s * s + k[2] * q * s + k[3] * q + k[4] * s + k[5],
            2.0 * k[0] * q + k[2] * s + k[3], 2.0 * k[1] * s + k[2] * q + k[4], 2.0 * k[1]};
}

// Largest |y_{k+2} - y_k - Simpson(y')| over the table, scaled by max(1, max |y|) per column.
double table_consistency(const ModelParams& p, const Coefficients& c, std::string& worst_col) {
    const auto& tab = c.table;
    const std::size_t n = tab.grid().n_steps(), m = tab.cols();
    const double h = tab.grid().step();
    std::vector<double> d(tab.rows() * m);
    for (std::size_t k = 0; k < tab.rows(); ++k) {
        coefficient_derivatives(p, c.kind, tab.row(k), std::span<double>(d.data() + k * m, m));
    }
    std::vector<double> scale(m, 1.0);
    for (std::size_t k = 0; k < tab.rows(); ++k) {
        for (std::size_t j = 0; j < m; ++j) scale[j] = std::max(scale[j], std::abs(tab.at(k, j)));
    }
    double worst = 0.0;
    auto consider = [&](std::size_t j, double err) {
        err /= scale[j];
        if (!(err <= worst)) {
            worst = err;
            worst_col = tab.names()[j];
        }
    };
    std::size_t k = 0;
    for (; k + 2 <= n; k += 2) {
        for (std::size_t j = 0; j < m; ++j) {
            const double simpson = h / 3.0 * (d[k * m + j] + 4.0 * d[(k + 1) * m + j] + d[(k + 2) * m + j]);
            consider(j, std::abs(tab.at(k + 2, j) - tab.at(k, j) - simpson));
        }
    }
    if (k < n) {  // odd step count: close with the trapezoid rule
        for (std::size_t j = 0; j < m; ++j) {
            const double trap = 0.5 * h * (d[k * m + j] + d[(k + 1) * m + j]);
            consider(j, std::abs(tab.at(k + 1, j) - tab.at(k, j) - trap));
        }
    }
    return worst;
}

}  // namespace

ResidualReport hjb_residual(const ModelParams& p, const Coefficients& c, const StateGrid& grid) {
    if (p.kind() != c.kind) throw std::invalid_argument("hjb_residual: parameter and coefficient models differ");
    ResidualReport rep;
    const double a = p.a(), k = p.kappa(), g = p.g(), lam = p.lambda(), mu = p.mu(), s0 = p.s0();
    const double s2 = p.sigma() * p.sigma();
    const std::size_t m = c.table.cols();
    std::vector<double> dy(m);

    auto note = [&](double r, const char* eq, double t, double q, double s) {
        ++rep.points;
        if (!(std::abs(r) <= rep.pointwise)) {
            rep.pointwise = std::abs(r);
            rep.worst_equation = eq;
            rep.worst_t = t;
            rep.worst_q = q;
            rep.worst_s = s;
        }
    };

    for (double t : grid.t) {
        const auto row = interpolate(c.table, t);
        coefficient_derivatives(p, c.kind, row, dy);
        const auto f = feedback_from_row(p, c.kind, row);
        const double z = f.z;
        for (double q : grid.q) {
            if (c.kind == ModelKind::Model1) {
                const double D = row[3], E = row[4];
                const double vt = dy[3] * q * q + dy[4] * q + dy[5];
                const double vq = 2.0 * D * q + E, vqq = 2.0 * D;
                const double phi_q = 2.0 * row[0] * q + row[1];
                const double u = f.uq * q + f.u0;
                const double ham = q * (s0 - a * q) - 0.5 * g * z * z - 0.5 * k * u * u - lam * phi_q * u + u * vq +
                                   0.5 * s2 * (1.0 + z) * vqq;
                note(vt + ham, "producer", t, q, s0);
                continue;
            }
            for (double s : grid.s) {
                const double u = f.uq * q + f.us * s + f.u0;
                const double phi_s = 2.0 * (s - a * q);
                const auto v = quad2(std::span<const double>(row).subspan(0, 6), q, s);
                const auto vt = quad2(std::span<const double>(dy).subspan(0, 6), q, s).val;
                const bool trader_z = c.kind == ModelKind::Model3;
                const double ham_v = q * (s - a * q) - (trader_z ? 0.0 : 0.5 * g * z * z) - 0.5 * k * u * u -
                                     lam * phi_s * (mu - a * u) + v.dq * u + v.ds * mu + 0.5 * s2 * (1.0 + z) * v.dss;
                note(vt + ham_v, "producer", t, q, s);
                if (trader_z) {
                    const auto w = quad2(std::span<const double>(row).subspan(6, 6), q, s);
                    const auto wt = quad2(std::span<const double>(dy).subspan(6, 6), q, s).val;
                    const double ham_w = -0.5 * g * z * z + lam * phi_s * (mu - a * u) + w.dq * u + w.ds * mu +
                                         0.5 * s2 * (1.0 + z) * w.dss;
                    note(wt + ham_w, "trader", t, q, s);
                }
            }
        }
    }
    rep.consistency = table_consistency(p, c, rep.worst_column);
    rep.max_abs_residual = std::max(rep.pointwise, rep.consistency);
    return rep;
}

bool PerturbationReport::all_pass() const {
    return std::all_of(results.begin(), results.end(),
                       [](const auto& r) { return r.status == CheckStatus::Pass || r.status == CheckStatus::Skipped; });
}

bool PerturbationReport::any_fail() const {
    return std::any_of(results.begin(), results.end(), [](const auto& r) { return r.status == CheckStatus::Fail; });
}

PerturbationReport perturbation_test(const ModelParams& p, const Coefficients& c, const PerturbationSpec& spec,
                                     const SimConfig& cfg) {
    if (p.kind() != c.kind) throw std::invalid_argument("perturbation_test: parameter and coefficient models differ");
    if (cfg.n_paths < 2) throw std::invalid_argument("perturbation_test: n_paths >= 2 required");
    const auto& cgrid = c.table.grid();
    const bool same_grid = cfg.n_steps == cgrid.n_steps();
    if (!same_grid && !cfg.allow_interpolation) {
        throw std::invalid_argument("perturbation_test: n_steps differs from the coefficient grid");
    }
    const Policy pol(p, c);
    const TimeGrid grid(p.T(), cfg.n_steps);
    std::vector<FeedbackRow> gains(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) gains[k] = same_grid ? pol.row(k) : pol.gains(grid.at(k));

    const bool two = c.kind != ModelKind::Model1;
    const bool trader_z = c.kind == ModelKind::Model3;
    const double u_ref = gains[0].uq * p.q0() + gains[0].us * p.s0() + gains[0].u0;
    const double u_scale = std::max(1.0, std::abs(u_ref));
    const double z_scale = std::max(1.0, std::abs(gains[0].z));
    double z_min = gains[0].z;
    for (const auto& f : gains) z_min = std::min(z_min, f.z);

    PerturbationReport rep;
    std::vector<DeviationResult> devs;
    for (auto ch : spec.channels) {
        for (double eps : spec.eps) {
            DeviationResult r;
            r.spec = {ch, eps};
            r.player = trader_z && ch == Deviation::ZShift ? "trader" : "producer";
            r.shift = ch == Deviation::UAdd ? eps * u_scale : ch == Deviation::ZShift ? eps * z_scale : eps;
            if (ch == Deviation::ZShift && !(z_min + r.shift > -1.0)) r.status = CheckStatus::Skipped;
            devs.push_back(r);
        }
    }
    const std::size_t nd = devs.size();
    const std::size_t n = grid.n_steps();
    const double h = grid.step(), sqrt_h = std::sqrt(h);
    const double a = p.a(), s0 = p.s0(), lam = p.lambda(), mu = p.mu(), kappa = p.kappa(), g = p.g();
    const double sigma = p.sigma();

    std::vector<double> base_pr(cfg.n_paths), base_tr(cfg.n_paths);
    std::vector<std::vector<double>> diffs(nd, std::vector<double>(cfg.n_paths));

    auto body = [&](unsigned, std::size_t b, std::size_t e) {
        std::vector<double> q(nd + 1), s(nd + 1), jp(nd + 1), jt(nd + 1);
        for (std::size_t path = b; path < e; ++path) {
            PathStream rng(cfg.seed, static_cast<std::uint32_t>(path), cfg.stream);
            std::fill(q.begin(), q.end(), p.q0());
            std::fill(s.begin(), s.end(), s0);
            std::fill(jp.begin(), jp.end(), 0.0);
            std::fill(jt.begin(), jt.end(), 0.0);
            for (std::size_t k = 0; k < n; ++k) {
                const auto& f = gains[k];
                const double dw = sqrt_h * rng.normal();
                for (std::size_t i = 0; i <= nd; ++i) {
                    const double u_hat = f.uq * q[i] + f.us * (two ? s[i] : 0.0) + f.u0;
                    double u = u_hat, z = f.z;
                    if (i > 0 && devs[i - 1].status != CheckStatus::Skipped) {
                        const auto& d = devs[i - 1];
                        switch (d.spec.kind) {
                            case Deviation::UAdd: u = u_hat + d.shift; break;
                            case Deviation::UMul: u = (1.0 + d.spec.eps) * u_hat; break;
                            case Deviation::ZShift: z = f.z + d.shift; break;
                        }
                    }
                    const double st = (two ? s[i] : s0) - a * q[i];
                    const double delta = two ? 2.0 * st : -2.0 * a * st;
                    const double drift = two ? mu - a * u : u;
                    const double zc = 0.5 * g * z * z;
                    jp[i] += (q[i] * st - 0.5 * kappa * u * u - (trader_z ? 0.0 : zc) - lam * delta * drift) * h;
                    jt[i] += (-zc + lam * delta * (mu - a * u)) * h;
                    const double vol = sigma * std::sqrt(1.0 + z);
                    if (two) {
                        q[i] += u * h;
                        s[i] += mu * h + vol * dw;
                    } else {
                        q[i] += u * h + vol * dw;
                    }
                }
            }
            base_pr[path] = jp[0];
            base_tr[path] = jt[0];
            for (std::size_t i = 0; i < nd; ++i) {
                diffs[i][path] = devs[i].player == "trader" ? jt[i + 1] - jt[0] : jp[i + 1] - jp[0];
            }
        }
    };
    for_each_chunk(cfg.n_paths, 256, resolve_threads(cfg.threads), body, [](unsigned) {});

    rep.optimal_producer = mean_ci(base_pr);
    rep.optimal_trader = mean_ci(base_tr);
    for (std::size_t i = 0; i < nd; ++i) {
        auto& r = devs[i];
        if (r.status == CheckStatus::Skipped) continue;
        r.diff = mean_ci(diffs[i]);
        if (r.diff.mean < 0.0 && r.diff.mean < -spec.sigma_threshold * r.diff.std_error) {
            r.status = CheckStatus::Pass;
        } else if (r.diff.mean > 1.96 * r.diff.std_error && r.diff.mean > 0.0) {
            r.status = CheckStatus::Fail;
        } else {
            r.status = CheckStatus::Inconclusive;
        }
    }
    rep.results = std::move(devs);
    return rep;
}

CrossSimReport cross_simulator_check(const ModelParams& p, const Coefficients& c, const SimConfig& cfg) {
    if (p.kind() != ModelKind::Model1) throw std::invalid_argument("cross_simulator_check: Model1 only");
    CrossSimReport rep;
    SimConfig ec = cfg;
    ec.measure = Measure::P;
    ec.record_moments = true;
    ec.keep_paths = 0;
    const auto euler = simulate(p, c, ec);
    SimConfig xc = ec;
    xc.stream = cfg.stream + 1;
    xc.record_moments = false;
    const auto exact = exact_q_model1(p, c, xc);

    const auto qe = functional_samples(Functional::TerminalQ, euler);
    const auto qx = functional_samples(Functional::TerminalQ, exact);
    rep.euler_qT = mean_ci(qe);
    rep.exact_qT = mean_ci(qx);
    auto var = [](const std::vector<double>& x, double m) {
        double ss = 0.0;
        for (double v : x) ss += (v - m) * (v - m);
        return ss / static_cast<double>(x.size() - 1);
    };
    rep.euler_var = var(qe, rep.euler_qT.mean);
    rep.exact_var = var(qx, rep.exact_qT.mean);
    const double se_mean = std::hypot(rep.euler_qT.std_error, rep.exact_qT.std_error);
    rep.mean_z = se_mean > 0.0 ? std::abs(rep.euler_qT.mean - rep.exact_qT.mean) / se_mean
                               : (rep.euler_qT.mean == rep.exact_qT.mean ? 0.0 : INFINITY);
    const double nn = static_cast<double>(qe.size());
    const double se_var = std::hypot(rep.euler_var, rep.exact_var) * std::sqrt(2.0 / (nn - 1.0));
    rep.var_z = se_var > 0.0 ? std::abs(rep.euler_var - rep.exact_var) / se_var
                             : (rep.euler_var == rep.exact_var ? 0.0 : INFINITY);

    // Checkpoints are on the simulation grid; the moment ODE is on the coefficient grid.
    const auto mp = model1_q_moments(p, c, Measure::P);
    const std::size_t n = euler.grid.n_steps();
    for (std::size_t j = 1; j <= 10; ++j) {
        const std::size_t k = n * j / 10;
        const double t = euler.grid.at(k);
        const auto [kc, w] = locate(c.table.grid(), t);
        const double ode = (1.0 - w) * mp.mean[kc] + w * mp.mean[kc + 1];
        const double gap = std::abs(euler.mean(Channel::Q, k) - ode);
        const double se = euler.std_error(Channel::Q, k);
        rep.max_abs_gap = std::max(rep.max_abs_gap, gap);
        const double zval = se > 0.0 ? gap / se : (gap < 1e-6 ? 0.0 : INFINITY);
        rep.mean_path_z = std::max(rep.mean_path_z, zval);
    }
    const bool ok = rep.mean_z <= rep.threshold && rep.var_z <= rep.threshold && rep.mean_path_z <= rep.path_threshold;
    rep.status = ok ? CheckStatus::Pass : CheckStatus::Fail;
    return rep;
}

void write_checks_csv(const std::vector<CheckRow>& rows, std::ostream& out) {
    out << "check,statistic,threshold,status\n";
    for (const auto& r : rows) {
        out << r.check << ',' << format_double(r.statistic) << ',' << format_double(r.threshold) << ','
            << to_string(r.status) << '\n';
    }
}

}  // namespace manipsim
