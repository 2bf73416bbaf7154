#include "manipsim/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <thread>

#include "manipsim/csv.hpp"
#include "manipsim/rng.hpp"

namespace manipsim {

std::string_view to_string(Measure m) { return m == Measure::P ? "P" : "Q"; }

Measure measure_from_string(std::string_view s) {
    if (s == "P" || s == "p") return Measure::P;
    if (s == "Q" || s == "q") return Measure::Q;
    throw std::invalid_argument("measure must be P or Q");
}

unsigned resolve_threads(unsigned requested) {
    if (requested > 0) return requested;
    return std::max(1u, std::thread::hardware_concurrency());
}

void for_each_chunk(std::size_t n, std::size_t chunk, unsigned slots,
                    const std::function<void(unsigned, std::size_t, std::size_t)>& body,
                    const std::function<void(unsigned)>& merge) {
    chunk = std::max<std::size_t>(chunk, 1);
    slots = std::max(1u, slots);
    const std::size_t n_chunks = (n + chunk - 1) / chunk;
    for (std::size_t wave = 0; wave < n_chunks; wave += slots) {
        const auto in_wave = static_cast<unsigned>(std::min<std::size_t>(slots, n_chunks - wave));
        auto range = [&](unsigned s) {
            const std::size_t b = (wave + s) * chunk;
            return std::pair{b, std::min(n, b + chunk)};
        };
        if (in_wave == 1) {
            const auto [b, e] = range(0);
            body(0, b, e);
        } else {
            std::vector<std::thread> workers;
            workers.reserve(in_wave);
            std::vector<std::exception_ptr> errors(in_wave);
            for (unsigned s = 0; s < in_wave; ++s) {
                workers.emplace_back([&, s] {
                    try {
                        const auto [b, e] = range(s);
                        body(s, b, e);
                    } catch (...) {
                        errors[s] = std::current_exception();
                    }
                });
            }
            for (auto& w : workers) w.join();
            for (auto& err : errors) {
                if (err) std::rethrow_exception(err);
            }
        }
        for (unsigned s = 0; s < in_wave; ++s) merge(s);
    }
}

double PathEnsemble::mean(Channel c, std::size_t k) const {
    if (moment_sums.empty()) throw std::logic_error("ensemble has no recorded moments");
    const auto n = static_cast<double>(totals.size());
    const auto ci = static_cast<std::size_t>(c);
    return moment_sums[k * 2 * kChannels + 2 * ci] / n + moment_shift[ci];
}

double PathEnsemble::variance(Channel c, std::size_t k) const {
    if (moment_sums.empty()) throw std::logic_error("ensemble has no recorded moments");
    const auto n = static_cast<double>(totals.size());
    if (n < 2) return 0.0;
    const std::size_t i = k * 2 * kChannels + 2 * static_cast<std::size_t>(c);
    const double m = moment_sums[i] / n;
    return std::max(0.0, (moment_sums[i + 1] - n * m * m) / (n - 1.0));
}

double PathEnsemble::std_error(Channel c, std::size_t k) const {
    return std::sqrt(variance(c, k) / static_cast<double>(totals.size()));
}

namespace {

constexpr std::size_t kChunk = 256;

// Everything the path loop needs, tabulated on the simulation grid.
struct StepTables {
    std::vector<FeedbackRow> gains;
    std::vector<double> vol, tail;
    // Exact Model1 transition q' = growth q + shift + spread N.
    std::vector<double> growth, shift, spread;
};

double price_tail(ModelKind kind, const ModelParams& p, std::span<const double> row) {
    switch (kind) {
        case ModelKind::Model1: return row[2] - p.s0() * p.s0();
        case ModelKind::Model2: return row[6];
        case ModelKind::Model3: return row[12];
    }
    return 0.0;
}

StepTables tabulate(const ModelParams& p, const Coefficients& c, const Policy& pol, const TimeGrid& grid,
                    bool on_coeff_grid) {
    StepTables st;
    const std::size_t n = grid.size();
    st.gains.resize(n);
    st.vol.resize(n);
    st.tail.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        if (on_coeff_grid) {
            st.gains[k] = pol.row(k);
            st.tail[k] = price_tail(c.kind, p, c.table.row(k));
        } else {
            const double t = grid.at(k);
            st.gains[k] = pol.gains(t);
            st.tail[k] = price_tail(c.kind, p, interpolate(c.table, t));
        }
        if (!(st.gains[k].z > -1.0)) throw AdmissibilityError("volatility control z <= -1 on the simulation grid");
        st.vol[k] = p.sigma() * std::sqrt(1.0 + st.gains[k].z);
    }
    return st;
}

void add_exact_transition(StepTables& st, const TimeGrid& grid, Measure m) {
    const std::size_t n = grid.n_steps();
    const double h = grid.step();
    st.growth.resize(n);
    st.shift.resize(n);
    st.spread.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        const auto& g0 = st.gains[k];
        const auto& g1 = st.gains[k + 1];
        const double a0 = m == Measure::P ? g0.uq : 0.0, a1 = m == Measure::P ? g1.uq : 0.0;
        const double b0 = m == Measure::P ? g0.u0 : 0.0, b1 = m == Measure::P ? g1.u0 : 0.0;
        const double phi = 0.5 * h * (a0 + a1);
        const double e = std::exp(phi);
        st.growth[k] = e;
        st.shift[k] = 0.5 * h * (e * b0 + b1);
        st.spread[k] = std::sqrt(0.5 * h * (e * e * st.vol[k] * st.vol[k] + st.vol[k + 1] * st.vol[k + 1]));
    }
}

enum class Stepper { Euler, Exact };

template <bool TwoState, Stepper Mode>
void run_paths(const ModelParams& p, const StepTables& st, const TimeGrid& grid, const SimConfig& cfg,
               double h0, std::size_t begin, std::size_t end, PathEnsemble& out, std::vector<double>& sums) {
    const std::size_t n = grid.n_steps();
    const double h = grid.step();
    const double sqrt_h = std::sqrt(h);
    const double a = p.a(), s0 = p.s0(), lam = p.lambda(), mu = p.mu(), kappa = p.kappa(), g = p.g();
    const bool under_p = cfg.measure == Measure::P;
    const bool moments = cfg.record_moments;
    constexpr std::size_t W = 2 * kChannels;

    auto record = [&](std::size_t k, Channel c, double x) {
        const std::size_t i = k * W + 2 * static_cast<std::size_t>(c);
        x -= out.moment_shift[static_cast<std::size_t>(c)];
        sums[i] += x;
        sums[i + 1] += x * x;
    };

    for (std::size_t path = begin; path < end; ++path) {
        PathStream rng(cfg.seed, static_cast<std::uint32_t>(path), cfg.stream);
        PathRecord* keep = path < out.kept.size() ? &out.kept[path] : nullptr;
        PathTotals tot;
        double q = p.q0();
        double s = TwoState ? p.s0() : s0;
        double h_prev = h0;

        for (std::size_t k = 0;; ++k) {
            const auto& f = st.gains[k];
            const double u = f.uq * q + f.us * (TwoState ? s : 0.0) + f.u0;
            const double s_tilde = (TwoState ? s : s0) - a * q;
            const double price = s_tilde * s_tilde + st.tail[k];
            const double delta = TwoState ? 2.0 * s_tilde : -2.0 * a * s_tilde;
            if (moments) {
                record(k, Channel::Q, q);
                record(k, Channel::S, s);
                record(k, Channel::STilde, s_tilde);
                record(k, Channel::H, price);
                if (k > 0) record(k - 1, Channel::DH, price - h_prev);
            }
            if (keep) {
                keep->q[k] = q;
                keep->s[k] = s;
                keep->u[k] = u;
                keep->z[k] = f.z;
                keep->s_tilde[k] = s_tilde;
                keep->h[k] = price;
                keep->delta[k] = delta;
            }
            h_prev = price;
            if (k == n) {
                tot.q_T = q;
                tot.s_T = s;
                tot.s_tilde_T = s_tilde;
                tot.h_T = price;
                tot.hedge_residual = price - h0 - tot.hedge_residual;
                break;
            }

            tot.profit += q * s_tilde * h;
            tot.cost_u += 0.5 * kappa * u * u * h;
            tot.cost_z += 0.5 * g * f.z * f.z * h;
            tot.hedge_drift += lam * delta * (TwoState ? mu - a * u : u) * h;

            const double N = rng.normal();
            double d_under;
            if constexpr (TwoState) {
                const double dq = u * h;
                const double ds = (under_p ? mu : a * u) * h + st.vol[k] * sqrt_h * N;
                d_under = ds - a * dq;
                q += dq;
                s += ds;
            } else if constexpr (Mode == Stepper::Exact) {
                const double q_next = st.growth[k] * q + st.shift[k] + st.spread[k] * N;
                d_under = q_next - q;
                q = q_next;
            } else {
                d_under = (under_p ? u * h : 0.0) + st.vol[k] * sqrt_h * N;
                q += d_under;
            }
            // Accumulated sum delta * dX; turned into the residual at T.
            tot.hedge_residual += delta * d_under;
            if (moments) record(k, Channel::DUnderlying, d_under);
        }
        out.totals[path] = tot;
    }
}

PathEnsemble run(const ModelParams& p, const Coefficients& c, const SimConfig& cfg, Stepper mode) {
    if (p.kind() != c.kind) throw std::invalid_argument("simulate: parameter and coefficient models differ");
    if (cfg.n_paths == 0) throw std::invalid_argument("simulate: n_paths >= 1 required");
    if (cfg.n_paths > 0xffffffffull) throw std::invalid_argument("simulate: n_paths exceeds 2^32");
    if (cfg.n_steps == 0) throw std::invalid_argument("simulate: n_steps >= 1 required");
    const auto& cgrid = c.table.grid();
    const bool same_grid = cfg.n_steps == cgrid.n_steps();
    if (!same_grid && !cfg.allow_interpolation) {
        throw std::invalid_argument("simulate: n_steps differs from the coefficient grid (" +
                                    std::to_string(cgrid.n_steps()) + ") and interpolation is not enabled");
    }
    if (c.kind == ModelKind::Model1) {
        const auto adm = check_admissible(p, c);
        if (!adm.admissible) throw AdmissibilityError(adm.reason);
    }
    const Policy pol(p, c);
    const TimeGrid grid(p.T(), cfg.n_steps);
    auto st = tabulate(p, c, pol, grid, same_grid);
    if (mode == Stepper::Exact) add_exact_transition(st, grid, cfg.measure);

    PathEnsemble out;
    out.config = cfg;
    out.grid = grid;
    out.kind = c.kind;
    out.lambda = p.lambda();
    const double st0 = p.s0() - p.a() * p.q0();
    out.h0 = st0 * st0 + st.tail[0];
    out.moment_shift[static_cast<std::size_t>(Channel::Q)] = p.q0();
    out.moment_shift[static_cast<std::size_t>(Channel::S)] = p.s0();
    out.moment_shift[static_cast<std::size_t>(Channel::STilde)] = st0;
    out.moment_shift[static_cast<std::size_t>(Channel::H)] = out.h0;
    out.vol = st.vol;
    out.z.resize(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) out.z[k] = st.gains[k].z;
    out.totals.resize(cfg.n_paths);
    const std::size_t keep = std::min(cfg.keep_paths, cfg.n_paths);
    out.kept.resize(keep);
    for (auto& r : out.kept) {
        for (auto* v : {&r.q, &r.s, &r.u, &r.z, &r.s_tilde, &r.h, &r.delta}) v->assign(grid.size(), 0.0);
    }
    const std::size_t width = grid.size() * 2 * kChannels;
    if (cfg.record_moments) out.moment_sums.assign(width, 0.0);

    const unsigned slots = resolve_threads(cfg.threads);
    std::vector<std::vector<double>> scratch(slots);

    auto body = [&](unsigned slot, std::size_t b, std::size_t e) {
        auto& sums = scratch[slot];
        if (cfg.record_moments) sums.assign(width, 0.0);
        const bool two = c.kind != ModelKind::Model1;
        if (two) {
            run_paths<true, Stepper::Euler>(p, st, grid, cfg, out.h0, b, e, out, sums);
        } else if (mode == Stepper::Exact) {
            run_paths<false, Stepper::Exact>(p, st, grid, cfg, out.h0, b, e, out, sums);
        } else {
            run_paths<false, Stepper::Euler>(p, st, grid, cfg, out.h0, b, e, out, sums);
        }
    };
    auto merge = [&](unsigned slot) {
        if (!cfg.record_moments) return;
        const auto& sums = scratch[slot];
        for (std::size_t i = 0; i < width; ++i) out.moment_sums[i] += sums[i];
    };
    for_each_chunk(cfg.n_paths, kChunk, slots, body, merge);
    return out;
}

}  // namespace

PathEnsemble simulate(const ModelParams& p, const Coefficients& c, const SimConfig& cfg) {
    return run(p, c, cfg, Stepper::Euler);
}

PathEnsemble exact_q_model1(const ModelParams& p, const Coefficients& c, const SimConfig& cfg) {
    if (p.kind() != ModelKind::Model1 || c.kind != ModelKind::Model1) {
        throw std::invalid_argument("exact_q_model1: Model1 inputs required");
    }
    return run(p, c, cfg, Stepper::Exact);
}

MomentPath model1_q_moments(const ModelParams& p, const Coefficients& c, Measure m) {
    if (c.kind != ModelKind::Model1) throw std::invalid_argument("model1_q_moments: Model1 coefficients required");
    const Policy pol(p, c);
    const auto& grid = c.table.grid();
    auto st = tabulate(p, c, pol, grid, true);
    add_exact_transition(st, grid, m);
    MomentPath mp;
    mp.mean.resize(grid.size());
    mp.variance.resize(grid.size());
    mp.mean[0] = p.q0();
    mp.variance[0] = 0.0;
    for (std::size_t k = 0; k < grid.n_steps(); ++k) {
        mp.mean[k + 1] = st.growth[k] * mp.mean[k] + st.shift[k];
        mp.variance[k + 1] = st.growth[k] * st.growth[k] * mp.variance[k] + st.spread[k] * st.spread[k];
    }
    return mp;
}

MeanCI mean_ci(const std::vector<double>& x) {
    MeanCI r;
    r.n = x.size();
    if (x.empty()) return r;
    double sum = 0.0;
    for (double v : x) sum += v;
    r.mean = sum / static_cast<double>(r.n);
    if (r.n > 1) {
        double ss = 0.0;
        for (double v : x) ss += (v - r.mean) * (v - r.mean);
        r.std_error = std::sqrt(ss / static_cast<double>(r.n - 1) / static_cast<double>(r.n));
    }
    r.ci95_low = r.mean - 1.96 * r.std_error;
    r.ci95_high = r.mean + 1.96 * r.std_error;
    return r;
}

namespace {
constexpr std::pair<Functional, std::string_view> kFunctionalIds[] = {
    {Functional::One, "one"},
    {Functional::ProducerObjective, "producer_objective"},
    {Functional::TraderObjective, "trader_objective"},
    {Functional::TerminalPayoff, "terminal_payoff"},
    {Functional::TerminalQ, "terminal_q"},
    {Functional::TerminalQSquared, "terminal_q_squared"},
    {Functional::TerminalSTilde, "terminal_s_tilde"},
    {Functional::TerminalS, "terminal_s"},
    {Functional::HedgeResidual, "hedge_residual"},
};
}  // namespace

Functional functional_from_string(std::string_view id) {
    for (const auto& [f, name] : kFunctionalIds) {
        if (name == id) return f;
    }
    throw std::invalid_argument("unknown functional '" + std::string(id) + "'");
}

std::string_view to_string(Functional f) {
    for (const auto& [g, name] : kFunctionalIds) {
        if (g == f) return name;
    }
    return "unknown";
}

std::vector<double> functional_samples(Functional f, const PathEnsemble& e) {
    std::vector<double> x(e.totals.size());
    const bool producer_pays_z = e.kind != ModelKind::Model3;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const auto& t = e.totals[i];
        switch (f) {
            case Functional::One: x[i] = 1.0; break;
            case Functional::ProducerObjective:
                x[i] = t.profit - t.cost_u - (producer_pays_z ? t.cost_z : 0.0) - t.hedge_drift;
                break;
            case Functional::TraderObjective: x[i] = -t.cost_z + t.hedge_drift; break;
            case Functional::TerminalPayoff: x[i] = t.h_T; break;
            case Functional::TerminalQ: x[i] = t.q_T; break;
            case Functional::TerminalQSquared: x[i] = t.q_T * t.q_T; break;
            case Functional::TerminalSTilde: x[i] = t.s_tilde_T; break;
            case Functional::TerminalS: x[i] = t.s_T; break;
            case Functional::HedgeResidual: x[i] = t.hedge_residual; break;
        }
    }
    return x;
}

MeanCI estimate(Functional f, const PathEnsemble& e) {
    return mean_ci(functional_samples(f, e));
}

MeanCI estimate(std::string_view id, const PathEnsemble& e) {
    return estimate(functional_from_string(id), e);
}

void write_paths_csv(const PathEnsemble& e, std::ostream& out) {
    out << "path_id,t,q,S,u,z,s_tilde,h,delta\n";
    for (std::size_t i = 0; i < e.kept.size(); ++i) {
        const auto& r = e.kept[i];
        for (std::size_t k = 0; k < e.grid.size(); ++k) {
            out << i << ',' << format_double(e.grid.at(k)) << ',' << format_double(r.q[k]) << ','
                << format_double(r.s[k]) << ',' << format_double(r.u[k]) << ',' << format_double(r.z[k]) << ','
                << format_double(r.s_tilde[k]) << ',' << format_double(r.h[k]) << ',' << format_double(r.delta[k])
                << '\n';
        }
    }
}

void write_mean_path_csv(const PathEnsemble& e, std::ostream& out) {
    out << "t,q_mean,q_lo,q_hi,S_mean,S_lo,S_hi,s_tilde_mean,s_tilde_lo,s_tilde_hi,h_mean,h_lo,h_hi,vol\n";
    for (std::size_t k = 0; k < e.grid.size(); ++k) {
        out << format_double(e.grid.at(k));
        for (Channel c : {Channel::Q, Channel::S, Channel::STilde, Channel::H}) {
            const double m = e.mean(c, k);
            const double sd = std::sqrt(e.variance(c, k));
            out << ',' << format_double(m) << ',' << format_double(m - 1.96 * sd) << ','
                << format_double(m + 1.96 * sd);
        }
        out << ',' << format_double(e.vol[k]) << '\n';
    }
}

}  // namespace manipsim
