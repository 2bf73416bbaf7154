#include "manipsim/pricing.hpp"

#include <algorithm>
#include <ostream>

#include "manipsim/csv.hpp"
#include "manipsim/policy.hpp"

namespace manipsim {

double price_h(const ModelParams& p, const Coefficients& c, double t, double q, double s) {
    if (p.kind() != c.kind) throw std::invalid_argument("price_h: parameter and coefficient models differ");
    const auto row = interpolate(c.table, t);
    switch (c.kind) {
        case ModelKind::Model1: {
            const double st = p.s0() - p.a() * q;
            return st * st + (row[2] - p.s0() * p.s0());
        }
        case ModelKind::Model2: {
            const double st = s - p.a() * q;
            return st * st + row[6];
        }
        case ModelKind::Model3: {
            const double st = s - p.a() * q;
            return st * st + row[12];
        }
    }
    return NAN;
}

double hedge_delta(ModelKind kind, const ModelParams& p, double q, double s) {
    if (kind == ModelKind::Model1) return 2.0 * p.a() * (p.a() * q - p.s0());
    return 2.0 * (s - p.a() * q);
}

double h0_no_manip(const ModelParams& p) {
    const double st = p.s0() - p.a() * p.q0();
    const double var = p.sigma() * p.sigma() * p.T();
    return st * st + (p.kind() == ModelKind::Model1 ? p.a() * p.a() * var : var);
}

ValueFunctions value_functions(const ModelParams& p, const Coefficients& c, ValueAssignment assignment) {
    const auto row = c.table.row(0);
    const double q = p.q0(), s = p.s0();
    auto quad2 = [q, s](std::span<const double> k) {
        return k[0] * q * q + k[1] * s * s + k[2] * q * s + k[3] * q + k[4] * s + k[5];
    };
    ValueFunctions out;
    switch (c.kind) {
        case ModelKind::Model1: out.v0 = row[3] * q * q + row[4] * q + row[5]; break;
        case ModelKind::Model2: out.v0 = quad2(row.subspan(0, 6)); break;
        case ModelKind::Model3: {
            const double v = quad2(row.subspan(0, 6));
            const double w = quad2(row.subspan(6, 6));
            const bool standard = assignment == ValueAssignment::ProducerV;
            out.v0 = standard ? v : w;
            out.w0 = standard ? w : v;
            break;
        }
    }
    return out;
}

std::vector<double> linspace(double lo, double hi, std::size_t n) {
    std::vector<double> x(n);
    if (n == 1) {
        x[0] = lo;
        return x;
    }
    for (std::size_t i = 0; i < n; ++i) {
        // Endpoints exact, interior points symmetric in rounding.
        x[i] = i + 1 == n ? hi : lo + (hi - lo) * (static_cast<double>(i) / static_cast<double>(n - 1));
    }
    return x;
}

std::vector<double> default_lambda_grid(ModelKind kind) {
    return kind == ModelKind::Model3 ? linspace(-0.1, 0.2, 57) : linspace(-0.2, 1.2, 57);
}

std::vector<double> with_baseline(std::vector<double> lambdas) {
    bool has_zero = false;
    for (double& x : lambdas) {
        if (std::abs(x) < 1e-12) {
            x = 0.0;
            has_zero = true;
        }
    }
    if (!has_zero) lambdas.push_back(0.0);
    std::sort(lambdas.begin(), lambdas.end());
    return lambdas;
}

std::vector<PriceReport> sweep_lambda(const ModelParams& base, const std::vector<double>& lambdas,
                                      const SweepOptions& options) {
    std::vector<PriceReport> out;
    out.reserve(lambdas.size());
    for (double lam : lambdas) {
        PriceReport r;
        r.lambda = lam;
        try {
            const auto p = base.with_lambda(lam, AdmissibilityMode::ReportOnly);
            if (p.kind() == ModelKind::Model1) {
                const auto adm = admissibility(p);
                if (!adm.admissible) throw AdmissibilityError(adm.reason);
            }
            const auto c = build_coefficients(p, options.n_steps);
            const auto chk = check_admissible(p, c);
            if (!chk.admissible) throw AdmissibilityError(chk.reason);
            r.h0 = price_h(p, c, 0.0, p.q0(), p.s0());
            r.h0_no_manip = h0_no_manip(p);
            const auto vf = value_functions(p, c, options.assignment);
            r.v0 = vf.v0;
            if (vf.w0) r.w0 = *vf.w0;
            r.z0 = Policy(p, c).row(0).z;
            if (options.mc) {
                SimConfig cfg = *options.mc;
                cfg.measure = Measure::P;
                cfg.n_steps = options.n_steps;
                cfg.record_moments = false;
                cfg.keep_paths = 0;
                r.E_hT_P = estimate(Functional::TerminalPayoff, simulate(p, c, cfg));
            }
        } catch (const AdmissibilityError& e) {
            r = PriceReport{};
            r.lambda = lam;
            r.ok = false;
            r.reason = e.what();
        } catch (const DivergenceError& e) {
            r = PriceReport{};
            r.lambda = lam;
            r.ok = false;
            r.reason = e.what();
        }
        out.push_back(std::move(r));
    }
    return out;
}

void write_sweep_csv(const std::vector<PriceReport>& reports, std::ostream& out) {
    out << "lambda,h0,h0_z0,E_hT_P,E_hT_se,v0,w0\n";
    for (const auto& r : reports) {
        const double m = r.E_hT_P ? r.E_hT_P->mean : NAN;
        const double se = r.E_hT_P ? r.E_hT_P->std_error : NAN;
        out << format_double(r.lambda) << ',' << format_double(r.h0) << ',' << format_double(r.h0_no_manip) << ','
            << format_double(m) << ',' << format_double(se) << ',' << format_double(r.v0) << ','
            << format_double(r.w0) << '\n';
    }
}

}  // namespace manipsim
