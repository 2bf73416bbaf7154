#include "manipsim/policy.hpp"

#include <sstream>

namespace manipsim {

FeedbackRow feedback_from_row(const ModelParams& p, ModelKind kind, std::span<const double> row) {
    const double a = p.a(), k = p.kappa(), lam = p.lambda();
    const double vol = p.sigma() * p.sigma() / p.g();
    FeedbackRow f;
    switch (kind) {
        case ModelKind::Model1:  // A B C D E F
            f.uq = 2.0 * (row[3] - lam * a * a) / k;
            f.u0 = (2.0 * a * p.s0() * lam + row[4]) / k;
            f.z = vol * row[3];
            break;
        case ModelKind::Model2:  // A B C D E F Fbar
            f.uq = 2.0 * (row[0] - lam * a * a) / k;
            f.us = (2.0 * lam * a + row[2]) / k;
            f.u0 = row[3] / k;
            f.z = vol * row[1];
            break;
        case ModelKind::Model3:  // Av Bv Cv Dv ... Bw at 7
            f.uq = 2.0 * (row[0] - lam * a * a) / k;
            f.us = (2.0 * lam * a + row[2]) / k;
            f.u0 = row[3] / k;
            f.z = vol * row[7];
            break;
    }
    return f;
}

namespace {

void require_kind(const ModelParams& p, const Coefficients& c, ModelKind kind) {
    if (p.kind() != kind || c.kind != kind) {
        throw std::invalid_argument(std::string("expected ") + std::string(to_string(kind)) + " inputs");
    }
}

void require_equilibrium(const Coefficients& c) {
    if (c.kind == ModelKind::Model3 && !c.bound_ok) {
        std::ostringstream msg;
        msg.precision(10);
        msg << "equilibrium invalid: Bw(t) > -g/sigma^2 fails (min Bw = " << c.bound_min << " at t = " << c.bound_t
            << ")";
        throw AdmissibilityError(msg.str());
    }
}

}  // namespace

Policy::Policy(const ModelParams& p, const Coefficients& c)
    : kind_(c.kind), grid_(c.table.grid()), s0_(p.s0()), a_(p.a()) {
    if (p.kind() != c.kind) throw std::invalid_argument("Policy: parameter and coefficient models differ");
    require_equilibrium(c);
    rows_.reserve(c.table.rows());
    for (std::size_t k = 0; k < c.table.rows(); ++k) rows_.push_back(feedback_from_row(p, kind_, c.table.row(k)));
}

FeedbackRow Policy::gains(double t) const {
    const auto [k, w] = locate(grid_, t);
    const auto& lo = rows_[k];
    const auto& hi = rows_[k + 1];
    if (w == 0.0) return lo;
    if (w == 1.0) return hi;
    auto mix = [w](double x, double y) { return (1.0 - w) * x + w * y; };
    return {mix(lo.uq, hi.uq), mix(lo.us, hi.us), mix(lo.u0, hi.u0), mix(lo.z, hi.z)};
}

PolicyEval Policy::eval(double t, double q, double s) const {
    const auto f = gains(t);
    PolicyEval e;
    e.t = t;
    e.q = q;
    e.s = kind_ == ModelKind::Model1 ? 0.0 : s;
    e.u = f.uq * q + f.us * e.s + f.u0;
    e.z = f.z;
    e.s_tilde = (kind_ == ModelKind::Model1 ? s0_ : s) - a_ * q;
    e.admissible = e.z > -1.0;
    return e;
}

PolicyEval control_model1(const ModelParams& p, const Coefficients& c, double t, double q) {
    require_kind(p, c, ModelKind::Model1);
    const auto row = interpolate(c.table, t);
    const auto f = feedback_from_row(p, ModelKind::Model1, row);
    PolicyEval e;
    e.t = t;
    e.q = q;
    e.u = f.uq * q + f.u0;
    e.z = f.z;
    e.s_tilde = p.s0() - p.a() * q;
    e.admissible = e.z > -1.0;
    return e;
}

namespace {
PolicyEval control_two_state(const ModelParams& p, const Coefficients& c, ModelKind kind, double t, double q,
                             double s) {
    require_kind(p, c, kind);
    require_equilibrium(c);
    const auto row = interpolate(c.table, t);
    const auto f = feedback_from_row(p, kind, row);
    PolicyEval e;
    e.t = t;
    e.q = q;
    e.s = s;
    e.u = f.uq * q + f.us * s + f.u0;
    e.z = f.z;
    e.s_tilde = s - p.a() * q;
    e.admissible = e.z > -1.0;
    return e;
}
}  // namespace

PolicyEval control_model2(const ModelParams& p, const Coefficients& c, double t, double q, double s) {
    return control_two_state(p, c, ModelKind::Model2, t, q, s);
}

PolicyEval control_model3(const ModelParams& p, const Coefficients& c, double t, double q, double s) {
    return control_two_state(p, c, ModelKind::Model3, t, q, s);
}

AdmissibilityCheck check_admissible(const ModelParams& p, const Coefficients& c) {
    AdmissibilityCheck rep;
    const double vol = p.sigma() * p.sigma() / p.g();
    rep.z_min = vol * c.bound_min;
    rep.t_at_min = c.bound_t;
    rep.margin = rep.z_min + 1.0;
    rep.admissible = rep.z_min > -1.0;
    if (!rep.admissible) {
        std::ostringstream msg;
        msg.precision(10);
        msg << "volatility control z = " << rep.z_min << " <= -1 at t = " << rep.t_at_min;
        rep.reason = msg.str();
    }
    return rep;
}

}  // namespace manipsim
