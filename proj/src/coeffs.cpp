#include "manipsim/coeffs.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace manipsim {

const std::vector<std::string>& coefficient_names(ModelKind kind) {
    static const std::vector<std::string> m1{"A", "B", "C", "D", "E", "F"};
    static const std::vector<std::string> m2{"A", "B", "C", "D", "E", "F", "Fbar"};
    static const std::vector<std::string> m3{"Av", "Bv", "Cv", "Dv", "Ev", "Fv", "Aw",
                                             "Bw", "Cw", "Dw", "Ew", "Fw", "Fphi"};
    switch (kind) {
        case ModelKind::Model1: return m1;
        case ModelKind::Model2: return m2;
        case ModelKind::Model3: return m3;
    }
    throw std::invalid_argument("unknown model kind");
}

double model1_D_closed(const ModelParams& p, double t) {
    const double a = p.a(), k = p.kappa(), lam = p.lambda();
    const double th = std::sqrt(8.0 * a / k);
    const double c1 = a - 2.0 * lam * lam * a * a * a * a / k;
    const double shift = 4.0 * lam * a * a / k;
    const double tau = p.T() - t;
    // Written in e^{-theta tau} so large horizons do not overflow.
    const double e = std::exp(-th * tau);
    const double one_minus_e = -std::expm1(-th * tau);
    const double den = th * (1.0 + e) + shift * one_minus_e;
    if (!(den > 0.0)) {
        std::ostringstream msg;
        msg << "Riccati solution is singular on [" << t << ", " << p.T() << "]";
        throw DivergenceError(t, msg.str());
    }
    return -2.0 * c1 * one_minus_e / den;
}

double model1_D_rhs(const ModelParams& p, double D) {
    const double d = D - p.lambda() * p.a() * p.a();
    return p.a() - 2.0 / p.kappa() * d * d;
}

namespace {

struct Bound {
    double min, t;
};

Bound grid_min(const CoefficientTable& table, std::size_t col) {
    Bound b{table.at(0, col), table.grid().at(0)};
    for (std::size_t k = 1; k < table.rows(); ++k) {
        if (table.at(k, col) < b.min) b = {table.at(k, col), table.grid().at(k)};
    }
    return b;
}

void set_bound(Coefficients& c, const ModelParams& p, std::string_view col) {
    const auto b = grid_min(c.table, c.table.index_of(col));
    const double floor = -p.g() / (p.sigma() * p.sigma());
    c.bound_min = b.min;
    c.bound_t = b.t;
    c.bound_margin = b.min - floor;
    c.bound_ok = b.min > floor;
}

// Integral of sigma^2 (1 + sigma^2 X / g) from t_k to T.
std::vector<double> vol_tail(const ModelParams& p, const TimeGrid& grid, std::span<const double> X) {
    const double s2 = p.sigma() * p.sigma();
    std::vector<double> f(X.size());
    for (std::size_t k = 0; k < X.size(); ++k) f[k] = s2 * (1.0 + s2 * X[k] / p.g());
    return tail_trapezoid(grid, f);
}

struct ProducerRates {
    double A, B, C, D;
};

// Riccati block shared by Model2 (A..D) and Model3 (Av..Dv).
ProducerRates producer_rates(const ModelParams& p, double A, double C, double D) {
    const double a = p.a(), k = p.kappa(), lam = p.lambda();
    const double P = A - lam * a * a;
    const double Q = C + 2.0 * lam * a;
    return {a - 2.0 / k * P * P, -Q * Q / (2.0 * k), -1.0 - 2.0 / k * Q * P, -2.0 / k * D * P - p.mu() * Q};
}

}  // namespace

Coefficients model1_coeffs(const ModelParams& p, const TimeGrid& grid) {
    if (p.kind() != ModelKind::Model1) throw std::invalid_argument("model1_coeffs: Model1 parameters required");
    if (grid.horizon() != p.T()) throw std::invalid_argument("model1_coeffs: grid horizon differs from T");
    // Fails fast when the Riccati solution does not exist on [0, T].
    (void)model1_D_closed(p, 0.0);

    const double a = p.a(), s0 = p.s0();

    OdeSystem sys;
    sys.names = {"C", "E", "F"};
    sys.terminal = {s0 * s0, 0.0, 0.0};
    sys.rhs = [&p](double t, std::span<const double> y, std::span<double> dy) {
        const double row[6] = {0.0, 0.0, y[0], model1_D_closed(p, t), y[1], y[2]};
        double d[6];
        coefficient_derivatives(p, ModelKind::Model1, row, d);
        dy[0] = d[2];
        dy[1] = d[4];
        dy[2] = d[5];
    };
    const auto cef = integrate_backward(sys, grid);

    Coefficients out{ModelKind::Model1, CoefficientTable(grid, coefficient_names(ModelKind::Model1))};
    auto& tab = out.table;
    for (std::size_t r = 0; r < tab.rows(); ++r) {
        tab.at(r, 0) = a * a;
        tab.at(r, 1) = -2.0 * a * s0;
        tab.at(r, 2) = cef.at(r, 0);
        tab.at(r, 3) = r == grid.n_steps() ? 0.0 : model1_D_closed(p, grid.at(r));
        tab.at(r, 4) = cef.at(r, 1);
        tab.at(r, 5) = cef.at(r, 2);
    }
    set_bound(out, p, "D");
    return out;
}

Coefficients model2_coeffs(const ModelParams& p, const TimeGrid& grid) {
    if (p.kind() != ModelKind::Model2) throw std::invalid_argument("model2_coeffs: Model2 parameters required");
    if (grid.horizon() != p.T()) throw std::invalid_argument("model2_coeffs: grid horizon differs from T");

    OdeSystem sys;
    sys.names = {"A", "B", "C", "D", "E", "F"};
    sys.terminal.assign(6, 0.0);
    sys.rhs = [&p](double, std::span<const double> y, std::span<double> dy) {
        const double row[7] = {y[0], y[1], y[2], y[3], y[4], y[5], 0.0};
        double d[7];
        coefficient_derivatives(p, ModelKind::Model2, row, d);
        std::copy_n(d, 6, dy.begin());
    };
    auto table = integrate_backward(sys, grid);
    const auto B = table.column("B");
    const auto fbar = vol_tail(p, grid, B);
    table.add_column("Fbar", fbar);

    Coefficients out{ModelKind::Model2, std::move(table)};
    set_bound(out, p, "B");
    return out;
}

Coefficients model3_coeffs(const ModelParams& p, const TimeGrid& grid) {
    if (p.kind() != ModelKind::Model3) throw std::invalid_argument("model3_coeffs: Model3 parameters required");
    if (grid.horizon() != p.T()) throw std::invalid_argument("model3_coeffs: grid horizon differs from T");
    (void)model1_D_closed(p, 0.0);

    // State: Bv Cv Dv Ev Fv Aw Bw Cw Dw Ew Fw; Av enters through its closed form.
    OdeSystem sys;
    sys.names = {"Bv", "Cv", "Dv", "Ev", "Fv", "Aw", "Bw", "Cw", "Dw", "Ew", "Fw"};
    sys.terminal.assign(11, 0.0);
    sys.rhs = [&p](double t, std::span<const double> y, std::span<double> dy) {
        double row[13];
        row[0] = model1_D_closed(p, t);
        std::copy_n(y.begin(), 11, row + 1);
        row[12] = 0.0;
        double d[13];
        coefficient_derivatives(p, ModelKind::Model3, row, d);
        std::copy_n(d + 1, 11, dy.begin());
    };
    const auto sol = integrate_backward(sys, grid);

    Coefficients out{ModelKind::Model3, CoefficientTable(grid, coefficient_names(ModelKind::Model3))};
    auto& tab = out.table;
    for (std::size_t r = 0; r < tab.rows(); ++r) {
        tab.at(r, 0) = r == grid.n_steps() ? 0.0 : model1_D_closed(p, grid.at(r));
        for (std::size_t j = 0; j < 11; ++j) tab.at(r, j + 1) = sol.at(r, j);
    }
    const auto Bw = sol.column("Bw");
    const auto fphi = vol_tail(p, grid, Bw);
    for (std::size_t r = 0; r < tab.rows(); ++r) tab.at(r, 12) = fphi[r];
    set_bound(out, p, "Bw");
    return out;
}

Coefficients build_coefficients(const ModelParams& p, const TimeGrid& grid) {
    switch (p.kind()) {
        case ModelKind::Model1: return model1_coeffs(p, grid);
        case ModelKind::Model2: return model2_coeffs(p, grid);
        case ModelKind::Model3: return model3_coeffs(p, grid);
    }
    throw std::invalid_argument("unknown model kind");
}

Coefficients build_coefficients(const ModelParams& p, std::size_t n_steps) {
    return build_coefficients(p, TimeGrid(p.T(), n_steps));
}

void coefficient_derivatives(const ModelParams& p, ModelKind kind, std::span<const double> y,
                             std::span<double> dy) {
    const double a = p.a(), k = p.kappa(), lam = p.lambda(), mu = p.mu(), s0 = p.s0();
    const double s2 = p.sigma() * p.sigma(), g = p.g();
    switch (kind) {
        case ModelKind::Model1: {
            const double D = y[3], E = y[4];
            const double shifted = E + 2.0 * a * lam * s0;
            dy[0] = 0.0;
            dy[1] = 0.0;
            dy[2] = -s2 * a * a * (1.0 + s2 * D / g);
            dy[3] = model1_D_rhs(p, D);
            dy[4] = -(s0 + 2.0 / k * (D - lam * a * a) * shifted);
            dy[5] = -(s2 * s2 * D * D / (2.0 * g) + s2 * D + shifted * shifted / (2.0 * k));
            return;
        }
        case ModelKind::Model2: {
            const double A = y[0], B = y[1], C = y[2], D = y[3], E = y[4];
            const auto r = producer_rates(p, A, C, D);
            dy[0] = r.A;
            dy[1] = r.B;
            dy[2] = r.C;
            dy[3] = r.D;
            dy[4] = -D * (C + 2.0 * lam * a) / k - 2.0 * mu * (B - lam);
            dy[5] = -s2 * s2 * B * B / (2.0 * g) - D * D / (2.0 * k) - mu * E - s2 * B;
            dy[6] = -s2 * (1.0 + s2 * B / g);
            return;
        }
        case ModelKind::Model3: {
            const double Av = y[0], Bv = y[1], Cv = y[2], Dv = y[3], Ev = y[4];
            const double Aw = y[6], Bw = y[7], Cw = y[8], Dw = y[9], Ew = y[10];
            const auto r = producer_rates(p, Av, Cv, Dv);
            const double P = Av - lam * a * a;
            const double Q = Cv + 2.0 * lam * a;
            const double Aw_s = Aw + lam * a * a;
            const double Cw_s = Cw - 2.0 * lam * a;
            dy[0] = r.A;
            dy[1] = r.B;
            dy[2] = r.C;
            dy[3] = r.D;
            dy[4] = -Dv * Q / k - 2.0 * mu * (Bv - lam);
            dy[5] = -(mu * Ev + Dv * Dv / (2.0 * k) + s2 * (1.0 + s2 * Bw / g) * Bv);
            dy[6] = -(4.0 / k * P * Aw_s);
            dy[7] = -(Cw_s * Q / k);
            dy[8] = -(2.0 / k * (P * Cw_s + Aw_s * Q));
            dy[9] = -(mu * Cw_s + 2.0 / k * Dv * Aw_s + 2.0 / k * Dw * P);
            dy[10] = -(2.0 * mu * (Bw + lam) + Dw * Q / k + Dv * Cw_s / k);
            dy[11] = -(mu * Ew + Dv * Dw / k + s2 * Bw + s2 * s2 * Bw * Bw / (2.0 * g));
            dy[12] = -s2 * (1.0 + s2 * Bw / g);
            return;
        }
    }
}

}  // namespace manipsim
