#pragma once

#include <span>
#include <string>
#include <vector>

#include "manipsim/ode.hpp"
#include "manipsim/params.hpp"

namespace manipsim {

inline constexpr std::size_t kDefaultSteps = 10000;

/// Column layouts of the coefficient tables.
///   Model1: A, B, C, D, E, F            (price Aq^2+Bq+C, value Dq^2+Eq+F)
///   Model2: A, B, C, D, E, F, Fbar      (value Aq^2+Bs^2+Cqs+Dq+Es+F, price (s-aq)^2+Fbar)
///   Model3: Av..Fv, Aw..Fw, Fphi        (producer v, trader w, price (s-aq)^2+Fphi)
const std::vector<std::string>& coefficient_names(ModelKind kind);

struct Coefficients {
    ModelKind kind;
    CoefficientTable table;

    // Volatility-control bound: the coefficient X that sets z = sigma^2 X / g must
    // stay above -g/sigma^2. X is D (Model1), B (Model2) or Bw (Model3).
    double bound_min = 0.0;     ///< grid minimum of X
    double bound_margin = 0.0;  ///< bound_min + g/sigma^2
    double bound_t = 0.0;       ///< time of the minimum
    bool bound_ok = true;
};

/// Riccati solution shared by Model1 D, Model2 A and Model3 Av, in overflow-free form.
/// Throws DivergenceError if the solution is singular at or after t.
double model1_D_closed(const ModelParams& p, double t);

Coefficients model1_coeffs(const ModelParams& p, const TimeGrid& grid);
Coefficients model2_coeffs(const ModelParams& p, const TimeGrid& grid);
Coefficients model3_coeffs(const ModelParams& p, const TimeGrid& grid);

/// Dispatches on p.kind().
Coefficients build_coefficients(const ModelParams& p, const TimeGrid& grid);
Coefficients build_coefficients(const ModelParams& p, std::size_t n_steps = kDefaultSteps);

/// Time derivatives of every column implied by the model's ODEs, evaluated at one
/// table row. Output layout matches coefficient_names(kind).
void coefficient_derivatives(const ModelParams& p, ModelKind kind, std::span<const double> row,
                             std::span<double> out);

/// The Riccati right-hand side alone: D' for the Model 1 value coefficient.
double model1_D_rhs(const ModelParams& p, double D);

}  // namespace manipsim
