#pragma once

#include <cmath>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "manipsim/coeffs.hpp"
#include "manipsim/simulate.hpp"

namespace manipsim {

/// No-arbitrage price of the claim with payoff s_tilde_T^2 at state (t, q, s).
/// `s` is ignored by Model1.
double price_h(const ModelParams& p, const Coefficients& c, double t, double q, double s = 0.0);

/// Replicating position. Model1 hedges against dq, Models 2 and 3 against d s_tilde.
double hedge_delta(ModelKind kind, const ModelParams& p, double q, double s = 0.0);

/// Price at (0, q0, s0) with the volatility control held at zero.
double h0_no_manip(const ModelParams& p);

/// Which Model3 coefficient block is read as the producer's value.
enum class ValueAssignment {
    ProducerV,   ///< producer v from Av..Fv, trader w from Aw..Fw
    ProducerW,   ///< the swapped reading, for comparison
};

struct ValueFunctions {
    double v0 = 0.0;
    std::optional<double> w0;  ///< Model3 only
};

ValueFunctions value_functions(const ModelParams& p, const Coefficients& c,
                               ValueAssignment assignment = ValueAssignment::ProducerV);

struct PriceReport {
    double lambda = 0.0;
    bool ok = true;        ///< false when lambda was skipped
    std::string reason;    ///< why it was skipped
    double h0 = NAN;
    double h0_no_manip = NAN;
    std::optional<MeanCI> E_hT_P;
    double v0 = NAN;
    double w0 = NAN;
    double z0 = NAN;       ///< volatility control at t = 0
};

struct SweepOptions {
    std::size_t n_steps = kDefaultSteps;
    std::optional<SimConfig> mc;  ///< adds E^P[h_T]; the same seed is used for every lambda
    ValueAssignment assignment = ValueAssignment::ProducerV;
};

/// One report per lambda, in input order. Inadmissible or divergent lambdas are
/// reported with ok = false instead of aborting the sweep.
std::vector<PriceReport> sweep_lambda(const ModelParams& base, const std::vector<double>& lambdas,
                                      const SweepOptions& options = {});

/// 57 evenly spaced points on [-0.2, 1.2] (Models 1 and 2) or [-0.1, 0.2] (Model 3).
std::vector<double> default_lambda_grid(ModelKind kind);
std::vector<double> linspace(double lo, double hi, std::size_t n);

/// Sorted copy of `lambdas` that contains 0 exactly: values within 1e-12 of zero are
/// snapped to it, and 0 is inserted when absent. Baseline comparisons need the row.
std::vector<double> with_baseline(std::vector<double> lambdas);

/// "lambda,h0,h0_z0,E_hT_P,E_hT_se,v0,w0"; skipped lambdas carry nan.
void write_sweep_csv(const std::vector<PriceReport>& reports, std::ostream& out);

}  // namespace manipsim
