#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "manipsim/coeffs.hpp"
#include "manipsim/simulate.hpp"

namespace manipsim {

/// Tensor grid of states. `s` is ignored by Model1.
struct StateGrid {
    std::vector<double> t, q, s;
};

/// Default residual grids: five times on [0, T], q on [-5, 25] (11 points), and for
/// the two-state models a 5x5x5 grid with s on [0, 20].
StateGrid default_state_grid(const ModelParams& p);

struct ResidualReport {
    double max_abs_residual = 0.0;   ///< max of the two parts below
    double pointwise = 0.0;          ///< HJB residual at the grid states
    double consistency = 0.0;        ///< table increments vs Simpson integral of the ODE-implied slopes
    std::string worst_equation;      ///< "producer" or "trader"
    double worst_t = 0.0, worst_q = 0.0, worst_s = 0.0;
    std::string worst_column;        ///< column with the largest consistency error
    std::size_t points = 0;
};

/// Substitutes the quadratic ansatz, its ODE-implied time derivative and the
/// feedback controls into the HJB equation(s). Model3 checks producer and trader.
ResidualReport hjb_residual(const ModelParams& p, const Coefficients& c, const StateGrid& grid);

enum class CheckStatus { Pass, Fail, Inconclusive, Skipped };
std::string_view to_string(CheckStatus s);

enum class Deviation { UAdd, UMul, ZShift };
std::string_view to_string(Deviation d);

struct DeviationSpec {
    Deviation kind;
    double eps;
};

struct PerturbationSpec {
    std::vector<double> eps{0.25, -0.25, 0.5, -0.5};
    std::vector<Deviation> channels{Deviation::UAdd, Deviation::UMul, Deviation::ZShift};
    double sigma_threshold = 3.0;
};

struct DeviationResult {
    DeviationSpec spec;
    std::string player;      ///< "producer" or "trader"
    double shift = 0.0;      ///< absolute size of the applied perturbation
    MeanCI diff;             ///< deviated minus optimal objective, paired
    CheckStatus status = CheckStatus::Inconclusive;
};

struct PerturbationReport {
    MeanCI optimal_producer;
    MeanCI optimal_trader;
    std::vector<DeviationResult> results;
    bool all_pass() const;
    bool any_fail() const;
};

/// Paired (common random numbers) Monte-Carlo comparison of the optimal objective
/// with deviated controls under P. Deviations:
///   UAdd   u = u_hat + eps * max(1, |u_hat(0, x0)|)
///   UMul   u = (1 + eps) * u_hat
///   ZShift z = z_hat + eps * max(1, |z_hat(0)|)
/// A z-shift that reaches z <= -1 anywhere on the grid is inadmissible and skipped.
/// Model3 applies u-deviations to the producer and z-deviations to the trader.
/// Pass: diff < -k SE. Fail: diff > 1.96 SE. Otherwise inconclusive.
PerturbationReport perturbation_test(const ModelParams& p, const Coefficients& c, const PerturbationSpec& spec,
                                     const SimConfig& cfg);

struct CrossSimReport {
    MeanCI euler_qT, exact_qT;
    double euler_var = 0.0, exact_var = 0.0;
    double mean_z = 0.0;       ///< |mean difference| / combined SE
    double var_z = 0.0;        ///< |variance difference| / combined SE (Gaussian approximation)
    double mean_path_z = 0.0;  ///< worst Euler-mean vs moment-ODE gap over ten checkpoints, in SE
    double max_abs_gap = 0.0;  ///< worst absolute gap on the same checkpoints
    double threshold = 3.0;
    double path_threshold = 3.5;
    CheckStatus status = CheckStatus::Pass;
};

/// Model1: Euler vs exact simulator on independent streams, and the Euler mean path
/// against the deterministic mean ODE.
CrossSimReport cross_simulator_check(const ModelParams& p, const Coefficients& c, const SimConfig& cfg);

/// Row of a machine-readable verification report.
struct CheckRow {
    std::string check;
    double statistic = 0.0;
    double threshold = 0.0;
    CheckStatus status = CheckStatus::Pass;
};

/// "check,statistic,threshold,status".
void write_checks_csv(const std::vector<CheckRow>& rows, std::ostream& out);

}  // namespace manipsim
