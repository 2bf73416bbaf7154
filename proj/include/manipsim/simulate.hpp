#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "manipsim/coeffs.hpp"
#include "manipsim/policy.hpp"

namespace manipsim {

enum class Measure { P, Q };
std::string_view to_string(Measure m);
Measure measure_from_string(std::string_view s);

struct SimConfig {
    std::size_t n_paths = 10000;
    std::size_t n_steps = kDefaultSteps;
    std::uint64_t seed = 0;
    Measure measure = Measure::P;
    bool allow_interpolation = false;  ///< permit n_steps different from the coefficient grid
    std::size_t keep_paths = 0;        ///< full per-step arrays are stored for this many paths
    bool record_moments = true;        ///< per-step cross-path means and variances
    unsigned threads = 0;              ///< 0 = hardware concurrency
    std::uint32_t stream = 0;          ///< random stream id; distinct ids give independent draws
};

/// One stored path, every array has n_steps + 1 entries.
struct PathRecord {
    std::vector<double> q, s, u, z, s_tilde, h, delta;
};

/// Per-path totals. Running integrals use the left-point rule.
struct PathTotals {
    double q_T = 0.0;
    double s_T = 0.0;
    double s_tilde_T = 0.0;
    double h_T = 0.0;
    double profit = 0.0;          ///< int q * s_tilde dt
    double cost_u = 0.0;          ///< int kappa/2 u^2 dt
    double cost_z = 0.0;          ///< int g/2 z^2 dt
    double hedge_drift = 0.0;     ///< int lambda * delta * (drift of the hedge underlying) dt
    double hedge_residual = 0.0;  ///< h_T - h_0 - sum delta * d(underlying)
};

/// Cross-path moment channels recorded at every grid point.
enum class Channel { Q, S, STilde, H, DUnderlying, DH };
inline constexpr std::size_t kChannels = 6;

struct PathEnsemble {
    SimConfig config;
    TimeGrid grid{1.0, 1};
    ModelKind kind = ModelKind::Model1;
    double lambda = 0.0;
    double h0 = 0.0;  ///< claim price at (0, q0, s0)
    std::vector<double> vol;  ///< sigma sqrt(1 + z) per grid point
    std::vector<double> z;    ///< z per grid point
    std::vector<PathTotals> totals;
    std::vector<PathRecord> kept;
    /// sum and sum of squares per grid point and channel: [k][2*channel + {0,1}].
    /// Increment channels at k describe the step k -> k+1.
    std::vector<double> moment_sums;
    /// Channel values are accumulated relative to these offsets (the t = 0 state),
    /// which keeps the one-pass variance free of cancellation near t = 0.
    std::array<double, kChannels> moment_shift{};

    double mean(Channel c, std::size_t k) const;
    double variance(Channel c, std::size_t k) const;  ///< unbiased
    double std_error(Channel c, std::size_t k) const;
};

/// Closed-loop Euler-Maruyama simulation under the optimal (equilibrium) feedback.
PathEnsemble simulate(const ModelParams& p, const Coefficients& c, const SimConfig& cfg);

/// Model1 only: exact Gaussian transition of the linear closed-loop SDE for q,
/// with step integrals of the deterministic coefficients by the trapezoid rule.
PathEnsemble exact_q_model1(const ModelParams& p, const Coefficients& c, const SimConfig& cfg);

/// Mean and variance of q_t from the deterministic moment ODEs of the closed-loop
/// Model1 SDE, integrated on the coefficient grid.
struct MomentPath {
    std::vector<double> mean, variance;
};
MomentPath model1_q_moments(const ModelParams& p, const Coefficients& c, Measure m);

struct MeanCI {
    double mean = 0.0;
    double std_error = 0.0;
    std::size_t n = 0;
    double ci95_low = 0.0;
    double ci95_high = 0.0;
};

MeanCI mean_ci(const std::vector<double>& samples);

enum class Functional {
    One,
    ProducerObjective,
    TraderObjective,
    TerminalPayoff,
    TerminalQ,
    TerminalQSquared,
    TerminalSTilde,
    TerminalS,
    HedgeResidual,
};

Functional functional_from_string(std::string_view id);
std::string_view to_string(Functional f);

/// Per-path samples of a functional. Producer objective excludes the volatility
/// cost in Model3, where the trader controls z.
std::vector<double> functional_samples(Functional f, const PathEnsemble& e);
MeanCI estimate(Functional f, const PathEnsemble& e);
MeanCI estimate(std::string_view functional_id, const PathEnsemble& e);

/// "path_id,t,q,S,u,z,s_tilde,h,delta" for the kept paths.
void write_paths_csv(const PathEnsemble& e, std::ostream& out);

/// "t,q_mean,q_lo,q_hi,S_mean,S_lo,S_hi,s_tilde_mean,s_tilde_lo,s_tilde_hi,h_mean,h_lo,h_hi,vol".
/// Bands are mean -/+ 1.96 cross-path standard deviations; requires record_moments.
void write_mean_path_csv(const PathEnsemble& e, std::ostream& out);

/// Splits [0, n) into fixed chunks and runs them in waves of up to `slots` workers.
/// `body(slot, begin, end)` fills per-slot scratch; `merge(slot)` is then called in
/// ascending chunk order before the slot is reused, so reductions do not depend on
/// the number of workers.
void for_each_chunk(std::size_t n, std::size_t chunk, unsigned slots,
                    const std::function<void(unsigned slot, std::size_t begin, std::size_t end)>& body,
                    const std::function<void(unsigned slot)>& merge);

unsigned resolve_threads(unsigned requested);

}  // namespace manipsim
