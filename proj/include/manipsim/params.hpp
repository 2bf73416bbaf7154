#pragma once

#include <iosfwd>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>

namespace manipsim {

/// Which of the three manipulation models a parameter set describes.
///   Model1: producer controls production drift and production-rate volatility.
///   Model2: producer controls production drift and price volatility (information).
///   Model3: producer controls drift, a trader controls price volatility (Nash game).
enum class ModelKind { Model1 = 1, Model2 = 2, Model3 = 3 };

std::string_view to_string(ModelKind kind);
ModelKind model_kind_from_int(int k);

/// Rejected parameter input. `field` names the offending key when there is one.
class ParamError : public std::invalid_argument {
public:
    ParamError(std::string field, const std::string& what)
        : std::invalid_argument(what), field_(std::move(field)) {}
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

/// Parameters are valid but the horizon violates an admissibility condition
/// (T >= T_max, Riccati blow-up inside the horizon, trader volatility bound).
class AdmissibilityError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Unvalidated parameter bundle, as read from a config file or built in code.
struct RawParams {
    double s0 = 10.0;
    double a = 0.5;
    double g = 0.1;
    double kappa = 0.01;
    double sigma = 1.0;
    double T = 1.0;
    double mu = 0.0;
    double lambda = 0.0;
    double q0 = 0.0;
    ModelKind kind = ModelKind::Model1;
};

/// Parameter set used throughout the numerical experiments:
/// s0=10, a=0.5, g=0.1, kappa=0.01, sigma=1, T=1, mu=0, q0=0.
RawParams reference_params(ModelKind kind, double lambda);

enum class AdmissibilityMode {
    Enforce,    ///< reject Model 1 horizons that are not admissible
    ReportOnly  ///< accept them; callers inspect admissibility() themselves
};

/// Validated, immutable parameter set. Every downstream module takes one.
class ModelParams {
public:
    static ModelParams validate(const RawParams& raw,
                                AdmissibilityMode mode = AdmissibilityMode::Enforce);

    double s0() const noexcept { return raw_.s0; }
    double a() const noexcept { return raw_.a; }
    double g() const noexcept { return raw_.g; }
    double kappa() const noexcept { return raw_.kappa; }
    double sigma() const noexcept { return raw_.sigma; }
    double T() const noexcept { return raw_.T; }
    double mu() const noexcept { return raw_.mu; }
    double lambda() const noexcept { return raw_.lambda; }
    double q0() const noexcept { return raw_.q0; }
    ModelKind kind() const noexcept { return raw_.kind; }
    const RawParams& raw() const noexcept { return raw_; }

    /// Copy with a different position / horizon / initial rate, re-validated.
    ModelParams with_lambda(double lambda, AdmissibilityMode mode = AdmissibilityMode::Enforce) const;
    ModelParams with_q0(double q0) const;
    ModelParams with_kind(ModelKind kind) const;

private:
    explicit ModelParams(const RawParams& raw) : raw_(raw) {}
    RawParams raw_;
};

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

// Analytic scalars. The double-argument overloads validate their inputs.
double theta(double a, double kappa);
double theta(const ModelParams& p);

/// Admissibility factor of the Model 1 volatility bound:
/// H = 1 - (2 lambda a / kappa)(lambda a^2 + g / sigma^2).
double h_factor(const ModelParams& p);

/// Largest Model 1 horizon with D(0) > -g/sigma^2, or +inf when the bound never binds.
double t_max(const ModelParams& p);

/// Horizon at which the Riccati solution for D escapes to infinity, or +inf.
double t_blowup(const ModelParams& p);

double lambda_threshold(double a, double kappa);
double lambda_threshold(const ModelParams& p);

double q_star(double s0, double a);
double q_star(const ModelParams& p);

struct AdmissibilityReport {
    double theta = 0.0;
    double H = 0.0;
    double t_max = kInfinity;
    double t_blowup = kInfinity;
    bool admissible = true;
    std::string reason;
};

AdmissibilityReport admissibility(const ModelParams& p);

// Flat key-value config: "key = value" per line, '#' starts a comment.
// Keys: s0, a, g, kappa, sigma, T, mu, lambda, q0, model. mu and q0 default to 0.
RawParams parse_config(std::string_view text);
RawParams load_config(const std::string& path);
std::string format_config(const RawParams& raw);

}  // namespace manipsim
