#include "manipsim/params.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

namespace manipsim {

std::string_view to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::Model1: return "model1";
        case ModelKind::Model2: return "model2";
        case ModelKind::Model3: return "model3";
    }
    return "unknown";
}

ModelKind model_kind_from_int(int k) {
    switch (k) {
        case 1: return ModelKind::Model1;
        case 2: return ModelKind::Model2;
        case 3: return ModelKind::Model3;
        default: throw ParamError("model", "model must be 1, 2 or 3");
    }
}

RawParams reference_params(ModelKind kind, double lambda) {
    RawParams raw;
    raw.kind = kind;
    raw.lambda = lambda;
    return raw;
}

namespace {

void require_finite(double v, const char* name) {
    if (!std::isfinite(v)) throw ParamError(name, std::string(name) + " must be finite");
}

void require_positive(double v, const char* name) {
    require_finite(v, name);
    if (!(v > 0.0)) throw ParamError(name, std::string(name) + " > 0 required");
}

double acoth(double x) { return std::atanh(1.0 / x); }

// The closed forms below only need these five numbers.
struct Scalars {
    double a, g, kappa, sigma, lambda;
};

Scalars scalars(const ModelParams& p) { return {p.a(), p.g(), p.kappa(), p.sigma(), p.lambda()}; }
Scalars scalars(const RawParams& r) { return {r.a, r.g, r.kappa, r.sigma, r.lambda}; }

double h_factor_of(const Scalars& s) {
    const double sig2 = s.sigma * s.sigma;
    return 1.0 - (2.0 * s.lambda * s.a / s.kappa) * (s.lambda * s.a * s.a + s.g / sig2);
}

double t_max_of(const Scalars& s) {
    const double H = h_factor_of(s);
    if (H <= 0.0) return kInfinity;
    const double th = std::sqrt(8.0 * s.a / s.kappa);
    const double arg = 2.0 * s.sigma * s.sigma * s.a * H / (th * s.g);
    if (arg <= 1.0) return kInfinity;
    return 2.0 / th * acoth(arg);
}

double t_blowup_of(const Scalars& s) {
    const double th = std::sqrt(8.0 * s.a / s.kappa);
    // The denominator theta*coth(theta*tau/2) + 4 lambda a^2 / kappa vanishes at tau
    // only when the (negative) shift exceeds theta in magnitude.
    const double r = -4.0 * s.lambda * s.a * s.a / (s.kappa * th);
    if (r <= 1.0) return kInfinity;
    return 2.0 / th * acoth(r);
}

AdmissibilityReport admissibility_of(const Scalars& s, ModelKind kind, double T) {
    AdmissibilityReport rep;
    rep.theta = std::sqrt(8.0 * s.a / s.kappa);
    rep.H = h_factor_of(s);
    rep.t_blowup = t_blowup_of(s);
    rep.t_max = t_max_of(s);
    if (kind != ModelKind::Model1) {
        rep.admissible = true;
        return rep;
    }
    std::ostringstream why;
    why.precision(17);
    if (!(T < rep.t_blowup)) {
        rep.admissible = false;
        why << "T >= T_blowup (Riccati solution escapes at horizon " << rep.t_blowup << ")";
    } else if (!(T < rep.t_max)) {
        rep.admissible = false;
        why << "T >= T_max (T_max = " << rep.t_max << ", H = " << rep.H << ")";
    }
    rep.reason = why.str();
    return rep;
}

}  // namespace

ModelParams ModelParams::validate(const RawParams& raw, AdmissibilityMode mode) {
    require_finite(raw.s0, "s0");
    require_positive(raw.a, "a");
    require_positive(raw.g, "g");
    require_positive(raw.kappa, "kappa");
    require_positive(raw.sigma, "sigma");
    require_positive(raw.T, "T");
    require_finite(raw.mu, "mu");
    require_finite(raw.lambda, "lambda");
    require_finite(raw.q0, "q0");
    switch (raw.kind) {
        case ModelKind::Model1:
        case ModelKind::Model2:
        case ModelKind::Model3: break;
        default: throw ParamError("model", "model must be 1, 2 or 3");
    }
    if (mode == AdmissibilityMode::Enforce) {
        const auto rep = admissibility_of(scalars(raw), raw.kind, raw.T);
        if (!rep.admissible) throw AdmissibilityError(rep.reason);
    }
    return ModelParams(raw);
}

ModelParams ModelParams::with_lambda(double lambda, AdmissibilityMode mode) const {
    RawParams r = raw_;
    r.lambda = lambda;
    return validate(r, mode);
}

ModelParams ModelParams::with_q0(double q0) const {
    RawParams r = raw_;
    r.q0 = q0;
    return validate(r, AdmissibilityMode::ReportOnly);
}

ModelParams ModelParams::with_kind(ModelKind kind) const {
    RawParams r = raw_;
    r.kind = kind;
    return validate(r, AdmissibilityMode::ReportOnly);
}

double theta(double a, double kappa) {
    require_positive(a, "a");
    require_positive(kappa, "kappa");
    return std::sqrt(8.0 * a / kappa);
}

double theta(const ModelParams& p) { return std::sqrt(8.0 * p.a() / p.kappa()); }

double h_factor(const ModelParams& p) { return h_factor_of(scalars(p)); }

double t_max(const ModelParams& p) { return t_max_of(scalars(p)); }

double t_blowup(const ModelParams& p) { return t_blowup_of(scalars(p)); }

double lambda_threshold(double a, double kappa) {
    require_positive(a, "a");
    require_positive(kappa, "kappa");
    return std::sqrt(kappa / (2.0 * a * a * a));
}

double lambda_threshold(const ModelParams& p) { return lambda_threshold(p.a(), p.kappa()); }

double q_star(double s0, double a) {
    require_finite(s0, "s0");
    require_positive(a, "a");
    return s0 / (2.0 * a);
}

double q_star(const ModelParams& p) { return p.s0() / (2.0 * p.a()); }

AdmissibilityReport admissibility(const ModelParams& p) {
    return admissibility_of(scalars(p), p.kind(), p.T());
}

namespace {

std::string_view trim(std::string_view s) {
    const auto ws = " \t\r\n";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

double parse_number(std::string_view key, std::string_view text) {
    double v = 0.0;
    const char* first = text.data();
    const char* last = text.data() + text.size();
    if (first != last && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, v, std::chars_format::general);
    if (ec != std::errc() || ptr != last || text.empty()) {
        throw ParamError(std::string(key), "cannot parse value '" + std::string(text) + "' for key '" +
                                               std::string(key) + "'");
    }
    return v;
}

}  // namespace

RawParams parse_config(std::string_view text) {
    std::map<std::string, double, std::less<>> values;
    std::size_t line_no = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw ParamError("", "line " + std::to_string(line_no) + ": expected 'key = value'");
        }
        const auto key = trim(line.substr(0, eq));
        const auto val = trim(line.substr(eq + 1));
        static constexpr std::string_view known[] = {"s0", "a", "g", "kappa", "sigma",
                                                     "T", "mu", "lambda", "q0", "model"};
        bool ok = false;
        for (auto k : known) ok = ok || (k == key);
        if (!ok) throw ParamError(std::string(key), "unknown config key '" + std::string(key) + "'");
        if (values.contains(key)) throw ParamError(std::string(key), "duplicate config key '" + std::string(key) + "'");
        values.emplace(std::string(key), parse_number(key, val));
    }

    auto take = [&](const char* key, std::optional<double> fallback = std::nullopt) {
        if (auto it = values.find(key); it != values.end()) return it->second;
        if (fallback) return *fallback;
        throw ParamError(key, std::string("missing config key '") + key + "'");
    };

    RawParams raw;
    raw.s0 = take("s0");
    raw.a = take("a");
    raw.g = take("g");
    raw.kappa = take("kappa");
    raw.sigma = take("sigma");
    raw.T = take("T");
    raw.mu = take("mu", 0.0);
    raw.lambda = take("lambda");
    raw.q0 = take("q0", 0.0);
    const double model = take("model");
    if (model != std::floor(model)) throw ParamError("model", "model must be 1, 2 or 3");
    raw.kind = model_kind_from_int(static_cast<int>(model));
    return raw;
}

RawParams load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParamError("", "cannot open config file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string format_config(const RawParams& raw) {
    std::ostringstream out;
    out.precision(17);
    out << "s0 = " << raw.s0 << "\n"
        << "a = " << raw.a << "\n"
        << "g = " << raw.g << "\n"
        << "kappa = " << raw.kappa << "\n"
        << "sigma = " << raw.sigma << "\n"
        << "T = " << raw.T << "\n"
        << "mu = " << raw.mu << "\n"
        << "lambda = " << raw.lambda << "\n"
        << "q0 = " << raw.q0 << "\n"
        << "model = " << static_cast<int>(raw.kind) << "\n";
    return out.str();
}

}  // namespace manipsim
