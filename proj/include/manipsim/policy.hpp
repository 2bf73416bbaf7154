#pragma once

#include <string>
#include <vector>

#include "manipsim/coeffs.hpp"

namespace manipsim {

/// Controls and observed price at one state.
struct PolicyEval {
    double t = 0.0;
    double q = 0.0;
    double s = 0.0;        ///< pre-impact price; unused by Model1
    double u = 0.0;        ///< production drift
    double z = 0.0;        ///< volatility control, admissible when > -1
    double s_tilde = 0.0;  ///< s0 - a q (Model1) or s - a q
    bool admissible = true;
};

/// Every feedback law here is u = uq(t) q + us(t) s + u0(t), z = z(t).
struct FeedbackRow {
    double uq = 0.0;
    double us = 0.0;
    double u0 = 0.0;
    double z = 0.0;
};

/// Gains implied by one coefficient-table row (layout of coefficient_names(kind)).
FeedbackRow feedback_from_row(const ModelParams& p, ModelKind kind, std::span<const double> row);

/// Feedback policy tabulated on the coefficient grid.
class Policy {
public:
    /// Model3 coefficient sets violating the trader volatility bound are rejected.
    Policy(const ModelParams& p, const Coefficients& c);

    ModelKind kind() const noexcept { return kind_; }
    const TimeGrid& grid() const noexcept { return grid_; }
    const FeedbackRow& row(std::size_t k) const { return rows_[k]; }
    const std::vector<FeedbackRow>& rows() const noexcept { return rows_; }

    /// Linear interpolation of the feedback gains at t, then evaluation at (q, s).
    PolicyEval eval(double t, double q, double s = 0.0) const;
    FeedbackRow gains(double t) const;

private:
    ModelKind kind_;
    TimeGrid grid_;
    double s0_, a_;
    std::vector<FeedbackRow> rows_;
};

PolicyEval control_model1(const ModelParams& p, const Coefficients& c, double t, double q);
PolicyEval control_model2(const ModelParams& p, const Coefficients& c, double t, double q, double s);
PolicyEval control_model3(const ModelParams& p, const Coefficients& c, double t, double q, double s);

struct AdmissibilityCheck {
    bool admissible = true;
    double z_min = 0.0;      ///< grid minimum of z
    double t_at_min = 0.0;
    double margin = 0.0;     ///< z_min + 1
    std::string reason;
};

/// z > -1 on the whole coefficient grid.
AdmissibilityCheck check_admissible(const ModelParams& p, const Coefficients& c);

}  // namespace manipsim
