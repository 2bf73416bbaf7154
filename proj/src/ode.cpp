#include "manipsim/ode.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

#include "manipsim/csv.hpp"

namespace manipsim {

TimeGrid::TimeGrid(double T, std::size_t n_steps) : T_(T), n_(n_steps) {
    if (!(T > 0.0) || !std::isfinite(T)) throw std::invalid_argument("TimeGrid: T > 0 required");
    if (n_steps == 0) throw std::invalid_argument("TimeGrid: n_steps >= 1 required");
}

double TimeGrid::at(std::size_t k) const noexcept {
    if (k >= n_) return T_;
    return T_ * (static_cast<double>(k) / static_cast<double>(n_));
}

std::vector<double> TimeGrid::points() const {
    std::vector<double> pts(size());
    for (std::size_t k = 0; k < pts.size(); ++k) pts[k] = at(k);
    return pts;
}

CoefficientTable::CoefficientTable(TimeGrid grid, std::vector<std::string> names)
    : grid_(grid), names_(std::move(names)), values_(grid_.size() * names_.size(), 0.0) {}

std::size_t CoefficientTable::index_of(std::string_view name) const {
    const auto it = std::find(names_.begin(), names_.end(), name);
    if (it == names_.end()) throw std::out_of_range("no coefficient named '" + std::string(name) + "'");
    return static_cast<std::size_t>(it - names_.begin());
}

std::vector<double> CoefficientTable::column(std::string_view name) const {
    const auto j = index_of(name);
    std::vector<double> out(rows());
    for (std::size_t k = 0; k < rows(); ++k) out[k] = at(k, j);
    return out;
}

void CoefficientTable::add_column(std::string name, std::span<const double> values) {
    if (values.size() != rows()) throw std::invalid_argument("add_column: length mismatch");
    const std::size_t old_cols = cols();
    std::vector<double> grown(rows() * (old_cols + 1));
    for (std::size_t k = 0; k < rows(); ++k) {
        std::copy_n(values_.begin() + static_cast<std::ptrdiff_t>(k * old_cols), old_cols,
                    grown.begin() + static_cast<std::ptrdiff_t>(k * (old_cols + 1)));
        grown[k * (old_cols + 1) + old_cols] = values[k];
    }
    values_ = std::move(grown);
    names_.push_back(std::move(name));
}

CoefficientTable integrate_backward(const OdeSystem& system, const TimeGrid& grid,
                                    const IntegrateOptions& options) {
    const std::size_t dim = system.dimension();
    if (dim == 0) throw std::invalid_argument("integrate_backward: empty system");
    if (system.names.size() != dim) throw std::invalid_argument("integrate_backward: names/terminal mismatch");
    for (double v : system.terminal) {
        if (!std::isfinite(v)) throw std::invalid_argument("integrate_backward: terminal condition not finite");
    }

    CoefficientTable table(grid, system.names);
    const std::size_t n = grid.n_steps();
    const double h = grid.step();

    std::vector<double> y(system.terminal), k1(dim), k2(dim), k3(dim), k4(dim), tmp(dim);
    std::copy(y.begin(), y.end(), table.row(n).begin());

    for (std::size_t step = n; step > 0; --step) {
        const double t = grid.at(step);
        const double tm = t - 0.5 * h;
        const double tl = grid.at(step - 1);

        system.rhs(t, y, k1);
        for (std::size_t i = 0; i < dim; ++i) tmp[i] = y[i] - 0.5 * h * k1[i];
        system.rhs(tm, tmp, k2);
        for (std::size_t i = 0; i < dim; ++i) tmp[i] = y[i] - 0.5 * h * k2[i];
        system.rhs(tm, tmp, k3);
        for (std::size_t i = 0; i < dim; ++i) tmp[i] = y[i] - h * k3[i];
        system.rhs(tl, tmp, k4);
        for (std::size_t i = 0; i < dim; ++i) {
            y[i] -= h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            if (!std::isfinite(y[i]) || std::abs(y[i]) > options.divergence_cap) {
                std::ostringstream msg;
                msg.precision(6);
                msg << "backward integration diverged: |" << system.names[i] << "| exceeds "
                    << options.divergence_cap << " at t = " << tl;
                throw DivergenceError(tl, msg.str());
            }
        }
        std::copy(y.begin(), y.end(), table.row(step - 1).begin());
    }
    return table;
}

Bracket locate(const TimeGrid& grid, double t) {
    if (!(t >= 0.0 && t <= grid.horizon())) {
        throw std::out_of_range("time outside [0, T]");
    }
    const std::size_t n = grid.n_steps();
    const double x = t / grid.step();
    auto k = static_cast<std::size_t>(std::floor(x));
    if (k >= n) return {n - 1, 1.0};
    // Grid points are reproduced exactly even when t/h rounds just below an integer.
    if (grid.at(k + 1) == t) return {k, 1.0};
    if (grid.at(k) == t) return {k, 0.0};
    const double w = (t - grid.at(k)) / (grid.at(k + 1) - grid.at(k));
    return {k, std::clamp(w, 0.0, 1.0)};
}

std::vector<double> interpolate(const CoefficientTable& table, double t) {
    const auto [k, w] = locate(table.grid(), t);
    std::vector<double> out(table.cols());
    const auto lo = table.row(k);
    const auto hi = table.row(k + 1);
    for (std::size_t j = 0; j < out.size(); ++j) {
        out[j] = w == 0.0 ? lo[j] : w == 1.0 ? hi[j] : (1.0 - w) * lo[j] + w * hi[j];
    }
    return out;
}

std::vector<double> tail_trapezoid(const TimeGrid& grid, std::span<const double> f) {
    if (f.size() != grid.size()) throw std::invalid_argument("tail_trapezoid: length mismatch");
    std::vector<double> out(f.size(), 0.0);
    const double h = grid.step();
    for (std::size_t k = grid.n_steps(); k > 0; --k) {
        out[k - 1] = out[k] + 0.5 * h * (f[k - 1] + f[k]);
    }
    return out;
}

void write_csv(const CoefficientTable& table, std::ostream& out) {
    out << "t";
    for (const auto& name : table.names()) out << ',' << name;
    out << '\n';
    for (std::size_t k = 0; k < table.rows(); ++k) {
        out << format_double(table.grid().at(k));
        for (double v : table.row(k)) out << ',' << format_double(v);
        out << '\n';
    }
}

}  // namespace manipsim
