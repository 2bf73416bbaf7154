#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace manipsim {

/// Uniform grid 0 = t_0 < t_1 < ... < t_n = T.
class TimeGrid {
public:
    TimeGrid(double T, std::size_t n_steps);

    double horizon() const noexcept { return T_; }
    std::size_t n_steps() const noexcept { return n_; }
    std::size_t size() const noexcept { return n_ + 1; }
    double step() const noexcept { return T_ / static_cast<double>(n_); }
    /// Exact endpoints: at(0) == 0 and at(n_steps()) == T.
    double at(std::size_t k) const noexcept;
    std::vector<double> points() const;

    bool operator==(const TimeGrid&) const = default;

private:
    double T_;
    std::size_t n_;
};

/// Time-gridded values of a set of named coefficient functions, row k at grid.at(k).
class CoefficientTable {
public:
    CoefficientTable(TimeGrid grid, std::vector<std::string> names);

    const TimeGrid& grid() const noexcept { return grid_; }
    const std::vector<std::string>& names() const noexcept { return names_; }
    std::size_t rows() const noexcept { return grid_.size(); }
    std::size_t cols() const noexcept { return names_.size(); }

    std::size_t index_of(std::string_view name) const;
    double& at(std::size_t row, std::size_t col) { return values_[row * cols() + col]; }
    double at(std::size_t row, std::size_t col) const { return values_[row * cols() + col]; }
    double at(std::size_t row, std::string_view name) const { return at(row, index_of(name)); }
    std::span<const double> row(std::size_t k) const { return {values_.data() + k * cols(), cols()}; }
    std::span<double> row(std::size_t k) { return {values_.data() + k * cols(), cols()}; }
    std::vector<double> column(std::string_view name) const;

    /// Appends a column; `values` must have rows() entries.
    void add_column(std::string name, std::span<const double> values);

    bool operator==(const CoefficientTable&) const = default;

private:
    TimeGrid grid_;
    std::vector<std::string> names_;
    std::vector<double> values_;
};

/// Terminal-value system y' = f(t, y), y(T) = terminal.
struct OdeSystem {
    using Rhs = std::function<void(double t, std::span<const double> y, std::span<double> dydt)>;

    std::vector<std::string> names;
    Rhs rhs;
    std::vector<double> terminal;

    std::size_t dimension() const noexcept { return terminal.size(); }
};

/// Raised when a backward solve leaves the representable range, which for the
/// Riccati equations here means the solution blows up inside the horizon.
class DivergenceError : public std::runtime_error {
public:
    DivergenceError(double t, const std::string& what) : std::runtime_error(what), t_(t) {}
    double time() const noexcept { return t_; }

private:
    double t_;
};

struct IntegrateOptions {
    double divergence_cap = 1e12;
};

/// Classical RK4 from T down to 0 on `grid`. Row n holds the terminal condition exactly.
CoefficientTable integrate_backward(const OdeSystem& system, const TimeGrid& grid,
                                    const IntegrateOptions& options = {});

/// Linear interpolation between bracketing rows; exact at grid points.
std::vector<double> interpolate(const CoefficientTable& table, double t);

/// Bracketing row and weight: value = (1-w)*row[k] + w*row[k+1].
struct Bracket {
    std::size_t k;
    double w;
};
Bracket locate(const TimeGrid& grid, double t);

/// Tail integrals I_k = int_{t_k}^T f dt by the trapezoid rule on the grid.
std::vector<double> tail_trapezoid(const TimeGrid& grid, std::span<const double> f);

/// "t,<name1>,..." header then one row per grid point, 17 significant digits.
void write_csv(const CoefficientTable& table, std::ostream& out);

}  // namespace manipsim
