#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "stfe/errors.hpp"

namespace stfe {

/// Uniform periodic grid on the torus [0, L) with nodes x_i = i*dx.
class Grid {
public:
    Grid(double length, std::size_t nodes);

    double length() const noexcept { return length_; }
    std::size_t size() const noexcept { return nodes_; }
    double dx() const noexcept { return length_ / static_cast<double>(nodes_); }
    double node(std::size_t i) const noexcept { return static_cast<double>(i) * dx(); }
    /// Position of the interface between node i and node i+1.
    double midpoint(std::size_t i) const noexcept { return (static_cast<double>(i) + 0.5) * dx(); }

    /// Periodic index wrap for signed offsets.
    std::size_t wrap(std::ptrdiff_t i) const noexcept
    {
        const auto m = static_cast<std::ptrdiff_t>(nodes_);
        const auto r = i % m;
        return static_cast<std::size_t>(r < 0 ? r + m : r);
    }

    friend bool operator==(const Grid& a, const Grid& b) noexcept
    {
        return a.length_ == b.length_ && a.nodes_ == b.nodes_;
    }

private:
    double length_;
    std::size_t nodes_;
};

/// Real samples on the nodes of a Grid. Interface-centred quantities (fluxes)
/// reuse the type with index i standing for x_{i+1/2}.
class GridFunction {
public:
    explicit GridFunction(const Grid& grid, double fill = 0.0);
    GridFunction(const Grid& grid, std::vector<double> values);

    static GridFunction sample(const Grid& grid, const std::function<double(double)>& f);

    const Grid& grid() const noexcept { return grid_; }
    std::size_t size() const noexcept { return values_.size(); }

    double& operator[](std::size_t i) noexcept { return values_[i]; }
    double operator[](std::size_t i) const noexcept { return values_[i]; }
    /// Periodic access with a signed index.
    double at_wrapped(std::ptrdiff_t i) const noexcept { return values_[grid_.wrap(i)]; }

    std::span<double> values() noexcept { return values_; }
    std::span<const double> values() const noexcept { return values_; }

    double max() const;
    double min() const;
    double max_abs() const;
    bool all_finite() const noexcept;

    GridFunction& operator+=(const GridFunction& other);
    GridFunction& operator-=(const GridFunction& other);
    GridFunction& operator*=(double s) noexcept;
    /// this += a * other
    GridFunction& axpy(double a, const GridFunction& other);

    friend GridFunction operator+(GridFunction a, const GridFunction& b) { return a += b; }
    friend GridFunction operator-(GridFunction a, const GridFunction& b) { return a -= b; }
    friend GridFunction operator*(double s, GridFunction a) { return a *= s; }

    friend bool operator==(const GridFunction& a, const GridFunction& b) noexcept
    {
        return a.grid_ == b.grid_ && a.values_ == b.values_;
    }

private:
    Grid grid_;
    std::vector<double> values_;
};

void require_same_grid(const GridFunction& a, const GridFunction& b);

/// Circular shift: result[i] = f[i - offset].
GridFunction shift(const GridFunction& f, std::ptrdiff_t offset);

/// Cyclic banded matrix: row i holds entries A(i, i+o mod M) for o in [-b, b].
class PeriodicOperator {
public:
    PeriodicOperator(const Grid& grid, std::size_t bandwidth);

    static PeriodicOperator identity(const Grid& grid);

    const Grid& grid() const noexcept { return grid_; }
    std::size_t size() const noexcept { return grid_.size(); }
    std::size_t bandwidth() const noexcept { return bandwidth_; }

    double& entry(std::size_t row, std::ptrdiff_t offset) noexcept
    {
        return bands_[row * width() + static_cast<std::size_t>(offset + static_cast<std::ptrdiff_t>(bandwidth_))];
    }
    double entry(std::size_t row, std::ptrdiff_t offset) const noexcept
    {
        return bands_[row * width() + static_cast<std::size_t>(offset + static_cast<std::ptrdiff_t>(bandwidth_))];
    }

    GridFunction apply(const GridFunction& f) const;

    /// Sum over rows of each column; zero for operators in divergence form.
    std::vector<double> column_sums() const;
    double max_abs_entry() const noexcept;

    /// Returns alpha*I + beta*this.
    PeriodicOperator shifted_scaled(double alpha, double beta) const;
    /// this += s * other (other's bandwidth may not exceed this one's).
    PeriodicOperator& add_scaled(double s, const PeriodicOperator& other);

private:
    std::size_t width() const noexcept { return 2 * bandwidth_ + 1; }

    Grid grid_;
    std::size_t bandwidth_;
    std::vector<double> bands_;
};

/// Central finite-difference derivative of order 1..4 with periodic wrap.
/// accuracy selects the formal order of the stencil (2 or 4).
GridFunction derivative(const GridFunction& f, int order, int accuracy = 2);

/// The same stencils as derivative(), assembled as operators.
PeriodicOperator derivative_operator(const Grid& grid, int order, int accuracy = 2);

/// (f_{i+1} - f_i)/dx, located at x_{i+1/2}.
GridFunction forward_difference(const GridFunction& f);

/// (F_{i+1/2} - F_{i-1/2})/dx for an interface field F; telescopes to zero mass.
GridFunction flux_divergence(const GridFunction& interface_flux);

/// Third difference (f_{i+2} - 3f_{i+1} + 3f_i - f_{i-1})/dx^3 located at x_{i+1/2}.
GridFunction third_difference(const GridFunction& f);

/// Rectangle rule dx * sum f_i.
double quadrature(const GridFunction& f);

double inner_l2(const GridFunction& f, const GridFunction& g);

double norm_l2(const GridFunction& f);

/// LU factorisation of a cyclic banded matrix, reusable across right-hand sides.
///
/// The last b rows and columns are split off; the remaining block is banded
/// without wrap-around and is factored without pivoting, the b x b Schur
/// complement with partial pivoting.
class PeriodicBandedSolver {
public:
    explicit PeriodicBandedSolver(const PeriodicOperator& op);

    /// Solve with one step of iterative refinement and a residual check.
    GridFunction solve(const GridFunction& rhs) const;

    const PeriodicOperator& op() const noexcept { return op_; }

private:
    std::vector<double> raw_solve(std::span<const double> rhs) const;

    PeriodicOperator op_;
    std::size_t n_inner_;
    std::size_t bw_;
    std::vector<double> lu_;      // n_inner x (2b+1), band storage
    std::vector<double> a12_;     // n_inner x b
    std::vector<double> a21_;     // b x n_inner
    std::vector<double> z_;       // A11^{-1} A12, n_inner x b
    std::vector<double> schur_;   // b x b, LU with pivots
    std::vector<std::size_t> piv_;
};

/// Factor-and-solve op * y = rhs; throws SolverFailure when the achieved
/// residual exceeds 1e-10 * |rhs|_inf.
GridFunction solve_banded_periodic(const PeriodicOperator& op, const GridFunction& rhs);

}  // namespace stfe
