#include "stfe/grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

namespace stfe {

Grid::Grid(double length, std::size_t nodes) : length_(length), nodes_(nodes)
{
    if (!(length > 0.0) || !std::isfinite(length))
        throw ParameterError("grid length must be positive and finite");
    if (nodes < 8)
        throw ParameterError("grid needs at least 8 nodes, got " + std::to_string(nodes));
}

GridFunction::GridFunction(const Grid& grid, double fill) : grid_(grid), values_(grid.size(), fill) {}

GridFunction::GridFunction(const Grid& grid, std::vector<double> values)
    : grid_(grid), values_(std::move(values))
{
    if (values_.size() != grid_.size())
        throw GridMismatch("grid function has " + std::to_string(values_.size()) + " values, grid has " +
                           std::to_string(grid_.size()) + " nodes");
}

GridFunction GridFunction::sample(const Grid& grid, const std::function<double(double)>& f)
{
    GridFunction out(grid);
    for (std::size_t i = 0; i < grid.size(); ++i)
        out[i] = f(grid.node(i));
    return out;
}

double GridFunction::max() const { return *std::max_element(values_.begin(), values_.end()); }

double GridFunction::min() const { return *std::min_element(values_.begin(), values_.end()); }

double GridFunction::max_abs() const
{
    double m = 0.0;
    for (double v : values_)
        m = std::max(m, std::abs(v));
    return m;
}

bool GridFunction::all_finite() const noexcept
{
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

GridFunction& GridFunction::operator+=(const GridFunction& other)
{
    require_same_grid(*this, other);
    for (std::size_t i = 0; i < values_.size(); ++i)
        values_[i] += other.values_[i];
    return *this;
}

GridFunction& GridFunction::operator-=(const GridFunction& other)
{
    require_same_grid(*this, other);
    for (std::size_t i = 0; i < values_.size(); ++i)
        values_[i] -= other.values_[i];
    return *this;
}

GridFunction& GridFunction::operator*=(double s) noexcept
{
    for (double& v : values_)
        v *= s;
    return *this;
}

GridFunction& GridFunction::axpy(double a, const GridFunction& other)
{
    require_same_grid(*this, other);
    for (std::size_t i = 0; i < values_.size(); ++i)
        values_[i] += a * other.values_[i];
    return *this;
}

void require_same_grid(const GridFunction& a, const GridFunction& b)
{
    if (!(a.grid() == b.grid()))
        throw GridMismatch("grid functions live on incompatible grids");
}

GridFunction shift(const GridFunction& f, std::ptrdiff_t offset)
{
    GridFunction out(f.grid());
    const auto m = static_cast<std::ptrdiff_t>(f.size());
    for (std::ptrdiff_t i = 0; i < m; ++i)
        out[static_cast<std::size_t>(i)] = f.at_wrapped(i - offset);
    return out;
}

// ---------------------------------------------------------------------------
// PeriodicOperator

PeriodicOperator::PeriodicOperator(const Grid& grid, std::size_t bandwidth)
    : grid_(grid), bandwidth_(bandwidth), bands_(grid.size() * (2 * bandwidth + 1), 0.0)
{
    if (grid.size() < 4 * bandwidth + 1)
        throw ResolutionError("grid too coarse for a band of half-width " + std::to_string(bandwidth));
}

PeriodicOperator PeriodicOperator::identity(const Grid& grid)
{
    PeriodicOperator op(grid, 0);
    for (std::size_t i = 0; i < grid.size(); ++i)
        op.entry(i, 0) = 1.0;
    return op;
}

GridFunction PeriodicOperator::apply(const GridFunction& f) const
{
    if (!(f.grid() == grid_))
        throw GridMismatch("operator and grid function live on incompatible grids");
    GridFunction out(grid_);
    const auto b = static_cast<std::ptrdiff_t>(bandwidth_);
    for (std::size_t i = 0; i < size(); ++i) {
        double acc = 0.0;
        for (std::ptrdiff_t o = -b; o <= b; ++o)
            acc += entry(i, o) * f.at_wrapped(static_cast<std::ptrdiff_t>(i) + o);
        out[i] = acc;
    }
    return out;
}

std::vector<double> PeriodicOperator::column_sums() const
{
    std::vector<double> sums(size(), 0.0);
    const auto b = static_cast<std::ptrdiff_t>(bandwidth_);
    for (std::size_t i = 0; i < size(); ++i)
        for (std::ptrdiff_t o = -b; o <= b; ++o)
            sums[grid_.wrap(static_cast<std::ptrdiff_t>(i) + o)] += entry(i, o);
    return sums;
}

double PeriodicOperator::max_abs_entry() const noexcept
{
    double m = 0.0;
    for (double v : bands_)
        m = std::max(m, std::abs(v));
    return m;
}

PeriodicOperator PeriodicOperator::shifted_scaled(double alpha, double beta) const
{
    PeriodicOperator out(*this);
    for (double& v : out.bands_)
        v *= beta;
    for (std::size_t i = 0; i < size(); ++i)
        out.entry(i, 0) += alpha;
    return out;
}

PeriodicOperator& PeriodicOperator::add_scaled(double s, const PeriodicOperator& other)
{
    if (!(other.grid_ == grid_))
        throw GridMismatch("operators live on incompatible grids");
    if (other.bandwidth_ > bandwidth_)
        throw ParameterError("cannot add an operator with a wider band");
    const auto b = static_cast<std::ptrdiff_t>(other.bandwidth_);
    for (std::size_t i = 0; i < size(); ++i)
        for (std::ptrdiff_t o = -b; o <= b; ++o)
            entry(i, o) += s * other.entry(i, o);
    return *this;
}

// ---------------------------------------------------------------------------
// Finite differences

namespace {

struct Stencil {
    std::vector<double> coeffs;  // offsets -h..h
    double denom_power;
};

Stencil central_stencil(int order, int accuracy)
{
    if (accuracy == 2) {
        switch (order) {
        case 1: return {{-0.5, 0.0, 0.5}, 1};
        case 2: return {{1.0, -2.0, 1.0}, 2};
        case 3: return {{-0.5, 1.0, 0.0, -1.0, 0.5}, 3};
        case 4: return {{1.0, -4.0, 6.0, -4.0, 1.0}, 4};
        default: break;
        }
    }
    else if (accuracy == 4) {
        switch (order) {
        case 1: return {{1.0 / 12, -8.0 / 12, 0.0, 8.0 / 12, -1.0 / 12}, 1};
        case 2: return {{-1.0 / 12, 16.0 / 12, -30.0 / 12, 16.0 / 12, -1.0 / 12}, 2};
        case 3: return {{1.0 / 8, -1.0, 13.0 / 8, 0.0, -13.0 / 8, 1.0, -1.0 / 8}, 3};
        case 4: return {{-1.0 / 6, 2.0, -6.5, 56.0 / 6, -6.5, 2.0, -1.0 / 6}, 4};
        default: break;
        }
    }
    throw ParameterError("unsupported derivative order " + std::to_string(order) + " / accuracy " +
                         std::to_string(accuracy));
}

}  // namespace

GridFunction derivative(const GridFunction& f, int order, int accuracy)
{
    const Stencil st = central_stencil(order, accuracy);
    const double scale = 1.0 / std::pow(f.grid().dx(), st.denom_power);
    const auto h = static_cast<std::ptrdiff_t>(st.coeffs.size() / 2);
    GridFunction out(f.grid());
    for (std::size_t i = 0; i < f.size(); ++i) {
        double acc = 0.0;
        for (std::ptrdiff_t o = -h; o <= h; ++o)
            acc += st.coeffs[static_cast<std::size_t>(o + h)] * f.at_wrapped(static_cast<std::ptrdiff_t>(i) + o);
        out[i] = acc * scale;
    }
    return out;
}

PeriodicOperator derivative_operator(const Grid& grid, int order, int accuracy)
{
    const Stencil st = central_stencil(order, accuracy);
    const double scale = 1.0 / std::pow(grid.dx(), st.denom_power);
    const auto h = static_cast<std::ptrdiff_t>(st.coeffs.size() / 2);
    PeriodicOperator op(grid, static_cast<std::size_t>(h));
    for (std::size_t i = 0; i < grid.size(); ++i)
        for (std::ptrdiff_t o = -h; o <= h; ++o)
            op.entry(i, o) = st.coeffs[static_cast<std::size_t>(o + h)] * scale;
    return op;
}

GridFunction forward_difference(const GridFunction& f)
{
    GridFunction out(f.grid());
    const double inv = 1.0 / f.grid().dx();
    const std::size_t m = f.size();
    for (std::size_t i = 0; i < m; ++i)
        out[i] = (f[(i + 1) % m] - f[i]) * inv;
    return out;
}

GridFunction flux_divergence(const GridFunction& interface_flux)
{
    GridFunction out(interface_flux.grid());
    const double inv = 1.0 / interface_flux.grid().dx();
    const std::size_t m = interface_flux.size();
    for (std::size_t i = 0; i < m; ++i)
        out[i] = (interface_flux[i] - interface_flux[(i + m - 1) % m]) * inv;
    return out;
}

GridFunction third_difference(const GridFunction& f)
{
    GridFunction out(f.grid());
    const double dx = f.grid().dx();
    const double inv = 1.0 / (dx * dx * dx);
    for (std::size_t i = 0; i < f.size(); ++i) {
        const auto s = static_cast<std::ptrdiff_t>(i);
        out[i] = (f.at_wrapped(s + 2) - 3.0 * f.at_wrapped(s + 1) + 3.0 * f[i] - f.at_wrapped(s - 1)) * inv;
    }
    return out;
}

double quadrature(const GridFunction& f)
{
    double acc = 0.0;
    for (double v : f.values())
        acc += v;
    return acc * f.grid().dx();
}

double inner_l2(const GridFunction& f, const GridFunction& g)
{
    require_same_grid(f, g);
    double acc = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i)
        acc += f[i] * g[i];
    return acc * f.grid().dx();
}

double norm_l2(const GridFunction& f) { return std::sqrt(inner_l2(f, f)); }

// ---------------------------------------------------------------------------
// Cyclic banded solver

PeriodicBandedSolver::PeriodicBandedSolver(const PeriodicOperator& op)
    : op_(op), n_inner_(op.size() - op.bandwidth()), bw_(op.bandwidth())
{
    const std::size_t m = op.size();
    const std::size_t n = n_inner_;
    const std::size_t b = bw_;
    const std::size_t w = 2 * b + 1;
    const auto sb = static_cast<std::ptrdiff_t>(b);
    const double tiny = 1e-13 * std::max(op.max_abs_entry(), std::numeric_limits<double>::min());

    lu_.assign(n * w, 0.0);
    a12_.assign(n * b, 0.0);
    a21_.assign(b * n, 0.0);
    std::vector<double> a22(b * b, 0.0);

    auto band = [&](std::size_t i, std::size_t j) -> double& {
        return lu_[i * w + static_cast<std::size_t>(static_cast<std::ptrdiff_t>(j) - static_cast<std::ptrdiff_t>(i) + sb)];
    };

    for (std::size_t i = 0; i < m; ++i) {
        for (std::ptrdiff_t o = -sb; o <= sb; ++o) {
            const std::size_t j = op.grid().wrap(static_cast<std::ptrdiff_t>(i) + o);
            const double v = op.entry(i, o);
            if (i < n && j < n)
                band(i, j) += v;
            else if (i < n)
                a12_[i * b + (j - n)] += v;
            else if (j < n)
                a21_[(i - n) * n + j] += v;
            else
                a22[(i - n) * b + (j - n)] += v;
        }
    }

    // Banded LU of the inner block, no pivoting.
    for (std::size_t k = 0; k < n; ++k) {
        const double pivot = band(k, k);
        if (!(std::abs(pivot) > tiny))
            throw SolverFailure("periodic banded solve: vanishing pivot at row " + std::to_string(k),
                                std::numeric_limits<double>::infinity());
        const std::size_t last = std::min(k + b, n - 1);
        for (std::size_t i = k + 1; i <= last; ++i) {
            const double l = band(i, k) / pivot;
            band(i, k) = l;
            for (std::size_t j = k + 1; j <= last; ++j)
                band(i, j) -= l * band(k, j);
        }
    }

    auto inner_solve = [&](std::vector<double>& x) {
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t first = i > b ? i - b : 0;
            for (std::size_t j = first; j < i; ++j)
                x[i] -= band(i, j) * x[j];
        }
        for (std::size_t ii = n; ii-- > 0;) {
            const std::size_t last = std::min(ii + b, n - 1);
            for (std::size_t j = ii + 1; j <= last; ++j)
                x[ii] -= band(ii, j) * x[j];
            x[ii] /= band(ii, ii);
        }
    };

    z_.assign(n * b, 0.0);
    std::vector<double> col(n);
    for (std::size_t c = 0; c < b; ++c) {
        for (std::size_t i = 0; i < n; ++i)
            col[i] = a12_[i * b + c];
        inner_solve(col);
        for (std::size_t i = 0; i < n; ++i)
            z_[i * b + c] = col[i];
    }

    schur_ = a22;
    for (std::size_t r = 0; r < b; ++r)
        for (std::size_t c = 0; c < b; ++c) {
            double acc = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                acc += a21_[r * n + i] * z_[i * b + c];
            schur_[r * b + c] -= acc;
        }

    piv_.resize(b);
    for (std::size_t k = 0; k < b; ++k) {
        std::size_t p = k;
        for (std::size_t i = k + 1; i < b; ++i)
            if (std::abs(schur_[i * b + k]) > std::abs(schur_[p * b + k]))
                p = i;
        piv_[k] = p;
        if (p != k)
            for (std::size_t c = 0; c < b; ++c)
                std::swap(schur_[k * b + c], schur_[p * b + c]);
        const double pivot = schur_[k * b + k];
        if (!(std::abs(pivot) > tiny))
            throw SolverFailure("periodic banded solve: singular corner block",
                                std::numeric_limits<double>::infinity());
        for (std::size_t i = k + 1; i < b; ++i) {
            const double l = schur_[i * b + k] / pivot;
            schur_[i * b + k] = l;
            for (std::size_t c = k + 1; c < b; ++c)
                schur_[i * b + c] -= l * schur_[k * b + c];
        }
    }
}

std::vector<double> PeriodicBandedSolver::raw_solve(std::span<const double> rhs) const
{
    const std::size_t n = n_inner_;
    const std::size_t b = bw_;
    const std::size_t w = 2 * b + 1;
    std::vector<double> x(rhs.begin(), rhs.end());

    auto band = [&](std::size_t i, std::size_t j) {
        return lu_[i * w + (j + b - i)];
    };

    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t first = i > b ? i - b : 0;
        double acc = x[i];
        for (std::size_t j = first; j < i; ++j)
            acc -= band(i, j) * x[j];
        x[i] = acc;
    }
    for (std::size_t ii = n; ii-- > 0;) {
        const std::size_t last = std::min(ii + b, n - 1);
        double acc = x[ii];
        for (std::size_t j = ii + 1; j <= last; ++j)
            acc -= band(ii, j) * x[j];
        x[ii] = acc / band(ii, ii);
    }

    if (b == 0)
        return x;

    std::vector<double> y2(b);
    for (std::size_t r = 0; r < b; ++r) {
        double acc = x[n + r];
        for (std::size_t i = 0; i < n; ++i)
            acc -= a21_[r * n + i] * x[i];
        y2[r] = acc;
    }
    for (std::size_t k = 0; k < b; ++k)
        if (piv_[k] != k)
            std::swap(y2[k], y2[piv_[k]]);
    for (std::size_t i = 0; i < b; ++i)
        for (std::size_t j = 0; j < i; ++j)
            y2[i] -= schur_[i * b + j] * y2[j];
    for (std::size_t ii = b; ii-- > 0;) {
        for (std::size_t j = ii + 1; j < b; ++j)
            y2[ii] -= schur_[ii * b + j] * y2[j];
        y2[ii] /= schur_[ii * b + ii];
    }

    for (std::size_t i = 0; i < n; ++i) {
        double acc = x[i];
        for (std::size_t c = 0; c < b; ++c)
            acc -= z_[i * b + c] * y2[c];
        x[i] = acc;
    }
    for (std::size_t r = 0; r < b; ++r)
        x[n + r] = y2[r];
    return x;
}

GridFunction PeriodicBandedSolver::solve(const GridFunction& rhs) const
{
    if (!(rhs.grid() == op_.grid()))
        throw GridMismatch("operator and right-hand side live on incompatible grids");

    GridFunction x(rhs.grid(), raw_solve(rhs.values()));
    GridFunction r = rhs - op_.apply(x);
    const std::vector<double> dx = raw_solve(r.values());
    for (std::size_t i = 0; i < x.size(); ++i)
        x[i] += dx[i];

    r = rhs - op_.apply(x);
    const double res = r.max_abs();
    const double scale = rhs.max_abs();
    if (!x.all_finite() || res > 1e-10 * scale)
        throw SolverFailure("periodic banded solve did not converge (residual " + std::to_string(res) + ")", res);
    return x;
}

GridFunction solve_banded_periodic(const PeriodicOperator& op, const GridFunction& rhs)
{
    return PeriodicBandedSolver(op).solve(rhs);
}

}  // namespace stfe
