#include "stfe/diagnostics.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace stfe {

double surface_energy(const GridFunction& u)
{
    const GridFunction du = forward_difference(u);
    return inner_l2(du, du);
}

EntropyParams EntropyParams::for_initial(const GridFunction& u0, double eps)
{
    return EntropyParams{2.0 * u0.max() + 1.0, eps};
}

double entropy_density(double s, double upper, double eps)
{
    if (eps == 0.0)
        return std::log(upper / s) + s / upper - 1.0;

    // G_eps(s) = (s/c) (atan(s/c) - atan(A/c)) + 1/2 ln((A^2 + c^2) / (s^2 + c^2)), c = sqrt(eps)
    const double c = std::sqrt(eps);
    const double denom = c * c + s * upper;
    const double angle =
        denom > 0.0 ? std::atan((s - upper) * c / denom) : std::atan(s / c) - std::atan(upper / c);
    return s * angle / c + 0.5 * std::log((upper * upper + eps) / (s * s + eps));
}

double entropy_G(const GridFunction& u, const EntropyParams& params)
{
    if (!(params.upper > 0.0) || !(params.eps >= 0.0))
        throw ParameterError("entropy needs A > 0 and eps >= 0");
    if (!(params.upper > u.max()))
        throw ParameterError("entropy reference level A must exceed max u");
    GridFunction g(u.grid());
    for (std::size_t i = 0; i < u.size(); ++i) {
        if (params.eps == 0.0 && !(u[i] > 0.0))
            throw InfiniteEntropy("entropy G_0 is infinite: node " + std::to_string(i) + " is nonpositive");
        g[i] = entropy_density(u[i], params.upper, params.eps);
    }
    return quadrature(g);
}

double entropy_log(const GridFunction& u, bool is_signed)
{
    double acc = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        if (!(u[i] > 0.0))
            throw InfiniteEntropy("logarithmic entropy is infinite: node " + std::to_string(i) + " is nonpositive");
        const double l = std::log(u[i]);
        acc += is_signed ? -l : std::abs(l);
    }
    return acc * u.grid().dx();
}

double entropy_log_or_inf(const GridFunction& u, bool is_signed) noexcept
{
    double acc = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        if (!(u[i] > 0.0))
            return std::numeric_limits<double>::infinity();
        const double l = std::log(u[i]);
        acc += is_signed ? -l : std::abs(l);
    }
    return acc * u.grid().dx();
}

double TestFunction::operator()(double x, double length) const
{
    double acc = 0.0;
    for (const auto& [m, c] : terms) {
        const double arg = 2.0 * std::numbers::pi * std::abs(m) * x / length;
        acc += m >= 0 ? c * std::cos(arg) : c * std::sin(arg);
    }
    return acc;
}

GridFunction TestFunction::sample(const Grid& grid) const
{
    return GridFunction::sample(grid, [&](double x) { return (*this)(x, grid.length()); });
}

bool TestFunction::is_constant() const noexcept
{
    for (const auto& [m, c] : terms)
        if (m != 0 && c != 0.0)
            return false;
    return true;
}

TestFunctionSet TestFunctionSet::defaults()
{
    return TestFunctionSet{{
        TestFunction{{{0, 1.0}}},
        TestFunction{{{1, 1.0}}},
        TestFunction{{{-1, 1.0}}},
        TestFunction{{{2, 1.0}}},
    }};
}

}  // namespace stfe
