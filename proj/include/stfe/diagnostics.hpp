#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "stfe/grid.hpp"

namespace stfe {

/// Surface energy |d_x u|_2^2 with the forward difference D+ u at x_{i+1/2}.
///
/// This is the quadratic form that the deterministic scheme dissipates
/// exactly; it is second-order accurate as a quadrature of (u')^2.
double surface_energy(const GridFunction& u);

/// Reference level A and regularisation eps of the entropy density
/// G_eps(s) = int_s^A int_{s1}^A ds2 ds1 / (s2^2 + eps).
struct EntropyParams {
    double upper = 1.0;      // A
    double eps = 0.0;

    /// A = 2 max(u0) + 1.
    static EntropyParams for_initial(const GridFunction& u0, double eps = 0.0);
};

/// Pointwise G_eps(s). eps = 0 gives ln(A/s) + s/A - 1.
double entropy_density(double s, double upper, double eps);

/// quadrature(G_eps(u)); throws ParameterError if A <= max u and
/// InfiniteEntropy if eps = 0 and some node is nonpositive.
double entropy_G(const GridFunction& u, const EntropyParams& params);

/// -int ln u (signed) or int |ln u| (absolute); throws InfiniteEntropy on a
/// nonpositive node.
double entropy_log(const GridFunction& u, bool is_signed);

/// Like entropy_log but returns +inf instead of throwing.
double entropy_log_or_inf(const GridFunction& u, bool is_signed) noexcept;

/// Smooth periodic test function given by a truncated Fourier series:
/// sum c_m cos(2 pi m x/L) for m >= 0 and c_m sin(2 pi |m| x/L) for m < 0.
struct TestFunction {
    std::vector<std::pair<int, double>> terms;

    double operator()(double x, double length) const;
    GridFunction sample(const Grid& grid) const;
    /// True when every term is the constant mode.
    bool is_constant() const noexcept;

    friend bool operator==(const TestFunction&, const TestFunction&) = default;
};

struct TestFunctionSet {
    std::vector<TestFunction> functions;

    /// {1, cos(2 pi x/L), sin(2 pi x/L), cos(4 pi x/L)}
    static TestFunctionSet defaults();
    std::size_t size() const noexcept { return functions.size(); }

    friend bool operator==(const TestFunctionSet&, const TestFunctionSet&) = default;
};

/// One row of the per-path time series.
struct DiagnosticsRow {
    double time = 0.0;          // requested time on the concatenated clock
    double snapped_time = 0.0;  // time of the recorded inner step
    double mass = 0.0;
    double energy = 0.0;
    double entropy_signed = 0.0;  // +inf when a node is nonpositive
    double entropy_abs = 0.0;
    double min_u = 0.0;
    double dissipation = 0.0;     // accumulated int dt int m(u) (D3 u)^2
    std::vector<double> residual;  // M_phi per test function
    std::vector<double> qvar;      // <M_phi> per test function
};

struct DiagnosticsSeries {
    std::vector<DiagnosticsRow> rows;
    std::size_t n_test_functions = 0;

    bool empty() const noexcept { return rows.empty(); }
};

}  // namespace stfe
