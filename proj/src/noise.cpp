#include "stfe/noise.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include <boost/math/special_functions/erf.hpp>

#include "stfe/philox.hpp"

namespace stfe {

namespace {

void require_resolvable(const NoiseModel& model, const Grid& grid)
{
    if (2 * static_cast<std::size_t>(model.cutoff()) + 1 > grid.size() / 2)
        throw ResolutionError("noise modes up to K = " + std::to_string(model.cutoff()) +
                              " are not resolvable with M = " + std::to_string(grid.size()) + " nodes");
    if (model.length() != grid.length())
        throw GridMismatch("noise model and grid have different domain lengths");
}

}  // namespace

NoiseModel::NoiseModel(double length, std::vector<double> lambdas, bool normalize_zero_mode)
    : length_(length), cutoff_(0), lambdas_(std::move(lambdas)), normalize_zero_mode_(normalize_zero_mode)
{
    if (!(length > 0.0))
        throw ParameterError("noise model needs a positive domain length");
    if (lambdas_.empty() || lambdas_.size() % 2 == 0)
        throw ParameterError("noise spectrum needs an odd number 2K+1 of amplitudes");
    for (double l : lambdas_)
        if (!(l >= 0.0) || !std::isfinite(l))
            throw ParameterError("noise amplitudes must be finite and nonnegative");
    cutoff_ = static_cast<int>(lambdas_.size() / 2);
}

NoiseModel NoiseModel::power_law(double length, double lambda0, double gamma, int cutoff, bool normalize_zero_mode)
{
    if (cutoff < 0)
        throw ParameterError("mode cutoff K must be nonnegative");
    std::vector<double> lambdas(2 * static_cast<std::size_t>(cutoff) + 1);
    for (int k = -cutoff; k <= cutoff; ++k)
        lambdas[static_cast<std::size_t>(k + cutoff)] = lambda0 * std::pow(1.0 + std::abs(k), -gamma);
    return NoiseModel(length, std::move(lambdas), normalize_zero_mode);
}

NoiseModel NoiseModel::silent(double length) { return NoiseModel(length, {0.0}, true); }

double NoiseModel::lambda(int k) const
{
    if (std::abs(k) > cutoff_)
        throw ResolutionError("mode " + std::to_string(k) + " outside {-K..K}, K = " + std::to_string(cutoff_));
    return lambdas_[static_cast<std::size_t>(k + cutoff_)];
}

double NoiseModel::sum_lambda_sq() const noexcept
{
    double s = 0.0;
    for (double l : lambdas_)
        s += l * l;
    return s;
}

double NoiseModel::wavenumber(int k) const noexcept { return 2.0 * std::numbers::pi * k / length_; }

double NoiseModel::amplitude(int k) const
{
    if (std::abs(k) > cutoff_)
        throw ResolutionError("mode " + std::to_string(k) + " outside {-K..K}, K = " + std::to_string(cutoff_));
    if (k == 0 && normalize_zero_mode_)
        return 1.0 / std::sqrt(length_);
    const double a = wavenumber(k);
    const double a2 = a * a;
    return std::sqrt(2.0 / (length_ * (1.0 + a2 + a2 * a2)));
}

double NoiseModel::basis(int k, double x) const
{
    const double amp = amplitude(k);
    const double arg = wavenumber(k) * x;
    return k >= 0 ? amp * std::cos(arg) : amp * std::sin(arg);
}

double NoiseModel::max_active_basis_sq() const noexcept
{
    double m = 0.0;
    for (int k = -cutoff_; k <= cutoff_; ++k)
        if (lambdas_[static_cast<std::size_t>(k + cutoff_)] > 0.0) {
            const double a = amplitude(k);
            m = std::max(m, a * a);
        }
    return m;
}

bool NoiseModel::is_silent() const noexcept
{
    return std::all_of(lambdas_.begin(), lambdas_.end(), [](double l) { return l == 0.0; });
}

double basis_eval(const NoiseModel& model, int k, double x) { return model.basis(k, x); }

std::vector<double> basis_h2_gram(const NoiseModel& model, const Grid& grid)
{
    require_resolvable(model, grid);
    const int K = model.cutoff();
    const auto n = static_cast<std::size_t>(2 * K + 1);

    // derivs[k][j] = d^j psi_k, j = 0, 1, 2
    std::vector<std::array<GridFunction, 3>> derivs;
    derivs.reserve(n);
    for (int k = -K; k <= K; ++k) {
        GridFunction psi = GridFunction::sample(grid, [&](double x) { return model.basis(k, x); });
        GridFunction d1 = derivative(psi, 1, 4);
        GridFunction d2 = derivative(psi, 2, 4);
        derivs.push_back({std::move(psi), std::move(d1), std::move(d2)});
    }

    std::vector<double> gram(n * n);
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = 0; b < n; ++b) {
            double g = 0.0;
            for (std::size_t j = 0; j < 3; ++j)
                g += inner_l2(derivs[a][j], derivs[b][j]);
            gram[a * n + b] = g;
        }
    return gram;
}

// ---------------------------------------------------------------------------

NoiseOperators::NoiseOperators(const NoiseModel& model, const Grid& grid) : model_(model), grid_(grid)
{
    require_resolvable(model, grid);
    const int K = model.cutoff();
    for (int k = -K; k <= K; ++k) {
        psi_nodes_.push_back(GridFunction::sample(grid, [&](double x) { return model.basis(k, x); }));
        GridFunction mid(grid);
        for (std::size_t i = 0; i < grid.size(); ++i)
            mid[i] = model.basis(k, grid.midpoint(i));
        psi_mid_.push_back(std::move(mid));
    }
}

std::size_t NoiseOperators::index(int k) const
{
    if (std::abs(k) > model_.cutoff())
        throw ResolutionError("mode " + std::to_string(k) + " outside {-K..K}");
    return static_cast<std::size_t>(k + model_.cutoff());
}

PeriodicOperator NoiseOperators::correction(double scale) const
{
    PeriodicOperator op(grid_, 1);
    const std::size_t m = grid_.size();
    const double dx = grid_.dx();
    const int K = model_.cutoff();
    for (int k = -K; k <= K; ++k) {
        const double lam = model_.lambda(k);
        if (lam == 0.0)
            continue;
        const double c = 0.5 * scale * lam * lam / (dx * dx);
        const GridFunction& psi = psi_nodes(k);
        const GridFunction& mid = psi_midpoints(k);
        for (std::size_t i = 0; i < m; ++i) {
            const std::size_t ip = (i + 1) % m;
            const std::size_t im = (i + m - 1) % m;
            // flux_{i+1/2} = psi_{i+1/2} ((psi w)_{i+1} - (psi w)_i) / dx
            op.entry(i, 1) += c * mid[i] * psi[ip];
            op.entry(i, 0) -= c * (mid[i] + mid[im]) * psi[i];
            op.entry(i, -1) += c * mid[im] * psi[im];
        }
    }
    return op;
}

GridFunction NoiseOperators::mode_transport(int k, const GridFunction& w) const
{
    const GridFunction& psi = psi_nodes(k);
    const std::size_t m = grid_.size();
    const double inv = 1.0 / (2.0 * grid_.dx());
    GridFunction out(grid_);
    for (std::size_t i = 0; i < m; ++i) {
        const std::size_t ip = (i + 1) % m;
        const std::size_t im = (i + m - 1) % m;
        out[i] = (psi[ip] * w[ip] - psi[im] * w[im]) * inv;
    }
    return out;
}

GridFunction NoiseOperators::apply_noise(const GridFunction& w, std::span<const double> increments) const
{
    if (!(w.grid() == grid_))
        throw GridMismatch("noise operator and state live on incompatible grids");
    if (increments.size() != model_.mode_count())
        throw ParameterError("expected one increment per noise mode");
    const std::size_t m = grid_.size();
    const double inv = 1.0 / (2.0 * grid_.dx());
    const int K = model_.cutoff();

    // Combined transported field sum_k lambda_k dB_k psi_k, then one centred difference.
    std::vector<double> coeff(m, 0.0);
    bool any = false;
    for (int k = -K; k <= K; ++k) {
        const double s = model_.lambda(k) * increments[static_cast<std::size_t>(k + K)];
        if (s == 0.0)
            continue;
        any = true;
        const GridFunction& psi = psi_nodes(k);
        for (std::size_t i = 0; i < m; ++i)
            coeff[i] += s * psi[i];
    }
    GridFunction out(grid_);
    if (!any)
        return out;
    for (std::size_t i = 0; i < m; ++i) {
        const std::size_t ip = (i + 1) % m;
        const std::size_t im = (i + m - 1) % m;
        out[i] = -(coeff[ip] * w[ip] - coeff[im] * w[im]) * inv;
    }
    return out;
}

PeriodicOperator correction_operator(const NoiseModel& model, const Grid& grid)
{
    return NoiseOperators(model, grid).correction();
}

GridFunction noise_operator_apply(const NoiseModel& model, const GridFunction& w, std::span<const double> increments)
{
    return NoiseOperators(model, w.grid()).apply_noise(w, increments);
}

// ---------------------------------------------------------------------------

WienerIncrements::WienerIncrements(std::uint64_t seed, int cutoff, StochasticLattice lattice, std::uint64_t n_paths)
    : seed_(seed), cutoff_(cutoff), lattice_(lattice), n_paths_(n_paths)
{
    if (lattice.steps == 0 || !(lattice.horizon > 0.0))
        throw ParameterError("stochastic lattice needs a positive horizon and at least one step");
    if (n_paths == 0)
        throw ParameterError("need at least one sample path");
    if (cutoff < 0)
        throw ParameterError("mode cutoff K must be nonnegative");
    sqrt_dt_ = std::sqrt(lattice.step_size());
}

double WienerIncrements::operator()(std::uint64_t path, int k, std::uint64_t step) const
{
    const Philox4x32::Counter ctr = {static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(step >> 32),
                                     static_cast<std::uint32_t>(path), static_cast<std::uint32_t>(k + cutoff_)};
    const Philox4x32::Key key = {static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32)};
    const Philox4x32::Counter out = Philox4x32::generate(ctr, key);
    const double u = open_unit_interval(out[0], out[1]);
    // Phi^{-1}(u) = -sqrt(2) erfc^{-1}(2u)
    const double z = -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * u);
    return sqrt_dt_ * z;
}

double WienerIncrements::aggregated(std::uint64_t path, int k, std::uint64_t coarse_step, std::uint64_t factor) const
{
    double s = 0.0;
    for (std::uint64_t r = 0; r < factor; ++r)
        s += (*this)(path, k, coarse_step * factor + r);
    return s;
}

void WienerIncrements::fill_step(std::uint64_t path, std::uint64_t coarse_step, std::uint64_t factor,
                                 std::span<double> out) const
{
    for (int k = -cutoff_; k <= cutoff_; ++k)
        out[static_cast<std::size_t>(k + cutoff_)] =
            factor == 1 ? (*this)(path, k, coarse_step) : aggregated(path, k, coarse_step, factor);
}

WienerIncrements sample_increments(const NoiseModel& model, const StochasticLattice& lattice, std::uint64_t seed,
                                   std::uint64_t n_paths)
{
    return WienerIncrements(seed, model.cutoff(), lattice, n_paths);
}

}  // namespace stfe
