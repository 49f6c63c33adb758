#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "stfe/grid.hpp"

namespace stfe {

/// Colored noise W = sum_k lambda_k psi_k beta^k truncated to modes k in {-K..K}.
///
/// psi_k is the H^2-normalised Laplace eigenfunction: cos(2 pi k x / L) for
/// k >= 0 and sin(2 pi k x / L) for k < 0, scaled by
/// sqrt(2 / (L (1 + a^2 + a^4))) with a = 2 pi k / L. With
/// normalize_zero_mode the constant mode is 1/sqrt(L) (unit H^2 norm)
/// instead of sqrt(2/L).
class NoiseModel {
public:
    /// lambdas[k + K] is the amplitude of mode k; the size must be odd.
    NoiseModel(double length, std::vector<double> lambdas, bool normalize_zero_mode = true);

    /// lambda_k = lambda0 * (1 + |k|)^(-gamma) for |k| <= K.
    static NoiseModel power_law(double length, double lambda0, double gamma, int cutoff,
                                bool normalize_zero_mode = true);

    /// No noise at all (K = 0, lambda_0 = 0).
    static NoiseModel silent(double length);

    double length() const noexcept { return length_; }
    int cutoff() const noexcept { return cutoff_; }
    std::size_t mode_count() const noexcept { return lambdas_.size(); }
    bool normalize_zero_mode() const noexcept { return normalize_zero_mode_; }
    std::span<const double> lambdas() const noexcept { return lambdas_; }

    double lambda(int k) const;
    double sum_lambda_sq() const noexcept;

    /// Wavenumber 2 pi k / L.
    double wavenumber(int k) const noexcept;
    /// Prefactor of psi_k (sup norm of psi_k).
    double amplitude(int k) const;
    /// psi_k(x); throws ResolutionError for |k| > K.
    double basis(int k, double x) const;
    /// max over modes with lambda_k > 0 of |psi_k|_inf^2 (0 when silent).
    double max_active_basis_sq() const noexcept;
    bool is_silent() const noexcept;

private:
    double length_;
    int cutoff_;
    std::vector<double> lambdas_;
    bool normalize_zero_mode_;
};

double basis_eval(const NoiseModel& model, int k, double x);

/// H^2 Gram matrix (psi_k, psi_l)_{2,2}, row-major over k, l in {-K..K},
/// computed with fourth-order central differences and the rectangle rule.
std::vector<double> basis_h2_gram(const NoiseModel& model, const Grid& grid);

/// Basis tables for one grid; shared read-only by all stochastic steps.
class NoiseOperators {
public:
    NoiseOperators(const NoiseModel& model, const Grid& grid);

    const NoiseModel& model() const noexcept { return model_; }
    const Grid& grid() const noexcept { return grid_; }

    /// psi_k at the nodes.
    const GridFunction& psi_nodes(int k) const { return psi_nodes_[index(k)]; }
    /// psi_k at the interfaces x_{i+1/2}.
    const GridFunction& psi_midpoints(int k) const { return psi_mid_[index(k)]; }

    /// Discrete 1/2 sum lambda_k^2 d/dx(psi_k d/dx(psi_k w)) in flux form,
    /// multiplied by scale (scale = 1 is the Ito correction drift).
    PeriodicOperator correction(double scale = 1.0) const;

    /// -sum_k lambda_k d/dx(psi_k w) dB_k with a centred flux average;
    /// increments[k + K] is the increment of mode k.
    GridFunction apply_noise(const GridFunction& w, std::span<const double> increments) const;

    /// Single-mode derivative d/dx(psi_k w) as used by apply_noise (no lambda, no sign).
    GridFunction mode_transport(int k, const GridFunction& w) const;

private:
    std::size_t index(int k) const;

    NoiseModel model_;
    Grid grid_;
    std::vector<GridFunction> psi_nodes_;
    std::vector<GridFunction> psi_mid_;
};

PeriodicOperator correction_operator(const NoiseModel& model, const Grid& grid);

GridFunction noise_operator_apply(const NoiseModel& model, const GridFunction& w,
                                  std::span<const double> increments);

/// Uniform stochastic time lattice over [0, horizon).
struct StochasticLattice {
    double horizon = 0.0;
    std::uint64_t steps = 0;

    double step_size() const noexcept { return horizon / static_cast<double>(steps); }
};

/// Reproducible Gaussian increments dB(path, k, step) ~ N(0, dt).
///
/// Each value is sqrt(dt) * Phi^{-1}(u) where u is drawn from Philox4x32-10
/// with key = seed and counter = (step lo, step hi, path, k + K). Values are a
/// pure function of the tuple; no table is stored.
class WienerIncrements {
public:
    static constexpr std::string_view kSchemeId = "philox4x32-10/ctr(step_lo,step_hi,path,k+K)/inv-normal-cdf/v1";

    WienerIncrements(std::uint64_t seed, int cutoff, StochasticLattice lattice, std::uint64_t n_paths);

    std::uint64_t seed() const noexcept { return seed_; }
    int cutoff() const noexcept { return cutoff_; }
    const StochasticLattice& lattice() const noexcept { return lattice_; }
    std::uint64_t n_paths() const noexcept { return n_paths_; }

    double operator()(std::uint64_t path, int k, std::uint64_t step) const;

    /// Sum of `factor` consecutive fine increments starting at coarse_step * factor.
    double aggregated(std::uint64_t path, int k, std::uint64_t coarse_step, std::uint64_t factor) const;

    /// All 2K+1 increments of one (coarse) step, written to out[k + K].
    void fill_step(std::uint64_t path, std::uint64_t coarse_step, std::uint64_t factor,
                   std::span<double> out) const;

private:
    std::uint64_t seed_;
    int cutoff_;
    StochasticLattice lattice_;
    std::uint64_t n_paths_;
    double sqrt_dt_;
};

WienerIncrements sample_increments(const NoiseModel& model, const StochasticLattice& lattice,
                                   std::uint64_t seed, std::uint64_t n_paths);

}  // namespace stfe
