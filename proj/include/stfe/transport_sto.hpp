#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string_view>

#include "stfe/grid.hpp"
#include "stfe/noise.hpp"

namespace stfe {

enum class StoIntegrator {
    ito_em,      // Ito form with the correction drift; drift implicit, noise explicit
    strat_heun,  // Stratonovich form, Heun predictor-corrector; no correction drift
};

std::string_view to_string(StoIntegrator integrator) noexcept;
StoIntegrator parse_integrator(std::string_view text);

struct StoStepConfig {
    double eps_visc = 0.0;
    std::size_t n_substeps = 0;  // 0 selects auto_substeps()
    bool implicit_drift = true;
    StoIntegrator integrator = StoIntegrator::ito_em;
    /// Multiplier on the Ito correction drift used by the integrator. Anything
    /// other than 1 solves a different equation; it exists for mutation tests.
    double correction_scale = 1.0;

    void validate() const;
};

/// max(16, ceil(4 * duration * sum lambda^2 * max |psi_k|^2 * M^2 / L^2))
std::size_t auto_substeps(double duration, const NoiseModel& model, const Grid& grid);

struct StoStepReport {
    std::size_t substeps = 0;
    double mass_drift = 0.0;
    double l2_before = 0.0;
    double l2_after = 0.0;
    double h1_before = 0.0;  // |D+ w|_2
    double h1_after = 0.0;
    double min_value = 0.0;  // over all substep states
};

struct StoInnerStep {
    double t;
    double dt;
    const GridFunction& before;
    const GridFunction& after;
    std::span<const double> increments;  // one per mode, k + K
};

using StoObserver = std::function<void(const StoInnerStep&)>;

struct StoStepResult {
    GridFunction state;
    StoStepReport report;
};

/// Assembled stochastic substep for a fixed grid, model and substep size.
/// Immutable after construction and safe to share between threads.
class StochasticStepper {
public:
    StochasticStepper(std::shared_ptr<const NoiseOperators> ops, const StoStepConfig& cfg, double substep_dt);

    const NoiseOperators& operators() const noexcept { return *ops_; }
    const StoStepConfig& config() const noexcept { return cfg_; }
    double substep_dt() const noexcept { return dt_; }

    /// The drift operator of the Ito form, C + eps_visc D2 (unscaled), as it
    /// appears in the weak formulation.
    const PeriodicOperator& model_drift() const noexcept { return model_drift_; }

    /// dt times the model drift evaluated where the scheme evaluates it: at the
    /// new state for implicit terms, at the old state for explicit ones. The
    /// difference of the substep and this is the martingale increment.
    GridFunction drift_increment(const GridFunction& before, const GridFunction& after) const;

    /// One substep with the given per-mode increments.
    GridFunction advance(const GridFunction& w, std::span<const double> increments) const;

    /// n substeps; increments holds n * (2K+1) values, substep-major.
    StoStepResult run(const GridFunction& w0, std::span<const double> increments, std::size_t n,
                      const StoObserver& observer = {}) const;

private:
    std::shared_ptr<const NoiseOperators> ops_;
    StoStepConfig cfg_;
    double dt_;
    PeriodicOperator correction_;
    PeriodicOperator model_drift_;
    PeriodicOperator scheme_drift_;
    std::optional<PeriodicBandedSolver> implicit_;
};

/// Advance dw = C w dt - sum_k lambda_k d/dx(psi_k w) dB_k (+ eps_visc w_xx dt)
/// over `duration` in cfg.n_substeps (or auto) substeps.
StoStepResult sto_step(const GridFunction& w0, double duration, const NoiseModel& model,
                       std::span<const double> increments, const StoStepConfig& cfg, const StoObserver& observer = {});

/// |w_after|_2^2 - |w_before|_2^2
double pathwise_l2_drift(const GridFunction& w_before, const GridFunction& w_after);

}  // namespace stfe
