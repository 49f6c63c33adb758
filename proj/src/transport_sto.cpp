#include "stfe/transport_sto.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "stfe/diagnostics.hpp"

namespace stfe {

std::string_view to_string(StoIntegrator integrator) noexcept
{
    return integrator == StoIntegrator::strat_heun ? "strat_heun" : "ito_em";
}

StoIntegrator parse_integrator(std::string_view text)
{
    if (text == "ito_em")
        return StoIntegrator::ito_em;
    if (text == "strat_heun")
        return StoIntegrator::strat_heun;
    throw ParameterError("unknown integrator '" + std::string(text) + "'");
}

void StoStepConfig::validate() const
{
    if (!(eps_visc >= 0.0))
        throw ParameterError("eps_visc must be nonnegative");
    if (!std::isfinite(correction_scale))
        throw ParameterError("correction_scale must be finite");
}

std::size_t auto_substeps(double duration, const NoiseModel& model, const Grid& grid)
{
    const double m_over_l = static_cast<double>(grid.size()) / grid.length();
    const double n = std::ceil(4.0 * duration * model.sum_lambda_sq() * model.max_active_basis_sq() * m_over_l * m_over_l);
    return std::max<std::size_t>(16, static_cast<std::size_t>(n));
}

StochasticStepper::StochasticStepper(std::shared_ptr<const NoiseOperators> ops, const StoStepConfig& cfg,
                                     double substep_dt)
    : ops_(std::move(ops)), cfg_(cfg), dt_(substep_dt), correction_(ops_->correction()), model_drift_(correction_),
      scheme_drift_(ops_->correction(cfg.integrator == StoIntegrator::ito_em ? cfg.correction_scale : 0.0))
{
    cfg_.validate();
    if (!(substep_dt > 0.0))
        throw ParameterError("stochastic substep needs a positive step size");
    if (cfg_.eps_visc > 0.0) {
        const PeriodicOperator d2 = derivative_operator(ops_->grid(), 2);
        model_drift_.add_scaled(cfg_.eps_visc, d2);
        scheme_drift_.add_scaled(cfg_.eps_visc, d2);
    }
    const bool implicit = cfg_.integrator == StoIntegrator::strat_heun || cfg_.implicit_drift;
    if (implicit && scheme_drift_.max_abs_entry() > 0.0)
        implicit_.emplace(scheme_drift_.shifted_scaled(1.0, -dt_));
}

GridFunction StochasticStepper::drift_increment(const GridFunction& before, const GridFunction& after) const
{
    GridFunction out(before.grid());
    if (cfg_.integrator == StoIntegrator::strat_heun) {
        out = correction_.apply(before);
        if (cfg_.eps_visc > 0.0)
            out.axpy(cfg_.eps_visc, derivative(after, 2));
    }
    else {
        out = model_drift_.apply(cfg_.implicit_drift ? after : before);
    }
    out *= dt_;
    return out;
}

GridFunction StochasticStepper::advance(const GridFunction& w, std::span<const double> increments) const
{
    GridFunction next = w;
    if (cfg_.integrator == StoIntegrator::strat_heun) {
        const GridFunction g0 = ops_->apply_noise(w, increments);
        GridFunction predictor = w + g0;
        const GridFunction g1 = ops_->apply_noise(predictor, increments);
        next.axpy(0.5, g0);
        next.axpy(0.5, g1);
    }
    else {
        next += ops_->apply_noise(w, increments);
        if (!implicit_)
            next.axpy(dt_, scheme_drift_.apply(w));
    }
    if (implicit_)
        next = implicit_->solve(next);
    return next;
}

StoStepResult StochasticStepper::run(const GridFunction& w0, std::span<const double> increments, std::size_t n,
                                     const StoObserver& observer) const
{
    const std::size_t modes = ops_->model().mode_count();
    if (increments.size() != n * modes)
        throw ParameterError("expected " + std::to_string(n * modes) + " increments, got " +
                             std::to_string(increments.size()));
    if (!w0.all_finite())
        throw NumericalBlowup("stochastic substep received a non-finite state");

    StoStepReport rep;
    rep.substeps = n;
    rep.l2_before = norm_l2(w0);
    rep.h1_before = std::sqrt(surface_energy(w0));
    rep.min_value = w0.min();
    const double mass0 = quadrature(w0);

    GridFunction w = w0;
    for (std::size_t s = 0; s < n; ++s) {
        const auto db = increments.subspan(s * modes, modes);
        GridFunction next = [&] {
            try {
                return advance(w, db);
            }
            catch (const SolverFailure& e) {
                throw StepFailure(std::string("stochastic substep: ") + e.what());
            }
        }();
        if (!next.all_finite())
            throw NumericalBlowup("stochastic substep produced non-finite values at substep " + std::to_string(s));
        rep.min_value = std::min(rep.min_value, next.min());
        if (observer)
            observer(StoInnerStep{static_cast<double>(s + 1) * dt_, dt_, w, next, db});
        w = std::move(next);
    }

    rep.l2_after = norm_l2(w);
    rep.h1_after = std::sqrt(surface_energy(w));
    rep.mass_drift = std::abs(quadrature(w) - mass0);
    return {std::move(w), rep};
}

StoStepResult sto_step(const GridFunction& w0, double duration, const NoiseModel& model,
                       std::span<const double> increments, const StoStepConfig& cfg, const StoObserver& observer)
{
    if (!(duration > 0.0))
        throw ParameterError("stochastic substep needs a positive duration");
    const std::size_t n = cfg.n_substeps > 0 ? cfg.n_substeps : auto_substeps(duration, model, w0.grid());
    auto ops = std::make_shared<const NoiseOperators>(model, w0.grid());
    const StochasticStepper stepper(std::move(ops), cfg, duration / static_cast<double>(n));
    return stepper.run(w0, increments, n, observer);
}

double pathwise_l2_drift(const GridFunction& w_before, const GridFunction& w_after)
{
    require_same_grid(w_before, w_after);
    return inner_l2(w_after, w_after) - inner_l2(w_before, w_before);
}

}  // namespace stfe
