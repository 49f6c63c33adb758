#include "stfe/tfe_det.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <string>

#include "stfe/diagnostics.hpp"

namespace stfe {

std::string_view to_string(MobilityMean mean) noexcept
{
    switch (mean) {
    case MobilityMean::geometric: return "geometric";
    case MobilityMean::arithmetic: return "arithmetic";
    case MobilityMean::harmonic: return "harmonic";
    }
    return "geometric";
}

MobilityMean parse_mobility_mean(std::string_view text)
{
    if (text == "geometric")
        return MobilityMean::geometric;
    if (text == "arithmetic")
        return MobilityMean::arithmetic;
    if (text == "harmonic")
        return MobilityMean::harmonic;
    throw ParameterError("unknown mobility mean '" + std::string(text) + "'");
}

void DetStepConfig::validate() const
{
    if (!(eps_mob >= 0.0))
        throw ParameterError("eps_mob must be nonnegative");
    if (!(dt_min > 0.0))
        throw ParameterError("dt_min must be positive");
    if (dt_init > 0.0 && dt_init < dt_min)
        throw ParameterError("dt_init must not be smaller than dt_min");
    if (!(newton_tol > 0.0) || newton_max_iter < 1)
        throw ParameterError("Newton tolerance and iteration limit must be positive");
}

namespace {

struct Mobility {
    double m;
    double dm_left;
    double dm_right;
};

Mobility pair_mobility(double a, double b, double eps, MobilityMean mean) noexcept
{
    if (eps == 0.0 && !(a > 0.0 && b > 0.0))
        return {0.0, 0.0, 0.0};
    switch (mean) {
    case MobilityMean::geometric: {
        if (eps == 0.0)
            return {a * b, b, a};
        const double ma = a * a + eps;
        const double mb = b * b + eps;
        const double m = std::sqrt(ma * mb);
        return {m, a * mb / m, b * ma / m};
    }
    case MobilityMean::arithmetic:
        return {0.5 * (a * a + b * b) + eps, a, b};
    case MobilityMean::harmonic: {
        const double ma = a * a + eps;
        const double mb = b * b + eps;
        const double s = ma + mb;
        if (!(s > 0.0))
            return {0.0, 0.0, 0.0};
        return {2.0 * ma * mb / s, 4.0 * a * mb * mb / (s * s), 4.0 * b * ma * ma / (s * s)};
    }
    }
    return {0.0, 0.0, 0.0};
}

/// F(v) = v - v_old + dt * div J(v)
GridFunction newton_residual(const GridFunction& v, const GridFunction& v_old, double dt, const DetStepConfig& cfg)
{
    GridFunction f = flux_divergence(det_flux(v, cfg));
    f *= dt;
    f += v;
    f -= v_old;
    return f;
}

PeriodicOperator newton_jacobian(const GridFunction& v, double dt, const DetStepConfig& cfg)
{
    const Grid& grid = v.grid();
    const std::size_t m = grid.size();
    const double dx = grid.dx();
    const double inv3 = 1.0 / (dx * dx * dx);
    const GridFunction d3 = third_difference(v);

    // dJ_{i+1/2}/dv_{i+o} for o = -1..2
    std::vector<std::array<double, 4>> djac(m);
    for (std::size_t i = 0; i < m; ++i) {
        const Mobility mob = pair_mobility(v[i], v[(i + 1) % m], cfg.eps_mob, cfg.mobility_mean);
        djac[i] = {-mob.m * inv3, 3.0 * mob.m * inv3 + d3[i] * mob.dm_left, -3.0 * mob.m * inv3 + d3[i] * mob.dm_right,
                   mob.m * inv3};
    }

    PeriodicOperator jac(grid, 2);
    const double c = dt / dx;
    for (std::size_t i = 0; i < m; ++i) {
        const std::size_t im = (i + m - 1) % m;
        jac.entry(i, 0) = 1.0;
        for (int o = -1; o <= 2; ++o)
            jac.entry(i, o) += c * djac[i][static_cast<std::size_t>(o + 1)];
        // J_{i-1/2} touches v_{i-2} .. v_{i+1}
        for (int o = -1; o <= 2; ++o)
            jac.entry(i, o - 1) -= c * djac[im][static_cast<std::size_t>(o + 1)];
    }
    return jac;
}

enum class NewtonOutcome { converged, diverged, non_finite };

NewtonOutcome newton_solve(GridFunction& v, const GridFunction& v_old, double dt, const DetStepConfig& cfg)
{
    const double tol = cfg.newton_tol * (1.0 + v_old.max_abs());
    for (int it = 0; it < cfg.newton_max_iter; ++it) {
        const GridFunction f = newton_residual(v, v_old, dt, cfg);
        if (!f.all_finite())
            return NewtonOutcome::non_finite;
        if (f.max_abs() <= tol)
            return NewtonOutcome::converged;
        try {
            const GridFunction delta = solve_banded_periodic(newton_jacobian(v, dt, cfg), f);
            v -= delta;
        }
        catch (const SolverFailure&) {
            return NewtonOutcome::diverged;
        }
        if (!v.all_finite())
            return NewtonOutcome::non_finite;
    }
    return NewtonOutcome::diverged;
}

}  // namespace

GridFunction interface_mobility(const GridFunction& v, const DetStepConfig& cfg)
{
    const std::size_t m = v.size();
    GridFunction mob(v.grid());
    for (std::size_t i = 0; i < m; ++i)
        mob[i] = pair_mobility(v[i], v[(i + 1) % m], cfg.eps_mob, cfg.mobility_mean).m;
    return mob;
}

GridFunction det_flux(const GridFunction& v, const DetStepConfig& cfg)
{
    GridFunction flux = third_difference(v);
    const GridFunction mob = interface_mobility(v, cfg);
    for (std::size_t i = 0; i < flux.size(); ++i)
        flux[i] *= mob[i];
    return flux;
}

double dissipation_integrand(const GridFunction& v, const DetStepConfig& cfg)
{
    const GridFunction d3 = third_difference(v);
    const GridFunction mob = interface_mobility(v, cfg);
    double acc = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i)
        acc += mob[i] * d3[i] * d3[i];
    return acc * v.grid().dx();
}

DetStepResult det_step(const GridFunction& v0, double duration, const DetStepConfig& cfg, const DetObserver& observer)
{
    cfg.validate();
    if (!(duration > 0.0))
        throw ParameterError("deterministic substep needs a positive duration");
    if (!v0.all_finite())
        throw NumericalBlowup("deterministic substep received a non-finite state");

    const double neg_tol = cfg.neg_tol >= 0.0 ? cfg.neg_tol : 1e-8 * v0.max_abs();
    if (v0.min() < -neg_tol)
        throw ParameterError("initial state violates the nonnegativity tolerance");

    const double dx = v0.grid().dx();
    const double max_mob = std::max(interface_mobility(v0, cfg).max(), cfg.eps_mob);
    double dt = cfg.dt_init > 0.0 ? cfg.dt_init
                                  : (max_mob > 0.0 ? 0.1 * dx * dx * dx * dx / max_mob : duration);
    dt = std::max(dt, cfg.dt_min);
    const double dt_max = cfg.dt_max > 0.0 ? cfg.dt_max : duration / 8.0;

    DetStepReport rep;
    const double mass0 = quadrature(v0);
    rep.energy_before = surface_energy(v0);
    rep.entropy_before = entropy_log_or_inf(v0, true);
    rep.min_value = v0.min();

    GridFunction v = v0;
    double energy = rep.energy_before;
    double entropy = rep.entropy_before;
    double t = 0.0;
    int streak = 0;
    bool last_failure_non_finite = false;

    while (t < duration) {
        const double remaining = duration - t;
        double h = std::min(dt, dt_max);
        const bool final_step = h >= remaining * (1.0 - 1e-12);
        if (final_step)
            h = remaining;

        GridFunction trial = v;
        const NewtonOutcome outcome = newton_solve(trial, v, h, cfg);
        bool accept = outcome == NewtonOutcome::converged;
        double trial_energy = 0.0;
        if (accept) {
            trial_energy = surface_energy(trial);
            accept = trial.min() >= -neg_tol && trial_energy <= energy + 1e-10;
        }

        if (!accept) {
            last_failure_non_finite = outcome == NewtonOutcome::non_finite;
            ++rep.rejected;
            streak = 0;
            dt = h / 2.0;
            if (dt < cfg.dt_min) {
                const std::string where = " at t = " + std::to_string(t) + " (min v = " + std::to_string(v.min()) +
                                          ", energy = " + std::to_string(energy) + ")";
                if (last_failure_non_finite)
                    throw NumericalBlowup("deterministic substep produced non-finite values" + where);
                throw StepFailure("deterministic substep: step size fell below dt_min" + where);
            }
            continue;
        }

        t = final_step ? duration : t + h;
        v = std::move(trial);
        ++rep.steps;

        rep.max_energy_increase = std::max(rep.max_energy_increase, trial_energy - energy);
        energy = trial_energy;
        const double new_entropy = entropy_log_or_inf(v, true);
        if (std::isfinite(new_entropy) && std::isfinite(entropy))
            rep.max_entropy_increase = std::max(rep.max_entropy_increase, new_entropy - entropy);
        entropy = new_entropy;
        rep.min_value = std::min(rep.min_value, v.min());
        rep.dissipation += h * dissipation_integrand(v, cfg);
        rep.final_dt = h;

        if (observer)
            observer(DetInnerStep{t, h, v});

        if (!final_step && ++streak == 5) {
            dt = std::min(dt * 1.5, dt_max);
            streak = 0;
        }
    }

    rep.next_dt = std::min(dt, dt_max);
    rep.energy_after = energy;
    rep.entropy_after = entropy;
    rep.mass_drift = std::abs(quadrature(v) - mass0);
    return {std::move(v), rep};
}

}  // namespace stfe
