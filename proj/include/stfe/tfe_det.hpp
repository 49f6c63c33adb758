#pragma once

#include <cstddef>
#include <functional>
#include <string_view>

#include "stfe/grid.hpp"

namespace stfe {

/// How the interface mobility m_{i+1/2} is built from the nodal values.
enum class MobilityMean {
    geometric,   // sqrt(m(v_i) m(v_{i+1})); equals v_i v_{i+1} for eps = 0
    arithmetic,  // (m(v_i) + m(v_{i+1})) / 2
    harmonic,    // 2 m(v_i) m(v_{i+1}) / (m(v_i) + m(v_{i+1}))
};

std::string_view to_string(MobilityMean mean) noexcept;
MobilityMean parse_mobility_mean(std::string_view text);

/// Settings of the deterministic thin-film substep. Non-positive values of
/// dt_init, dt_max and negative neg_tol select the automatic defaults.
struct DetStepConfig {
    double eps_mob = 1e-8;
    double dt_init = 0.0;    // auto: 0.1 dx^4 / max m_eps(v0)
    double dt_min = 1e-14;
    double dt_max = 0.0;     // auto: duration / 8
    double newton_tol = 1e-11;
    int newton_max_iter = 25;
    double neg_tol = -1.0;   // auto: 1e-8 |v0|_inf
    MobilityMean mobility_mean = MobilityMean::geometric;

    void validate() const;
};

struct DetStepReport {
    std::size_t steps = 0;
    std::size_t rejected = 0;
    double final_dt = 0.0;
    double next_dt = 0.0;         // step the controller would try next
    double mass_drift = 0.0;
    double energy_before = 0.0;
    double energy_after = 0.0;
    double entropy_before = 0.0;  // signed; +inf if a node is nonpositive
    double entropy_after = 0.0;
    double min_value = 0.0;       // over all accepted inner states
    double dissipation = 0.0;     // sum dt * dissipation_integrand(v_new)
    double max_energy_increase = 0.0;
    double max_entropy_increase = 0.0;
};

/// One accepted inner step: state at local time t after a step of size dt.
struct DetInnerStep {
    double t;
    double dt;
    const GridFunction& state;
};

using DetObserver = std::function<void(const DetInnerStep&)>;

/// Interface mobility m_{i+1/2} (index i stands for x_{i+1/2}).
GridFunction interface_mobility(const GridFunction& v, const DetStepConfig& cfg);

/// Interface flux m_{i+1/2} (D3 v)_{i+1/2}.
GridFunction det_flux(const GridFunction& v, const DetStepConfig& cfg);

/// dx * sum_i m_{i+1/2} (D3 v)_{i+1/2}^2.
double dissipation_integrand(const GridFunction& v, const DetStepConfig& cfg);

struct DetStepResult {
    GridFunction state;
    DetStepReport report;
};

/// Advance dv/dt = -d/dx(m_eps(v) d^3v/dx^3) over `duration` with adaptive
/// backward-Euler steps solved by Newton's method.
///
/// Steps are rejected and halved when Newton fails, min v drops below
/// -neg_tol, or the surface energy grows by more than 1e-10; the step grows by
/// 1.5x after five consecutive acceptances.
DetStepResult det_step(const GridFunction& v0, double duration, const DetStepConfig& cfg,
                       const DetObserver& observer = {});

}  // namespace stfe
