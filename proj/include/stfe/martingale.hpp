#pragma once

#include <vector>

#include "stfe/diagnostics.hpp"
#include "stfe/noise.hpp"
#include "stfe/splitter.hpp"

namespace stfe {

struct MartingaleValue {
    double residual;  // M_phi(t)
    double qvar;      // <M_phi>_t
};

/// Weak-form residual of a recorded path at sample time t,
///
///   M_phi(t) = (u(t), phi) - (u0, phi) - sum_det dt (J, D+ phi) - sum_sto dt (C w*, phi),
///
/// and its predicted quadratic variation sum dt sum_k lambda_k^2 (psi_k w, D phi)^2.
/// The sums run over the inner steps up to the recorded state; w* is the state
/// at which the scheme evaluates the drift. For constant phi only the first
/// two terms are kept, so the residual is exactly the mass drift.
///
/// t may be a requested or a snapped sample time (or T for the final row).
/// Throws DomainError if t was not recorded and ParameterError if phis or the
/// model differ from those the path was recorded with.
std::vector<MartingaleValue> martingale_residual(const SplitPath& path, const NoiseModel& model,
                                                 const TestFunctionSet& phis, double t);

}  // namespace stfe
