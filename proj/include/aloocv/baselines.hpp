#pragma once

#include "aloocv/aloocv.hpp"
#include "aloocv/model.hpp"
#include "aloocv/solver.hpp"
#include "aloocv/types.hpp"

namespace aloocv {

/// Influence-function-style closed-form estimate of the leave-one-out
/// loss, evaluated without moving the parameter:
///
///   l(z_i; theta_hat)
///     + grad l(z_i; theta_hat)^T
///       [ sum_{j != i} hess l(z_j; theta_hat) + smooth penalty hess ]^{-1}
///       grad l(z_i; theta_hat)
///
/// The mean over i is the in-sample risk plus the quadratic-form
/// correction term. Uses the leave-one-out Hessian; throws
/// EstimatorUndefined when it is not positive definite.
double influence_baseline(const Dataset& data, const FittedModel& fitted,
                          const RegularizedObjective& objective, Index i,
                          HessianMode mode = HessianMode::kAuto);

}  // namespace aloocv
