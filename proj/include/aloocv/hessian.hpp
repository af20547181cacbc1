#pragma once

#include <optional>

#include "aloocv/model.hpp"
#include "aloocv/types.hpp"

namespace aloocv {

/// Empirical Hessian of the regularized loss over the retained samples:
///
///   (1/m) [ sum_{j in S} hess l(z_j; theta) + sum_m lambda_m hess r_m(theta) ]
///
/// with S = [n] and m = n, or S = [n] \ {exclude} and m = n-1. The
/// regularizer block keeps its full lambda weight in both cases;
/// l1-flagged regularizers contribute zero.
Matrix empirical_hessian(const Dataset& data, std::optional<Index> exclude,
                         const Vector& theta,
                         const RegularizedObjective& objective);

/// Unnormalized form, sum_{j in S} hess l(z_j; theta) + smooth penalty
/// Hessian. This is m times the empirical Hessian and the matrix the
/// Newton solver and the one-step estimators actually factor.
Matrix total_hessian(const Dataset& data, const Vector& theta,
                     const RegularizedObjective& objective,
                     std::optional<Index> exclude = std::nullopt);

}  // namespace aloocv
