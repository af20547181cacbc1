#pragma once

#include <memory>
#include <vector>

#include "aloocv/model.hpp"
#include "aloocv/types.hpp"

namespace aloocv {

/// A loss plus its regularizer list, ready to be bound to a lambda.
struct ModelSpec {
  std::shared_ptr<const LossModel> loss;
  std::vector<std::shared_ptr<const Regularizer>> regularizers;
};

RegularizedObjective make_objective(const ModelSpec& spec, LambdaVector lambda);

/// Squared loss 1/2 (y - theta^T x)^2 with one quadratic penalty
/// 1/2 theta_m^2 per coordinate (M = p).
ModelSpec ridge_diagonal(Index p);

/// Binary cross entropy on sigmoid(theta_0 + theta^T x) with a single
/// 1/2 ||theta||_2^2 penalty that leaves the intercept unpenalized
/// (M = 1). Labels must be in {0,1}.
ModelSpec logistic(Index p, bool with_intercept = true);

/// Squared loss with r_1 = ||theta||_1 (l1-flagged) and
/// r_2 = 1/2 ||theta||_2^2 (M = 2).
ModelSpec elastic_net(Index p);

}  // namespace aloocv
