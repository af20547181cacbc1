#include "aloocv/hessian.hpp"

namespace aloocv {

Matrix total_hessian(const Dataset& data, const Vector& theta,
                     const RegularizedObjective& objective,
                     std::optional<Index> exclude) {
  const Index k = objective.param_dim(data);
  if (theta.size() != k) {
    throw ValidationError("total_hessian: theta dimension mismatch");
  }
  const LossModel& loss = objective.loss_model();
  Matrix h = objective.smooth_penalty_hess(theta);
  for (Index j = 0; j < data.n(); ++j) {
    if (exclude && *exclude == j) continue;
    if (auto r1 = loss.hess_rank_one(data[j], theta)) {
      h.selfadjointView<Eigen::Lower>().rankUpdate(r1->direction, r1->weight);
    } else {
      h += loss.hess(data[j], theta);
    }
  }
  // rankUpdate only touches the lower triangle; mirror it.
  h.triangularView<Eigen::StrictlyUpper>() =
      h.triangularView<Eigen::StrictlyLower>().transpose();
  if (!h.allFinite()) {
    throw NumericalError("total_hessian: non-finite entry");
  }
  return h;
}

Matrix empirical_hessian(const Dataset& data, std::optional<Index> exclude,
                         const Vector& theta,
                         const RegularizedObjective& objective) {
  if (exclude && (*exclude < 0 || *exclude >= data.n())) {
    throw ValidationError("empirical_hessian: exclude index out of range");
  }
  const Index m = exclude ? data.n() - 1 : data.n();
  if (m < 1) {
    throw ValidationError("empirical_hessian: no samples left");
  }
  return total_hessian(data, theta, objective, exclude) /
         static_cast<double>(m);
}

}  // namespace aloocv
