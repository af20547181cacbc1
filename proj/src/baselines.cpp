#include "aloocv/baselines.hpp"

#include "loo_engine.hpp"

namespace aloocv {

double influence_baseline(const Dataset& data, const FittedModel& fitted,
                          const RegularizedObjective& objective, Index i,
                          HessianMode mode) {
  internal::check_fitted_matches(data, fitted, objective, "influence_baseline");
  if (i < 0 || i >= data.n()) {
    throw ValidationError("influence_baseline: index out of range");
  }
  const Vector& theta = fitted.theta_hat;
  internal::LooEngine engine(data, objective, theta, mode,
                             internal::active_set_for(fitted, objective));
  const Vector g = objective.loss_model().grad(data[i], theta);
  const Vector b = engine.restrict(g);
  const Vector delta = engine.solve(i, b);
  return objective.loss_model().loss(data[i], theta) + b.dot(delta);
}

}  // namespace aloocv
