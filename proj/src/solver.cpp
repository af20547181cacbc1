#include "aloocv/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "aloocv/hessian.hpp"
#include "aloocv/parallel.hpp"

namespace aloocv {

namespace {

// Objective values near the optimum differ by less than double
// resolution; Armijo comparisons get this much slack so full Newton
// steps are not rejected on roundoff.
double value_resolution(double f) { return 1e-12 * (1.0 + std::abs(f)); }

Vector soft_threshold(const Vector& v, double a) {
  return v.unaryExpr([a](double t) {
    if (t > a) return t - a;
    if (t < -a) return t + a;
    return 0.0;
  });
}

// Optimality residual of the l1 composite problem: stationarity on the
// support, subgradient bound off it.
double subgradient_residual(const Vector& theta, const Vector& smooth_grad,
                            double l1_weight) {
  double r = 0.0;
  for (Index j = 0; j < theta.size(); ++j) {
    const double g = smooth_grad[j];
    if (theta[j] > 0.0) {
      r = std::max(r, std::abs(g + l1_weight));
    } else if (theta[j] < 0.0) {
      r = std::max(r, std::abs(g - l1_weight));
    } else {
      r = std::max(r, std::max(0.0, std::abs(g) - l1_weight));
    }
  }
  return r;
}

std::vector<Index> support_of(const Vector& theta) {
  std::vector<Index> s;
  for (Index j = 0; j < theta.size(); ++j) {
    if (theta[j] != 0.0) s.push_back(j);
  }
  return s;
}

FittedModel fit_smooth(const Dataset& data,
                       const RegularizedObjective& objective,
                       const SolverConfig& config, std::optional<Index> exclude,
                       Vector theta) {
  FittedModel result{Vector(), objective.lambda()};
  double f = objective.total_value(data, theta, exclude);
  result.objective_history.push_back(f);

  bool converged = false;
  int it = 0;
  for (; it < config.max_iterations; ++it) {
    const Vector g = objective.smooth_grad(data, theta, exclude);
    result.final_gradient_norm = g.lpNorm<Eigen::Infinity>();
    if (result.final_gradient_norm <= config.gradient_tolerance) {
      converged = true;
      break;
    }

    Matrix a = total_hessian(data, theta, objective, exclude);
    Eigen::LDLT<Matrix> ldlt(a);
    Vector step;
    bool have_newton = ldlt.info() == Eigen::Success;
    if (have_newton) {
      step = ldlt.solve(-g);
      have_newton = step.allFinite() && g.dot(step) < 0.0;
    }
    if (!have_newton) {
      step = -g;  // singular or indefinite system
    }

    const double dirder = g.dot(step);
    double alpha = 1.0;
    bool accepted = false;
    for (int bt = 0; bt <= config.line_search.max_backtracks; ++bt) {
      const Vector candidate = theta + alpha * step;
      const double f_new = objective.total_value(data, candidate, exclude);
      if (f_new <=
          f + config.line_search.armijo_c * alpha * dirder + value_resolution(f)) {
        theta = candidate;
        f = f_new;
        accepted = true;
        break;
      }
      alpha *= config.line_search.backtrack;
    }
    if (!accepted) break;  // stalled at arithmetic resolution
    result.objective_history.push_back(f);
  }

  if (!converged) {
    // max_iterations exhausted or stalled; re-measure the residual.
    result.final_gradient_norm = objective.smooth_grad(data, theta, exclude)
                                     .lpNorm<Eigen::Infinity>();
    converged = result.final_gradient_norm <= config.gradient_tolerance;
  }
  result.theta_hat = std::move(theta);
  result.converged = converged;
  result.iterations = it;
  return result;
}

// Restricted Newton on the active set with the signs frozen. Returns
// false when a coordinate is driven to the boundary (caller resumes the
// proximal phase).
bool polish_active_set(const Dataset& data,
                       const RegularizedObjective& objective,
                       const SolverConfig& config, std::optional<Index> exclude,
                       Vector& theta, int& iterations,
                       std::vector<double>& history) {
  const double l1 = objective.l1_weight();
  std::vector<Index> active = support_of(theta);
  if (active.empty()) return true;
  const Index a = static_cast<Index>(active.size());
  Vector signs(a);
  for (Index t = 0; t < a; ++t) signs[t] = theta[active[t]] > 0.0 ? 1.0 : -1.0;

  auto composite_value = [&](const Vector& th) {
    return objective.smooth_value(data, th, exclude) + l1 * th.lpNorm<1>();
  };

  for (int it = 0; it < 50; ++it) {
    const Vector g_full = objective.smooth_grad(data, theta, exclude);
    Vector g(a);
    for (Index t = 0; t < a; ++t) g[t] = g_full[active[t]] + l1 * signs[t];
    if (g.lpNorm<Eigen::Infinity>() <= config.gradient_tolerance) return true;

    const Matrix h_full = total_hessian(data, theta, objective, exclude);
    Matrix h(a, a);
    for (Index r = 0; r < a; ++r)
      for (Index c = 0; c < a; ++c) h(r, c) = h_full(active[r], active[c]);

    Eigen::LDLT<Matrix> ldlt(h);
    Vector step;
    bool have_newton = ldlt.info() == Eigen::Success;
    if (have_newton) {
      step = ldlt.solve(-g);
      have_newton = step.allFinite() && g.dot(step) < 0.0;
    }
    if (!have_newton) step = -g;

    // Largest step that keeps every active coordinate on its sign.
    double alpha_max = std::numeric_limits<double>::infinity();
    for (Index t = 0; t < a; ++t) {
      const double th = theta[active[t]];
      if (th * step[t] < 0.0) {
        alpha_max = std::min(alpha_max, -th / step[t]);
      }
    }
    if (alpha_max < 1e-14) return false;  // coordinate wants to leave

    const double f = composite_value(theta);
    const double dirder = g.dot(step);
    double alpha = std::min(1.0, 0.995 * alpha_max);
    bool accepted = false;
    for (int bt = 0; bt <= config.line_search.max_backtracks; ++bt) {
      Vector candidate = theta;
      for (Index t = 0; t < a; ++t) candidate[active[t]] += alpha * step[t];
      const double f_new = composite_value(candidate);
      if (f_new <=
          f + config.line_search.armijo_c * alpha * dirder + value_resolution(f)) {
        theta = candidate;
        history.push_back(f_new);
        accepted = true;
        break;
      }
      alpha *= config.line_search.backtrack;
    }
    ++iterations;
    if (!accepted) return true;  // resolution floor
  }
  return true;
}

FittedModel fit_l1(const Dataset& data, const RegularizedObjective& objective,
                   const SolverConfig& config, std::optional<Index> exclude,
                   Vector theta) {
  const double l1 = objective.l1_weight();
  FittedModel result{Vector(), objective.lambda()};

  auto composite_value = [&](const Vector& th) {
    return objective.smooth_value(data, th, exclude) + l1 * th.lpNorm<1>();
  };

  double f = composite_value(theta);
  result.objective_history.push_back(f);

  int iterations = 0;
  double step = config.l1_subproblem.initial_step;
  double residual = std::numeric_limits<double>::infinity();

  for (int round = 0; round < config.l1_subproblem.polish_rounds; ++round) {
    // Proximal phase: locate the active set.
    std::vector<Index> prev_support = support_of(theta);
    int stable = 0;
    while (iterations < config.l1_subproblem.max_iterations) {
      const Vector g = objective.smooth_grad(data, theta, exclude);
      residual = subgradient_residual(theta, g, l1);
      if (residual <= config.gradient_tolerance) break;

      const double f_smooth = objective.smooth_value(data, theta, exclude);
      step = std::min(step * 2.0, 1e8);
      Vector candidate;
      for (;;) {
        candidate = soft_threshold(theta - step * g, step * l1);
        const Vector delta = candidate - theta;
        const double quad = f_smooth + g.dot(delta) +
                            delta.squaredNorm() / (2.0 * step);
        const double f_cand = objective.smooth_value(data, candidate, exclude);
        if (f_cand <= quad + value_resolution(f_smooth)) break;
        step *= config.l1_subproblem.backtrack;
        if (step < 1e-18) break;
      }
      theta = candidate;
      f = composite_value(theta);
      result.objective_history.push_back(f);
      ++iterations;

      std::vector<Index> cur_support = support_of(theta);
      stable = (cur_support == prev_support) ? stable + 1 : 0;
      prev_support = std::move(cur_support);
      // Support settled and the residual is modest: hand over to Newton.
      if (stable >= 5 && residual <= 1e-3 * (1.0 + std::abs(f))) break;
      if (iterations % 500 == 0) break;
    }
    if (residual <= config.gradient_tolerance) break;

    polish_active_set(data, objective, config, exclude, theta, iterations,
                      result.objective_history);
    residual = subgradient_residual(
        theta, objective.smooth_grad(data, theta, exclude), l1);
    if (residual <= config.gradient_tolerance) break;
  }

  result.theta_hat = std::move(theta);
  result.converged = residual <= config.gradient_tolerance;
  result.final_gradient_norm = residual;
  result.iterations = iterations;
  result.active_set = support_of(result.theta_hat);
  return result;
}

}  // namespace

FittedModel fit(const Dataset& data, const RegularizedObjective& objective,
                const SolverConfig& config, std::optional<Index> exclude,
                const std::optional<Vector>& warm_start) {
  if (config.gradient_tolerance <= 0.0) {
    throw ValidationError("solver: gradient_tolerance must be positive");
  }
  if (config.max_iterations < 1) {
    throw ValidationError("solver: max_iterations must be at least 1");
  }
  if (exclude) {
    if (*exclude < 0 || *exclude >= data.n()) {
      throw ValidationError("solver: exclude index out of range");
    }
    if (data.n() < 2) {
      throw ValidationError("solver: nothing left after exclusion");
    }
  }
  const Index k = objective.param_dim(data);
  Vector theta = Vector::Zero(k);
  if (warm_start) {
    if (warm_start->size() != k) {
      throw ValidationError("solver: warm start dimension mismatch");
    }
    if (!warm_start->allFinite()) {
      throw ValidationError("solver: warm start not finite");
    }
    theta = *warm_start;
  }

  FittedModel fitted =
      (objective.has_l1() && objective.l1_weight() > 0.0)
          ? fit_l1(data, objective, config, exclude, std::move(theta))
          : fit_smooth(data, objective, config, exclude, std::move(theta));
  if (objective.has_l1() && !fitted.active_set) {
    fitted.active_set = support_of(fitted.theta_hat);
  }
  return fitted;
}

bool LoocvResult::all_converged() const {
  return std::all_of(refits.begin(), refits.end(),
                     [](const LooRefit& r) { return r.converged; });
}

LoocvResult loocv_exact(const Dataset& data,
                        const RegularizedObjective& objective,
                        const SolverConfig& config, int threads) {
  // n = 2 is allowed: each refit still has one sample plus the penalty.
  const FittedModel full = fit(data, objective, config);

  LoocvResult result;
  result.refits.resize(data.n());
  parallel_for(data.n(), threads, [&](Index i) {
    FittedModel refit = fit(data, objective, config, i, full.theta_hat);
    const double cv = objective.loss_model().loss(data[i], refit.theta_hat);
    result.refits[i] =
        LooRefit{i, std::move(refit.theta_hat), cv, refit.converged};
  });

  double mean = 0.0;
  for (const auto& r : result.refits) mean += r.cv;
  mean /= static_cast<double>(data.n());
  double var = 0.0;
  for (const auto& r : result.refits) var += (r.cv - mean) * (r.cv - mean);
  var /= static_cast<double>(data.n());
  result.cv_mean = mean;
  result.cv_std_error = std::sqrt(var / static_cast<double>(data.n()));
  return result;
}

}  // namespace aloocv
