#pragma once

#include <optional>
#include <vector>

#include "aloocv/model.hpp"
#include "aloocv/types.hpp"

namespace aloocv {

struct LineSearchConfig {
  double armijo_c = 1e-4;   // sufficient-decrease constant
  double backtrack = 0.5;   // step shrink factor
  int max_backtracks = 60;
};

/// Proximal-gradient settings for the l1 subproblem (active-set
/// location before the Newton polish).
struct ProximalConfig {
  double initial_step = 1.0;
  int max_iterations = 20000;
  double backtrack = 0.5;
  int polish_rounds = 25;  // ISTA <-> restricted-Newton alternations
};

struct SolverConfig {
  /// Convergence on the inf-norm of the total-objective gradient; for
  /// l1 problems, on the subgradient-optimality residual.
  double gradient_tolerance = 1e-10;
  int max_iterations = 100;
  LineSearchConfig line_search{};
  ProximalConfig l1_subproblem{};
};

/// A solved ERM instance: the minimizer, the lambda it was fit under,
/// and solver diagnostics.
struct FittedModel {
  Vector theta_hat;
  LambdaVector lambda;
  bool converged = false;
  int iterations = 0;
  double final_gradient_norm = 0.0;
  /// Nonzero coordinates of theta_hat, filled for l1 problems.
  std::optional<std::vector<Index>> active_set;
  /// Objective value at the start of each accepted iteration.
  std::vector<double> objective_history;
};

/// Minimizes sum_{j in S} l(z_j; theta) + lambda^T r(theta) by damped
/// Newton iterations (proximal gradient + restricted Newton when an l1
/// term is present). S excludes `exclude` when given. warm_start only
/// affects the iteration count, not the answer beyond tolerance.
FittedModel fit(const Dataset& data, const RegularizedObjective& objective,
                const SolverConfig& config = {},
                std::optional<Index> exclude = std::nullopt,
                const std::optional<Vector>& warm_start = std::nullopt);

struct LooRefit {
  Index index;       // the left-out sample
  Vector theta;      // minimizer over the remaining n-1 samples
  double cv;         // l(z_i; theta)
  bool converged;
};

struct LoocvResult {
  std::vector<LooRefit> refits;  // one per sample, in index order
  double cv_mean = 0.0;
  double cv_std_error = 0.0;

  bool all_converged() const;
};

/// Exact leave-one-out cross validation: n refits, each warm-started at
/// the full-data minimizer, scored on the held-out sample.
LoocvResult loocv_exact(const Dataset& data,
                        const RegularizedObjective& objective,
                        const SolverConfig& config = {}, int threads = 1);

}  // namespace aloocv
