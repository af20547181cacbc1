#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "aloocv/aloocv.hpp"
#include "aloocv/model.hpp"
#include "aloocv/solver.hpp"
#include "aloocv/types.hpp"

namespace aloocv {

enum class StepRule {
  kFixed,         // alpha^t = step_size
  kBacktracking,  // halve step_size until the ACV mean does not increase
  kSqrtDecay,     // alpha^t = step_size / sqrt(1 + t)
};

struct TuneConfig {
  StepRule step_rule = StepRule::kBacktracking;
  double step_size = 1.0;
  int max_epochs = 100;  // gradient iterations
  double lambda_lower_bound = 0.0;
  /// Stop when ||approximate gradient||_inf falls to this level.
  double gradient_stop_tolerance = 0.0;
  int max_backtracks = 30;
  SolverConfig solver{};
  std::uint64_t seed = 0;  // stochastic index sampling
  /// Stochastic variant: refit theta_hat every this many steps
  /// (0 -> max(1, n/10)).
  int refit_every = 0;
  /// Evaluate the per-sample gradient pieces at theta_hat instead of
  /// theta_tilde(i). Cheaper, slightly less faithful.
  bool fast_mode = false;
  HessianMode hessian_mode = HessianMode::kAuto;
  int threads = 1;
};

struct TuneRecord {
  int t = 0;
  Vector lambda;          // iterate at the start of iteration t
  double acv_mean = 0.0;  // ACV mean at that iterate
  double grad_inf_norm = 0.0;
  int refit_iterations = 0;  // Newton iterations spent refitting
  double wall_seconds = 0.0;  // cumulative
};

struct TuneTrace {
  std::vector<TuneRecord> records;
  Vector final_lambda;
  double final_acv_mean = 0.0;
  Vector final_theta;
  /// Nonempty when a numerical failure stopped the run early; the
  /// records up to that point are kept and final_* reflect the last
  /// usable iterate.
  std::string abort_reason;
};

/// Gradient of the full-data minimizer with respect to lambda, the
/// k x M matrix
///   -[ n * empirical Hessian ]^{-1} * (regularizer gradient matrix).
Matrix lambda_gradient_full(const Dataset& data, const FittedModel& fitted,
                            const RegularizedObjective& objective);

/// Per-sample approximate gradient of the CV mean with respect to
/// lambda (an M-vector):
///
///   g(i) = - grad r(theta_tilde(i))^T
///          [ sum_{j != i} hess l(z_j; theta_tilde(i)) + penalty hess ]^{-1}
///          grad l(z_i; theta_tilde(i))
///
/// With fast_mode the evaluation point is theta_hat throughout.
Vector per_sample_gradient(const Dataset& data, const FittedModel& fitted,
                           const RegularizedObjective& objective, Index i,
                           bool fast_mode = false,
                           HessianMode mode = HessianMode::kAuto);

/// Batch descent on the ACV estimate: lambda^{t+1} is the projection of
/// lambda^t - alpha^t * mean_i g(i) onto [lower_bound, inf)^M, with a
/// warm-started refit of theta_hat after every accepted step. The trace
/// has one record per started iteration (plus a single record when
/// max_epochs = 0).
std::pair<LambdaVector, TuneTrace> tune_batch(
    const Dataset& data, const RegularizedObjective& objective,
    const LambdaVector& lambda0, const TuneConfig& config = {});

/// Stochastic variant: each step follows a single g(i_t) with i_t drawn
/// uniformly; theta_hat is refit every `refit_every` steps. acv_mean in
/// the trace is refreshed at refit points and carried forward between
/// them.
std::pair<LambdaVector, TuneTrace> tune_stochastic(
    const Dataset& data, const RegularizedObjective& objective,
    const LambdaVector& lambda0, const TuneConfig& config = {});

}  // namespace aloocv
