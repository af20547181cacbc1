#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "aloocv/model.hpp"
#include "aloocv/solver.hpp"
#include "aloocv/types.hpp"

namespace aloocv {

/// How each leave-one-out linear system is solved.
///   kShermanMorrison: factor the full-data Hessian once, correct every
///     solve by the left-out sample's rank-one term. O(p^2) per index.
///   kRefactorize: assemble and factor the downdated matrix per index.
///     Slower, used as a verification mode and for losses without
///     factored Hessians.
///   kAuto: Sherman-Morrison when the loss provides rank-one Hessians,
///     refactorization otherwise.
enum class HessianMode { kAuto, kShermanMorrison, kRefactorize };

/// One-step approximation to the leave-one-out minimizer:
///
///   theta_tilde(i) = theta_hat
///       + [ sum_{j != i} hess l(z_j; theta_hat) + smooth penalty hess ]^{-1}
///         grad l(z_i; theta_hat)
///
/// (the bracket equals (n-1) times the leave-one-out empirical
/// Hessian). For l1 models the solve is restricted to the active set of
/// theta_hat and zero coordinates stay exactly zero. Throws
/// EstimatorUndefined when the leave-one-out Hessian is not positive
/// definite.
Vector aloocv_parameter(const Dataset& data, const FittedModel& fitted,
                        const RegularizedObjective& objective, Index i,
                        HessianMode mode = HessianMode::kAuto);

/// Leave-q-out generalization: the left-out index set S replaces the
/// single index. |S| = 1 delegates to aloocv_parameter.
Vector aloocv_parameter_q(const Dataset& data, const FittedModel& fitted,
                          const RegularizedObjective& objective,
                          const std::vector<Index>& left_out,
                          HessianMode mode = HessianMode::kAuto);

struct LooEstimate {
  Index index = 0;
  Vector theta_tilde;
  double acv = 0.0;  // l(z_i; theta_tilde)
  std::optional<double> cv_exact;
  std::optional<double> if_baseline;
  bool valid = true;
  std::string error;
  /// l1 models with exact refits: the refit support differs from the
  /// full-fit support (the estimate is reported unadjusted).
  bool support_violation = false;
};

struct AcvReport {
  std::vector<LooEstimate> estimates;  // size n, index order
  double acv_mean = 0.0;               // over valid estimates
  double acv_std_error = 0.0;          // population std / sqrt(n_valid)
  int failed_count = 0;
  int support_violations = 0;
  double wall_seconds = 0.0;
  std::optional<double> cv_mean, cv_std_error;
  std::optional<double> if_mean, if_std_error;
};

/// The approximate cross validation vector ACV_i = l(z_i; theta_tilde(i))
/// for every sample, with optional exact-LOOCV and influence-function
/// columns for comparison. Per-index failures are collected, never
/// dropped silently.
AcvReport acv_vector(const Dataset& data, const FittedModel& fitted,
                     const RegularizedObjective& objective,
                     bool with_exact = false, bool with_if = false,
                     const SolverConfig& solver = {},
                     HessianMode mode = HessianMode::kAuto, int threads = 1);

enum class ProbeFamily { kRidge, kLogistic };

struct ProbeOptions {
  Index p = 10;
  double lambda = 1.0;
  SolverConfig solver{};
  int threads = 1;
};

struct ProbeRow {
  Index n;
  double refit_gap;  // max_i || theta_hat - theta_hat^{(-i)} ||_inf
  double acv_gap;    // max_i || theta_hat^{(-i)} - theta_tilde(i) ||_inf
};

/// Error-versus-n table for log-log slope fitting: synthesizes one
/// dataset per grid size (deterministic in `seed`), runs exact refits
/// as ground truth, and reports the two gap columns.
std::vector<ProbeRow> error_scaling_probe(ProbeFamily family,
                                          const std::vector<Index>& n_grid,
                                          std::uint64_t seed,
                                          const ProbeOptions& options = {});

}  // namespace aloocv
