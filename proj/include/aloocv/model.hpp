#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "aloocv/types.hpp"

namespace aloocv {

/// Per-sample loss Hessian in factored form, hess = weight * d d^T.
/// All GLM-style losses (squared, logistic) have this structure; it is
/// what makes rank-one Hessian downdates possible.
struct RankOneHessian {
  double weight;
  Vector direction;
};

/// Per-sample loss contract. Gradients and Hessians are analytic; the
/// test suite checks them against central finite differences.
class LossModel {
 public:
  virtual ~LossModel() = default;

  /// Parameter count for a given feature dimension (p, or p+1 with an
  /// unregularized intercept).
  virtual Index param_dim(Index feature_dim) const { return feature_dim; }

  virtual double loss(const SampleRef& z, const Vector& theta) const = 0;
  virtual Vector grad(const SampleRef& z, const Vector& theta) const = 0;
  virtual Matrix hess(const SampleRef& z, const Vector& theta) const;

  /// Factored Hessian, when the loss supports it.
  virtual std::optional<RankOneHessian> hess_rank_one(
      const SampleRef& z, const Vector& theta) const {
    (void)z;
    (void)theta;
    return std::nullopt;
  }

  /// True when the per-sample Hessian does not depend on theta
  /// (quadratic losses). Lets callers reuse factorizations.
  virtual bool hess_is_constant() const { return false; }
};

/// One penalty function r_m(theta). Smooth regularizers expose exact
/// derivatives; an l1 regularizer is flagged and contributes nothing to
/// Hessian assembly.
class Regularizer {
 public:
  virtual ~Regularizer() = default;

  virtual double value(const Vector& theta) const = 0;
  virtual Vector grad(const Vector& theta) const = 0;
  virtual Matrix hess(const Vector& theta) const = 0;
  virtual bool is_l1() const { return false; }
};

/// r(theta) = 1/2 sum_{j >= skip_head} theta_j^2. skip_head leaves an
/// intercept block unpenalized.
class SquaredL2 : public Regularizer {
 public:
  explicit SquaredL2(Index skip_head = 0) : skip_head_(skip_head) {}
  double value(const Vector& theta) const override;
  Vector grad(const Vector& theta) const override;
  Matrix hess(const Vector& theta) const override;

 private:
  Index skip_head_;
};

/// r(theta) = 1/2 theta_m^2 for a single coordinate, the building block
/// of per-coordinate ridge penalties.
class CoordinateSquared : public Regularizer {
 public:
  explicit CoordinateSquared(Index coord) : coord_(coord) {}
  double value(const Vector& theta) const override;
  Vector grad(const Vector& theta) const override;
  Matrix hess(const Vector& theta) const override;

 private:
  Index coord_;
};

/// r(theta) = ||theta||_1. grad() returns the sign subgradient (zero at
/// zero coordinates); hess() is identically zero.
class L1Norm : public Regularizer {
 public:
  double value(const Vector& theta) const override;
  Vector grad(const Vector& theta) const override;
  Matrix hess(const Vector& theta) const override;
  bool is_l1() const override { return true; }
};

/// A loss, M regularizers, and their weights: the objective
/// sum_i l(z_i; theta) + lambda^T r(theta). At most one regularizer may
/// be l1-flagged.
class RegularizedObjective {
 public:
  RegularizedObjective(std::shared_ptr<const LossModel> loss,
                       std::vector<std::shared_ptr<const Regularizer>> regs,
                       LambdaVector lambda);

  /// Same loss and regularizers under new weights.
  RegularizedObjective with_lambda(LambdaVector lambda) const;

  const LossModel& loss_model() const { return *loss_; }
  std::shared_ptr<const LossModel> loss_model_ptr() const { return loss_; }
  Index num_regularizers() const {
    return static_cast<Index>(regularizers_.size());
  }
  const LambdaVector& lambda() const { return lambda_; }
  const Regularizer& regularizer(Index m) const { return *regularizers_[m]; }

  bool has_l1() const { return l1_index_.has_value(); }
  Index l1_index() const { return *l1_index_; }
  /// Weight lambda_m attached to the l1 term; 0 when there is none.
  double l1_weight() const;

  Index param_dim(const Dataset& data) const {
    return loss_->param_dim(data.p());
  }

  /// lambda^T r(theta), all terms including l1.
  double penalty_value(const Vector& theta) const;
  /// Penalty value/gradient/Hessian of the smooth terms only.
  double smooth_penalty_value(const Vector& theta) const;
  Vector smooth_penalty_grad(const Vector& theta) const;
  Matrix smooth_penalty_hess(const Vector& theta) const;

  /// k x M matrix whose m-th column is grad r_m(theta). The l1 column
  /// holds the sign subgradient.
  Matrix regularizer_gradients(const Vector& theta) const;

  /// sum_{j in S} l(z_j; theta) + lambda^T r(theta), S all indices or
  /// all but `exclude`.
  double total_value(const Dataset& data, const Vector& theta,
                     std::optional<Index> exclude = std::nullopt) const;
  /// total_value minus the l1 term (the differentiable part).
  double smooth_value(const Dataset& data, const Vector& theta,
                      std::optional<Index> exclude = std::nullopt) const;
  Vector smooth_grad(const Dataset& data, const Vector& theta,
                     std::optional<Index> exclude = std::nullopt) const;

 private:
  std::shared_ptr<const LossModel> loss_;
  std::vector<std::shared_ptr<const Regularizer>> regularizers_;
  LambdaVector lambda_;
  std::optional<Index> l1_index_;
};

}  // namespace aloocv
