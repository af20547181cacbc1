#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "aloocv/aloocv.hpp"
#include "aloocv/hessian.hpp"
#include "aloocv/model.hpp"
#include "aloocv/types.hpp"

namespace aloocv::internal {

/// Answers the per-index linear systems behind the one-step estimators:
///
///   (A - hess l(z_i; theta)) x = b,
///   A = sum_j hess l(z_j; theta) + smooth penalty hessian
///
/// A is assembled and factored once at construction. Sherman-Morrison
/// mode corrects full-system solves by sample i's rank-one Hessian
/// term; refactorize mode factors the downdated matrix per index. With
/// an active set the whole computation lives on that coordinate block
/// and the remaining coordinates are pinned at zero.
class LooEngine {
 public:
  LooEngine(const Dataset& data, const RegularizedObjective& objective,
            Vector theta, HessianMode mode,
            std::optional<std::vector<Index>> active = std::nullopt)
      : data_(data), objective_(objective), theta_(std::move(theta)) {
    const Index k = objective.param_dim(data);
    if (theta_.size() != k) {
      throw ValidationError("loo solve: theta dimension mismatch");
    }
    if (active) {
      for (Index j : *active) {
        if (j < 0 || j >= k) {
          throw ValidationError("loo solve: active set index out of range");
        }
      }
      map_ = std::move(*active);
    } else {
      map_.resize(k);
      for (Index j = 0; j < k; ++j) map_[j] = j;
    }

    const bool have_rank_one =
        data.n() > 0 &&
        objective.loss_model().hess_rank_one(data[0], theta_).has_value();
    if (mode == HessianMode::kShermanMorrison && !have_rank_one) {
      throw ValidationError(
          "loo solve: sherman-morrison mode needs a factored loss hessian");
    }
    sherman_morrison_ =
        mode != HessianMode::kRefactorize && have_rank_one;

    a_ = restrict_matrix(total_hessian(data_, theta_, objective_));
    llt_.compute(a_);
    full_factor_ok_ = llt_.info() == Eigen::Success;
  }

  Index dim() const { return static_cast<Index>(map_.size()); }
  bool sherman_morrison() const { return sherman_morrison_; }
  const Vector& theta() const { return theta_; }

  Vector restrict(const Vector& full) const {
    Vector r(dim());
    for (Index t = 0; t < dim(); ++t) r[t] = full[map_[t]];
    return r;
  }

  Vector embed(const Vector& restricted) const {
    Vector full = Vector::Zero(theta_.size());
    for (Index t = 0; t < dim(); ++t) full[map_[t]] = restricted[t];
    return full;
  }

  /// x = (A - hess_i)^{-1} b, b and x in restricted coordinates.
  Vector solve(Index i, const Vector& b) const {
    if (sherman_morrison_) {
      if (!full_factor_ok_) {
        throw EstimatorUndefined(
            i, "loo solve: full-data system matrix is not positive definite");
      }
      const auto r1 = objective_.loss_model().hess_rank_one(data_[i], theta_);
      const Vector u = restrict(r1->direction);
      const double w = r1->weight;
      const Vector y = llt_.solve(b);
      if (w == 0.0) return y;
      const Vector v = llt_.solve(u);
      const double denom = 1.0 - w * u.dot(v);
      if (denom <= 1e-12) {
        throw EstimatorUndefined(
            i, "loo solve: leave-one-out hessian is singular at index " +
                   std::to_string(i));
      }
      return y + (w * u.dot(y) / denom) * v;
    }
    const Matrix a_i =
        a_ - restrict_matrix(objective_.loss_model().hess(data_[i], theta_));
    Eigen::LLT<Matrix> llt(a_i);
    if (llt.info() != Eigen::Success) {
      throw EstimatorUndefined(
          i, "loo solve: leave-one-out hessian is not positive definite "
             "at index " +
                 std::to_string(i));
    }
    return llt.solve(b);
  }

  /// Same per-index solve with loss and penalty Hessians re-evaluated
  /// at a different parameter point (exact-mode tuner gradients).
  Vector solve_downdated_at(const Vector& theta_eval, Index i,
                            const Vector& b) const {
    const Matrix a =
        restrict_matrix(total_hessian(data_, theta_eval, objective_, i));
    Eigen::LLT<Matrix> llt(a);
    if (llt.info() != Eigen::Success) {
      throw EstimatorUndefined(
          i, "loo solve: leave-one-out hessian is not positive definite "
             "at index " +
                 std::to_string(i));
    }
    return llt.solve(b);
  }

  /// x = (A - sum_{i in S} hess_i)^{-1} b for a set of distinct
  /// indices, by refactoring the downdated matrix.
  Vector solve_multi(const std::vector<Index>& left_out,
                     const Vector& b) const {
    Matrix a_s = a_;
    for (Index i : left_out) {
      a_s -= restrict_matrix(objective_.loss_model().hess(data_[i], theta_));
    }
    Eigen::LLT<Matrix> llt(a_s);
    if (llt.info() != Eigen::Success) {
      throw EstimatorUndefined(
          left_out.front(),
          "loo solve: leave-q-out hessian is not positive definite");
    }
    return llt.solve(b);
  }

  /// x = A^{-1} b on the restricted block, no sample removed.
  Vector solve_full(const Vector& b) const {
    if (!full_factor_ok_) {
      throw NumericalError(
          "loo solve: full-data system matrix is not positive definite");
    }
    return llt_.solve(b);
  }

 private:
  Matrix restrict_matrix(const Matrix& full) const {
    Matrix r(dim(), dim());
    for (Index s = 0; s < dim(); ++s)
      for (Index t = 0; t < dim(); ++t) r(s, t) = full(map_[s], map_[t]);
    return r;
  }

  const Dataset& data_;
  const RegularizedObjective& objective_;
  Vector theta_;
  std::vector<Index> map_;
  bool sherman_morrison_ = false;
  Matrix a_;
  Eigen::LLT<Matrix> llt_;
  bool full_factor_ok_ = false;
};

/// Active set to restrict the loo systems to: the support of theta_hat
/// for l1 models, nothing otherwise.
inline std::optional<std::vector<Index>> active_set_for(
    const FittedModel& fitted, const RegularizedObjective& objective) {
  if (!objective.has_l1() || objective.l1_weight() == 0.0) return std::nullopt;
  if (fitted.active_set) return fitted.active_set;
  std::vector<Index> support;
  for (Index j = 0; j < fitted.theta_hat.size(); ++j) {
    if (fitted.theta_hat[j] != 0.0) support.push_back(j);
  }
  return support;
}

inline void check_fitted_matches(const Dataset& data,
                                 const FittedModel& fitted,
                                 const RegularizedObjective& objective,
                                 const char* where) {
  if (fitted.theta_hat.size() != objective.param_dim(data)) {
    throw ValidationError(std::string(where) +
                          ": fitted parameter dimension mismatch");
  }
  const Vector& a = fitted.lambda.values();
  const Vector& b = objective.lambda().values();
  if (a.size() != b.size() || !(a.array() == b.array()).all()) {
    throw ValidationError(std::string(where) +
                          ": fitted model and objective disagree on lambda");
  }
}

}  // namespace aloocv::internal
