#include "aloocv/model.hpp"

#include <cmath>

namespace aloocv {

Matrix LossModel::hess(const SampleRef& z, const Vector& theta) const {
  if (auto r1 = hess_rank_one(z, theta)) {
    return r1->weight * r1->direction * r1->direction.transpose();
  }
  throw NumericalError("loss model: no Hessian implementation");
}

// --- regularizers

double SquaredL2::value(const Vector& theta) const {
  return 0.5 * theta.tail(theta.size() - skip_head_).squaredNorm();
}

Vector SquaredL2::grad(const Vector& theta) const {
  Vector g = theta;
  g.head(skip_head_).setZero();
  return g;
}

Matrix SquaredL2::hess(const Vector& theta) const {
  Matrix h = Matrix::Identity(theta.size(), theta.size());
  h.topLeftCorner(skip_head_, skip_head_).setZero();
  return h;
}

double CoordinateSquared::value(const Vector& theta) const {
  return 0.5 * theta[coord_] * theta[coord_];
}

Vector CoordinateSquared::grad(const Vector& theta) const {
  Vector g = Vector::Zero(theta.size());
  g[coord_] = theta[coord_];
  return g;
}

Matrix CoordinateSquared::hess(const Vector& theta) const {
  Matrix h = Matrix::Zero(theta.size(), theta.size());
  h(coord_, coord_) = 1.0;
  return h;
}

double L1Norm::value(const Vector& theta) const {
  return theta.lpNorm<1>();
}

Vector L1Norm::grad(const Vector& theta) const {
  return theta.array().sign().matrix();
}

Matrix L1Norm::hess(const Vector& theta) const {
  return Matrix::Zero(theta.size(), theta.size());
}

// --- objective

RegularizedObjective::RegularizedObjective(
    std::shared_ptr<const LossModel> loss,
    std::vector<std::shared_ptr<const Regularizer>> regs, LambdaVector lambda)
    : loss_(std::move(loss)),
      regularizers_(std::move(regs)),
      lambda_(std::move(lambda)) {
  if (!loss_) {
    throw ValidationError("objective: null loss model");
  }
  if (lambda_.size() != static_cast<Index>(regularizers_.size())) {
    throw ValidationError("objective: lambda length != regularizer count");
  }
  for (Index m = 0; m < num_regularizers(); ++m) {
    if (!regularizers_[m]) {
      throw ValidationError("objective: null regularizer");
    }
    if (regularizers_[m]->is_l1()) {
      if (l1_index_) {
        throw ValidationError("objective: more than one l1 regularizer");
      }
      l1_index_ = m;
    }
  }
}

RegularizedObjective RegularizedObjective::with_lambda(
    LambdaVector lambda) const {
  return RegularizedObjective(loss_, regularizers_, std::move(lambda));
}

double RegularizedObjective::l1_weight() const {
  return l1_index_ ? lambda_[*l1_index_] : 0.0;
}

double RegularizedObjective::penalty_value(const Vector& theta) const {
  double v = 0.0;
  for (Index m = 0; m < num_regularizers(); ++m) {
    v += lambda_[m] * regularizers_[m]->value(theta);
  }
  return v;
}

double RegularizedObjective::smooth_penalty_value(const Vector& theta) const {
  double v = 0.0;
  for (Index m = 0; m < num_regularizers(); ++m) {
    if (regularizers_[m]->is_l1()) continue;
    v += lambda_[m] * regularizers_[m]->value(theta);
  }
  return v;
}

Vector RegularizedObjective::smooth_penalty_grad(const Vector& theta) const {
  Vector g = Vector::Zero(theta.size());
  for (Index m = 0; m < num_regularizers(); ++m) {
    if (regularizers_[m]->is_l1()) continue;
    if (lambda_[m] == 0.0) continue;
    g += lambda_[m] * regularizers_[m]->grad(theta);
  }
  return g;
}

Matrix RegularizedObjective::smooth_penalty_hess(const Vector& theta) const {
  Matrix h = Matrix::Zero(theta.size(), theta.size());
  for (Index m = 0; m < num_regularizers(); ++m) {
    if (regularizers_[m]->is_l1()) continue;
    if (lambda_[m] == 0.0) continue;
    h += lambda_[m] * regularizers_[m]->hess(theta);
  }
  return h;
}

Matrix RegularizedObjective::regularizer_gradients(const Vector& theta) const {
  Matrix r(theta.size(), num_regularizers());
  for (Index m = 0; m < num_regularizers(); ++m) {
    r.col(m) = regularizers_[m]->grad(theta);
  }
  return r;
}

double RegularizedObjective::total_value(const Dataset& data,
                                         const Vector& theta,
                                         std::optional<Index> exclude) const {
  double v = penalty_value(theta);
  for (Index j = 0; j < data.n(); ++j) {
    if (exclude && *exclude == j) continue;
    v += loss_->loss(data[j], theta);
  }
  return v;
}

double RegularizedObjective::smooth_value(const Dataset& data,
                                          const Vector& theta,
                                          std::optional<Index> exclude) const {
  double v = smooth_penalty_value(theta);
  for (Index j = 0; j < data.n(); ++j) {
    if (exclude && *exclude == j) continue;
    v += loss_->loss(data[j], theta);
  }
  return v;
}

Vector RegularizedObjective::smooth_grad(const Dataset& data,
                                         const Vector& theta,
                                         std::optional<Index> exclude) const {
  Vector g = smooth_penalty_grad(theta);
  for (Index j = 0; j < data.n(); ++j) {
    if (exclude && *exclude == j) continue;
    g += loss_->grad(data[j], theta);
  }
  return g;
}

}  // namespace aloocv
