#include "aloocv/models.hpp"

#include <cmath>

namespace aloocv {

namespace {

/// l(z; theta) = 1/2 (y - theta^T x)^2.
class SquaredLoss : public LossModel {
 public:
  double loss(const SampleRef& z, const Vector& theta) const override {
    const double r = theta.dot(z.x) - z.y;
    return 0.5 * r * r;
  }

  Vector grad(const SampleRef& z, const Vector& theta) const override {
    return (theta.dot(z.x) - z.y) * z.x;
  }

  std::optional<RankOneHessian> hess_rank_one(
      const SampleRef& z, const Vector& theta) const override {
    (void)theta;
    return RankOneHessian{1.0, z.x};
  }

  bool hess_is_constant() const override { return true; }
};

double sigmoid(double u) {
  if (u >= 0.0) return 1.0 / (1.0 + std::exp(-u));
  const double e = std::exp(u);
  return e / (1.0 + e);
}

// log(1 + exp(u)) without overflow for large |u|.
double softplus(double u) {
  return std::max(u, 0.0) + std::log1p(std::exp(-std::abs(u)));
}

/// Binary cross entropy on sigmoid(margin), labels in {0,1}. With an
/// intercept the parameter is (theta_0, theta_1..theta_p) and the
/// margin is theta_0 + theta_{1:}^T x.
class LogisticLoss : public LossModel {
 public:
  explicit LogisticLoss(bool with_intercept)
      : with_intercept_(with_intercept) {}

  Index param_dim(Index feature_dim) const override {
    return with_intercept_ ? feature_dim + 1 : feature_dim;
  }

  double loss(const SampleRef& z, const Vector& theta) const override {
    return softplus(margin(z, theta)) - label(z) * margin(z, theta);
  }

  Vector grad(const SampleRef& z, const Vector& theta) const override {
    const double s = sigmoid(margin(z, theta)) - label(z);
    return s * extended(z);
  }

  std::optional<RankOneHessian> hess_rank_one(
      const SampleRef& z, const Vector& theta) const override {
    const double s = sigmoid(margin(z, theta));
    return RankOneHessian{s * (1.0 - s), extended(z)};
  }

 private:
  double margin(const SampleRef& z, const Vector& theta) const {
    return with_intercept_ ? theta[0] + theta.tail(theta.size() - 1).dot(z.x)
                           : theta.dot(z.x);
  }

  Vector extended(const SampleRef& z) const {
    if (!with_intercept_) return z.x;
    Vector v(z.x.size() + 1);
    v[0] = 1.0;
    v.tail(z.x.size()) = z.x;
    return v;
  }

  static double label(const SampleRef& z) {
    if (z.y != 0.0 && z.y != 1.0) {
      throw ValidationError("logistic loss: labels must be 0 or 1");
    }
    return z.y;
  }

  bool with_intercept_;
};

}  // namespace

RegularizedObjective make_objective(const ModelSpec& spec,
                                    LambdaVector lambda) {
  return RegularizedObjective(spec.loss, spec.regularizers, std::move(lambda));
}

ModelSpec ridge_diagonal(Index p) {
  if (p < 1) throw ValidationError("ridge_diagonal: p must be positive");
  ModelSpec spec;
  spec.loss = std::make_shared<SquaredLoss>();
  spec.regularizers.reserve(p);
  for (Index m = 0; m < p; ++m) {
    spec.regularizers.push_back(std::make_shared<CoordinateSquared>(m));
  }
  return spec;
}

ModelSpec logistic(Index p, bool with_intercept) {
  if (p < 1) throw ValidationError("logistic: p must be positive");
  ModelSpec spec;
  spec.loss = std::make_shared<LogisticLoss>(with_intercept);
  spec.regularizers.push_back(
      std::make_shared<SquaredL2>(with_intercept ? 1 : 0));
  return spec;
}

ModelSpec elastic_net(Index p) {
  if (p < 1) throw ValidationError("elastic_net: p must be positive");
  ModelSpec spec;
  spec.loss = std::make_shared<SquaredLoss>();
  spec.regularizers.push_back(std::make_shared<L1Norm>());
  spec.regularizers.push_back(std::make_shared<SquaredL2>());
  return spec;
}

}  // namespace aloocv
