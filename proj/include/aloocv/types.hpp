#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace aloocv {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
// Row-major so a sample's feature row is contiguous and can be mapped
// without copying.
using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Bad user input (dimensions, negative lambda, malformed files).
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Numerical failure (non-convergence, singular systems).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SolverError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// The one-step leave-one-out estimate does not exist for a given index
/// (singular or indefinite leave-one-out Hessian).
class EstimatorUndefined : public NumericalError {
 public:
  EstimatorUndefined(Index index, const std::string& what)
      : NumericalError(what), index_(index) {}
  Index index() const { return index_; }

 private:
  Index index_;
};

/// Non-owning view of one data sample: feature vector plus response.
/// The response is a real value for regression and a {0,1} label for
/// classification.
struct SampleRef {
  Eigen::Map<const Vector> x;
  double y;
};

/// Owning sample, mostly for building datasets by hand in tests.
struct Sample {
  Vector x;
  double y;

  SampleRef ref() const {
    return SampleRef{Eigen::Map<const Vector>(x.data(), x.size()), y};
  }
};

/// Immutable collection of n samples sharing feature dimension p.
class Dataset {
 public:
  Dataset(RowMatrix features, Vector responses);

  static Dataset from_samples(const std::vector<Sample>& samples);

  Index n() const { return features_.rows(); }
  Index p() const { return features_.cols(); }

  SampleRef operator[](Index i) const {
    return SampleRef{Eigen::Map<const Vector>(features_.row(i).data(), p()),
                     responses_[i]};
  }

  double y(Index i) const { return responses_[i]; }
  const RowMatrix& features() const { return features_; }
  const Vector& responses() const { return responses_; }

  /// Copy with one response replaced; the receiver is untouched.
  Dataset with_response(Index i, double value) const;

 private:
  RowMatrix features_;
  Vector responses_;
};

/// Nonnegative regularization weights, one per regularizer.
class LambdaVector {
 public:
  explicit LambdaVector(Vector values);
  static LambdaVector constant(Index m, double value);

  Index size() const { return values_.size(); }
  double operator[](Index m) const { return values_[m]; }
  const Vector& values() const { return values_; }

 private:
  Vector values_;
};

}  // namespace aloocv
