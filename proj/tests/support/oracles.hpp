#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "aloocv/types.hpp"

// Independent reference implementations the library is checked against.
// Everything here goes through plain dense algebra on the normal
// equations or elementary loops; none of it shares code with the
// solver, the one-step estimators, or the tuner.

namespace aloocv::testing {

/// Minimizer of sum_{j not in excluded} 1/2 (y_j - theta^T x_j)^2
///   + 1/2 theta^T diag(penalty) theta,
/// straight from the normal equations.
inline Vector ridge_normal_equation(const Dataset& data, const Vector& penalty,
                                    const std::vector<Index>& excluded = {}) {
  const Index p = data.p();
  Matrix a = Matrix::Zero(p, p);
  Vector b = Vector::Zero(p);
  for (Index j = 0; j < data.n(); ++j) {
    bool skip = false;
    for (Index e : excluded) skip = skip || e == j;
    if (skip) continue;
    const auto z = data[j];
    a.noalias() += z.x * z.x.transpose();
    b.noalias() += z.y * z.x;
  }
  a.diagonal() += penalty;
  return a.ldlt().solve(b);
}

/// Uniform-penalty convenience overload.
inline Vector ridge_normal_equation(const Dataset& data, double lambda,
                                    const std::vector<Index>& excluded = {}) {
  return ridge_normal_equation(data, Vector::Constant(data.p(), lambda),
                               excluded);
}

struct NaiveLoocv {
  std::vector<Vector> thetas;  // leave-one-out minimizers, index order
  std::vector<double> cv;      // 1/2 (y_i - theta_i^T x_i)^2
  double cv_mean = 0.0;
};

/// Brute-force leave-one-out for the diagonal ridge model: n fresh
/// normal-equation solves, no warm starts, no shared factorizations.
inline NaiveLoocv ridge_loocv_naive(const Dataset& data,
                                    const Vector& penalty) {
  NaiveLoocv out;
  for (Index i = 0; i < data.n(); ++i) {
    Vector theta = ridge_normal_equation(data, penalty, {i});
    const auto z = data[i];
    const double resid = z.y - theta.dot(z.x);
    out.cv.push_back(0.5 * resid * resid);
    out.cv_mean += out.cv.back();
    out.thetas.push_back(std::move(theta));
  }
  out.cv_mean /= static_cast<double>(data.n());
  return out;
}

/// Cyclic coordinate descent for
///   sum_i 1/2 (y_i - theta^T x_i)^2 + l1 ||theta||_1 + l2/2 ||theta||_2^2,
/// the reference for elastic-net solutions and their active sets.
inline Vector elastic_coordinate_descent(const Dataset& data, double l1,
                                         double l2, int max_sweeps = 100000,
                                         double tol = 1e-12) {
  const Index p = data.p();
  const RowMatrix& x = data.features();
  Vector theta = Vector::Zero(p);
  Vector residual = data.responses();  // y - X theta
  Vector col_sq(p);
  for (Index j = 0; j < p; ++j) col_sq[j] = x.col(j).squaredNorm();

  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double biggest_move = 0.0;
    for (Index j = 0; j < p; ++j) {
      const double rho = x.col(j).dot(residual) + theta[j] * col_sq[j];
      const double shrunk = std::abs(rho) <= l1
                                ? 0.0
                                : (rho > 0 ? rho - l1 : rho + l1);
      const double updated = shrunk / (col_sq[j] + l2);
      const double move = updated - theta[j];
      if (move != 0.0) {
        residual -= move * x.col(j);
        theta[j] = updated;
        biggest_move = std::max(biggest_move, std::abs(move));
      }
    }
    if (biggest_move <= tol) break;
  }
  return theta;
}

inline std::vector<Index> support_of(const Vector& theta,
                                     double cutoff = 0.0) {
  std::vector<Index> s;
  for (Index j = 0; j < theta.size(); ++j) {
    if (std::abs(theta[j]) > cutoff) s.push_back(j);
  }
  return s;
}

/// Plain least squares, for noiseless-recovery checks.
inline Vector least_squares(const Dataset& data) {
  return data.features().colPivHouseholderQr().solve(data.responses());
}

/// Least-squares slope of y over x.
inline double ls_slope(const std::vector<double>& x,
                       const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

inline double loglog_slope(const std::vector<double>& x,
                           const std::vector<double>& y) {
  std::vector<double> lx, ly;
  for (double v : x) lx.push_back(std::log(v));
  for (double v : y) ly.push_back(std::log(v));
  return ls_slope(lx, ly);
}

}  // namespace aloocv::testing
