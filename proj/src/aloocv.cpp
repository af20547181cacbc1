#include "aloocv/aloocv.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <utility>

#include "aloocv/data.hpp"
#include "aloocv/models.hpp"
#include "aloocv/parallel.hpp"
#include "loo_engine.hpp"

namespace aloocv {

namespace {

std::vector<Index> support_of(const Vector& theta) {
  std::vector<Index> s;
  for (Index j = 0; j < theta.size(); ++j) {
    if (theta[j] != 0.0) s.push_back(j);
  }
  return s;
}

// Population standard deviation over sqrt(count).
std::pair<double, double> mean_and_se(const std::vector<double>& values) {
  if (values.empty()) return {0.0, 0.0};
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  var /= static_cast<double>(values.size());
  return {mean, std::sqrt(var / static_cast<double>(values.size()))};
}

}  // namespace

Vector aloocv_parameter(const Dataset& data, const FittedModel& fitted,
                        const RegularizedObjective& objective, Index i,
                        HessianMode mode) {
  internal::check_fitted_matches(data, fitted, objective, "aloocv_parameter");
  if (i < 0 || i >= data.n()) {
    throw ValidationError("aloocv_parameter: index out of range");
  }
  const Vector& theta = fitted.theta_hat;
  internal::LooEngine engine(data, objective, theta, mode,
                             internal::active_set_for(fitted, objective));
  const Vector g = objective.loss_model().grad(data[i], theta);
  const Vector delta = engine.solve(i, engine.restrict(g));
  return theta + engine.embed(delta);
}

Vector aloocv_parameter_q(const Dataset& data, const FittedModel& fitted,
                          const RegularizedObjective& objective,
                          const std::vector<Index>& left_out,
                          HessianMode mode) {
  if (left_out.empty()) {
    throw ValidationError("aloocv_parameter_q: empty index set");
  }
  if (left_out.size() == 1) {
    return aloocv_parameter(data, fitted, objective, left_out[0], mode);
  }
  internal::check_fitted_matches(data, fitted, objective, "aloocv_parameter_q");
  std::vector<Index> sorted = left_out;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw ValidationError("aloocv_parameter_q: repeated index");
  }
  if (sorted.front() < 0 || sorted.back() >= data.n()) {
    throw ValidationError("aloocv_parameter_q: index out of range");
  }
  if (static_cast<Index>(sorted.size()) >= data.n()) {
    throw ValidationError("aloocv_parameter_q: nothing left after exclusion");
  }

  const Vector& theta = fitted.theta_hat;
  const LossModel& loss = objective.loss_model();
  internal::LooEngine engine(data, objective, theta, HessianMode::kRefactorize,
                             internal::active_set_for(fitted, objective));
  // One factorization either way, so the q-sample system is assembled
  // and factored directly; the mode choice only matters per index.
  (void)mode;
  Vector g_sum = Vector::Zero(theta.size());
  for (Index i : sorted) g_sum += loss.grad(data[i], theta);
  const Vector delta = engine.solve_multi(sorted, engine.restrict(g_sum));
  return theta + engine.embed(delta);
}

AcvReport acv_vector(const Dataset& data, const FittedModel& fitted,
                     const RegularizedObjective& objective, bool with_exact,
                     bool with_if, const SolverConfig& solver, HessianMode mode,
                     int threads) {
  internal::check_fitted_matches(data, fitted, objective, "acv_vector");
  const auto t0 = std::chrono::steady_clock::now();
  const Index n = data.n();
  const LossModel& loss = objective.loss_model();
  const Vector& theta = fitted.theta_hat;
  const bool l1_active = objective.has_l1() && objective.l1_weight() > 0.0;
  const std::vector<Index> full_support =
      l1_active ? support_of(theta) : std::vector<Index>{};

  internal::LooEngine engine(data, objective, theta, mode,
                             internal::active_set_for(fitted, objective));

  AcvReport report;
  report.estimates.resize(n);
  parallel_for(n, threads, [&](Index i) {
    LooEstimate& e = report.estimates[i];
    e.index = i;
    try {
      const Vector g = loss.grad(data[i], theta);
      const Vector b = engine.restrict(g);
      const Vector delta = engine.solve(i, b);
      e.theta_tilde = theta + engine.embed(delta);
      e.acv = loss.loss(data[i], e.theta_tilde);
      if (with_if) e.if_baseline = loss.loss(data[i], theta) + b.dot(delta);
    } catch (const NumericalError& err) {
      e.valid = false;
      e.error = err.what();
    }
    if (with_exact) {
      const FittedModel refit = fit(data, objective, solver, i, theta);
      e.cv_exact = loss.loss(data[i], refit.theta_hat);
      if (l1_active) {
        e.support_violation = support_of(refit.theta_hat) != full_support;
      }
    }
  });

  std::vector<double> acv_values, cv_values, if_values;
  for (const LooEstimate& e : report.estimates) {
    if (e.valid) acv_values.push_back(e.acv);
    if (e.cv_exact) cv_values.push_back(*e.cv_exact);
    if (e.if_baseline) if_values.push_back(*e.if_baseline);
    if (!e.valid) ++report.failed_count;
    if (e.support_violation) ++report.support_violations;
  }
  std::tie(report.acv_mean, report.acv_std_error) = mean_and_se(acv_values);
  if (with_exact) {
    const auto [m, se] = mean_and_se(cv_values);
    report.cv_mean = m;
    report.cv_std_error = se;
  }
  if (with_if && !if_values.empty()) {
    const auto [m, se] = mean_and_se(if_values);
    report.if_mean = m;
    report.if_std_error = se;
  }
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return report;
}

std::vector<ProbeRow> error_scaling_probe(ProbeFamily family,
                                          const std::vector<Index>& n_grid,
                                          std::uint64_t seed,
                                          const ProbeOptions& options) {
  if (n_grid.empty()) {
    throw ValidationError("error_scaling_probe: empty size grid");
  }
  if (options.p < 1) {
    throw ValidationError("error_scaling_probe: p must be positive");
  }
  for (std::size_t t = 0; t < n_grid.size(); ++t) {
    if (n_grid[t] < 20) {
      throw ValidationError("error_scaling_probe: sizes must be at least 20");
    }
    if (t > 0 && n_grid[t] <= n_grid[t - 1]) {
      throw ValidationError("error_scaling_probe: sizes must be ascending");
    }
  }

  std::vector<ProbeRow> rows;
  rows.reserve(n_grid.size());
  for (Index n : n_grid) {
    const std::uint64_t seed_n =
        Rng::derive_seed(seed, static_cast<std::uint64_t>(n));
    SynthData synth =
        family == ProbeFamily::kRidge
            ? synth_ridge(n, options.p, options.p, 1.0, seed_n)
            : synth_logistic(n, options.p, seed_n);
    const ModelSpec spec = family == ProbeFamily::kRidge
                               ? ridge_diagonal(options.p)
                               : logistic(options.p);
    const RegularizedObjective objective = make_objective(
        spec, LambdaVector::constant(static_cast<Index>(spec.regularizers.size()),
                                     options.lambda));

    const FittedModel fitted = fit(synth.dataset, objective, options.solver);
    internal::LooEngine engine(synth.dataset, objective, fitted.theta_hat,
                               HessianMode::kAuto);

    std::vector<double> refit_gap(n), acv_gap(n);
    parallel_for(n, options.threads, [&](Index i) {
      const FittedModel refit =
          fit(synth.dataset, objective, options.solver, i, fitted.theta_hat);
      refit_gap[i] =
          (fitted.theta_hat - refit.theta_hat).lpNorm<Eigen::Infinity>();
      const Vector g =
          objective.loss_model().grad(synth.dataset[i], fitted.theta_hat);
      const Vector theta_tilde =
          fitted.theta_hat + engine.embed(engine.solve(i, engine.restrict(g)));
      acv_gap[i] = (refit.theta_hat - theta_tilde).lpNorm<Eigen::Infinity>();
    });

    ProbeRow row;
    row.n = n;
    row.refit_gap = *std::max_element(refit_gap.begin(), refit_gap.end());
    row.acv_gap = *std::max_element(acv_gap.begin(), acv_gap.end());
    rows.push_back(row);
  }
  return rows;
}

}  // namespace aloocv
