#include <doctest.h>

#include <cmath>
#include <vector>

#include "aloocv/aloocv.hpp"
#include "aloocv/data.hpp"
#include "aloocv/models.hpp"
#include "aloocv/solver.hpp"
#include "aloocv/tuner.hpp"
#include "aloocv/types.hpp"
#include "finite_diff.hpp"
#include "oracles.hpp"

namespace {

using namespace aloocv;

RegularizedObjective uniform_ridge(Index p, double lambda) {
  return make_objective(ridge_diagonal(p),
                        LambdaVector(Vector::Constant(p, lambda)));
}

Dataset one_dim_pair() {
  return Dataset::from_samples({Sample{Vector::Constant(1, 1.0), 1.0},
                                Sample{Vector::Constant(1, 1.0), 0.0}});
}

/// Four copies of the same perfectly fittable sample; shrinkage can only
/// hurt, so the tuned penalty should land on the boundary.
Dataset identical_rows() {
  RowMatrix x = RowMatrix::Ones(4, 1);
  Vector y = Vector::Ones(4);
  return Dataset(x, y);
}

/// All-zero responses: the minimizer is exactly zero for any ridge
/// penalty, and so is every gradient in sight.
Dataset zero_response(Index n, Index p, std::uint64_t seed) {
  Rng rng(seed);
  RowMatrix x(n, p);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < p; ++j) x(i, j) = rng.normal();
  return Dataset(x, Vector::Zero(n));
}

Vector mean_per_sample_gradient(const Dataset& data, const FittedModel& fitted,
                                const RegularizedObjective& objective) {
  Vector sum = Vector::Zero(objective.num_regularizers());
  for (Index i = 0; i < data.n(); ++i) {
    sum += per_sample_gradient(data, fitted, objective, i);
  }
  return sum / static_cast<double>(data.n());
}

}  // namespace

TEST_CASE("hyperparameter gradient on the 1-d pair matches the closed form") {
  const Dataset data = one_dim_pair();

  // theta_hat(lambda) = 1/(2 + lambda), so d theta / d lambda is
  // -1/(2 + lambda)^2. At lambda = 1 the pieces are: averaged hessian
  // 3/2, regularizer gradient theta_hat = 1/3.
  const double by_hand = -(1.0 / 2.0) * (2.0 / 3.0) * (1.0 / 3.0);
  CHECK(by_hand == doctest::Approx(-1.0 / 9.0).epsilon(1e-15));

  for (double lambda : {1.0, 2.5}) {
    const auto objective = uniform_ridge(1, lambda);
    const FittedModel fitted = fit(data, objective);
    REQUIRE(fitted.converged);
    const Matrix j = lambda_gradient_full(data, fitted, objective);
    REQUIRE(j.rows() == 1);
    REQUIRE(j.cols() == 1);
    const double closed_form = -1.0 / ((2.0 + lambda) * (2.0 + lambda));
    CHECK(j(0, 0) == doctest::Approx(closed_form).epsilon(1e-10));
  }
}

TEST_CASE("zero minimizer gives an exactly zero hyperparameter gradient") {
  const Dataset data = zero_response(5, 3, 21);
  const auto objective = uniform_ridge(3, 0.7);
  const FittedModel fitted = fit(data, objective);
  REQUIRE(fitted.converged);
  REQUIRE(fitted.theta_hat.isZero(0.0));
  CHECK(lambda_gradient_full(data, fitted, objective).isZero(0.0));
}

TEST_CASE("full gradient matrix matches finite differences over refits") {
  const SynthData synth = synth_ridge(40, 5, 5, 1.0, 9);
  const Dataset& data = synth.dataset;
  Vector lambda(5);
  lambda << 0.8, 1.3, 0.5, 2.0, 1.0;
  const auto objective =
      make_objective(ridge_diagonal(5), LambdaVector(lambda));
  const FittedModel fitted = fit(data, objective);
  REQUIRE(fitted.converged);

  const Matrix j = lambda_gradient_full(data, fitted, objective);
  REQUIRE(j.rows() == 5);
  REQUIRE(j.cols() == 5);

  // Oracle: central differences of the closed-form refit over each
  // penalty coordinate.
  Matrix j_fd(5, 5);
  for (Index m = 0; m < 5; ++m) {
    const double h = 1e-5 * (1.0 + lambda[m]);
    Vector up = lambda, down = lambda;
    up[m] += h;
    down[m] -= h;
    j_fd.col(m) = (testing::ridge_normal_equation(data, up) -
                   testing::ridge_normal_equation(data, down)) /
                  (2.0 * h);
  }
  CHECK(testing::rel_gap(j, j_fd) <= 1e-4);
}

TEST_CASE("per-sample gradient vanishes with the held-out gradient") {
  RowMatrix x(3, 2);
  x << 1.0, 0.5, 0.0, 0.0, -0.3, 1.0;
  Vector y(3);
  y << 1.0, 0.0, 0.5;
  const Dataset data(x, y);
  const auto objective = uniform_ridge(2, 0.5);
  const FittedModel fitted = fit(data, objective);
  REQUIRE(fitted.converged);
  CHECK(per_sample_gradient(data, fitted, objective, 1).isZero(0.0));
}

TEST_CASE("mean per-sample gradient matches finite differences of the exact "
          "leave-one-out mean") {
  const SynthData synth = synth_ridge(40, 5, 5, 1.0, 9);
  const Dataset& data = synth.dataset;

  std::vector<Vector> lambdas;
  lambdas.push_back((Vector(5) << 0.8, 1.3, 0.5, 2.0, 1.0).finished());
  lambdas.push_back((Vector(5) << 1.5, 0.3, 0.9, 0.6, 2.2).finished());
  lambdas.push_back((Vector(5) << 0.4, 0.4, 1.8, 1.1, 0.7).finished());

  for (const Vector& lambda : lambdas) {
    const auto objective =
        make_objective(ridge_diagonal(5), LambdaVector(lambda));
    const FittedModel fitted = fit(data, objective);
    REQUIRE(fitted.converged);
    const Vector gbar = mean_per_sample_gradient(data, fitted, objective);

    // Oracle: differentiate the naive refit-everything CV mean.
    Vector g_fd(5);
    for (Index m = 0; m < 5; ++m) {
      const double h = 1e-4 * (1.0 + lambda[m]);
      Vector up = lambda, down = lambda;
      up[m] += h;
      down[m] -= h;
      g_fd[m] = (testing::ridge_loocv_naive(data, up).cv_mean -
                 testing::ridge_loocv_naive(data, down).cv_mean) /
                (2.0 * h);
    }
    CHECK(testing::rel_gap(gbar, g_fd) <= 1e-3);
  }
}

TEST_CASE("trace gradient is the mean of the per-sample gradients") {
  const SynthData synth = synth_ridge(40, 8, 8, 1.0, 6);
  const Dataset& data = synth.dataset;
  const auto objective = uniform_ridge(8, 0.5);
  const FittedModel fitted = fit(data, objective);
  const Vector gbar = mean_per_sample_gradient(data, fitted, objective);

  TuneConfig config;
  config.max_epochs = 0;
  const auto [lambda, trace] = tune_batch(
      data, objective, LambdaVector(Vector::Constant(8, 0.5)), config);
  REQUIRE(trace.records.size() == 1);
  const double inf_norm = gbar.lpNorm<Eigen::Infinity>();
  CHECK(std::abs(trace.records[0].grad_inf_norm - inf_norm) <=
        1e-12 * (1.0 + inf_norm));
  CHECK((lambda.values().array() == 0.5).all());
}

TEST_CASE("fixed-step loop matches an independent cold-start replica") {
  const SynthData synth = synth_ridge(30, 5, 5, 1.0, 4);
  const Dataset& data = synth.dataset;
  const auto objective = uniform_ridge(5, 1.0);

  TuneConfig config;
  config.step_rule = StepRule::kFixed;
  config.step_size = 0.1;
  config.max_epochs = 8;
  const auto [tuned, trace] = tune_batch(
      data, objective, LambdaVector(Vector::Constant(5, 1.0)), config);
  REQUIRE(trace.abort_reason.empty());

  // Replica refits from scratch at every iterate instead of warm
  // starting, so agreement also certifies warm-start neutrality.
  Vector lambda = Vector::Constant(5, 1.0);
  for (int t = 0; t < 8; ++t) {
    const auto obj_t = objective.with_lambda(LambdaVector(lambda));
    const FittedModel fitted = fit(data, obj_t);
    const Vector gbar = mean_per_sample_gradient(data, fitted, obj_t);
    const Vector candidate = (lambda - 0.1 * gbar).cwiseMax(0.0);
    if ((candidate.array() == lambda.array()).all()) break;
    lambda = candidate;
  }
  CHECK((tuned.values() - lambda).lpNorm<Eigen::Infinity>() <= 1e-8);
}

TEST_CASE("identical samples drive the penalty to the boundary") {
  const Dataset data = identical_rows();
  const auto objective = uniform_ridge(1, 0.8);
  const LambdaVector lambda0(Vector::Constant(1, 0.8));

  TuneConfig config;
  config.step_size = 50.0;
  config.max_epochs = 10;
  const auto [batch, batch_trace] = tune_batch(data, objective, lambda0, config);
  // One projected step reaches zero, where every gradient vanishes.
  CHECK(batch.values()[0] == 0.0);
  CHECK(batch_trace.records.size() == 2);
  CHECK(batch_trace.final_acv_mean == 0.0);
  CHECK(batch_trace.final_acv_mean <= batch_trace.records[0].acv_mean);

  TuneConfig sgd;
  sgd.step_size = 50.0;
  sgd.max_epochs = 50;
  const auto [stoch, stoch_trace] =
      tune_stochastic(data, objective, lambda0, sgd);
  CHECK(stoch.values()[0] == 0.0);
  CHECK(stoch_trace.abort_reason.empty());
}

TEST_CASE("zero gradient at the start is a fixed point") {
  const Dataset data = zero_response(6, 2, 3);
  const auto objective = uniform_ridge(2, 0.9);
  const auto [lambda, trace] = tune_batch(
      data, objective, LambdaVector(Vector::Constant(2, 0.9)), {});
  CHECK(trace.records.size() == 1);
  CHECK(trace.records[0].grad_inf_norm == 0.0);
  CHECK((lambda.values().array() == 0.9).all());
  CHECK((trace.final_lambda.array() == 0.9).all());
}

TEST_CASE("backtracking never lets the estimate increase along the trace") {
  const SynthData synth = synth_ridge(40, 8, 8, 1.0, 6);
  const Dataset& data = synth.dataset;
  const auto objective = uniform_ridge(8, 0.5);
  const LambdaVector lambda0(Vector::Constant(8, 0.5));

  for (bool fast : {false, true}) {
    TuneConfig config;
    config.max_epochs = 15;
    config.fast_mode = fast;
    const auto [lambda, trace] = tune_batch(data, objective, lambda0, config);
    REQUIRE(trace.abort_reason.empty());
    REQUIRE(!trace.records.empty());
    for (std::size_t r = 1; r < trace.records.size(); ++r) {
      const double prev = trace.records[r - 1].acv_mean;
      CHECK(trace.records[r].acv_mean <= prev + 1e-12 * (1.0 + std::abs(prev)));
    }
    CHECK(trace.final_acv_mean <=
          trace.records[0].acv_mean +
              1e-12 * (1.0 + std::abs(trace.records[0].acv_mean)));
  }
}

TEST_CASE("no iterate ever crosses the lower bound") {
  const Dataset data = identical_rows();
  const auto objective = uniform_ridge(1, 0.8);

  TuneConfig config;
  config.step_size = 50.0;
  config.max_epochs = 10;
  config.lambda_lower_bound = 0.05;
  const auto [lambda, trace] = tune_batch(
      data, objective, LambdaVector(Vector::Constant(1, 0.8)), config);
  CHECK(lambda.values()[0] == 0.05);
  for (const TuneRecord& record : trace.records) {
    CHECK(record.lambda.minCoeff() >= 0.05);
  }

  // A start below the bound is projected up before the first record.
  TuneConfig tiny;
  tiny.max_epochs = 0;
  tiny.lambda_lower_bound = 0.05;
  const auto [projected, trace0] = tune_batch(
      data, objective, LambdaVector(Vector::Constant(1, 0.01)), tiny);
  REQUIRE(trace0.records.size() == 1);
  CHECK(trace0.records[0].lambda[0] == 0.05);
  CHECK(projected.values()[0] == 0.05);
}

TEST_CASE("iteration counters increase strictly") {
  const SynthData synth = synth_ridge(40, 8, 8, 1.0, 6);
  const auto objective = uniform_ridge(8, 0.5);
  const LambdaVector lambda0(Vector::Constant(8, 0.5));

  TuneConfig config;
  config.max_epochs = 12;
  const auto [batch_lambda, batch_trace] =
      tune_batch(synth.dataset, objective, lambda0, config);
  for (std::size_t r = 1; r < batch_trace.records.size(); ++r) {
    CHECK(batch_trace.records[r].t > batch_trace.records[r - 1].t);
  }

  TuneConfig sgd;
  sgd.max_epochs = 30;
  sgd.seed = 11;
  const auto [sgd_lambda, sgd_trace] =
      tune_stochastic(synth.dataset, objective, lambda0, sgd);
  REQUIRE(sgd_trace.records.size() == 30);
  for (std::size_t r = 1; r < sgd_trace.records.size(); ++r) {
    CHECK(sgd_trace.records[r].t > sgd_trace.records[r - 1].t);
  }
}

TEST_CASE("stochastic runs with one seed are identical") {
  const SynthData synth = synth_ridge(40, 8, 8, 1.0, 6);
  const auto objective = uniform_ridge(8, 0.5);
  const LambdaVector lambda0(Vector::Constant(8, 0.5));

  TuneConfig config;
  config.max_epochs = 60;
  config.seed = 7;
  const auto [first, first_trace] =
      tune_stochastic(synth.dataset, objective, lambda0, config);
  const auto [second, second_trace] =
      tune_stochastic(synth.dataset, objective, lambda0, config);

  CHECK((first.values().array() == second.values().array()).all());
  REQUIRE(first_trace.records.size() == second_trace.records.size());
  for (std::size_t r = 0; r < first_trace.records.size(); ++r) {
    const TuneRecord& a = first_trace.records[r];
    const TuneRecord& b = second_trace.records[r];
    CHECK(a.t == b.t);
    CHECK((a.lambda.array() == b.lambda.array()).all());
    CHECK(a.acv_mean == b.acv_mean);
    CHECK(a.grad_inf_norm == b.grad_inf_norm);
    CHECK(a.refit_iterations == b.refit_iterations);
    // wall_seconds is the one field allowed to differ
  }
}

TEST_CASE("stochastic tuning lands near the batch optimum") {
  const SynthData synth = synth_elastic(40, 8, 1);
  const Dataset& data = synth.dataset;
  const auto objective =
      make_objective(elastic_net(8), LambdaVector(Vector::Zero(2)));
  const LambdaVector lambda0(Vector::Zero(2));

  TuneConfig batch_config;
  batch_config.max_epochs = 40;
  const auto [batch_lambda, batch_trace] =
      tune_batch(data, objective, lambda0, batch_config);
  REQUIRE(batch_trace.abort_reason.empty());
  const double target = batch_trace.final_acv_mean;

  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    TuneConfig sgd;
    sgd.max_epochs = 400;
    sgd.step_size = 0.5;
    sgd.seed = seed;
    const auto [sgd_lambda, sgd_trace] =
        tune_stochastic(data, objective, lambda0, sgd);
    REQUIRE(sgd_trace.abort_reason.empty());
    CHECK(std::abs(sgd_trace.final_acv_mean - target) <=
          0.10 * std::abs(target));
  }
}

TEST_CASE("elastic net gradient signs agree with finite differences of the "
          "estimate") {
  for (std::uint64_t seed : {std::uint64_t{1}, std::uint64_t{5}}) {
    const SynthData synth = synth_elastic(40, 8, seed);
    const Dataset& data = synth.dataset;
    const Vector lambda = Vector::Constant(2, 0.5);
    const auto objective =
        make_objective(elastic_net(8), LambdaVector(lambda));
    const FittedModel fitted = fit(data, objective);
    REQUIRE(fitted.converged);
    const Vector gbar = mean_per_sample_gradient(data, fitted, objective);

    // Oracle: refit and rerun the estimator at perturbed penalties.
    const auto acv_at = [&](const Vector& lv) {
      const auto obj = objective.with_lambda(LambdaVector(lv));
      const FittedModel f = fit(data, obj);
      return acv_vector(data, f, obj).acv_mean;
    };
    const double h = 1e-3;
    for (Index m = 0; m < 2; ++m) {
      Vector up = lambda, down = lambda;
      up[m] += h;
      down[m] -= h;
      const double fd = (acv_at(up) - acv_at(down)) / (2.0 * h);
      CHECK(gbar[m] * fd > 0.0);
    }
  }
}

TEST_CASE("tuner configuration is validated") {
  const Dataset data = one_dim_pair();
  const auto objective = uniform_ridge(1, 1.0);
  const LambdaVector lambda0(Vector::Constant(1, 1.0));

  TuneConfig bad_step;
  bad_step.step_size = 0.0;
  CHECK_THROWS_AS(tune_batch(data, objective, lambda0, bad_step),
                  ValidationError);

  TuneConfig bad_epochs;
  bad_epochs.max_epochs = -1;
  CHECK_THROWS_AS(tune_batch(data, objective, lambda0, bad_epochs),
                  ValidationError);

  TuneConfig bad_bound;
  bad_bound.lambda_lower_bound = -0.1;
  CHECK_THROWS_AS(tune_stochastic(data, objective, lambda0, bad_bound),
                  ValidationError);

  TuneConfig bad_refit;
  bad_refit.refit_every = -2;
  CHECK_THROWS_AS(tune_stochastic(data, objective, lambda0, bad_refit),
                  ValidationError);

  const LambdaVector too_long(Vector::Constant(2, 1.0));
  CHECK_THROWS_AS(tune_batch(data, objective, too_long, {}), ValidationError);
  CHECK_THROWS_AS(tune_stochastic(data, objective, too_long, {}),
                  ValidationError);
}
