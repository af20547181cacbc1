#include "aloocv/tuner.hpp"

#include <chrono>
#include <cmath>
#include <utility>
#include <vector>

#include "aloocv/data.hpp"
#include "aloocv/parallel.hpp"
#include "loo_engine.hpp"

namespace aloocv {

namespace {

Vector project(Vector lambda, double lower_bound) {
  return lambda.cwiseMax(lower_bound);
}

void check_config(const TuneConfig& config) {
  if (config.step_size <= 0.0) {
    throw ValidationError("tuner: step_size must be positive");
  }
  if (config.max_epochs < 0) {
    throw ValidationError("tuner: max_epochs must be nonnegative");
  }
  if (config.lambda_lower_bound < 0.0) {
    throw ValidationError("tuner: lambda_lower_bound must be nonnegative");
  }
  if (config.max_backtracks < 0) {
    throw ValidationError("tuner: max_backtracks must be nonnegative");
  }
  if (config.refit_every < 0) {
    throw ValidationError("tuner: refit_every must be nonnegative");
  }
}

Vector per_sample_gradient_impl(const Dataset& data,
                                const RegularizedObjective& objective,
                                const internal::LooEngine& engine, Index i,
                                bool fast_mode) {
  const LossModel& loss = objective.loss_model();
  const Vector& theta_hat = engine.theta();
  const Vector g_hat = loss.grad(data[i], theta_hat);

  Vector eval_point;
  Vector delta;  // A_i^{-1} grad l_i at the evaluation point, restricted
  if (fast_mode) {
    eval_point = theta_hat;
    delta = engine.solve(i, engine.restrict(g_hat));
  } else {
    const Vector step = engine.solve(i, engine.restrict(g_hat));
    eval_point = theta_hat + engine.embed(step);
    const Vector b = engine.restrict(loss.grad(data[i], eval_point));
    // Quadratic losses keep the same Hessian at the shifted point, so
    // the factored full-data system can be reused.
    delta = loss.hess_is_constant()
                ? engine.solve(i, b)
                : engine.solve_downdated_at(eval_point, i, b);
  }

  const Matrix r = objective.regularizer_gradients(eval_point);
  Vector g_lambda(objective.num_regularizers());
  for (Index m = 0; m < objective.num_regularizers(); ++m) {
    g_lambda[m] = -engine.restrict(r.col(m)).dot(delta);
  }
  return g_lambda;
}

struct EvalState {
  RegularizedObjective objective;
  FittedModel fitted;
  double acv_mean = 0.0;
};

double acv_mean_of(const Dataset& data, const RegularizedObjective& objective,
                   const FittedModel& fitted, HessianMode mode, int threads) {
  internal::LooEngine engine(data, objective, fitted.theta_hat, mode,
                             internal::active_set_for(fitted, objective));
  const LossModel& loss = objective.loss_model();
  const Index n = data.n();
  std::vector<double> acv(n);
  std::vector<char> valid(n, 1);
  parallel_for(n, threads, [&](Index i) {
    try {
      const Vector g = loss.grad(data[i], fitted.theta_hat);
      const Vector delta = engine.solve(i, engine.restrict(g));
      acv[i] =
          loss.loss(data[i], fitted.theta_hat + engine.embed(delta));
    } catch (const NumericalError&) {
      valid[i] = 0;
    }
  });
  double sum = 0.0;
  Index count = 0;
  for (Index i = 0; i < n; ++i) {
    if (valid[i]) {
      sum += acv[i];
      ++count;
    }
  }
  if (count == 0) {
    throw NumericalError("tuner: no leave-one-out estimate is defined");
  }
  return sum / static_cast<double>(count);
}

EvalState evaluate(const Dataset& data, const RegularizedObjective& base,
                   const Vector& lambda, const std::optional<Vector>& warm,
                   const TuneConfig& config) {
  RegularizedObjective objective = base.with_lambda(LambdaVector(lambda));
  FittedModel fitted =
      fit(data, objective, config.solver, std::nullopt, warm);
  const double acv = acv_mean_of(data, objective, fitted, config.hessian_mode,
                                 config.threads);
  return EvalState{std::move(objective), std::move(fitted), acv};
}

// Mean per-sample lambda gradient at the state's minimizer.
Vector mean_gradient(const Dataset& data, const EvalState& state,
                     const TuneConfig& config) {
  internal::LooEngine engine(
      data, state.objective, state.fitted.theta_hat, config.hessian_mode,
      internal::active_set_for(state.fitted, state.objective));
  const Index n = data.n();
  const Index m = state.objective.num_regularizers();
  Matrix per_sample(m, n);
  std::vector<char> valid(n, 1);
  parallel_for(n, config.threads, [&](Index i) {
    try {
      per_sample.col(i) = per_sample_gradient_impl(data, state.objective,
                                                   engine, i, config.fast_mode);
    } catch (const NumericalError&) {
      valid[i] = 0;
    }
  });
  Vector sum = Vector::Zero(m);
  Index count = 0;
  for (Index i = 0; i < n; ++i) {
    if (valid[i]) {
      sum += per_sample.col(i);
      ++count;
    }
  }
  if (count == 0) {
    throw NumericalError("tuner: no per-sample gradient is defined");
  }
  return sum / static_cast<double>(count);
}

double acv_slack(double acv) { return 1e-12 * (1.0 + std::abs(acv)); }

}  // namespace

Matrix lambda_gradient_full(const Dataset& data, const FittedModel& fitted,
                            const RegularizedObjective& objective) {
  internal::check_fitted_matches(data, fitted, objective,
                                 "lambda_gradient_full");
  internal::LooEngine engine(data, objective, fitted.theta_hat,
                             HessianMode::kAuto,
                             internal::active_set_for(fitted, objective));
  const Matrix r = objective.regularizer_gradients(fitted.theta_hat);
  Matrix result =
      Matrix::Zero(fitted.theta_hat.size(), objective.num_regularizers());
  for (Index m = 0; m < objective.num_regularizers(); ++m) {
    const Vector col = engine.solve_full(engine.restrict(r.col(m)));
    result.col(m) = -engine.embed(col);
  }
  return result;
}

Vector per_sample_gradient(const Dataset& data, const FittedModel& fitted,
                           const RegularizedObjective& objective, Index i,
                           bool fast_mode, HessianMode mode) {
  internal::check_fitted_matches(data, fitted, objective,
                                 "per_sample_gradient");
  if (i < 0 || i >= data.n()) {
    throw ValidationError("per_sample_gradient: index out of range");
  }
  internal::LooEngine engine(data, objective, fitted.theta_hat, mode,
                             internal::active_set_for(fitted, objective));
  return per_sample_gradient_impl(data, objective, engine, i, fast_mode);
}

std::pair<LambdaVector, TuneTrace> tune_batch(
    const Dataset& data, const RegularizedObjective& objective,
    const LambdaVector& lambda0, const TuneConfig& config) {
  check_config(config);
  if (lambda0.size() != objective.num_regularizers()) {
    throw ValidationError("tune_batch: lambda0 length mismatch");
  }
  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&t0] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
        .count();
  };

  Vector lambda = project(lambda0.values(), config.lambda_lower_bound);
  EvalState state = evaluate(data, objective, lambda, std::nullopt, config);
  Vector gbar = mean_gradient(data, state, config);

  TuneTrace trace;
  auto push_record = [&](int t) {
    trace.records.push_back(TuneRecord{t, lambda, state.acv_mean,
                                       gbar.lpNorm<Eigen::Infinity>(),
                                       state.fitted.iterations, elapsed()});
  };

  if (config.max_epochs == 0) push_record(0);

  for (int t = 0; t < config.max_epochs; ++t) {
    push_record(t);
    if (config.gradient_stop_tolerance > 0.0 &&
        gbar.lpNorm<Eigen::Infinity>() <= config.gradient_stop_tolerance) {
      break;
    }

    try {
      bool moved = false;
      if (config.step_rule == StepRule::kBacktracking) {
        double alpha = config.step_size;
        for (int bt = 0; bt <= config.max_backtracks; ++bt) {
          const Vector candidate =
              project(lambda - alpha * gbar, config.lambda_lower_bound);
          if ((candidate.array() == lambda.array()).all()) break;
          EvalState trial = evaluate(data, objective, candidate,
                                     state.fitted.theta_hat, config);
          if (trial.acv_mean <= state.acv_mean + acv_slack(state.acv_mean)) {
            lambda = candidate;
            state = std::move(trial);
            moved = true;
            break;
          }
          alpha *= 0.5;
        }
      } else {
        const double alpha = config.step_rule == StepRule::kSqrtDecay
                                 ? config.step_size / std::sqrt(1.0 + t)
                                 : config.step_size;
        const Vector candidate =
            project(lambda - alpha * gbar, config.lambda_lower_bound);
        if (!(candidate.array() == lambda.array()).all()) {
          lambda = candidate;
          state = evaluate(data, objective, lambda, state.fitted.theta_hat,
                           config);
          moved = true;
        }
      }
      if (!moved) break;  // no acceptable step from here
      gbar = mean_gradient(data, state, config);
    } catch (const NumericalError& e) {
      // Keep the partial trace; final_* report the last usable iterate.
      trace.abort_reason = e.what();
      break;
    }
  }

  trace.final_lambda = lambda;
  trace.final_acv_mean = state.acv_mean;
  trace.final_theta = state.fitted.theta_hat;
  return {LambdaVector(lambda), std::move(trace)};
}

std::pair<LambdaVector, TuneTrace> tune_stochastic(
    const Dataset& data, const RegularizedObjective& objective,
    const LambdaVector& lambda0, const TuneConfig& config) {
  check_config(config);
  if (lambda0.size() != objective.num_regularizers()) {
    throw ValidationError("tune_stochastic: lambda0 length mismatch");
  }
  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&t0] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
        .count();
  };
  const int refit_every =
      config.refit_every > 0
          ? config.refit_every
          : static_cast<int>(std::max<Index>(1, data.n() / 10));

  Vector lambda = project(lambda0.values(), config.lambda_lower_bound);
  EvalState state = evaluate(data, objective, lambda, std::nullopt, config);
  std::optional<internal::LooEngine> engine;
  auto rebuild_engine = [&] {
    engine.emplace(data, state.objective, state.fitted.theta_hat,
                   config.hessian_mode,
                   internal::active_set_for(state.fitted, state.objective));
  };
  rebuild_engine();

  Rng rng(config.seed);
  TuneTrace trace;
  for (int t = 0; t < config.max_epochs; ++t) {
    try {
      int refit_iterations = t == 0 ? state.fitted.iterations : 0;
      if (t > 0 && t % refit_every == 0) {
        state = evaluate(data, objective, lambda, state.fitted.theta_hat,
                         config);
        rebuild_engine();
        refit_iterations = state.fitted.iterations;
      }

      const Index i = static_cast<Index>(
          rng.uniform_int(static_cast<std::uint64_t>(data.n())));
      const Vector g = per_sample_gradient_impl(data, state.objective, *engine,
                                                i, config.fast_mode);
      trace.records.push_back(TuneRecord{t, lambda, state.acv_mean,
                                         g.lpNorm<Eigen::Infinity>(),
                                         refit_iterations, elapsed()});
      if (config.gradient_stop_tolerance > 0.0 &&
          g.lpNorm<Eigen::Infinity>() <= config.gradient_stop_tolerance) {
        break;
      }

      // A backtracking rule would need a full objective pass per trial
      // step, which defeats single-sample updates; decay instead.
      const double alpha = config.step_rule == StepRule::kFixed
                               ? config.step_size
                               : config.step_size / std::sqrt(1.0 + t);
      lambda = project(lambda - alpha * g, config.lambda_lower_bound);
    } catch (const NumericalError& e) {
      trace.abort_reason = e.what();
      break;
    }
  }

  if (config.max_epochs == 0) {
    trace.records.push_back(TuneRecord{0, lambda, state.acv_mean, 0.0,
                                       state.fitted.iterations, elapsed()});
  }

  // Refit so the reported state matches the returned lambda.
  try {
    state = evaluate(data, objective, lambda, state.fitted.theta_hat, config);
  } catch (const NumericalError& e) {
    if (trace.abort_reason.empty()) trace.abort_reason = e.what();
  }
  trace.final_lambda = lambda;
  trace.final_acv_mean = state.acv_mean;
  trace.final_theta = state.fitted.theta_hat;
  return {LambdaVector(lambda), std::move(trace)};
}

}  // namespace aloocv
