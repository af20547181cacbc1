#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "aloocv/aloocv.hpp"
#include "aloocv/baselines.hpp"
#include "aloocv/data.hpp"
#include "aloocv/hessian.hpp"
#include "aloocv/models.hpp"
#include "aloocv/solver.hpp"
#include "aloocv/tuner.hpp"
#include "aloocv/types.hpp"
#include "aloocv/version.hpp"

namespace py = pybind11;

namespace {

using namespace aloocv;

HessianMode mode_from(const std::string& name) {
  if (name == "auto") return HessianMode::kAuto;
  if (name == "sherman-morrison") return HessianMode::kShermanMorrison;
  if (name == "refactorize") return HessianMode::kRefactorize;
  throw ValidationError("mode must be auto, sherman-morrison, or refactorize");
}

StepRule rule_from(const std::string& name) {
  if (name == "backtracking") return StepRule::kBacktracking;
  if (name == "fixed") return StepRule::kFixed;
  if (name == "sqrt-decay") return StepRule::kSqrtDecay;
  throw ValidationError("rule must be backtracking, fixed, or sqrt-decay");
}

SolverConfig solver_config(double tolerance, int max_iterations) {
  SolverConfig config;
  config.gradient_tolerance = tolerance;
  config.max_iterations = max_iterations;
  return config;
}

LambdaVector lambda_vector(const Vector& values) {
  return LambdaVector(values);
}

}  // namespace

PYBIND11_MODULE(_aloocv, m) {
  m.doc() = "approximate leave-one-out cross validation";
  m.attr("__version__") = kVersion;

  py::register_exception<ValidationError>(m, "ValidationError",
                                          PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError",
                                         PyExc_ArithmeticError);

  py::class_<Dataset>(m, "Dataset")
      .def(py::init<RowMatrix, Vector>(), py::arg("features"),
           py::arg("responses"))
      .def_property_readonly("n", &Dataset::n)
      .def_property_readonly("p", &Dataset::p)
      .def_property_readonly("features", &Dataset::features,
                             py::return_value_policy::copy)
      .def_property_readonly("responses", &Dataset::responses,
                             py::return_value_policy::copy)
      .def("with_response", &Dataset::with_response, py::arg("i"),
           py::arg("value"));

  py::class_<RegularizedObjective>(m, "Objective")
      .def_property_readonly("num_regularizers",
                             &RegularizedObjective::num_regularizers)
      .def_property_readonly(
          "lambda_",
          [](const RegularizedObjective& o) { return o.lambda().values(); })
      .def("with_lambda",
           [](const RegularizedObjective& o, const Vector& lambda) {
             return o.with_lambda(lambda_vector(lambda));
           },
           py::arg("lambda_"));

  m.def(
      "ridge_objective",
      [](Index p, const Vector& lambda) {
        return make_objective(ridge_diagonal(p), lambda_vector(lambda));
      },
      py::arg("p"), py::arg("lambda_"));
  m.def(
      "logistic_objective",
      [](Index p, double lambda, bool with_intercept) {
        return make_objective(logistic(p, with_intercept),
                              LambdaVector::constant(1, lambda));
      },
      py::arg("p"), py::arg("lambda_"), py::arg("with_intercept") = true);
  m.def(
      "elastic_objective",
      [](Index p, double lambda_l1, double lambda_l2) {
        Vector lambda(2);
        lambda << lambda_l1, lambda_l2;
        return make_objective(elastic_net(p), LambdaVector(lambda));
      },
      py::arg("p"), py::arg("lambda_l1"), py::arg("lambda_l2"));

  py::class_<FittedModel>(m, "FittedModel")
      .def_readonly("theta_hat", &FittedModel::theta_hat)
      .def_property_readonly(
          "lambda_",
          [](const FittedModel& f) { return f.lambda.values(); })
      .def_readonly("converged", &FittedModel::converged)
      .def_readonly("iterations", &FittedModel::iterations)
      .def_readonly("final_gradient_norm", &FittedModel::final_gradient_norm)
      .def_readonly("active_set", &FittedModel::active_set)
      .def_readonly("objective_history", &FittedModel::objective_history);

  m.def(
      "fit",
      [](const Dataset& data, const RegularizedObjective& objective,
         double tolerance, int max_iterations) {
        return fit(data, objective, solver_config(tolerance, max_iterations));
      },
      py::arg("data"), py::arg("objective"), py::arg("tolerance") = 1e-10,
      py::arg("max_iterations") = 100);

  py::class_<LooRefit>(m, "LooRefit")
      .def_readonly("index", &LooRefit::index)
      .def_readonly("theta", &LooRefit::theta)
      .def_readonly("cv", &LooRefit::cv)
      .def_readonly("converged", &LooRefit::converged);

  py::class_<LoocvResult>(m, "LoocvResult")
      .def_readonly("refits", &LoocvResult::refits)
      .def_readonly("cv_mean", &LoocvResult::cv_mean)
      .def_readonly("cv_std_error", &LoocvResult::cv_std_error)
      .def("all_converged", &LoocvResult::all_converged);

  m.def(
      "loocv_exact",
      [](const Dataset& data, const RegularizedObjective& objective,
         double tolerance, int max_iterations, int threads) {
        return loocv_exact(data, objective,
                           solver_config(tolerance, max_iterations), threads);
      },
      py::arg("data"), py::arg("objective"), py::arg("tolerance") = 1e-10,
      py::arg("max_iterations") = 100, py::arg("threads") = 1);

  m.def(
      "aloocv_parameter",
      [](const Dataset& data, const FittedModel& fitted,
         const RegularizedObjective& objective, Index i,
         const std::string& mode) {
        return aloocv_parameter(data, fitted, objective, i, mode_from(mode));
      },
      py::arg("data"), py::arg("fitted"), py::arg("objective"), py::arg("i"),
      py::arg("mode") = "auto");

  m.def(
      "aloocv_parameter_q",
      [](const Dataset& data, const FittedModel& fitted,
         const RegularizedObjective& objective,
         const std::vector<Index>& left_out, const std::string& mode) {
        return aloocv_parameter_q(data, fitted, objective, left_out,
                                  mode_from(mode));
      },
      py::arg("data"), py::arg("fitted"), py::arg("objective"),
      py::arg("left_out"), py::arg("mode") = "auto");

  py::class_<LooEstimate>(m, "LooEstimate")
      .def_readonly("index", &LooEstimate::index)
      .def_readonly("theta_tilde", &LooEstimate::theta_tilde)
      .def_readonly("acv", &LooEstimate::acv)
      .def_readonly("cv_exact", &LooEstimate::cv_exact)
      .def_readonly("if_baseline", &LooEstimate::if_baseline)
      .def_readonly("valid", &LooEstimate::valid)
      .def_readonly("error", &LooEstimate::error)
      .def_readonly("support_violation", &LooEstimate::support_violation);

  py::class_<AcvReport>(m, "AcvReport")
      .def_readonly("estimates", &AcvReport::estimates)
      .def_readonly("acv_mean", &AcvReport::acv_mean)
      .def_readonly("acv_std_error", &AcvReport::acv_std_error)
      .def_readonly("failed_count", &AcvReport::failed_count)
      .def_readonly("support_violations", &AcvReport::support_violations)
      .def_readonly("wall_seconds", &AcvReport::wall_seconds)
      .def_readonly("cv_mean", &AcvReport::cv_mean)
      .def_readonly("cv_std_error", &AcvReport::cv_std_error)
      .def_readonly("if_mean", &AcvReport::if_mean)
      .def_readonly("if_std_error", &AcvReport::if_std_error);

  m.def(
      "acv_vector",
      [](const Dataset& data, const FittedModel& fitted,
         const RegularizedObjective& objective, bool with_exact, bool with_if,
         double tolerance, int max_iterations, const std::string& mode,
         int threads) {
        return acv_vector(data, fitted, objective, with_exact, with_if,
                          solver_config(tolerance, max_iterations),
                          mode_from(mode), threads);
      },
      py::arg("data"), py::arg("fitted"), py::arg("objective"),
      py::arg("with_exact") = false, py::arg("with_if") = false,
      py::arg("tolerance") = 1e-10, py::arg("max_iterations") = 100,
      py::arg("mode") = "auto", py::arg("threads") = 1);

  m.def(
      "influence_baseline",
      [](const Dataset& data, const FittedModel& fitted,
         const RegularizedObjective& objective, Index i,
         const std::string& mode) {
        return influence_baseline(data, fitted, objective, i, mode_from(mode));
      },
      py::arg("data"), py::arg("fitted"), py::arg("objective"), py::arg("i"),
      py::arg("mode") = "auto");

  m.def("lambda_gradient_full", &lambda_gradient_full, py::arg("data"),
        py::arg("fitted"), py::arg("objective"));

  m.def(
      "per_sample_gradient",
      [](const Dataset& data, const FittedModel& fitted,
         const RegularizedObjective& objective, Index i, bool fast_mode,
         const std::string& mode) {
        return per_sample_gradient(data, fitted, objective, i, fast_mode,
                                   mode_from(mode));
      },
      py::arg("data"), py::arg("fitted"), py::arg("objective"), py::arg("i"),
      py::arg("fast_mode") = false, py::arg("mode") = "auto");

  m.def(
      "empirical_hessian",
      [](const Dataset& data, const Vector& theta,
         const RegularizedObjective& objective, std::optional<Index> exclude) {
        return empirical_hessian(data, exclude, theta, objective);
      },
      py::arg("data"), py::arg("theta"), py::arg("objective"),
      py::arg("exclude") = std::nullopt);

  py::class_<TuneRecord>(m, "TuneRecord")
      .def_readonly("t", &TuneRecord::t)
      .def_readonly("lambda_", &TuneRecord::lambda)
      .def_readonly("acv_mean", &TuneRecord::acv_mean)
      .def_readonly("grad_inf_norm", &TuneRecord::grad_inf_norm)
      .def_readonly("refit_iterations", &TuneRecord::refit_iterations)
      .def_readonly("wall_seconds", &TuneRecord::wall_seconds);

  py::class_<TuneTrace>(m, "TuneTrace")
      .def_readonly("records", &TuneTrace::records)
      .def_readonly("final_lambda", &TuneTrace::final_lambda)
      .def_readonly("final_acv_mean", &TuneTrace::final_acv_mean)
      .def_readonly("final_theta", &TuneTrace::final_theta)
      .def_readonly("abort_reason", &TuneTrace::abort_reason);

  auto tune_config = [](const std::string& rule, double step_size, int epochs,
                        double lower_bound, double stop_tolerance,
                        std::uint64_t seed, int refit_every, bool fast_mode,
                        double tolerance, int max_iterations,
                        const std::string& mode, int threads) {
    TuneConfig config;
    config.step_rule = rule_from(rule);
    config.step_size = step_size;
    config.max_epochs = epochs;
    config.lambda_lower_bound = lower_bound;
    config.gradient_stop_tolerance = stop_tolerance;
    config.seed = seed;
    config.refit_every = refit_every;
    config.fast_mode = fast_mode;
    config.solver = solver_config(tolerance, max_iterations);
    config.hessian_mode = mode_from(mode);
    config.threads = threads;
    return config;
  };

  m.def(
      "tune_batch",
      [tune_config](const Dataset& data, const RegularizedObjective& objective,
                    const Vector& lambda0, const std::string& rule,
                    double step_size, int epochs, double lower_bound,
                    double stop_tolerance, std::uint64_t seed, int refit_every,
                    bool fast_mode, double tolerance, int max_iterations,
                    const std::string& mode, int threads) {
        auto [lambda, trace] = tune_batch(
            data, objective, lambda_vector(lambda0),
            tune_config(rule, step_size, epochs, lower_bound, stop_tolerance,
                        seed, refit_every, fast_mode, tolerance,
                        max_iterations, mode, threads));
        return std::make_pair(lambda.values(), std::move(trace));
      },
      py::arg("data"), py::arg("objective"), py::arg("lambda0"),
      py::arg("rule") = "backtracking", py::arg("step_size") = 1.0,
      py::arg("epochs") = 100, py::arg("lower_bound") = 0.0,
      py::arg("stop_tolerance") = 0.0, py::arg("seed") = 0,
      py::arg("refit_every") = 0, py::arg("fast_mode") = false,
      py::arg("tolerance") = 1e-10, py::arg("max_iterations") = 100,
      py::arg("mode") = "auto", py::arg("threads") = 1);

  m.def(
      "tune_stochastic",
      [tune_config](const Dataset& data, const RegularizedObjective& objective,
                    const Vector& lambda0, const std::string& rule,
                    double step_size, int epochs, double lower_bound,
                    double stop_tolerance, std::uint64_t seed, int refit_every,
                    bool fast_mode, double tolerance, int max_iterations,
                    const std::string& mode, int threads) {
        auto [lambda, trace] = tune_stochastic(
            data, objective, lambda_vector(lambda0),
            tune_config(rule, step_size, epochs, lower_bound, stop_tolerance,
                        seed, refit_every, fast_mode, tolerance,
                        max_iterations, mode, threads));
        return std::make_pair(lambda.values(), std::move(trace));
      },
      py::arg("data"), py::arg("objective"), py::arg("lambda0"),
      py::arg("rule") = "sqrt-decay", py::arg("step_size") = 1.0,
      py::arg("epochs") = 100, py::arg("lower_bound") = 0.0,
      py::arg("stop_tolerance") = 0.0, py::arg("seed") = 0,
      py::arg("refit_every") = 0, py::arg("fast_mode") = false,
      py::arg("tolerance") = 1e-10, py::arg("max_iterations") = 100,
      py::arg("mode") = "auto", py::arg("threads") = 1);

  py::class_<ProbeRow>(m, "ProbeRow")
      .def_readonly("n", &ProbeRow::n)
      .def_readonly("refit_gap", &ProbeRow::refit_gap)
      .def_readonly("acv_gap", &ProbeRow::acv_gap);

  m.def(
      "error_scaling_probe",
      [](const std::string& family, const std::vector<Index>& n_grid,
         std::uint64_t seed, Index p, double lambda, int threads) {
        ProbeOptions options;
        options.p = p;
        options.lambda = lambda;
        options.threads = threads;
        ProbeFamily f;
        if (family == "ridge") {
          f = ProbeFamily::kRidge;
        } else if (family == "logistic") {
          f = ProbeFamily::kLogistic;
        } else {
          throw ValidationError("family must be ridge or logistic");
        }
        return error_scaling_probe(f, n_grid, seed, options);
      },
      py::arg("family"), py::arg("n_grid"), py::arg("seed"), py::arg("p") = 10,
      py::arg("lambda_") = 1.0, py::arg("threads") = 1);

  auto synth_pair = [](SynthData synth) {
    return std::make_pair(std::move(synth.dataset), std::move(synth.theta_star));
  };
  m.def(
      "synth_ridge",
      [synth_pair](Index n, Index p, Index n_relevant, double noise_var,
                   std::uint64_t seed) {
        return synth_pair(synth_ridge(n, p, n_relevant, noise_var, seed));
      },
      py::arg("n"), py::arg("p"), py::arg("n_relevant"), py::arg("noise_var"),
      py::arg("seed"));
  m.def(
      "synth_elastic",
      [synth_pair](Index n, Index p, std::uint64_t seed, double noise_var) {
        return synth_pair(synth_elastic(n, p, seed, noise_var));
      },
      py::arg("n"), py::arg("p"), py::arg("seed"),
      py::arg("noise_var") = 0.1);
  m.def(
      "synth_logistic",
      [synth_pair](Index n, Index p, std::uint64_t seed) {
        return synth_pair(synth_logistic(n, p, seed));
      },
      py::arg("n"), py::arg("p"), py::arg("seed"));

  m.def("load_csv", &load_csv, py::arg("path"), py::arg("label_column"),
        py::arg("binarize") = std::nullopt);
  m.def("save_csv", &save_csv, py::arg("data"), py::arg("path"),
        py::arg("label_column") = "y");
}
