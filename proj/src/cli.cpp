#include "aloocv/cli.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "aloocv/aloocv.hpp"
#include "aloocv/baselines.hpp"
#include "aloocv/data.hpp"
#include "aloocv/models.hpp"
#include "aloocv/solver.hpp"
#include "aloocv/tuner.hpp"
#include "aloocv/types.hpp"
#include "aloocv/version.hpp"

namespace aloocv {

namespace {

using nlohmann::json;

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  char buffer[17];
  std::snprintf(buffer, sizeof(buffer), "%016llx",
                static_cast<unsigned long long>(value));
  return buffer;
}

std::string format_double(double v) {
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%.17g", v);
  return buffer;
}

json default_config() {
  json cfg;
  cfg["dataset"] = {
      {"source", "synth"},
      {"family", ""},  // empty: follow the model family
      {"n", 150},
      {"p", 50},
      {"n_relevant", 10},
      {"noise_var", 0.1},
      {"seed", 1},
      {"path", ""},
      {"label_column", "y"},
      {"binarize", nullptr},
      {"holdout_fraction", 0.0},
      {"n_grid", {200, 400, 800, 1600}},
  };
  cfg["model"] = {
      {"family", "ridge"},
      {"lambda", 1.0},
      {"with_intercept", true},
  };
  cfg["solver"] = {
      {"gradient_tolerance", 1e-10},
      {"max_iterations", 100},
  };
  cfg["estimator"] = {
      {"mode", "auto"},
      {"no_exact", false},
      {"with_if", true},
      {"sweep", {3.3333, 1.6667, 0.8333, 0.4167, 0.2083, 0.1042, 0.0521}},
  };
  cfg["tuner"] = {
      {"rule", "backtracking"},
      {"step_size", 1.0},
      {"epochs", 100},
      {"lambda0", 1.0 / 3.0},
      {"lower_bound", 0.0},
      {"stochastic", false},
      {"seed", 0},
      {"refit_every", 0},
      {"fast", false},
      {"stop_tolerance", 0.0},
      {"max_backtracks", 30},
  };
  return cfg;
}

void merge_config_file(json& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("config: cannot open '" + path + "'");
  json file;
  try {
    in >> file;
  } catch (const json::exception& e) {
    throw ValidationError("config: '" + path + "' is not valid JSON: " +
                          e.what());
  }
  if (!file.is_object()) {
    throw ValidationError("config: top level must be an object");
  }
  for (const auto& [section, body] : file.items()) {
    if (!cfg.contains(section)) {
      throw ValidationError("config: unknown section '" + section + "'");
    }
    if (!body.is_object()) {
      throw ValidationError("config: section '" + section +
                            "' must be an object");
    }
    for (const auto& [key, value] : body.items()) {
      if (!cfg[section].contains(key)) {
        throw ValidationError("config: unknown key '" + section + "." + key +
                              "'");
      }
      cfg[section][key] = value;
    }
  }
}

// Everything a subcommand may override on the command line. Values are
// applied on top of defaults and the config file.
struct Overrides {
  std::optional<std::string> config_path, output, per_sample, trace, table,
      data_out;
  std::optional<std::int64_t> n, p, n_relevant;
  std::optional<int> threads, max_iterations, epochs, refit_every;
  std::optional<std::uint64_t> seed, tuner_seed;
  std::optional<double> lambda, tolerance, holdout, noise_var, step_size,
      lambda0, lower_bound, stop_tolerance;
  std::optional<std::string> model_family, dataset_family, source, mode, rule,
      csv_path, label_column;
  std::optional<std::vector<double>> sweep;
  std::optional<std::vector<std::int64_t>> n_grid;
  std::optional<std::vector<std::string>> binarize;
  int no_exact = 0, stochastic = 0, batch = 0, fast = 0, no_if = 0;
};

void apply_overrides(json& cfg, const Overrides& o) {
  auto set = [&cfg](const char* section, const char* key, const auto& opt) {
    if (opt) cfg[section][key] = *opt;
  };
  set("dataset", "n", o.n);
  set("dataset", "p", o.p);
  set("dataset", "n_relevant", o.n_relevant);
  set("dataset", "seed", o.seed);
  set("dataset", "noise_var", o.noise_var);
  set("dataset", "family", o.dataset_family);
  set("dataset", "source", o.source);
  set("dataset", "path", o.csv_path);
  set("dataset", "label_column", o.label_column);
  set("dataset", "holdout_fraction", o.holdout);
  set("dataset", "n_grid", o.n_grid);
  set("dataset", "binarize", o.binarize);
  set("model", "family", o.model_family);
  set("model", "lambda", o.lambda);
  set("solver", "gradient_tolerance", o.tolerance);
  set("solver", "max_iterations", o.max_iterations);
  set("estimator", "mode", o.mode);
  set("estimator", "sweep", o.sweep);
  if (o.no_exact > 0) cfg["estimator"]["no_exact"] = true;
  if (o.no_if > 0) cfg["estimator"]["with_if"] = false;
  set("tuner", "rule", o.rule);
  set("tuner", "step_size", o.step_size);
  set("tuner", "epochs", o.epochs);
  set("tuner", "lambda0", o.lambda0);
  set("tuner", "lower_bound", o.lower_bound);
  set("tuner", "seed", o.tuner_seed);
  set("tuner", "refit_every", o.refit_every);
  set("tuner", "stop_tolerance", o.stop_tolerance);
  if (o.stochastic > 0) cfg["tuner"]["stochastic"] = true;
  if (o.batch > 0) cfg["tuner"]["stochastic"] = false;
  if (o.fast > 0) cfg["tuner"]["fast"] = true;
}

int resolve_threads(const std::optional<int>& flag) {
  if (flag) {
    if (*flag < 0) throw ValidationError("threads must be nonnegative");
    return *flag;
  }
  if (const char* env = std::getenv("ALOOCV_THREADS")) {
    int value = 0;
    const std::string_view text(env);
    const auto [ptr, ec] =
        std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size() || value < 0) {
      throw ValidationError(
          "ALOOCV_THREADS must be a nonnegative integer, got '" +
          std::string(env) + "'");
    }
    return value;
  }
  return 1;
}

HessianMode parse_mode(const std::string& name) {
  if (name == "auto") return HessianMode::kAuto;
  if (name == "sherman-morrison") return HessianMode::kShermanMorrison;
  if (name == "refactorize") return HessianMode::kRefactorize;
  throw ValidationError("estimator.mode must be auto, sherman-morrison, or "
                        "refactorize, got '" +
                        name + "'");
}

StepRule parse_rule(const std::string& name) {
  if (name == "backtracking") return StepRule::kBacktracking;
  if (name == "fixed") return StepRule::kFixed;
  if (name == "sqrt-decay") return StepRule::kSqrtDecay;
  throw ValidationError(
      "tuner.rule must be backtracking, fixed, or sqrt-decay, got '" + name +
      "'");
}

SolverConfig solver_from(const json& cfg) {
  SolverConfig solver;
  solver.gradient_tolerance = cfg["solver"]["gradient_tolerance"].get<double>();
  solver.max_iterations = cfg["solver"]["max_iterations"].get<int>();
  return solver;
}

// Rejects negative weights before any dataset is built or model fit.
void check_lambda_entries(const json& value, const std::string& what) {
  if (value.is_number()) {
    if (value.get<double>() < 0.0) {
      throw ValidationError(what + " must be nonnegative");
    }
    return;
  }
  if (value.is_array()) {
    for (const auto& v : value) {
      if (!v.is_number() || v.get<double>() < 0.0) {
        throw ValidationError(what + " entries must be nonnegative numbers");
      }
    }
    return;
  }
  throw ValidationError(what + " must be a number or an array of numbers");
}

LambdaVector lambda_from(const json& value, Index m, const std::string& what) {
  if (value.is_number()) return LambdaVector::constant(m, value.get<double>());
  if (value.is_array()) {
    if (static_cast<Index>(value.size()) != m) {
      throw ValidationError(what + " has " + std::to_string(value.size()) +
                            " entries, model has " + std::to_string(m) +
                            " regularizers");
    }
    Vector values(m);
    for (Index i = 0; i < m; ++i) values[i] = value[i].get<double>();
    return LambdaVector(std::move(values));
  }
  throw ValidationError(what + " must be a number or an array of numbers");
}

std::string dataset_family(const json& cfg) {
  const std::string family = cfg["dataset"]["family"].get<std::string>();
  if (!family.empty()) return family;
  return cfg["model"]["family"].get<std::string>();
}

struct BuiltData {
  Dataset train;
  std::optional<std::pair<RowMatrix, Vector>> holdout;
  std::optional<Vector> theta_star;
  std::uint64_t seed = 0;
};

SynthData make_synth(const std::string& family, const json& d,
                     std::uint64_t seed) {
  const Index n = d["n"].get<Index>();
  const Index p = d["p"].get<Index>();
  if (family == "ridge") {
    return synth_ridge(n, p, d["n_relevant"].get<Index>(),
                       d["noise_var"].get<double>(), seed);
  }
  if (family == "elastic") {
    return synth_elastic(n, p, seed, d["noise_var"].get<double>());
  }
  if (family == "logistic") {
    return synth_logistic(n, p, seed);
  }
  throw ValidationError(
      "dataset.family must be ridge, elastic, or logistic, got '" + family +
      "'");
}

BuiltData build_dataset(const json& cfg) {
  const json& d = cfg["dataset"];
  const std::string source = d["source"].get<std::string>();
  const std::uint64_t seed = d["seed"].get<std::uint64_t>();

  std::optional<Dataset> full;
  std::optional<Vector> theta_star;
  if (source == "synth") {
    SynthData synth = make_synth(dataset_family(cfg), d, seed);
    theta_star = std::move(synth.theta_star);
    full = std::move(synth.dataset);
  } else if (source == "csv") {
    const std::string path = d["path"].get<std::string>();
    if (path.empty()) {
      throw ValidationError("dataset.path is required for the csv source");
    }
    std::optional<std::pair<std::string, std::string>> binarize;
    if (!d["binarize"].is_null()) {
      if (!d["binarize"].is_array() || d["binarize"].size() != 2) {
        throw ValidationError(
            "dataset.binarize must be a two-element array of label values");
      }
      binarize = {d["binarize"][0].get<std::string>(),
                  d["binarize"][1].get<std::string>()};
    }
    full = load_csv(path, d["label_column"].get<std::string>(), binarize);
  } else {
    throw ValidationError("dataset.source must be synth or csv, got '" +
                          source + "'");
  }

  const double fraction = d["holdout_fraction"].get<double>();
  if (fraction < 0.0 || fraction >= 1.0) {
    throw ValidationError("dataset.holdout_fraction must be in [0, 1)");
  }
  const Index n = full->n();
  const Index n_hold =
      static_cast<Index>(std::floor(fraction * static_cast<double>(n)));
  if (n_hold == 0) {
    return BuiltData{std::move(*full), std::nullopt, std::move(theta_star),
                     seed};
  }
  const Index n_train = n - n_hold;
  RowMatrix train_x = full->features().topRows(n_train);
  Vector train_y = full->responses().head(n_train);
  RowMatrix hold_x = full->features().bottomRows(n_hold);
  Vector hold_y = full->responses().tail(n_hold);
  return BuiltData{Dataset(std::move(train_x), std::move(train_y)),
                   std::make_pair(std::move(hold_x), std::move(hold_y)),
                   std::move(theta_star), seed};
}

ModelSpec model_from(const json& cfg, Index p) {
  const std::string family = cfg["model"]["family"].get<std::string>();
  if (family == "ridge") return ridge_diagonal(p);
  if (family == "logistic") {
    return logistic(p, cfg["model"]["with_intercept"].get<bool>());
  }
  if (family == "elastic") return elastic_net(p);
  throw ValidationError(
      "model.family must be ridge, logistic, or elastic, got '" + family +
      "'");
}

double mean_sample_loss(const LossModel& loss, const Dataset& data,
                        const Vector& theta) {
  double sum = 0.0;
  for (Index i = 0; i < data.n(); ++i) sum += loss.loss(data[i], theta);
  return sum / static_cast<double>(data.n());
}

double mean_holdout_loss(const LossModel& loss,
                         const std::pair<RowMatrix, Vector>& holdout,
                         const Vector& theta) {
  const RowMatrix& x = holdout.first;
  double sum = 0.0;
  for (Index i = 0; i < x.rows(); ++i) {
    const SampleRef z{Eigen::Map<const Vector>(x.row(i).data(), x.cols()),
                      holdout.second[i]};
    sum += loss.loss(z, theta);
  }
  return sum / static_cast<double>(x.rows());
}

json vector_to_json(const Vector& v) {
  json arr = json::array();
  for (Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

json report_envelope(const char* command, const json& cfg) {
  json report;
  report["command"] = command;
  report["version"] = kVersion;
  report["config"] = cfg;
  report["config_hash"] = hex64(fnv1a(cfg.dump()));
  report["seed"] = cfg["dataset"]["seed"].get<std::uint64_t>();
  return report;
}

// Least-squares slope of log(y) against log(x).
double loglog_slope(const std::vector<double>& x,
                    const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double lx = std::log(x[i]);
    const double ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

json run_fit(const json& cfg, int threads) {
  (void)threads;  // fitting is a single solve
  check_lambda_entries(cfg["model"]["lambda"], "model.lambda");
  BuiltData built = build_dataset(cfg);
  const ModelSpec spec = model_from(cfg, built.train.p());
  const Index m = static_cast<Index>(spec.regularizers.size());
  const RegularizedObjective objective = make_objective(
      spec, lambda_from(cfg["model"]["lambda"], m, "model.lambda"));
  const SolverConfig solver = solver_from(cfg);

  const FittedModel fitted = fit(built.train, objective, solver);

  json report = report_envelope("fit", cfg);
  json f;
  f["theta_hat"] = vector_to_json(fitted.theta_hat);
  f["converged"] = fitted.converged;
  f["iterations"] = fitted.iterations;
  f["final_gradient_norm"] = fitted.final_gradient_norm;
  f["objective_value"] =
      objective.total_value(built.train, fitted.theta_hat);
  f["in_sample_loss"] =
      mean_sample_loss(objective.loss_model(), built.train, fitted.theta_hat);
  if (fitted.active_set) f["active_set"] = *fitted.active_set;
  if (built.holdout) {
    f["out_of_sample_loss"] = mean_holdout_loss(
        objective.loss_model(), *built.holdout, fitted.theta_hat);
  }
  report["fit"] = std::move(f);
  return report;
}

void write_per_sample_csv(const std::string& path,
                          const std::vector<std::pair<double, AcvReport>>&
                              sweep_reports) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open '" + path + "' for write");
  out << "lambda,index,acv,cv,if_est,normalized_diff,valid,"
         "support_violation\n";
  for (const auto& [lambda, report] : sweep_reports) {
    for (const LooEstimate& e : report.estimates) {
      out << format_double(lambda) << ',' << e.index << ',';
      if (e.valid) out << format_double(e.acv);
      out << ',';
      if (e.cv_exact) out << format_double(*e.cv_exact);
      out << ',';
      if (e.if_baseline) out << format_double(*e.if_baseline);
      out << ',';
      if (e.valid && e.cv_exact && *e.cv_exact != 0.0) {
        out << format_double((e.acv - *e.cv_exact) / *e.cv_exact);
      }
      out << ',' << (e.valid ? 1 : 0) << ',' << (e.support_violation ? 1 : 0)
          << '\n';
    }
  }
  if (!out) throw ValidationError("write to '" + path + "' failed");
}

json run_compare(const json& cfg, int threads,
                 const std::optional<std::string>& per_sample_path) {
  const json& sweep = cfg["estimator"]["sweep"];
  check_lambda_entries(sweep, "estimator.sweep");
  if (!sweep.is_array() || sweep.empty()) {
    throw ValidationError("estimator.sweep must be a nonempty array");
  }
  const bool with_exact = !cfg["estimator"]["no_exact"].get<bool>();
  const bool with_if = cfg["estimator"]["with_if"].get<bool>();
  const HessianMode mode =
      parse_mode(cfg["estimator"]["mode"].get<std::string>());
  const SolverConfig solver = solver_from(cfg);

  BuiltData built = build_dataset(cfg);
  const ModelSpec spec = model_from(cfg, built.train.p());
  const Index m = static_cast<Index>(spec.regularizers.size());
  const LossModel& loss = *spec.loss;

  json rows = json::array();
  std::vector<std::pair<double, AcvReport>> sweep_reports;
  for (const auto& entry : sweep) {
    const double lambda_value = entry.get<double>();
    const RegularizedObjective objective =
        make_objective(spec, LambdaVector::constant(m, lambda_value));
    const FittedModel fitted = fit(built.train, objective, solver);
    AcvReport acv = acv_vector(built.train, fitted, objective, with_exact,
                               with_if, solver, mode, threads);

    json row;
    row["lambda"] = lambda_value;
    row["converged"] = fitted.converged;
    row["in_sample_loss"] =
        mean_sample_loss(loss, built.train, fitted.theta_hat);
    if (built.holdout) {
      row["out_of_sample_loss"] =
          mean_holdout_loss(loss, *built.holdout, fitted.theta_hat);
    }
    row["acv_mean"] = acv.acv_mean;
    row["acv_std_error"] = acv.acv_std_error;
    row["failed"] = acv.failed_count;
    row["support_violations"] = acv.support_violations;
    if (acv.cv_mean) {
      row["cv_mean"] = *acv.cv_mean;
      row["cv_std_error"] = *acv.cv_std_error;
      Index within = 0, counted = 0;
      for (const LooEstimate& e : acv.estimates) {
        if (!e.valid || !e.cv_exact) continue;
        ++counted;
        if (std::abs(e.acv - *e.cv_exact) <= 0.05 * *e.cv_exact) ++within;
      }
      row["within_5pct_fraction"] =
          counted > 0 ? static_cast<double>(within) /
                            static_cast<double>(counted)
                      : 0.0;
    }
    if (acv.if_mean) {
      row["if_mean"] = *acv.if_mean;
      row["if_std_error"] = *acv.if_std_error;
      row["if_underestimates"] = *acv.if_mean < acv.acv_mean;
      if (acv.cv_mean) {
        row["acv_closer_than_if"] =
            std::abs(acv.acv_mean - *acv.cv_mean) <=
            std::abs(*acv.if_mean - *acv.cv_mean);
      }
    }
    rows.push_back(std::move(row));
    sweep_reports.emplace_back(lambda_value, std::move(acv));
  }

  if (per_sample_path) write_per_sample_csv(*per_sample_path, sweep_reports);

  json report = report_envelope("compare", cfg);
  report["compare"]["rows"] = std::move(rows);
  if (per_sample_path) report["compare"]["per_sample_path"] = *per_sample_path;
  return report;
}

struct LambdaGroups {
  std::vector<Index> relevant, irrelevant;
};

// Coordinate groups are only known for synthetic diagonal-ridge runs,
// where the generator zeroes the first p - n_relevant coefficients.
std::optional<LambdaGroups> lambda_groups(const json& cfg, Index m, Index p) {
  if (cfg["dataset"]["source"].get<std::string>() != "synth") {
    return std::nullopt;
  }
  if (dataset_family(cfg) != "ridge" ||
      cfg["model"]["family"].get<std::string>() != "ridge" || m != p) {
    return std::nullopt;
  }
  const Index n_relevant = cfg["dataset"]["n_relevant"].get<Index>();
  if (n_relevant <= 0 || n_relevant >= p) return std::nullopt;
  LambdaGroups groups;
  for (Index j = 0; j < p - n_relevant; ++j) groups.irrelevant.push_back(j);
  for (Index j = p - n_relevant; j < p; ++j) groups.relevant.push_back(j);
  return groups;
}

double mean_over(const Vector& v, const std::vector<Index>& idx) {
  double sum = 0.0;
  for (Index j : idx) sum += v[j];
  return sum / static_cast<double>(idx.size());
}

void write_trace_csv(const std::string& path, const TuneTrace& trace,
                     const std::optional<LambdaGroups>& groups) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open '" + path + "' for write");
  out << "t,acv_mean,grad_inf_norm,refit_iterations,wall_seconds,"
         "lambda_mean,lambda_min,lambda_max";
  if (groups) out << ",lambda_relevant_mean,lambda_irrelevant_mean";
  out << '\n';
  for (const TuneRecord& r : trace.records) {
    out << r.t << ',' << format_double(r.acv_mean) << ','
        << format_double(r.grad_inf_norm) << ',' << r.refit_iterations << ','
        << format_double(r.wall_seconds) << ','
        << format_double(r.lambda.mean()) << ','
        << format_double(r.lambda.minCoeff()) << ','
        << format_double(r.lambda.maxCoeff());
    if (groups) {
      out << ',' << format_double(mean_over(r.lambda, groups->relevant)) << ','
          << format_double(mean_over(r.lambda, groups->irrelevant));
    }
    out << '\n';
  }
  if (!out) throw ValidationError("write to '" + path + "' failed");
}

json run_tune(const json& cfg, int threads,
              const std::optional<std::string>& trace_path) {
  const json& t = cfg["tuner"];
  check_lambda_entries(t["lambda0"], "tuner.lambda0");
  BuiltData built = build_dataset(cfg);
  const ModelSpec spec = model_from(cfg, built.train.p());
  const Index m = static_cast<Index>(spec.regularizers.size());
  const LambdaVector lambda0 =
      lambda_from(t["lambda0"], m, "tuner.lambda0");
  const RegularizedObjective objective = make_objective(spec, lambda0);

  TuneConfig config;
  config.step_rule = parse_rule(t["rule"].get<std::string>());
  config.step_size = t["step_size"].get<double>();
  config.max_epochs = t["epochs"].get<int>();
  config.lambda_lower_bound = t["lower_bound"].get<double>();
  config.gradient_stop_tolerance = t["stop_tolerance"].get<double>();
  config.max_backtracks = t["max_backtracks"].get<int>();
  config.solver = solver_from(cfg);
  config.seed = t["seed"].get<std::uint64_t>();
  config.refit_every = t["refit_every"].get<int>();
  config.fast_mode = t["fast"].get<bool>();
  config.hessian_mode = parse_mode(cfg["estimator"]["mode"].get<std::string>());
  config.threads = threads;

  const bool stochastic = t["stochastic"].get<bool>();
  auto [final_lambda, trace] =
      stochastic ? tune_stochastic(built.train, objective, lambda0, config)
                 : tune_batch(built.train, objective, lambda0, config);

  const std::optional<LambdaGroups> groups =
      lambda_groups(cfg, m, built.train.p());
  if (trace_path) write_trace_csv(*trace_path, trace, groups);

  json report = report_envelope("tune", cfg);
  json out;
  out["algorithm"] = stochastic ? "stochastic" : "batch";
  out["final_lambda"] = vector_to_json(trace.final_lambda);
  out["final_acv_mean"] = trace.final_acv_mean;
  if (!trace.records.empty()) {
    out["initial_acv_mean"] = trace.records.front().acv_mean;
  }
  out["records"] = trace.records.size();
  out["final_theta"] = vector_to_json(trace.final_theta);
  if (!trace.abort_reason.empty()) out["abort_reason"] = trace.abort_reason;
  if (groups) {
    out["final_lambda_relevant_mean"] =
        mean_over(trace.final_lambda, groups->relevant);
    out["final_lambda_irrelevant_mean"] =
        mean_over(trace.final_lambda, groups->irrelevant);
  }
  if (trace_path) out["trace_path"] = *trace_path;
  report["tune"] = std::move(out);
  return report;
}

json run_bench(const json& cfg, int threads,
               const std::optional<std::string>& table_path) {
  check_lambda_entries(cfg["model"]["lambda"], "model.lambda");
  const json& grid = cfg["dataset"]["n_grid"];
  if (!grid.is_array() || grid.empty()) {
    throw ValidationError("dataset.n_grid must be a nonempty array");
  }
  const HessianMode mode =
      parse_mode(cfg["estimator"]["mode"].get<std::string>());
  const SolverConfig solver = solver_from(cfg);
  const std::uint64_t seed = cfg["dataset"]["seed"].get<std::uint64_t>();

  json rows = json::array();
  std::vector<double> sizes, exact_times, acv_times;
  for (const auto& entry : grid) {
    const Index n = entry.get<Index>();
    json cfg_n = cfg;
    cfg_n["dataset"]["n"] = n;
    cfg_n["dataset"]["seed"] =
        Rng::derive_seed(seed, static_cast<std::uint64_t>(n));
    cfg_n["dataset"]["holdout_fraction"] = 0.0;
    BuiltData built = build_dataset(cfg_n);
    const ModelSpec spec = model_from(cfg, built.train.p());
    const Index m = static_cast<Index>(spec.regularizers.size());
    const RegularizedObjective objective = make_objective(
        spec, lambda_from(cfg["model"]["lambda"], m, "model.lambda"));

    const FittedModel fitted = fit(built.train, objective, solver);

    const auto te0 = std::chrono::steady_clock::now();
    const LoocvResult exact = loocv_exact(built.train, objective, solver,
                                          threads);
    const double exact_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - te0)
            .count();

    // Repeat the cheap measurement and keep the fastest pass.
    double acv_seconds = std::numeric_limits<double>::infinity();
    double acv_mean = 0.0;
    for (int rep = 0; rep < 3; ++rep) {
      const auto ta0 = std::chrono::steady_clock::now();
      const AcvReport acv = acv_vector(built.train, fitted, objective, false,
                                       false, solver, mode, threads);
      const double s =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - ta0)
              .count();
      acv_seconds = std::min(acv_seconds, s);
      acv_mean = acv.acv_mean;
    }

    json row;
    row["n"] = n;
    row["exact_seconds"] = exact_seconds;
    row["acv_seconds"] = acv_seconds;
    row["ratio"] = exact_seconds / acv_seconds;
    row["cv_mean"] = exact.cv_mean;
    row["acv_mean"] = acv_mean;
    rows.push_back(std::move(row));
    sizes.push_back(static_cast<double>(n));
    exact_times.push_back(exact_seconds);
    acv_times.push_back(acv_seconds);
  }

  if (table_path) {
    std::ofstream out(*table_path);
    if (!out) {
      throw ValidationError("cannot open '" + *table_path + "' for write");
    }
    out << "n,exact_seconds,acv_seconds,ratio\n";
    for (const auto& row : rows) {
      out << row["n"].get<Index>() << ','
          << format_double(row["exact_seconds"].get<double>()) << ','
          << format_double(row["acv_seconds"].get<double>()) << ','
          << format_double(row["ratio"].get<double>()) << '\n';
    }
    if (!out) throw ValidationError("write to '" + *table_path + "' failed");
  }

  json report = report_envelope("bench", cfg);
  report["bench"]["rows"] = std::move(rows);
  if (sizes.size() >= 2) {
    report["bench"]["exact_loglog_slope"] = loglog_slope(sizes, exact_times);
    report["bench"]["acv_loglog_slope"] = loglog_slope(sizes, acv_times);
  }
  if (table_path) report["bench"]["table_path"] = *table_path;
  return report;
}

json run_synth(const json& cfg, const std::optional<std::string>& data_out) {
  if (cfg["dataset"]["source"].get<std::string>() != "synth") {
    throw ValidationError("synth: dataset.source must be synth");
  }
  if (!data_out) {
    throw ValidationError("synth: --data-out path is required");
  }
  const json& d = cfg["dataset"];
  const std::uint64_t seed = d["seed"].get<std::uint64_t>();
  const std::string family = dataset_family(cfg);
  SynthData synth = make_synth(family, d, seed);
  save_csv(synth.dataset, *data_out, d["label_column"].get<std::string>());

  json report = report_envelope("synth", cfg);
  json out;
  out["path"] = *data_out;
  out["family"] = family;
  out["n"] = synth.dataset.n();
  out["p"] = synth.dataset.p();
  out["theta_star"] = vector_to_json(synth.theta_star);
  report["synth"] = std::move(out);
  return report;
}

void write_report(const json& report, const std::optional<std::string>& path) {
  const std::string text = report.dump(2) + "\n";
  if (path) {
    std::ofstream out(*path);
    if (!out) throw ValidationError("cannot open '" + *path + "' for write");
    out << text;
    if (!out) throw ValidationError("write to '" + *path + "' failed");
  } else {
    std::cout << text;
  }
}

int emit_error(const char* type, const std::string& message) {
  json record;
  record["error"]["type"] = type;
  record["error"]["message"] = message;
  std::cout << record.dump(2) << "\n";
  std::cerr << "error: " << message << "\n";
  return std::string(type) == "validation" ? 1 : 2;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"approximate leave-one-out cross validation toolkit"};
  app.require_subcommand(1);

  Overrides o;
  auto add_common = [&o](CLI::App* sub) {
    sub->add_option("--config", o.config_path, "JSON config file");
    sub->add_option("--output", o.output,
                    "report destination (default stdout)");
    sub->add_option("--threads", o.threads,
                    "worker threads, 0 = all cores (default: ALOOCV_THREADS "
                    "or 1)");
    sub->add_option("--seed", o.seed, "dataset seed");
    sub->add_option("--n", o.n, "synthetic sample count");
    sub->add_option("--p", o.p, "synthetic feature count");
    sub->add_option("--n-relevant", o.n_relevant,
                    "nonzero coefficients in synth ridge");
    sub->add_option("--noise-var", o.noise_var, "synthetic noise variance");
    sub->add_option("--family", o.model_family,
                    "model family: ridge | logistic | elastic");
    sub->add_option("--dataset-family", o.dataset_family,
                    "generator family when it differs from the model");
    sub->add_option("--source", o.source, "dataset source: synth | csv");
    sub->add_option("--data", o.csv_path, "CSV dataset path");
    sub->add_option("--label-column", o.label_column, "CSV label column");
    sub->add_option("--binarize", o.binarize,
                    "two label values to keep, mapped to 0 and 1")
        ->expected(2);
    sub->add_option("--holdout", o.holdout, "held-out fraction in [0, 1)");
    sub->add_option("--lambda", o.lambda, "regularization weight");
    sub->add_option("--tolerance", o.tolerance, "solver gradient tolerance");
    sub->add_option("--max-iterations", o.max_iterations,
                    "solver iteration cap");
  };

  CLI::App* cmd_fit = app.add_subcommand("fit", "solve one ERM instance");
  add_common(cmd_fit);

  CLI::App* cmd_compare = app.add_subcommand(
      "compare", "exact CV vs one-step ACV vs influence baseline over a "
                 "lambda sweep");
  add_common(cmd_compare);
  cmd_compare->add_option("--sweep", o.sweep, "lambda sweep values")
      ->delimiter(',');
  cmd_compare->add_flag("--no-exact", o.no_exact,
                        "skip the n exact leave-one-out refits");
  cmd_compare->add_flag("--no-if", o.no_if, "skip the influence baseline");
  cmd_compare->add_option("--mode", o.mode,
                          "auto | sherman-morrison | refactorize");
  cmd_compare->add_option("--per-sample", o.per_sample,
                          "write per-sample estimates to this CSV");

  CLI::App* cmd_tune =
      app.add_subcommand("tune", "gradient descent on the ACV estimate");
  add_common(cmd_tune);
  cmd_tune->add_option("--trace", o.trace, "write the iteration trace CSV");
  cmd_tune->add_option("--epochs", o.epochs, "gradient iterations");
  cmd_tune->add_option("--rule", o.rule,
                       "backtracking | fixed | sqrt-decay");
  cmd_tune->add_option("--step-size", o.step_size, "initial step size");
  cmd_tune->add_option("--lambda0", o.lambda0, "starting weights");
  cmd_tune->add_option("--lower-bound", o.lower_bound,
                       "projection floor for lambda");
  cmd_tune->add_flag("--stochastic", o.stochastic, "single-sample steps");
  cmd_tune->add_flag("--batch", o.batch, "full-gradient steps");
  cmd_tune->add_flag("--fast", o.fast,
                     "evaluate gradients at theta_hat instead of the "
                     "one-step parameter");
  cmd_tune->add_option("--refit-every", o.refit_every,
                       "stochastic refit cadence (0 = n/10)");
  cmd_tune->add_option("--stop-tolerance", o.stop_tolerance,
                       "stop when the gradient norm falls below this");
  cmd_tune->add_option("--tuner-seed", o.tuner_seed,
                       "stochastic sampling seed");
  cmd_tune->add_option("--mode", o.mode,
                       "auto | sherman-morrison | refactorize");

  CLI::App* cmd_bench = app.add_subcommand(
      "bench", "wall-clock scaling of exact LOOCV against ACV");
  add_common(cmd_bench);
  cmd_bench->add_option("--n-grid", o.n_grid, "dataset sizes")->delimiter(',');
  cmd_bench->add_option("--table", o.table, "write the timing table CSV");
  cmd_bench->add_option("--mode", o.mode,
                        "auto | sherman-morrison | refactorize");

  CLI::App* cmd_synth =
      app.add_subcommand("synth", "emit a synthetic dataset as CSV");
  add_common(cmd_synth);
  cmd_synth->add_option("--data-out", o.data_out, "CSV destination");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // help or version
    return emit_error("validation", e.what());
  }

  try {
    json cfg = default_config();
    if (o.config_path) merge_config_file(cfg, *o.config_path);
    apply_overrides(cfg, o);
    const int threads = resolve_threads(o.threads);

    json report;
    if (cmd_fit->parsed()) {
      report = run_fit(cfg, threads);
    } else if (cmd_compare->parsed()) {
      report = run_compare(cfg, threads, o.per_sample);
    } else if (cmd_tune->parsed()) {
      report = run_tune(cfg, threads, o.trace);
    } else if (cmd_bench->parsed()) {
      report = run_bench(cfg, threads, o.table);
    } else {
      report = run_synth(cfg, o.data_out);
    }
    write_report(report, o.output);
    return 0;
  } catch (const ValidationError& e) {
    return emit_error("validation", e.what());
  } catch (const json::exception& e) {
    return emit_error("validation", std::string("config: ") + e.what());
  } catch (const NumericalError& e) {
    return emit_error("numerical", e.what());
  } catch (const std::exception& e) {
    return emit_error("numerical", e.what());
  }
}

}  // namespace aloocv
