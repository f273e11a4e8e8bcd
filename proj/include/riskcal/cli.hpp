#pragma once

// Command-line front end. Subcommands:
//   solve       print the iteration budget and stop margin for a configuration
//   bounds      tabulate two-sided interval widths across risk budgets
//   calibrate   run one calibration trajectory and print its audit table
//   experiment  run the full Monte Carlo harness and write report files
//   gamma       sensitivity constant: closed form and histogram estimate
//
// Exit codes: 0 success, 1 usage or configuration error, 2 no feasible solve
// plan (solve and calibrate only; experiment reports the outcome and exits 0).
// Settings resolve as flag over config file over built-in default.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "riskcal/config_json.hpp"
#include "riskcal/env.hpp"
#include "riskcal/harness.hpp"
#include "riskcal/prc.hpp"
#include "riskcal/report_io.hpp"

namespace riskcal {
namespace cli {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitNoPlan = 2;

namespace detail {

inline std::string f6(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", x);
  return buf;
}

inline void write_text(const std::string& out_path, const std::string& text) {
  if (out_path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(out_path);
  if (!out) throw std::runtime_error("cannot open output file " + out_path);
  out << text;
  if (!out) throw std::runtime_error("write failed for " + out_path);
}

// Flag storage for one subcommand plus the precedence logic that folds flags
// over a config file over defaults.
struct Overrides {
  CLI::App* cmd = nullptr;
  std::string config_path;
  std::string out_path;
  double alpha = 0.0, delta = 0.0, delta_alpha = 0.0, tau = 0.0;
  int n = 0, grid = 0, threads = 0, trajectories = 0, n_validation = 0;
  std::uint64_t seed = 0;
  std::string method;
  double beta = 0.0, p_rate = 0.0, p_pos = 0.0;

  void attach_common(CLI::App* c) {
    cmd = c;
    c->add_option("--config", config_path, "JSON configuration file");
    c->add_option("--alpha", alpha, "risk budget");
    c->add_option("--delta", delta, "failure probability budget");
    c->add_option("--delta-alpha", delta_alpha, "tightness margin");
    c->add_option("--tau", tau, "distribution sensitivity bound");
    c->add_option("--n", n, "calibration batch size");
    c->add_option("--method", method,
                  "width method: hoeffding, empirical_bernstein, hoeffding_bentkus, clt, quantile_clt");
    c->add_option("--beta", beta, "tail level for quantile_clt");
    c->add_option("--p-rate", p_rate, "positive rate for quantile_clt");
    c->add_option("--p-pos", p_pos, "environment positive base rate");
    c->add_option("--seed", seed, "master RNG seed");
    c->add_option("--grid", grid, "threshold grid size");
    c->add_option("--threads", threads, "worker threads (0 = hardware)");
    c->add_option("--trajectories", trajectories, "Monte Carlo trajectory count");
    c->add_option("--n-validation", n_validation, "validation batch size");
    c->add_option("--out", out_path, "output file or report stem");
  }

  bool has(const char* flag) const { return cmd->count(flag) > 0; }

  ExperimentConfig build() const {
    ExperimentConfig config;
    if (has("--config")) {
      std::ifstream in(config_path);
      if (!in) throw std::invalid_argument("cannot open config file " + config_path);
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(in);
      } catch (const nlohmann::json::parse_error& e) {
        throw std::invalid_argument(config_path + ": " + e.what());
      }
      config = config_from_json(j);
    }
    if (has("--alpha")) config.spec.alpha = alpha;
    if (has("--delta")) config.spec.delta = delta;
    if (has("--delta-alpha")) config.spec.delta_alpha = delta_alpha;
    if (has("--tau")) config.spec.tau = tau;
    if (has("--n")) config.spec.n = n;
    if (has("--method")) {
      if (method == "quantile_clt")
        config.method = WidthMethod::QuantileClt(beta, p_rate);
      else
        config.method = method_from_json(nlohmann::json(method));
    } else if (config.method.kind == WidthKind::quantile_clt) {
      if (has("--beta")) config.method.beta = beta;
      if (has("--p-rate")) config.method.p_rate = p_rate;
    }
    if (has("--p-pos")) config.env.p_pos = p_pos;
    if (has("--seed")) config.master_seed = seed;
    if (has("--grid")) config.grid_size = grid;
    if (has("--threads")) config.threads = threads;
    if (has("--trajectories")) config.trajectories = trajectories;
    if (has("--n-validation")) config.n_validation = n_validation;
    return config;
  }
};

inline std::optional<SolvePlan> solve_for(const ExperimentConfig& config) {
  if (config.psi)
    return joint_solve_with(config.spec, config.window, [&](int n, double dp) {
      return config.quantile_rule.width(n, dp, *config.psi);
    });
  return joint_solve(config.spec, config.window, config.method);
}

inline int cmd_solve(const Overrides& ov) {
  const ExperimentConfig config = ov.build();
  config.validate();
  const auto plan = solve_for(config);
  if (!plan) {
    std::cerr << "no feasible solve plan: the interval width exhausts the tightness margin "
                 "before the stop margin can cover the threshold window\n";
    return kExitNoPlan;
  }
  write_text(ov.out_path, plan_to_json(*plan).dump(2) + "\n");
  return kExitOk;
}

inline int cmd_bounds(const Overrides& ov, int t_tilde) {
  const ExperimentConfig config = ov.build();
  if (t_tilde < 1) throw std::invalid_argument("--t-tilde must be >= 1");
  const double delta_prime = config.spec.delta / t_tilde;
  const WidthMethod methods[] = {WidthMethod::Hoeffding(), WidthMethod::EmpiricalBernstein(),
                                 WidthMethod::HoeffdingBentkus(), WidthMethod::Clt()};
  const char* names[] = {"hoeffding", "empirical_bernstein", "hoeffding_bentkus", "clt"};
  std::ostringstream out;
  out << "alpha,method,two_c\n";
  for (int i = 1; i <= 25; ++i) {
    const double alpha = 0.02 * i;
    for (int m = 0; m < 4; ++m) {
      const double two_c = 2.0 * precomputed_width(methods[m], config.spec.n, delta_prime, alpha);
      out << f6(alpha) << ',' << names[m] << ',' << f6(two_c) << "\n";
    }
  }
  write_text(ov.out_path, out.str());
  return kExitOk;
}

inline int cmd_calibrate(const Overrides& ov) {
  ExperimentConfig config = ov.build();
  config.trajectories = 1;
  config.validate();
  const ExperimentReport report = run_experiment(config);
  if (!report.plan) {
    std::cerr << "no feasible solve plan: the threshold stays at lambda_safe\n";
    return kExitNoPlan;
  }
  const auto& row = report.rows.front();
  std::ostringstream out;
  out << "plan: t_tilde=" << report.plan->t_tilde
      << " delta_lambda=" << detail::f6(report.plan->delta_lambda)
      << " width=" << detail::f6(report.plan->width) << "\n";
  out << "iteration,lambda_hat,risk_self,risk_next\n";
  for (std::size_t t = 0; t < row.lambda_hat.size(); ++t) {
    out << t << ',' << f6(row.lambda_hat[t]) << ',' << f6(row.risk_self[t]) << ','
        << f6(row.risk_next[t]) << "\n";
  }
  out << "stop: " << to_string(row.stop_reason) << "\n";
  std::cout << out.str();
  if (!ov.out_path.empty()) emit_report(report, ov.out_path);
  return kExitOk;
}

inline int cmd_experiment(const Overrides& ov) {
  const ExperimentConfig config = ov.build();
  config.validate();
  const ExperimentReport report = run_experiment(config);
  const std::string stem = ov.out_path.empty() ? "experiment" : ov.out_path;
  emit_report(report, stem);
  ordered_json summary;
  summary["plan"] = report.plan ? plan_to_json(*report.plan) : ordered_json(nullptr);
  summary["aggregates"] = aggregates_to_json(report.aggregates);
  summary["any_iteration_failure_rate"] = failure_rate(report, FailureKind::any_iteration_safety);
  summary["final_failure_rate"] = failure_rate(report, FailureKind::final_safety);
  summary["tightness_failure_rate"] = failure_rate(report, FailureKind::tightness);
  summary["report_stem"] = stem;
  std::cout << summary.dump(2) << "\n";
  return kExitOk;
}

inline int cmd_gamma(const Overrides& ov, const std::string& csv_path, int bins) {
  if (bins < 1) throw std::invalid_argument("--bins must be >= 1");
  ordered_json out;
  if (!csv_path.empty()) {
    const auto [scores, labels] = load_scores_csv(csv_path);
    std::vector<double> positives;
    for (std::size_t i = 0; i < scores.size(); ++i)
      if (labels[i] == 1) positives.push_back(scores[i]);
    const double p_rate = static_cast<double>(positives.size()) / scores.size();
    const SensitivityEstimate est = estimate_gamma(positives, p_rate, bins);
    out["analytic_gamma"] = nullptr;
    out["estimate"] = {{"gamma_hat", est.gamma_hat},
                       {"p_rate", est.p_rate},
                       {"c_max", est.c_max},
                       {"bins", est.bins}};
  } else {
    ExperimentConfig config = ov.build();
    try {
      out["analytic_gamma"] = analytic_gamma(config.env);
    } catch (const std::domain_error&) {
      out["analytic_gamma"] = nullptr;  // unbounded density, no closed form
    }
    // Base scores only: switch the strategic response off so the histogram
    // sees the undeployed distribution the sensitivity constant refers to.
    CreditEnvConfig base_env = config.env;
    base_env.shift_s = 0.0;
    const int samples = ov.has("--n") ? config.spec.n : 200000;
    Rng rng(config.master_seed);
    const SampleBatch batch = sample_batch(base_env, 0.0, samples, rng);
    std::vector<double> positives;
    for (const auto& rec : batch.records)
      if (rec.label == 1) positives.push_back(rec.score);
    const double p_rate = static_cast<double>(positives.size()) / batch.records.size();
    const SensitivityEstimate est = estimate_gamma(positives, p_rate, bins);
    out["estimate"] = {{"gamma_hat", est.gamma_hat},
                       {"p_rate", est.p_rate},
                       {"c_max", est.c_max},
                       {"bins", est.bins}};
  }
  write_text(ov.out_path, out.dump(2) + "\n");
  return kExitOk;
}

}  // namespace detail

inline int run_cli(int argc, char** argv) {
  CLI::App app{"iterative threshold calibration with distribution-shift guarantees"};
  app.require_subcommand(1);

  detail::Overrides ov_solve, ov_bounds, ov_calibrate, ov_experiment, ov_gamma;
  int t_tilde = 100;
  std::string gamma_csv;
  int gamma_bins = 20;

  CLI::App* solve = app.add_subcommand("solve", "compute the iteration budget and stop margin");
  ov_solve.attach_common(solve);
  CLI::App* bounds = app.add_subcommand("bounds", "tabulate interval widths across risk budgets");
  ov_bounds.attach_common(bounds);
  bounds->add_option("--t-tilde", t_tilde, "iteration budget used for the per-step level");
  CLI::App* calibrate = app.add_subcommand("calibrate", "run one trajectory and print its audit");
  ov_calibrate.attach_common(calibrate);
  CLI::App* experiment = app.add_subcommand("experiment", "run the Monte Carlo harness");
  ov_experiment.attach_common(experiment);
  CLI::App* gamma = app.add_subcommand("gamma", "estimate the sensitivity constant");
  ov_gamma.attach_common(gamma);
  gamma->add_option("--csv", gamma_csv, "score,label CSV to estimate from");
  gamma->add_option("--bins", gamma_bins, "histogram bins");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (solve->parsed()) return detail::cmd_solve(ov_solve);
    if (bounds->parsed()) return detail::cmd_bounds(ov_bounds, t_tilde);
    if (calibrate->parsed()) return detail::cmd_calibrate(ov_calibrate);
    if (experiment->parsed()) return detail::cmd_experiment(ov_experiment);
    if (gamma->parsed()) return detail::cmd_gamma(ov_gamma, gamma_csv, gamma_bins);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace cli
}  // namespace riskcal
