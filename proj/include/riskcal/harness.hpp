#pragma once

// Monte Carlo validation harness. Runs many independent calibration
// trajectories against the credit environment, then audits each one post hoc:
// every iterate gets a fresh validation batch drawn under that iterate's
// distribution, scored both at the iterate itself and at its successor. The
// successor check is the one that matters for safety: lambda_hat_{t+1} was
// chosen from data drawn under lambda_hat_t, so its true risk under that
// pre-shift distribution is what the guarantee bounds.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "riskcal/env.hpp"
#include "riskcal/prc.hpp"
#include "riskcal/quantile.hpp"
#include "riskcal/risk_core.hpp"
#include "riskcal/rng.hpp"

namespace riskcal {

struct ExperimentConfig {
  RiskSpec spec;
  CreditEnvConfig env;
  ThresholdWindow window;
  WidthMethod method = WidthMethod::Clt();
  std::optional<WeightFn> psi;  // engaged: quantile-risk loop with the rule below
  QuantileWidthRule quantile_rule = QuantileWidthRule::DkwBand();
  int trajectories = 200;
  int n_validation = 20000;
  std::uint64_t master_seed = 1;
  int grid_size = 4096;
  int threads = 0;  // 0: hardware concurrency

  void validate() const {
    spec.validate();
    env.validate();
    window.validate();
    method.validate();
    if (psi) psi->validate();
    if (trajectories < 1) throw std::invalid_argument("ExperimentConfig: trajectories must be >= 1");
    if (n_validation < 100) throw std::invalid_argument("ExperimentConfig: n_validation must be >= 100");
    if (grid_size < 2) throw std::invalid_argument("ExperimentConfig: grid_size must be >= 2");
    if (threads < 0) throw std::invalid_argument("ExperimentConfig: threads must be >= 0");
  }
};

// True-risk estimate: draw a fresh batch under lambda_dist, evaluate the loss
// at lambda_eval, reduce by mean or by the quantile weight.
inline double validation_risk(const CreditEnvConfig& env, double lambda_dist, double lambda_eval,
                              int n, Rng& rng, const std::optional<WeightFn>& psi) {
  const SampleBatch batch = sample_batch(env, lambda_dist, n, rng);
  if (!psi) return empirical_risk(batch, lambda_eval, env.epsilon);
  std::vector<double> losses(batch.records.size());
  for (std::size_t i = 0; i < batch.records.size(); ++i)
    losses[i] = loss_eval(batch.records[i], lambda_eval, env.epsilon);
  return quantile_risk(empirical_cdf(losses), *psi);
}

struct TrajectoryRow {
  std::vector<double> lambda_hat;  // iterates, starting at lambda_safe
  std::vector<double> risk_self;   // validation risk of iterate t under its own distribution
  std::vector<double> risk_next;   // validation risk of iterate t+1 under iterate t's distribution
  StopReason stop_reason = StopReason::no_solve_plan;
};

struct Aggregates {
  int any_iteration_safety_failures = 0;  // some risk_self or risk_next above alpha + slack
  int final_safety_failures = 0;          // final risk_self above alpha + slack
  int tightness_failures = 0;             // calibrated runs whose final risk fell below alpha - delta_alpha - slack
  int tightness_eligible = 0;             // trajectories that performed at least one iteration
  double lambda_final_mean = 0.0;
  double lambda_final_p05 = 0.0;
  double lambda_final_p50 = 0.0;
  double lambda_final_p95 = 0.0;
  double validation_slack = 0.0;  // 3 sigma of the validation estimator at risk level alpha
};

struct ExperimentReport {
  ExperimentConfig config;
  std::optional<SolvePlan> plan;
  std::vector<TrajectoryRow> rows;
  Aggregates aggregates;
};

namespace detail {
inline double percentile(std::vector<double> v, double p) {
  // Nearest-rank on a copy; fine at the aggregate sizes involved.
  std::sort(v.begin(), v.end());
  const auto idx = static_cast<std::size_t>(
      std::min(v.size() - 1.0, std::max(0.0, std::ceil(p * v.size()) - 1.0)));
  return v[idx];
}
}  // namespace detail

// Pure recount from the rows; emit/load round-trips can re-derive and compare.
inline Aggregates compute_aggregates(const ExperimentConfig& config,
                                     const std::vector<TrajectoryRow>& rows) {
  Aggregates agg;
  agg.validation_slack =
      3.0 * std::sqrt(config.spec.alpha * (1.0 - config.spec.alpha) / config.n_validation);
  const double safe_ceiling = config.spec.alpha + agg.validation_slack;
  const double tight_floor = config.spec.alpha - config.spec.delta_alpha - agg.validation_slack;
  std::vector<double> finals;
  finals.reserve(rows.size());
  for (const auto& row : rows) {
    finals.push_back(row.lambda_hat.back());
    bool any_breach = false;
    for (double r : row.risk_self) any_breach = any_breach || r > safe_ceiling;
    for (double r : row.risk_next) any_breach = any_breach || r > safe_ceiling;
    if (any_breach) ++agg.any_iteration_safety_failures;
    if (!row.risk_self.empty() && row.risk_self.back() > safe_ceiling) ++agg.final_safety_failures;
    if (row.lambda_hat.size() > 1) {
      ++agg.tightness_eligible;
      if (!row.risk_self.empty() && row.risk_self.back() < tight_floor) ++agg.tightness_failures;
    }
  }
  double sum = 0.0;
  for (double f : finals) sum += f;
  agg.lambda_final_mean = sum / finals.size();
  agg.lambda_final_p05 = detail::percentile(finals, 0.05);
  agg.lambda_final_p50 = detail::percentile(finals, 0.50);
  agg.lambda_final_p95 = detail::percentile(finals, 0.95);
  return agg;
}

enum class FailureKind { any_iteration_safety, final_safety, tightness };

inline double failure_rate(const ExperimentReport& report, FailureKind kind) {
  const auto& agg = report.aggregates;
  const double m = static_cast<double>(report.rows.size());
  switch (kind) {
    case FailureKind::any_iteration_safety: return agg.any_iteration_safety_failures / m;
    case FailureKind::final_safety: return agg.final_safety_failures / m;
    case FailureKind::tightness:
      return agg.tightness_eligible == 0
                 ? 0.0
                 : static_cast<double>(agg.tightness_failures) / agg.tightness_eligible;
  }
  throw std::logic_error("failure_rate: unknown kind");
}

namespace detail {

inline TrajectoryRow run_one_trajectory(const ExperimentConfig& config, int index) {
  const EnvSampler env = [&config](double lambda, int n, Rng& rng) {
    return sample_batch(config.env, lambda, n, rng);
  };
  const std::uint64_t cal_seed = child_seed(config.master_seed, 2 * static_cast<std::uint64_t>(index));
  const std::uint64_t val_seed =
      child_seed(config.master_seed, 2 * static_cast<std::uint64_t>(index) + 1);
  const Trajectory traj =
      config.psi ? run_prc_quantile(env, config.spec, config.window, *config.psi,
                                    config.quantile_rule, config.grid_size, cal_seed,
                                    config.env.epsilon)
                 : run_prc(env, config.spec, config.window, config.method, config.grid_size,
                           cal_seed, config.env.epsilon);

  TrajectoryRow row;
  row.lambda_hat = traj.iterates;
  row.stop_reason = traj.stop_reason;
  Rng val_rng(val_seed);
  // One fresh batch per iterate's distribution, reused for both sides of the
  // audit so self and successor risks share the same draw.
  for (std::size_t t = 0; t < traj.iterates.size(); ++t) {
    const SampleBatch batch =
        sample_batch(config.env, traj.iterates[t], config.n_validation, val_rng);
    const double eval_next =
        t + 1 < traj.iterates.size() ? traj.iterates[t + 1] : traj.iterates[t];
    const auto risk_at = [&](double lambda_eval) {
      if (!config.psi) return empirical_risk(batch, lambda_eval, config.env.epsilon);
      std::vector<double> losses(batch.records.size());
      for (std::size_t i = 0; i < batch.records.size(); ++i)
        losses[i] = loss_eval(batch.records[i], lambda_eval, config.env.epsilon);
      return quantile_risk(empirical_cdf(losses), *config.psi);
    };
    row.risk_self.push_back(risk_at(traj.iterates[t]));
    row.risk_next.push_back(risk_at(eval_next));
  }
  return row;
}

}  // namespace detail

// Trajectories are independent by construction (counter-based child seeds), so
// they parallelize over a shared atomic index; results land by index, making
// the report identical for any thread count.
inline ExperimentReport run_experiment(const ExperimentConfig& config) {
  config.validate();
  ExperimentReport report;
  report.config = config;
  report.plan = config.psi
                    ? joint_solve_with(config.spec, config.window,
                                       [&](int n, double dp) {
                                         return config.quantile_rule.width(n, dp, *config.psi);
                                       })
                    : joint_solve(config.spec, config.window, config.method);
  report.rows.resize(static_cast<std::size_t>(config.trajectories));

  const int hw = static_cast<int>(std::thread::hardware_concurrency());
  const int n_threads =
      std::max(1, std::min(config.threads > 0 ? config.threads : std::max(1, hw), config.trajectories));
  std::atomic<int> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first_error;
  int error_index = -1;
  std::mutex error_mutex;

  const auto worker = [&]() {
    while (true) {
      const int i = next.fetch_add(1);
      if (i >= config.trajectories || failed.load()) return;
      try {
        report.rows[static_cast<std::size_t>(i)] = detail::run_one_trajectory(config, i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) {
          first_error = std::current_exception();
          error_index = i;
        }
        failed.store(true);
        return;
      }
    }
  };

  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(n_threads));
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (first_error) {
    try {
      std::rethrow_exception(first_error);
    } catch (const std::exception& e) {
      throw std::runtime_error("run_experiment: trajectory " + std::to_string(error_index) +
                               " failed: " + e.what());
    }
  }

  report.aggregates = compute_aggregates(config, report.rows);
  return report;
}

}  // namespace riskcal
