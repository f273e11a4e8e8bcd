#pragma once

// Iterative threshold calibration under a reactive distribution.
//
// Before deployment, a solve plan fixes the iteration budget T and the stop
// margin dl jointly: dl = (delta_alpha - 2c(n, delta/T)) / (2 tau) with
// dl >= window / T, at the smallest feasible T. Each iteration then samples a
// fresh batch under the currently deployed threshold and moves to the smallest
// grid threshold whose guarded objective
//
//   V(lambda) = empirical_risk(lambda) + c + tau * (lambda_prev - lambda)
//
// stays at or below alpha; the loop stops once an iteration advances by no
// more than dl. The tau guard prices how far the loss law can drift per unit
// of threshold movement, so the final iterate stays safe even though the
// distribution it induces was never sampled.

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

#include "riskcal/bounds.hpp"
#include "riskcal/env.hpp"
#include "riskcal/quantile.hpp"
#include "riskcal/risk_core.hpp"
#include "riskcal/rng.hpp"

namespace riskcal {

struct SolvePlan {
  int t_tilde = 0;          // iteration budget
  double delta_lambda = 0;  // minimum per-iteration progress before stopping
  double width = 0;         // precomputed confidence half-width c(n, delta / t_tilde)
};

// Joint budget/margin solve against an arbitrary width rule (n, delta_prime) -> c.
// Scans T upward; widths grow as delta_prime shrinks, so once the width alone
// exhausts delta_alpha no larger T can work and the scan exits early.
inline std::optional<SolvePlan> joint_solve_with(
    const RiskSpec& spec, const ThresholdWindow& window,
    const std::function<double(int, double)>& width_fn, int t_cap = 1'000'000) {
  spec.validate();
  window.validate();
  const double len = window.length();
  for (int t = 1; t <= t_cap; ++t) {
    const double c = width_fn(spec.n, spec.delta / t);
    const double dl = (spec.delta_alpha - 2.0 * c) / (2.0 * spec.tau);
    if (dl <= 0.0) return std::nullopt;
    if (dl >= len / t) return SolvePlan{t, dl, c};
  }
  return std::nullopt;
}

inline std::optional<SolvePlan> joint_solve(const RiskSpec& spec, const ThresholdWindow& window,
                                            const WidthMethod& method, int t_cap = 1'000'000) {
  return joint_solve_with(
      spec, window,
      [&](int n, double dp) { return precomputed_width(method, n, dp, spec.alpha); }, t_cap);
}

// Guarded objective at a candidate threshold no larger than the deployed one.
inline double v_objective(const SampleBatch& batch, double lambda_eval, double epsilon, double width,
                          double tau) {
  if (lambda_eval > batch.lambda_deploy)
    throw std::domain_error("v_objective: lambda_eval must not exceed lambda_deploy (guard must be >= 0)");
  return empirical_risk(batch, lambda_eval, epsilon) + width + tau * (batch.lambda_deploy - lambda_eval);
}

namespace detail {
inline std::vector<double> ascending_grid(double lo, double hi, int points) {
  std::vector<double> grid(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i)
    grid[static_cast<std::size_t>(i)] = lo + (hi - lo) * static_cast<double>(i) / (points - 1);
  grid.back() = hi;
  return grid;
}
}  // namespace detail

// Smallest grid threshold with V <= alpha, on an ascending grid over
// [lambda_min, lambda_deploy]. Grid rounding is upward and therefore
// conservative: the returned point satisfies V <= alpha itself. Falls back to
// the deployed threshold when no grid point qualifies.
inline double threshold_update(const SampleBatch& batch, const RiskSpec& spec, const SolvePlan& plan,
                               const ThresholdWindow& window, int grid_size, double epsilon) {
  if (grid_size < 2) throw std::invalid_argument("threshold_update: grid_size must be >= 2");
  const double lambda_prev = batch.lambda_deploy;
  const auto grid = detail::ascending_grid(window.lambda_min, lambda_prev, grid_size);
  const auto curve = risk_curve(batch, grid, epsilon);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double v = curve[i] + plan.width + spec.tau * (lambda_prev - grid[i]);
    if (v <= spec.alpha) return grid[i];
  }
  return lambda_prev;
}

// Quantile-risk variant. Every per-record loss is non-increasing in the
// evaluation threshold, so the loss CDF is pointwise ordered across the grid,
// the quantile risk is non-increasing, and V is non-increasing too; the
// smallest qualifying grid point can therefore be found by index bisection
// with O(log G) CDF builds instead of a full scan.
inline double threshold_update_quantile(const SampleBatch& batch, const RiskSpec& spec,
                                        const SolvePlan& plan, const ThresholdWindow& window,
                                        const WeightFn& psi, int grid_size, double epsilon) {
  if (grid_size < 2) throw std::invalid_argument("threshold_update_quantile: grid_size must be >= 2");
  const double lambda_prev = batch.lambda_deploy;
  const auto grid = detail::ascending_grid(window.lambda_min, lambda_prev, grid_size);
  std::vector<double> losses(batch.records.size());
  const auto v_at = [&](double lambda) {
    for (std::size_t i = 0; i < batch.records.size(); ++i)
      losses[i] = loss_eval(batch.records[i], lambda, epsilon);
    const double risk = quantile_risk(empirical_cdf(losses), psi);
    return risk + plan.width + spec.tau * (lambda_prev - lambda);
  };
  if (v_at(grid.back()) > spec.alpha) return lambda_prev;
  if (v_at(grid.front()) <= spec.alpha) return grid.front();
  std::size_t lo = 0, hi = grid.size() - 1;  // V(lo) > alpha >= V(hi)
  while (hi - lo > 1) {
    const std::size_t mid = lo + (hi - lo) / 2;
    (v_at(grid[mid]) <= spec.alpha ? hi : lo) = mid;
  }
  return grid[hi];
}

enum class StopReason { converged, budget_exhausted, no_solve_plan };

struct IterationStats {
  double empirical_risk = 0.0;  // batch risk at the chosen threshold
  double width = 0.0;
  double guard = 0.0;  // tau * (lambda_prev - lambda_chosen)
};

struct Trajectory {
  std::vector<double> iterates;  // lambda_hat_0 .. lambda_hat_T, starts at lambda_safe
  std::vector<IterationStats> per_iteration;
  StopReason stop_reason = StopReason::no_solve_plan;
  std::optional<SolvePlan> plan;
};

inline const char* to_string(StopReason r) {
  switch (r) {
    case StopReason::converged: return "converged";
    case StopReason::budget_exhausted: return "budget_exhausted";
    case StopReason::no_solve_plan: return "no_solve_plan";
  }
  return "unknown";
}

// Batches are drawn through a sampler callback so tests can substitute
// synthetic environments; the callback sees the deployed threshold, the batch
// size, and the loop's own RNG stream.
using EnvSampler = std::function<SampleBatch(double lambda_deploy, int n, Rng& rng)>;

namespace detail {

template <typename UpdateFn>
Trajectory run_loop(const EnvSampler& env, const RiskSpec& spec, const ThresholdWindow& window,
                    const std::optional<SolvePlan>& plan, std::uint64_t seed, double epsilon,
                    const UpdateFn& update) {
  Trajectory traj;
  traj.iterates.push_back(window.lambda_safe);
  if (!plan) {
    traj.stop_reason = StopReason::no_solve_plan;
    return traj;
  }
  traj.plan = *plan;
  Rng rng(seed);
  double lambda_prev = window.lambda_safe;
  for (int t = 1; t <= plan->t_tilde; ++t) {
    const SampleBatch batch = env(lambda_prev, spec.n, rng);
    const double lambda_t = update(batch);
    traj.iterates.push_back(lambda_t);
    traj.per_iteration.push_back({empirical_risk(batch, lambda_t, epsilon), plan->width,
                                  spec.tau * (lambda_prev - lambda_t)});
    if (lambda_t >= lambda_prev - plan->delta_lambda) {
      traj.stop_reason = StopReason::converged;
      return traj;
    }
    lambda_prev = lambda_t;
  }
  // Unreachable when a plan exists: T non-stopping iterations each advance
  // more than delta_lambda >= window / T, exceeding the window itself.
  throw std::logic_error("run_prc: iteration budget exhausted despite a valid solve plan");
}

}  // namespace detail

inline Trajectory run_prc(const EnvSampler& env, const RiskSpec& spec, const ThresholdWindow& window,
                          const WidthMethod& method, int grid_size, std::uint64_t seed,
                          double epsilon) {
  const auto plan = joint_solve(spec, window, method);
  return detail::run_loop(env, spec, window, plan, seed, epsilon, [&](const SampleBatch& batch) {
    return threshold_update(batch, spec, *plan, window, grid_size, epsilon);
  });
}

// Width rule for the quantile loop: either the closed-form asymptotic CVaR
// width, or the distribution-free DKW-band constant sup|psi| * eps(n, d')
// (shifting a CDF uniformly by eps moves the weighted quantile integral by at
// most sup|psi| * eps over a unit loss range).
struct QuantileWidthRule {
  enum class Kind { quantile_clt, dkw_band };
  Kind kind = Kind::quantile_clt;
  double beta = 0.0;
  double p_rate = 0.0;

  static QuantileWidthRule QuantileClt(double beta_, double p_rate_) {
    return {Kind::quantile_clt, beta_, p_rate_};
  }
  static QuantileWidthRule DkwBand() { return {Kind::dkw_band}; }

  double width(int n, double delta_prime, const WeightFn& psi) const {
    if (kind == Kind::quantile_clt) return cvar_clt_width(n, delta_prime, beta, p_rate);
    return m_factor(psi, std::numeric_limits<double>::infinity()) * dkw_epsilon(n, delta_prime);
  }
};

inline Trajectory run_prc_quantile(const EnvSampler& env, const RiskSpec& spec,
                                   const ThresholdWindow& window, const WeightFn& psi,
                                   const QuantileWidthRule& rule, int grid_size, std::uint64_t seed,
                                   double epsilon) {
  psi.validate();
  if (!psi.has_density())
    throw std::invalid_argument(
        "run_prc_quantile: VaR weight is measurement-only and carries no guarantee; use a density weight");
  const auto plan = joint_solve_with(
      spec, window, [&](int n, double dp) { return rule.width(n, dp, psi); });
  return detail::run_loop(env, spec, window, plan, seed, epsilon, [&](const SampleBatch& batch) {
    return threshold_update_quantile(batch, spec, *plan, window, psi, grid_size, epsilon);
  });
}

}  // namespace riskcal
