#pragma once

// JSON wire format for experiment configuration and report summaries. Parsing
// is strict: an unknown key raises std::invalid_argument naming the key, so a
// typo in a config file fails loudly instead of silently running defaults.
// Absent keys fall back to the struct defaults.

#include <initializer_list>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "riskcal/bounds.hpp"
#include "riskcal/env.hpp"
#include "riskcal/harness.hpp"
#include "riskcal/prc.hpp"
#include "riskcal/quantile.hpp"
#include "riskcal/risk_core.hpp"

namespace riskcal {

using ordered_json = nlohmann::ordered_json;

namespace detail {

inline void check_keys(const nlohmann::json& j, const char* what,
                       std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw std::invalid_argument(std::string(what) + ": expected a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* key : allowed) known = known || it.key() == key;
    if (!known)
      throw std::invalid_argument(std::string(what) + ": unknown key \"" + it.key() + "\"");
  }
}

template <typename T>
void assign_if(const nlohmann::json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) out = it->get<T>();
}

}  // namespace detail

inline ordered_json spec_to_json(const RiskSpec& spec) {
  return {{"alpha", spec.alpha},
          {"delta_alpha", spec.delta_alpha},
          {"delta", spec.delta},
          {"tau", spec.tau},
          {"n", spec.n}};
}

inline RiskSpec spec_from_json(const nlohmann::json& j) {
  detail::check_keys(j, "spec", {"alpha", "delta_alpha", "delta", "tau", "n"});
  RiskSpec spec;
  detail::assign_if(j, "alpha", spec.alpha);
  detail::assign_if(j, "delta_alpha", spec.delta_alpha);
  detail::assign_if(j, "delta", spec.delta);
  detail::assign_if(j, "tau", spec.tau);
  detail::assign_if(j, "n", spec.n);
  return spec;
}

inline ordered_json window_to_json(const ThresholdWindow& window) {
  return {{"lambda_min", window.lambda_min}, {"lambda_safe", window.lambda_safe}};
}

inline ThresholdWindow window_from_json(const nlohmann::json& j) {
  detail::check_keys(j, "window", {"lambda_min", "lambda_safe"});
  ThresholdWindow window;
  detail::assign_if(j, "lambda_min", window.lambda_min);
  detail::assign_if(j, "lambda_safe", window.lambda_safe);
  return window;
}

inline ordered_json env_to_json(const CreditEnvConfig& env) {
  return {{"p_pos", env.p_pos},
          {"pos_shape", {env.pos_score_dist.a, env.pos_score_dist.b}},
          {"neg_shape", {env.neg_score_dist.a, env.neg_score_dist.b}},
          {"shift_s", env.shift_s},
          {"epsilon", env.epsilon},
          {"cost_model", env.cost_model == CostModel::off ? "off" : "uniform"}};
}

inline CreditEnvConfig env_from_json(const nlohmann::json& j) {
  detail::check_keys(j, "env",
                     {"p_pos", "pos_shape", "neg_shape", "shift_s", "epsilon", "cost_model"});
  CreditEnvConfig env;
  detail::assign_if(j, "p_pos", env.p_pos);
  const auto read_shape = [&](const char* key, BetaShape& shape) {
    auto it = j.find(key);
    if (it == j.end()) return;
    if (!it->is_array() || it->size() != 2)
      throw std::invalid_argument(std::string("env.") + key + ": expected [a, b]");
    shape.a = (*it)[0].get<double>();
    shape.b = (*it)[1].get<double>();
  };
  read_shape("pos_shape", env.pos_score_dist);
  read_shape("neg_shape", env.neg_score_dist);
  detail::assign_if(j, "shift_s", env.shift_s);
  detail::assign_if(j, "epsilon", env.epsilon);
  if (auto it = j.find("cost_model"); it != j.end()) {
    const std::string name = it->get<std::string>();
    if (name == "off")
      env.cost_model = CostModel::off;
    else if (name == "uniform")
      env.cost_model = CostModel::uniform;
    else
      throw std::invalid_argument("env.cost_model: expected \"off\" or \"uniform\", got \"" + name +
                                  "\"");
  }
  return env;
}

inline ordered_json method_to_json(const WidthMethod& method) {
  switch (method.kind) {
    case WidthKind::hoeffding: return "hoeffding";
    case WidthKind::empirical_bernstein: return "empirical_bernstein";
    case WidthKind::hoeffding_bentkus: return "hoeffding_bentkus";
    case WidthKind::clt: return "clt";
    case WidthKind::quantile_clt:
      return {{"quantile_clt", {{"beta", method.beta}, {"p_rate", method.p_rate}}}};
  }
  throw std::logic_error("method_to_json: unknown width kind");
}

inline WidthMethod method_from_json(const nlohmann::json& j) {
  if (j.is_string()) {
    const std::string name = j.get<std::string>();
    if (name == "hoeffding") return WidthMethod::Hoeffding();
    if (name == "empirical_bernstein") return WidthMethod::EmpiricalBernstein();
    if (name == "hoeffding_bentkus") return WidthMethod::HoeffdingBentkus();
    if (name == "clt") return WidthMethod::Clt();
    throw std::invalid_argument("method: unknown name \"" + name + "\"");
  }
  detail::check_keys(j, "method", {"quantile_clt"});
  auto it = j.find("quantile_clt");
  if (it == j.end()) throw std::invalid_argument("method: expected a name or {\"quantile_clt\": ...}");
  detail::check_keys(*it, "method.quantile_clt", {"beta", "p_rate"});
  double beta = 0.0, p_rate = 0.0;
  detail::assign_if(*it, "beta", beta);
  detail::assign_if(*it, "p_rate", p_rate);
  return WidthMethod::QuantileClt(beta, p_rate);
}

inline ordered_json psi_to_json(const WeightFn& psi) {
  switch (psi.kind) {
    case WeightKind::uniform: return "uniform";
    case WeightKind::cvar: return {{"cvar", psi.beta}};
    case WeightKind::var: return {{"var", psi.beta}};
    case WeightKind::piecewise_constant:
      return {{"piecewise_constant",
               {{"breakpoints", psi.breakpoints}, {"weights", psi.weights}}}};
  }
  throw std::logic_error("psi_to_json: unknown weight kind");
}

inline WeightFn psi_from_json(const nlohmann::json& j) {
  if (j.is_string()) {
    if (j.get<std::string>() == "uniform") return WeightFn::Uniform();
    throw std::invalid_argument("psi: unknown name \"" + j.get<std::string>() + "\"");
  }
  detail::check_keys(j, "psi", {"cvar", "var", "piecewise_constant"});
  if (j.size() != 1)
    throw std::invalid_argument("psi: expected exactly one of cvar, var, piecewise_constant");
  if (auto it = j.find("cvar"); it != j.end()) return WeightFn::Cvar(it->get<double>());
  if (auto it = j.find("var"); it != j.end()) return WeightFn::Var(it->get<double>());
  const auto& pc = j.at("piecewise_constant");
  detail::check_keys(pc, "psi.piecewise_constant", {"breakpoints", "weights"});
  std::vector<double> breakpoints, weights;
  detail::assign_if(pc, "breakpoints", breakpoints);
  detail::assign_if(pc, "weights", weights);
  return WeightFn::PiecewiseConstant(breakpoints, weights);
}

inline ordered_json quantile_rule_to_json(const QuantileWidthRule& rule) {
  if (rule.kind == QuantileWidthRule::Kind::dkw_band) return "dkw_band";
  return {{"quantile_clt", {{"beta", rule.beta}, {"p_rate", rule.p_rate}}}};
}

inline QuantileWidthRule quantile_rule_from_json(const nlohmann::json& j) {
  if (j.is_string()) {
    if (j.get<std::string>() == "dkw_band") return QuantileWidthRule::DkwBand();
    throw std::invalid_argument("quantile_rule: unknown name \"" + j.get<std::string>() + "\"");
  }
  detail::check_keys(j, "quantile_rule", {"quantile_clt"});
  auto it = j.find("quantile_clt");
  if (it == j.end())
    throw std::invalid_argument("quantile_rule: expected \"dkw_band\" or {\"quantile_clt\": ...}");
  detail::check_keys(*it, "quantile_rule.quantile_clt", {"beta", "p_rate"});
  double beta = 0.0, p_rate = 0.0;
  detail::assign_if(*it, "beta", beta);
  detail::assign_if(*it, "p_rate", p_rate);
  return QuantileWidthRule::QuantileClt(beta, p_rate);
}

inline ordered_json config_to_json(const ExperimentConfig& config) {
  ordered_json j;
  j["spec"] = spec_to_json(config.spec);
  j["env"] = env_to_json(config.env);
  j["window"] = window_to_json(config.window);
  j["method"] = method_to_json(config.method);
  j["psi"] = config.psi ? psi_to_json(*config.psi) : ordered_json(nullptr);
  j["quantile_rule"] = quantile_rule_to_json(config.quantile_rule);
  j["trajectories"] = config.trajectories;
  j["n_validation"] = config.n_validation;
  j["master_seed"] = config.master_seed;
  j["grid_size"] = config.grid_size;
  j["threads"] = config.threads;
  return j;
}

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  detail::check_keys(j, "config",
                     {"spec", "env", "window", "method", "psi", "quantile_rule", "trajectories",
                      "n_validation", "master_seed", "grid_size", "threads"});
  ExperimentConfig config;
  if (auto it = j.find("spec"); it != j.end()) config.spec = spec_from_json(*it);
  if (auto it = j.find("env"); it != j.end()) config.env = env_from_json(*it);
  if (auto it = j.find("window"); it != j.end()) config.window = window_from_json(*it);
  if (auto it = j.find("method"); it != j.end()) config.method = method_from_json(*it);
  if (auto it = j.find("psi"); it != j.end() && !it->is_null()) config.psi = psi_from_json(*it);
  if (auto it = j.find("quantile_rule"); it != j.end())
    config.quantile_rule = quantile_rule_from_json(*it);
  detail::assign_if(j, "trajectories", config.trajectories);
  detail::assign_if(j, "n_validation", config.n_validation);
  detail::assign_if(j, "master_seed", config.master_seed);
  detail::assign_if(j, "grid_size", config.grid_size);
  detail::assign_if(j, "threads", config.threads);
  return config;
}

inline ordered_json plan_to_json(const SolvePlan& plan) {
  return {{"t_tilde", plan.t_tilde}, {"delta_lambda", plan.delta_lambda}, {"width", plan.width}};
}

inline SolvePlan plan_from_json(const nlohmann::json& j) {
  detail::check_keys(j, "plan", {"t_tilde", "delta_lambda", "width"});
  SolvePlan plan;
  detail::assign_if(j, "t_tilde", plan.t_tilde);
  detail::assign_if(j, "delta_lambda", plan.delta_lambda);
  detail::assign_if(j, "width", plan.width);
  return plan;
}

inline ordered_json aggregates_to_json(const Aggregates& agg) {
  return {{"any_iteration_safety_failures", agg.any_iteration_safety_failures},
          {"final_safety_failures", agg.final_safety_failures},
          {"tightness_failures", agg.tightness_failures},
          {"tightness_eligible", agg.tightness_eligible},
          {"lambda_final_mean", agg.lambda_final_mean},
          {"lambda_final_p05", agg.lambda_final_p05},
          {"lambda_final_p50", agg.lambda_final_p50},
          {"lambda_final_p95", agg.lambda_final_p95},
          {"validation_slack", agg.validation_slack}};
}

inline Aggregates aggregates_from_json(const nlohmann::json& j) {
  detail::check_keys(j, "aggregates",
                     {"any_iteration_safety_failures", "final_safety_failures",
                      "tightness_failures", "tightness_eligible", "lambda_final_mean",
                      "lambda_final_p05", "lambda_final_p50", "lambda_final_p95",
                      "validation_slack"});
  Aggregates agg;
  detail::assign_if(j, "any_iteration_safety_failures", agg.any_iteration_safety_failures);
  detail::assign_if(j, "final_safety_failures", agg.final_safety_failures);
  detail::assign_if(j, "tightness_failures", agg.tightness_failures);
  detail::assign_if(j, "tightness_eligible", agg.tightness_eligible);
  detail::assign_if(j, "lambda_final_mean", agg.lambda_final_mean);
  detail::assign_if(j, "lambda_final_p05", agg.lambda_final_p05);
  detail::assign_if(j, "lambda_final_p50", agg.lambda_final_p50);
  detail::assign_if(j, "lambda_final_p95", agg.lambda_final_p95);
  detail::assign_if(j, "validation_slack", agg.validation_slack);
  return agg;
}

inline StopReason stop_reason_from_string(const std::string& name) {
  if (name == "converged") return StopReason::converged;
  if (name == "budget_exhausted") return StopReason::budget_exhausted;
  if (name == "no_solve_plan") return StopReason::no_solve_plan;
  throw std::invalid_argument("stop_reason: unknown value \"" + name + "\"");
}

}  // namespace riskcal
