#pragma once

// Synthetic credit-scoring environment that reacts to the deployed threshold.
// Records carry a base score drawn from a class-conditional Beta distribution;
// an applicant games the deployed threshold by shaving s off their score
// whenever the shaved score would clear the approval boundary. The resulting
// threshold sensitivity of the loss law is gamma = p_pos * C, with C the peak
// density of the positive-class base scores: moving the threshold by d slides
// at most p_pos * C * d probability mass across the approval boundary.

#include <cmath>
#include <fstream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "riskcal/risk_core.hpp"
#include "riskcal/rng.hpp"

namespace riskcal {

enum class CostModel { off, uniform };

struct BetaShape {
  double a = 2.0;
  double b = 2.0;
};

struct CreditEnvConfig {
  double p_pos = 0.432;           // positive (delinquency) base rate
  BetaShape pos_score_dist{2.0, 2.0};
  BetaShape neg_score_dist{2.0, 5.0};
  double shift_s = 0.3;           // score reduction available to gaming applicants
  double epsilon = 1e-4;          // loss ramp half-width
  CostModel cost_model = CostModel::off;

  // balanced default: expected-risk experiments
  static CreditEnvConfig balanced() { return {}; }

  // imbalanced default: tail-risk experiments, realized costs on
  static CreditEnvConfig imbalanced() {
    CreditEnvConfig cfg;
    cfg.p_pos = 0.064;
    cfg.cost_model = CostModel::uniform;
    return cfg;
  }

  void validate() const {
    if (!(p_pos >= 0.0 && p_pos <= 1.0))
      throw std::invalid_argument("CreditEnvConfig: p_pos must be in [0,1]");
    if (!(pos_score_dist.a > 0.0 && pos_score_dist.b > 0.0 && neg_score_dist.a > 0.0 &&
          neg_score_dist.b > 0.0))
      throw std::invalid_argument("CreditEnvConfig: Beta shapes must be > 0");
    if (!(shift_s >= 0.0 && shift_s <= 1.0))
      throw std::invalid_argument("CreditEnvConfig: shift_s must be in [0,1]");
    if (!(epsilon > 0.0)) throw std::invalid_argument("CreditEnvConfig: epsilon must be > 0");
  }
};

// Strategic response to the deployed threshold: shave s off the base score if
// the shaved score lands inside the approval region, else report honestly.
inline double shift_score(double f0, double lambda_deploy, double s) {
  return (f0 - s <= 1.0 - lambda_deploy) ? std::max(0.0, f0 - s) : f0;
}

inline SampleBatch sample_batch(const CreditEnvConfig& cfg, double lambda_deploy, int n, Rng& rng) {
  cfg.validate();
  if (n < 1) throw std::invalid_argument("sample_batch: n must be >= 1");
  SampleBatch batch;
  batch.lambda_deploy = lambda_deploy;
  batch.records.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    SampleRecord rec;
    rec.label = rng.bernoulli(cfg.p_pos) ? 1 : 0;
    const BetaShape& shape = rec.label == 1 ? cfg.pos_score_dist : cfg.neg_score_dist;
    const double f0 = rng.beta(shape.a, shape.b);
    rec.score = shift_score(f0, lambda_deploy, cfg.shift_s);
    rec.cost = (rec.label == 1 && cfg.cost_model == CostModel::uniform) ? rng.uniform01() : 1.0;
    batch.records.push_back(rec);
  }
  return batch;
}

struct SensitivityEstimate {
  double gamma_hat = 0.0;  // p_rate * c_max
  double p_rate = 0.0;
  double c_max = 0.0;      // peak histogram density of the positive-class scores
  int bins = 0;
};

// Histogram plug-in estimate of the sensitivity constant from positive-class
// base scores: C is the tallest equal-width density bar over [0,1].
inline SensitivityEstimate estimate_gamma(std::span<const double> positive_scores, double p_rate,
                                          int bins) {
  if (positive_scores.empty()) throw std::invalid_argument("estimate_gamma: no positive scores");
  if (bins < 1) throw std::invalid_argument("estimate_gamma: bins must be >= 1");
  if (!(p_rate >= 0.0 && p_rate <= 1.0))
    throw std::invalid_argument("estimate_gamma: p_rate must be in [0,1]");
  std::vector<long long> counts(static_cast<std::size_t>(bins), 0);
  for (double s : positive_scores) {
    if (!(s >= 0.0 && s <= 1.0))
      throw std::invalid_argument("estimate_gamma: scores must be in [0,1]");
    auto idx = static_cast<std::size_t>(s * bins);
    if (idx >= counts.size()) idx = counts.size() - 1;  // s == 1.0
    ++counts[idx];
  }
  long long max_count = 0;
  for (long long c : counts) max_count = std::max(max_count, c);
  SensitivityEstimate est;
  est.bins = bins;
  est.p_rate = p_rate;
  est.c_max = static_cast<double>(max_count) * bins / static_cast<double>(positive_scores.size());
  est.gamma_hat = p_rate * est.c_max;
  return est;
}

namespace detail {
inline double log_beta_fn(double a, double b) {
  return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}
}  // namespace detail

// Peak density of Beta(a, b); finite only for a, b >= 1.
inline double beta_max_density(const BetaShape& shape) {
  const double a = shape.a, b = shape.b;
  if (a < 1.0 || b < 1.0)
    throw std::domain_error("beta_max_density: unbounded density for shape parameters < 1");
  if (a == 1.0 && b == 1.0) return 1.0;
  if (a == 1.0) return b;  // mode at 0
  if (b == 1.0) return a;  // mode at 1
  const double mode = (a - 1.0) / (a + b - 2.0);
  return std::exp((a - 1.0) * std::log(mode) + (b - 1.0) * std::log(1.0 - mode) -
                  detail::log_beta_fn(a, b));
}

inline double analytic_gamma(const CreditEnvConfig& cfg) {
  cfg.validate();
  return cfg.p_pos * beta_max_density(cfg.pos_score_dist);
}

// Reads "score,label" rows (header required). Scores in [0,1], labels 0/1.
inline std::pair<std::vector<double>, std::vector<int>> load_scores_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_scores_csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("load_scores_csv: empty file " + path);
  auto strip = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  if (strip(line) != "score,label")
    throw std::runtime_error("load_scores_csv: line 1: expected header \"score,label\"");
  std::vector<double> scores;
  std::vector<int> labels;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (strip(line).empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos || line.find(',', comma + 1) != std::string::npos)
      throw std::runtime_error("load_scores_csv: line " + std::to_string(line_no) +
                               ": expected exactly two comma-separated fields");
    double score;
    int label;
    try {
      const std::string sc = strip(line.substr(0, comma));
      const std::string lab = strip(line.substr(comma + 1));
      std::size_t used = 0, used2 = 0;
      score = std::stod(sc, &used);
      label = std::stoi(lab, &used2);
      if (used != sc.size() || used2 != lab.size()) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw std::runtime_error("load_scores_csv: line " + std::to_string(line_no) +
                               ": malformed numeric field");
    }
    if (!(score >= 0.0 && score <= 1.0))
      throw std::runtime_error("load_scores_csv: line " + std::to_string(line_no) +
                               ": score out of [0,1]");
    if (label != 0 && label != 1)
      throw std::runtime_error("load_scores_csv: line " + std::to_string(line_no) +
                               ": label must be 0 or 1");
    scores.push_back(score);
    labels.push_back(label);
  }
  if (scores.empty()) throw std::runtime_error("load_scores_csv: no data rows in " + path);
  return {std::move(scores), std::move(labels)};
}

}  // namespace riskcal
