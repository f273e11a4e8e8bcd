#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "riskcal/env.hpp"

using Catch::Matchers::WithinAbs;
using namespace riskcal;

namespace {

std::string write_temp(const char* name, const std::string& content) {
  const std::string path = std::string("/tmp/") + name;
  std::ofstream out(path);
  out << content;
  return path;
}

}  // namespace

TEST_CASE("strategic shift shaves scores only into the approval region", "[env]") {
  // approval region at lambda = 0.4 is score <= 0.6
  REQUIRE_THAT(shift_score(0.65, 0.4, 0.3), WithinAbs(0.35, 1e-15));  // shaved score approved
  REQUIRE(shift_score(0.95, 0.4, 0.3) == 0.95);                      // shaving would not help
  REQUIRE(shift_score(0.2, 0.4, 0.3) == 0.0);                        // clamped at zero
  REQUIRE(shift_score(0.5, 0.4, 0.0) == 0.5);                        // no shaving budget
}

TEST_CASE("sampled batches respect the configured environment", "[env]") {
  CreditEnvConfig cfg = CreditEnvConfig::balanced();
  Rng rng(5);
  const SampleBatch batch = sample_batch(cfg, 0.4, 5000, rng);
  REQUIRE(batch.lambda_deploy == 0.4);
  REQUIRE(batch.records.size() == 5000);
  int positives = 0;
  for (const auto& rec : batch.records) {
    REQUIRE((rec.label == 0 || rec.label == 1));
    REQUIRE(rec.score >= 0.0);
    REQUIRE(rec.score <= 1.0);
    REQUIRE(rec.cost == 1.0);  // cost model off
    positives += rec.label;
  }
  REQUIRE_THAT(static_cast<double>(positives) / 5000, WithinAbs(cfg.p_pos, 0.03));

  CreditEnvConfig imb = CreditEnvConfig::imbalanced();
  Rng rng2(5);
  const SampleBatch batch2 = sample_batch(imb, 0.4, 5000, rng2);
  bool any_partial_cost = false;
  for (const auto& rec : batch2.records) {
    if (rec.label == 1) {
      REQUIRE(rec.cost >= 0.0);
      REQUIRE(rec.cost <= 1.0);
      any_partial_cost = any_partial_cost || rec.cost < 1.0;
    } else {
      REQUIRE(rec.cost == 1.0);
    }
  }
  REQUIRE(any_partial_cost);

  Rng rng3(1);
  REQUIRE_THROWS_AS(sample_batch(cfg, 0.4, 0, rng3), std::invalid_argument);
}

TEST_CASE("same seed reproduces the batch exactly", "[env]") {
  const CreditEnvConfig cfg = CreditEnvConfig::balanced();
  Rng a(99), b(99);
  const SampleBatch ba = sample_batch(cfg, 0.3, 1000, a);
  const SampleBatch bb = sample_batch(cfg, 0.3, 1000, b);
  for (std::size_t i = 0; i < ba.records.size(); ++i) {
    REQUIRE(ba.records[i].score == bb.records[i].score);
    REQUIRE(ba.records[i].label == bb.records[i].label);
    REQUIRE(ba.records[i].cost == bb.records[i].cost);
  }
}

TEST_CASE("risk under a fixed evaluation moves at most gamma per unit deployed shift",
          "[env]") {
  // common random numbers isolate the flip band: records whose shaving
  // decision changes between the two deployments; only positive-label flips
  // can change the loss, and their mass is at most gamma times the shift
  CreditEnvConfig cfg = CreditEnvConfig::balanced();
  cfg.epsilon = 0.01;
  const double d = 0.05;
  const int n = 200000;
  Rng a(7), b(7);
  const SampleBatch batch_a = sample_batch(cfg, 0.40, n, a);
  const SampleBatch batch_b = sample_batch(cfg, 0.40 + d, n, b);
  const double gamma = analytic_gamma(cfg);
  for (const double mu : {0.45, 0.55, 0.7}) {
    const double diff =
        std::fabs(empirical_risk(batch_a, mu, cfg.epsilon) - empirical_risk(batch_b, mu, cfg.epsilon));
    REQUIRE(diff <= gamma * d + 4.0 * std::sqrt(gamma * d / n) + 1e-3);
  }
}

TEST_CASE("beta peak density matches closed forms", "[env]") {
  REQUIRE_THAT(beta_max_density({2.0, 2.0}), WithinAbs(1.5, 1e-12));
  REQUIRE_THAT(beta_max_density({2.0, 5.0}), WithinAbs(2.4576, 1e-12));
  REQUIRE(beta_max_density({1.0, 1.0}) == 1.0);
  REQUIRE(beta_max_density({1.0, 3.0}) == 3.0);
  REQUIRE(beta_max_density({3.0, 1.0}) == 3.0);
  REQUIRE_THROWS_AS(beta_max_density({0.5, 2.0}), std::domain_error);
}

TEST_CASE("analytic gamma multiplies base rate by peak density", "[env]") {
  REQUIRE_THAT(analytic_gamma(CreditEnvConfig::balanced()), WithinAbs(0.648, 1e-12));
  REQUIRE_THAT(analytic_gamma(CreditEnvConfig::imbalanced()), WithinAbs(0.096, 1e-12));
}

TEST_CASE("histogram gamma estimate recovers the analytic value", "[env]") {
  CreditEnvConfig cfg = CreditEnvConfig::balanced();
  cfg.shift_s = 0.0;  // base scores, no strategic response
  Rng rng(41);
  const SampleBatch batch = sample_batch(cfg, 0.0, 200000, rng);
  std::vector<double> positives;
  for (const auto& rec : batch.records)
    if (rec.label == 1) positives.push_back(rec.score);
  const double p_rate = static_cast<double>(positives.size()) / batch.records.size();
  const SensitivityEstimate est = estimate_gamma(positives, p_rate, 20);
  REQUIRE(est.bins == 20);
  REQUIRE_THAT(est.gamma_hat, WithinAbs(0.648, 0.05));
  REQUIRE_THAT(est.gamma_hat, WithinAbs(est.p_rate * est.c_max, 1e-15));
}

TEST_CASE("histogram gamma estimate flags concentrated scores", "[env]") {
  const std::vector<double> spike(1000, 0.5);
  const SensitivityEstimate est = estimate_gamma(spike, 0.4, 10);
  REQUIRE_THAT(est.c_max, WithinAbs(10.0, 1e-12));  // all mass in one of ten bins
  REQUIRE_THAT(est.gamma_hat, WithinAbs(4.0, 1e-12));
  // scores exactly at 1.0 must land in the top bin, not out of range
  const std::vector<double> edge = {1.0, 1.0, 0.0};
  REQUIRE_NOTHROW(estimate_gamma(edge, 0.5, 4));
  REQUIRE_THROWS_AS(estimate_gamma(std::vector<double>{}, 0.5, 4), std::invalid_argument);
  REQUIRE_THROWS_AS(estimate_gamma(spike, 0.5, 0), std::invalid_argument);
}

TEST_CASE("score csv loader accepts well-formed files", "[env]") {
  const auto path = write_temp("riskcal_scores_ok.csv",
                               "score,label\n0.25,1\n0.7,0\n 0.5 , 1 \n\n1.0,0\n");
  const auto [scores, labels] = load_scores_csv(path);
  REQUIRE(scores == std::vector<double>{0.25, 0.7, 0.5, 1.0});
  REQUIRE(labels == std::vector<int>{1, 0, 1, 0});
  std::remove(path.c_str());
}

TEST_CASE("score csv loader rejects malformed files with line numbers", "[env]") {
  using Catch::Matchers::ContainsSubstring;
  const struct {
    const char* name;
    const char* content;
    const char* message;
  } cases[] = {
      {"riskcal_bad_header.csv", "points,label\n0.5,1\n", "line 1"},
      {"riskcal_bad_fields.csv", "score,label\n0.5,1,9\n", "line 2"},
      {"riskcal_bad_number.csv", "score,label\n0.5,1\nx,0\n", "line 3"},
      {"riskcal_bad_trailing.csv", "score,label\n0.5x,1\n", "line 2"},
      {"riskcal_bad_range.csv", "score,label\n1.5,1\n", "out of [0,1]"},
      {"riskcal_bad_label.csv", "score,label\n0.5,2\n", "label"},
      {"riskcal_bad_empty.csv", "score,label\n", "no data rows"},
  };
  for (const auto& c : cases) {
    const auto path = write_temp(c.name, c.content);
    REQUIRE_THROWS_WITH(load_scores_csv(path), ContainsSubstring(c.message));
    std::remove(path.c_str());
  }
  REQUIRE_THROWS_WITH(load_scores_csv("/tmp/riskcal_definitely_missing.csv"),
                      ContainsSubstring("cannot open"));
}

TEST_CASE("environment validation rejects out-of-range settings", "[env]") {
  CreditEnvConfig cfg = CreditEnvConfig::balanced();
  REQUIRE_NOTHROW(cfg.validate());
  cfg.p_pos = 1.5;
  REQUIRE_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = CreditEnvConfig::balanced();
  cfg.shift_s = -0.1;
  REQUIRE_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = CreditEnvConfig::balanced();
  cfg.epsilon = 0.0;
  REQUIRE_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = CreditEnvConfig::balanced();
  cfg.pos_score_dist.a = 0.0;
  REQUIRE_THROWS_AS(cfg.validate(), std::invalid_argument);
}
