#include <cmath>
#include <stdexcept>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "riskcal/risk_core.hpp"
#include "riskcal/rng.hpp"

using Catch::Matchers::WithinAbs;
using riskcal::empirical_risk;
using riskcal::loss_eval;
using riskcal::risk_curve;
using riskcal::RiskSpec;
using riskcal::SampleBatch;
using riskcal::SampleRecord;
using riskcal::ThresholdWindow;

namespace {

SampleBatch random_batch(int n, std::uint64_t seed, double lambda_deploy = 0.4) {
  riskcal::Rng rng(seed);
  SampleBatch batch;
  batch.lambda_deploy = lambda_deploy;
  for (int i = 0; i < n; ++i) {
    SampleRecord rec;
    rec.score = rng.uniform01();
    rec.label = rng.bernoulli(0.45) ? 1 : 0;
    rec.cost = rng.bernoulli(0.5) ? 1.0 : rng.uniform01();
    batch.records.push_back(rec);
  }
  return batch;
}

}  // namespace

TEST_CASE("loss ramp pins endpoints, midpoint, and label gating", "[risk_core]") {
  const double eps = 0.1;
  const double lambda = 0.5;  // approval boundary at score 0.5, ramp over [0.4, 0.6]
  REQUIRE(loss_eval({0.2, 1, 1.0}, lambda, eps) == 1.0);
  REQUIRE(loss_eval({0.8, 1, 1.0}, lambda, eps) == 0.0);
  REQUIRE_THAT(loss_eval({0.5, 1, 1.0}, lambda, eps), WithinAbs(0.5, 1e-15));
  REQUIRE_THAT(loss_eval({0.45, 1, 1.0}, lambda, eps), WithinAbs(0.75, 1e-15));
  REQUIRE_THAT(loss_eval({0.4, 1, 1.0}, lambda, eps), WithinAbs(1.0, 1e-12));  // ramp bottom edge
  REQUIRE(loss_eval({0.6, 1, 1.0}, lambda, eps) == 0.0);   // ramp top edge
  REQUIRE(loss_eval({0.2, 0, 1.0}, lambda, eps) == 0.0);   // negatives never lose
  REQUIRE_THAT(loss_eval({0.5, 1, 0.3}, lambda, eps), WithinAbs(0.15, 1e-15));
  REQUIRE_THROWS_AS(loss_eval({0.5, 1, 1.0}, lambda, 0.0), std::invalid_argument);
}

TEST_CASE("empirical risk averages per-record losses", "[risk_core]") {
  SampleBatch batch;
  batch.lambda_deploy = 0.5;
  batch.records = {{0.2, 1, 1.0}, {0.5, 1, 1.0}, {0.8, 1, 1.0}};
  REQUIRE_THAT(empirical_risk(batch, 0.5, 0.1), WithinAbs(0.5, 1e-15));

  SampleBatch empty;
  REQUIRE_THROWS_AS(empirical_risk(empty, 0.5, 0.1), std::invalid_argument);
}

TEST_CASE("the safe threshold zeroes every loss", "[risk_core]") {
  const double eps = 1e-4;
  const auto batch = random_batch(500, 3);
  REQUIRE(empirical_risk(batch, 1.0 + eps, eps) == 0.0);
  for (const auto& rec : batch.records) REQUIRE(loss_eval(rec, 1.0 + eps, eps) == 0.0);
}

TEST_CASE("risk curve equals the direct per-point evaluation", "[risk_core]") {
  for (const double eps : {1e-4, 0.05}) {
    const auto batch = random_batch(500, 5);
    std::vector<double> grid;
    for (int i = 0; i <= 100; ++i) grid.push_back(1.0001 * i / 100.0);
    const auto curve = risk_curve(batch, grid, eps);
    REQUIRE(curve.size() == grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i)
      REQUIRE_THAT(curve[i], WithinAbs(empirical_risk(batch, grid[i], eps), 1e-12));
  }
}

TEST_CASE("risk curve handles scores sitting exactly on ramp edges", "[risk_core]") {
  const double eps = 0.05;
  SampleBatch batch;
  batch.lambda_deploy = 0.5;
  // for lambda = 0.4 the ramp spans [0.55, 0.65]; place records on both edges,
  // the midpoint, and far outside
  batch.records = {{0.55, 1, 1.0}, {0.65, 1, 1.0}, {0.6, 1, 1.0}, {0.0, 1, 1.0}, {1.0, 1, 1.0}};
  const std::vector<double> grid = {0.3, 0.4, 0.5};
  const auto curve = risk_curve(batch, grid, eps);
  for (std::size_t i = 0; i < grid.size(); ++i)
    REQUIRE_THAT(curve[i], WithinAbs(empirical_risk(batch, grid[i], eps), 1e-14));
}

TEST_CASE("risk curve is non-increasing on an ascending grid", "[risk_core]") {
  const auto batch = random_batch(800, 9);
  std::vector<double> grid;
  for (int i = 0; i <= 200; ++i) grid.push_back(i / 200.0);
  const auto curve = risk_curve(batch, grid, 1e-3);
  for (std::size_t i = 1; i < curve.size(); ++i) REQUIRE(curve[i] <= curve[i - 1] + 1e-15);
}

TEST_CASE("risk curve rejects a non-ascending grid", "[risk_core]") {
  const auto batch = random_batch(10, 1);
  const std::vector<double> bad = {0.5, 0.4};
  REQUIRE_THROWS_AS(risk_curve(batch, bad, 1e-3), std::invalid_argument);
}

TEST_CASE("spec validation rejects out-of-range parameters", "[risk_core]") {
  RiskSpec ok;
  REQUIRE_NOTHROW(ok.validate());

  RiskSpec bad = ok;
  bad.alpha = 0.0;
  REQUIRE_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = ok;
  bad.alpha = 1.0;
  REQUIRE_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = ok;
  bad.delta_alpha = bad.alpha;  // tightness margin must leave room below alpha
  REQUIRE_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = ok;
  bad.delta_alpha = 0.0;
  REQUIRE_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = ok;
  bad.delta = 1.0;
  REQUIRE_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = ok;
  bad.tau = 0.0;
  REQUIRE_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = ok;
  bad.n = 1;
  REQUIRE_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("window validation rejects an inverted window", "[risk_core]") {
  ThresholdWindow ok;
  REQUIRE_NOTHROW(ok.validate());
  REQUIRE_THAT(ok.length(), WithinAbs(1.0001, 1e-12));

  ThresholdWindow bad;
  bad.lambda_min = 1.2;
  REQUIRE_THROWS_AS(bad.validate(), std::invalid_argument);
}
