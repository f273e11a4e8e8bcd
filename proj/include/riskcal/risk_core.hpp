#pragma once

// Core value types for threshold calibration plus the loss/risk evaluators.
//
// A decision threshold lambda approves a record when its score f falls at or
// below 1 - lambda (higher lambda = stricter). The loss of a record is
// label * cost * ramp, where the ramp is a clipped linear approval indicator
// smoothed over a band of half-width epsilon around the approval boundary, so
// the loss of every record is non-increasing in the evaluation threshold.

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

namespace riskcal {

struct ThresholdWindow {
  double lambda_min = 0.0;
  double lambda_safe = 1.0 + 1e-4;

  double length() const { return lambda_safe - lambda_min; }
  void validate() const {
    if (!(lambda_min < lambda_safe))
      throw std::invalid_argument("ThresholdWindow: lambda_min must be < lambda_safe");
  }
};

struct RiskSpec {
  double alpha = 0.3;        // risk ceiling
  double delta_alpha = 0.082;  // tightness budget below alpha
  double delta = 0.1;        // total failure probability
  double tau = 1.0;          // per-unit-threshold guard rate
  int n = 2000;              // calibration batch size per iteration

  void validate() const {
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("RiskSpec: alpha must be in (0,1)");
    if (!(delta_alpha > 0.0 && delta_alpha < alpha))
      throw std::invalid_argument("RiskSpec: delta_alpha must be in (0, alpha)");
    if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("RiskSpec: delta must be in (0,1)");
    if (!(tau > 0.0)) throw std::invalid_argument("RiskSpec: tau must be > 0");
    if (n < 2) throw std::invalid_argument("RiskSpec: n must be >= 2");
  }
};

struct SampleRecord {
  double score = 0.0;  // in [0,1]
  int label = 0;       // 0 or 1
  double cost = 1.0;   // in [0,1]; realized cost draw, 1 when the cost model is off
};

struct SampleBatch {
  std::vector<SampleRecord> records;
  double lambda_deploy = 0.0;  // threshold the records were drawn under
};

// Loss of one record at lambda_eval. Zero for negatives; for positives,
// cost * clip(((1-lambda)+eps-score)/(2*eps), 0, 1). At lambda = 1 + eps the
// ramp argument is -score/(2*eps) <= 0, so every record has zero loss there.
inline double loss_eval(const SampleRecord& record, double lambda_eval, double epsilon) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("loss_eval: epsilon must be > 0");
  if (record.label == 0) return 0.0;
  const double ramp = ((1.0 - lambda_eval) + epsilon - record.score) / (2.0 * epsilon);
  return record.cost * std::clamp(ramp, 0.0, 1.0);
}

inline double empirical_risk(const SampleBatch& batch, double lambda_eval, double epsilon) {
  if (batch.records.empty()) throw std::invalid_argument("empirical_risk: batch is empty");
  double sum = 0.0;
  for (const auto& r : batch.records) sum += loss_eval(r, lambda_eval, epsilon);
  return sum / static_cast<double>(batch.records.size());
}

// Empirical risk at every grid point in one pass: sort the positive-label
// records by score once, then each grid point needs two binary searches plus a
// direct walk over the (typically tiny) 2*eps ramp band. O((n+G) log n) total
// instead of the O(n*G) per-point evaluation.
inline std::vector<double> risk_curve(const SampleBatch& batch, std::span<const double> grid,
                                      double epsilon) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("risk_curve: epsilon must be > 0");
  if (batch.records.empty()) throw std::invalid_argument("risk_curve: batch is empty");
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (grid[i] < grid[i - 1]) throw std::invalid_argument("risk_curve: grid must be sorted ascending");

  struct Weighted {
    double score, weight;
  };
  std::vector<Weighted> pos;
  pos.reserve(batch.records.size());
  for (const auto& r : batch.records)
    if (r.label == 1 && r.cost > 0.0) pos.push_back({r.score, r.cost});
  std::sort(pos.begin(), pos.end(), [](const Weighted& a, const Weighted& b) { return a.score < b.score; });

  // prefix[k] = total weight of the k smallest scores; extended precision keeps
  // the prefix differences within the 1e-12 oracle tolerance
  std::vector<long double> prefix(pos.size() + 1, 0.0L);
  for (std::size_t k = 0; k < pos.size(); ++k) prefix[k + 1] = prefix[k] + pos[k].weight;

  const double n = static_cast<double>(batch.records.size());
  std::vector<double> out;
  out.reserve(grid.size());
  for (double lambda : grid) {
    const double hi = (1.0 - lambda) + epsilon;  // scores below hi - 2*eps take full loss
    const double lo = hi - 2.0 * epsilon;
    const auto full_end = std::upper_bound(pos.begin(), pos.end(), lo,
                                           [](double v, const Weighted& w) { return v < w.score; });
    const auto band_end = std::lower_bound(full_end, pos.end(), hi,
                                           [](const Weighted& w, double v) { return w.score < v; });
    double band = 0.0;
    for (auto it = full_end; it != band_end; ++it)
      band += it->weight * ((hi - it->score) / (2.0 * epsilon));
    const double full = static_cast<double>(prefix[static_cast<std::size_t>(full_end - pos.begin())]);
    out.push_back((full + band) / n);
  }
  return out;
}

}  // namespace riskcal
