#pragma once

// Quantile-weighted risk measures over step CDFs. A risk functional is
// integral of psi(p) * F^{-1}(p) over p in (0,1) for a nonnegative weight psi;
// uniform weight recovers the mean, the CVaR weight 1/(1-beta) on (beta,1]
// recovers the tail average, VaR is the plain quantile (measurement only,
// since it has no density). Distribution-free uncertainty comes from a DKW
// band around the empirical CDF: a CDF upper envelope lower-bounds the risk
// and vice versa, because F <= G pointwise implies F^{-1} >= G^{-1}.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace riskcal {

// Right-continuous step CDF: jumps at `support` (strictly increasing), reaching
// cumulative mass `cum_prob[k]` at support[k]; cum_prob ends at exactly 1.
struct StepCdf {
  std::vector<double> support;
  std::vector<double> cum_prob;

  double value_at(double w) const {
    const auto it = std::upper_bound(support.begin(), support.end(), w);
    if (it == support.begin()) return 0.0;
    return cum_prob[static_cast<std::size_t>(it - support.begin()) - 1];
  }

  void validate() const {
    if (support.empty() || support.size() != cum_prob.size())
      throw std::invalid_argument("StepCdf: support and cum_prob must be non-empty and equal-sized");
    for (std::size_t i = 0; i < support.size(); ++i) {
      if (i > 0 && !(support[i] > support[i - 1]))
        throw std::invalid_argument("StepCdf: support must be strictly increasing");
      if (i > 0 && !(cum_prob[i] > cum_prob[i - 1]))
        throw std::invalid_argument("StepCdf: cum_prob must be strictly increasing");
      if (!(cum_prob[i] > 0.0 && cum_prob[i] <= 1.0))
        throw std::invalid_argument("StepCdf: cum_prob entries must be in (0,1]");
    }
    if (std::fabs(cum_prob.back() - 1.0) > 1e-12)
      throw std::invalid_argument("StepCdf: cum_prob must end at 1");
  }
};

struct CdfBand {
  StepCdf lower;  // pointwise <= the empirical CDF; its risk is the upper risk bound
  StepCdf upper;  // pointwise >= the empirical CDF; its risk is the lower risk bound
  double level = 0.0;  // the delta_prime the band was built for
};

enum class WeightKind { uniform, cvar, var, piecewise_constant };

struct WeightFn {
  WeightKind kind = WeightKind::uniform;
  double beta = 0.0;  // cvar / var tail level
  std::vector<double> breakpoints;  // piecewise: cell edges, 0 = b0 < ... < bk = 1
  std::vector<double> weights;      // piecewise: one weight per cell

  static WeightFn Uniform() { return {}; }
  static WeightFn Cvar(double beta_) { return {WeightKind::cvar, beta_, {}, {}}; }
  static WeightFn Var(double beta_) { return {WeightKind::var, beta_, {}, {}}; }
  static WeightFn PiecewiseConstant(std::vector<double> edges, std::vector<double> w) {
    WeightFn f;
    f.kind = WeightKind::piecewise_constant;
    f.breakpoints = std::move(edges);
    f.weights = std::move(w);
    return f;
  }

  // Density variants admit risk guarantees; VaR does not.
  bool has_density() const { return kind != WeightKind::var; }

  void validate() const {
    switch (kind) {
      case WeightKind::uniform:
        return;
      case WeightKind::cvar:
        if (!(beta >= 0.0 && beta < 1.0)) throw std::invalid_argument("WeightFn: cvar beta must be in [0,1)");
        return;
      case WeightKind::var:
        if (!(beta > 0.0 && beta < 1.0)) throw std::invalid_argument("WeightFn: var beta must be in (0,1)");
        return;
      case WeightKind::piecewise_constant: {
        if (breakpoints.size() < 2 || weights.size() + 1 != breakpoints.size())
          throw std::invalid_argument("WeightFn: piecewise needs k+1 edges for k weights");
        if (breakpoints.front() != 0.0 || breakpoints.back() != 1.0)
          throw std::invalid_argument("WeightFn: piecewise edges must span [0,1]");
        double integral = 0.0;
        for (std::size_t i = 0; i < weights.size(); ++i) {
          if (!(breakpoints[i + 1] > breakpoints[i]))
            throw std::invalid_argument("WeightFn: piecewise edges must be strictly increasing");
          if (!(weights[i] >= 0.0)) throw std::invalid_argument("WeightFn: piecewise weights must be >= 0");
          integral += weights[i] * (breakpoints[i + 1] - breakpoints[i]);
        }
        if (std::fabs(integral - 1.0) > 1e-9)
          throw std::invalid_argument("WeightFn: piecewise weights must integrate to 1");
        return;
      }
    }
  }
};

inline StepCdf empirical_cdf(std::span<const double> losses) {
  if (losses.empty()) throw std::invalid_argument("empirical_cdf: losses are empty");
  for (double v : losses)
    if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("empirical_cdf: losses must be in [0,1]");
  std::vector<double> sorted(losses.begin(), losses.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  StepCdf cdf;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (!cdf.support.empty() && sorted[i] == cdf.support.back()) {
      cdf.cum_prob.back() = static_cast<double>(i + 1) / n;  // merge exact ties
    } else {
      cdf.support.push_back(sorted[i]);
      cdf.cum_prob.push_back(static_cast<double>(i + 1) / n);
    }
  }
  return cdf;
}

inline double dkw_epsilon(int n, double delta_prime) {
  if (n < 1) throw std::invalid_argument("dkw_epsilon: n must be >= 1");
  if (!(delta_prime > 0.0 && delta_prime < 1.0))
    throw std::invalid_argument("dkw_epsilon: delta_prime must be in (0,1)");
  return std::sqrt(std::log(2.0 / delta_prime) / (2.0 * static_cast<double>(n)));
}

// Two-sided DKW band at level delta_prime around an n-point empirical CDF,
// clipped to [0,1] mass and to the a-priori loss range [0,1]:
//   upper = min(F+eps, 1), carrying eps mass from loss 0 upward (the band must
//           dominate the truth below the smallest observation too);
//   lower = max(F-eps, 0) for w < 1, pinned to 1 at w = 1 (losses never exceed
//           1, so the missing eps tail mass sits at the top at worst).
inline CdfBand dkw_band(const StepCdf& cdf, int n, double delta_prime) {
  cdf.validate();
  const double eps = dkw_epsilon(n, delta_prime);
  CdfBand band;
  band.level = delta_prime;

  if (cdf.support.front() > 0.0) {
    // the truth can sit up to eps above zero even below the smallest observation
    band.upper.support.push_back(0.0);
    band.upper.cum_prob.push_back(std::min(eps, 1.0));
  }
  if (band.upper.cum_prob.empty() || band.upper.cum_prob.back() < 1.0) {
    for (std::size_t k = 0; k < cdf.support.size(); ++k) {
      band.upper.support.push_back(cdf.support[k]);
      const double c = cdf.cum_prob[k] + eps;
      if (c >= 1.0) {
        band.upper.cum_prob.push_back(1.0);
        break;
      }
      band.upper.cum_prob.push_back(c);
    }
    if (band.upper.cum_prob.back() < 1.0) band.upper.cum_prob.back() = 1.0;
  }

  for (std::size_t k = 0; k < cdf.support.size(); ++k) {
    const double c = cdf.cum_prob[k] - eps;
    if (c > 0.0) {
      band.lower.support.push_back(cdf.support[k]);
      band.lower.cum_prob.push_back(c);
    }
  }
  if (!band.lower.support.empty() && band.lower.support.back() == 1.0) {
    band.lower.cum_prob.back() = 1.0;
  } else {
    band.lower.support.push_back(1.0);
    band.lower.cum_prob.push_back(1.0);
  }
  return band;
}

// Generalized inverse F^{-1}(p) = inf{x : F(x) >= p}.
inline double inverse_cdf(const StepCdf& cdf, double p) {
  if (!(p > 0.0 && p <= 1.0)) throw std::invalid_argument("inverse_cdf: p must be in (0,1]");
  const auto it = std::lower_bound(cdf.cum_prob.begin(), cdf.cum_prob.end(), p);
  if (it == cdf.cum_prob.end()) return cdf.support.back();  // p == 1 up to rounding
  return cdf.support[static_cast<std::size_t>(it - cdf.cum_prob.begin())];
}

// Exact closed-form integral of psi(p) * F^{-1}(p) dp for a step CDF: each
// support value v_k owns the cumulative interval (c_{k-1}, c_k], so the
// integral is a sum of v_k times the psi-mass of that interval. Fractional
// overlap with the tail handles the boundary order statistic for CVaR.
inline double quantile_risk(const StepCdf& cdf, const WeightFn& psi) {
  cdf.validate();
  psi.validate();
  switch (psi.kind) {
    case WeightKind::uniform: {
      long double acc = 0.0L;
      double prev = 0.0;
      for (std::size_t k = 0; k < cdf.support.size(); ++k) {
        acc += static_cast<long double>(cdf.support[k]) * (cdf.cum_prob[k] - prev);
        prev = cdf.cum_prob[k];
      }
      return static_cast<double>(acc);
    }
    case WeightKind::var:
      return inverse_cdf(cdf, psi.beta);
    case WeightKind::cvar: {
      long double acc = 0.0L;
      double prev = 0.0;
      for (std::size_t k = 0; k < cdf.support.size(); ++k) {
        const double overlap = cdf.cum_prob[k] - std::max(psi.beta, prev);
        if (overlap > 0.0) acc += static_cast<long double>(cdf.support[k]) * overlap;
        prev = cdf.cum_prob[k];
      }
      return static_cast<double>(acc) / (1.0 - psi.beta);
    }
    case WeightKind::piecewise_constant: {
      long double acc = 0.0L;
      double prev = 0.0;
      for (std::size_t k = 0; k < cdf.support.size(); ++k) {
        const double lo = prev, hi = cdf.cum_prob[k];
        for (std::size_t j = 0; j < psi.weights.size(); ++j) {
          const double a = std::max(lo, psi.breakpoints[j]);
          const double b = std::min(hi, psi.breakpoints[j + 1]);
          if (b > a) acc += static_cast<long double>(psi.weights[j]) * cdf.support[k] * (b - a);
        }
        prev = hi;
      }
      return static_cast<double>(acc);
    }
  }
  throw std::logic_error("quantile_risk: unknown weight kind");
}

struct RiskInterval {
  double lower = 0.0;
  double upper = 0.0;
  bool guarantee = true;  // false when psi is measurement-only (VaR)
};

inline RiskInterval risk_interval_from_band(const CdfBand& band, const WeightFn& psi) {
  RiskInterval out;
  out.lower = quantile_risk(band.upper, psi);
  out.upper = quantile_risk(band.lower, psi);
  out.guarantee = psi.has_density();
  return out;
}

// Largest one-sided deviation the DKW band allows around the point estimate of
// this sample. Diagnostic for the generic-psi path; the CVaR loop uses the
// closed-form asymptotic width instead.
inline double quantile_width_at(int n, double delta_prime, const WeightFn& psi,
                                std::span<const double> losses) {
  const StepCdf cdf = empirical_cdf(losses);
  const CdfBand band = dkw_band(cdf, n, delta_prime);
  const double point = quantile_risk(cdf, psi);
  const RiskInterval iv = risk_interval_from_band(band, psi);
  return std::max(iv.upper - point, point - iv.lower);
}

// L^v norm of the weight density, [integral |psi|^v dp]^{1/v}; pass
// v = infinity for the sup norm. Used to price quantile risks against
// Wasserstein perturbations of the loss law.
inline double m_factor(const WeightFn& psi, double v) {
  psi.validate();
  const bool inf_norm = std::isinf(v);
  if (!inf_norm && !(v >= 1.0)) throw std::invalid_argument("m_factor: v must be >= 1 (or infinity)");
  switch (psi.kind) {
    case WeightKind::uniform:
      return 1.0;
    case WeightKind::var:
      throw std::domain_error("m_factor: VaR has no weight density (measurement-only)");
    case WeightKind::cvar: {
      const double tail = 1.0 - psi.beta;
      if (inf_norm) return 1.0 / tail;
      return std::pow(tail, 1.0 / v - 1.0);
    }
    case WeightKind::piecewise_constant: {
      if (inf_norm) return *std::max_element(psi.weights.begin(), psi.weights.end());
      long double acc = 0.0L;
      for (std::size_t j = 0; j < psi.weights.size(); ++j)
        acc += std::pow(psi.weights[j], v) * (psi.breakpoints[j + 1] - psi.breakpoints[j]);
      return std::pow(static_cast<double>(acc), 1.0 / v);
    }
  }
  throw std::logic_error("m_factor: unknown weight kind");
}

}  // namespace riskcal
