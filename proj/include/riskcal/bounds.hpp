#pragma once

// Confidence half-widths for a mean of [0,1]-valued losses, plus the
// deployment-time "precomputed" variants that plug a worst-case mean into the
// pointwise formulas. Methods:
//
//   Hoeffding            sqrt(ln(2/d')/(2n)), variance-free
//   EmpiricalBernstein   Maurer-Pontil two-sided form at an assumed mean
//   HoeffdingBentkus     inversion of min(KL tail bound, e * exact binomial)
//   CLT                  z_(1-d'/2) * sigma / sqrt(n), asymptotic
//   QuantileCLT          asymptotic CVaR width for the zero-inflated uniform
//                        cost mixture with positive rate p (tail level beta)
//
// The worst-case mean is r* = min(alpha, 1/2): a [0,1] loss with mean at most
// alpha has Bernoulli-bounded variance r*(1-r*).

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace riskcal {

namespace detail {

// log C(n, k) via lgamma
inline double log_choose(long long n, long long k) {
  return std::lgamma(static_cast<double>(n + 1)) - std::lgamma(static_cast<double>(k + 1)) -
         std::lgamma(static_cast<double>(n - k + 1));
}

// P(Bin(n, q) <= m), exact log-space summation. Terms are nonnegative so the
// direct sum has no cancellation; underflowed terms round to zero harmlessly.
inline double binomial_cdf(long long n, double q, long long m) {
  if (m < 0) return 0.0;
  if (m >= n) return 1.0;
  if (q <= 0.0) return 1.0;
  if (q >= 1.0) return 0.0;
  const double lq = std::log(q);
  const double l1q = std::log1p(-q);
  double sum = 0.0;
  for (long long k = 0; k <= m; ++k)
    sum += std::exp(log_choose(n, k) + static_cast<double>(k) * lq +
                    static_cast<double>(n - k) * l1q);
  return std::min(sum, 1.0);
}

// KL divergence between Bernoulli(a) and Bernoulli(b), boundary terms zeroed.
inline double bernoulli_kl(double a, double b) {
  double t = 0.0;
  if (a > 0.0) t += a * std::log(a / b);
  if (a < 1.0) t += (1.0 - a) * std::log((1.0 - a) / (1.0 - b));
  return t;
}

}  // namespace detail

// Inverse standard normal CDF, Wichura's AS241 (PPND16). Absolute error is
// around 1e-15, far inside the 1e-9 contract.
inline double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("normal_quantile: p must be in (0,1)");
  const double q = p - 0.5;
  if (std::fabs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    return q *
           (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r +
                 6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r +
               1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r +
             1.3314166789178437745e2) * r + 3.3871328727963666080e0) /
           (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r +
                 3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r +
               5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r +
             4.2313330701600911252e1) * r + 1.0);
  }
  double r = (q < 0.0) ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double value;
  if (r <= 5.0) {
    r -= 1.6;
    value = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                  2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r +
                3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r +
              4.63033784615654529590e0) * r + 1.42343711074968357734e0) /
            (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                  1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
                6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r +
              2.05319162663775882187e0) * r + 1.0);
  } else {
    r -= 5.0;
    value = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                  1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
                2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r +
              5.46378491116411436990e0) * r + 6.65790464350110377720e0) /
            (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                  1.84631831751005468180e-6) * r + 7.86869131145613259100e-4) * r +
                1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
              5.99832206555887937690e-1) * r + 1.0);
  }
  return (q < 0.0) ? -value : value;
}

namespace detail {
inline void check_n_delta(int n, double delta_prime, const char* where) {
  if (n < 2) throw std::invalid_argument(std::string(where) + ": n must be >= 2");
  if (!(delta_prime > 0.0 && delta_prime < 1.0))
    throw std::invalid_argument(std::string(where) + ": delta_prime must be in (0,1)");
}
}  // namespace detail

inline double hoeffding_width(int n, double delta_prime) {
  detail::check_n_delta(n, delta_prime, "hoeffding_width");
  return std::sqrt(std::log(2.0 / delta_prime) / (2.0 * static_cast<double>(n)));
}

// Two-sided empirical Bernstein width at an assumed mean r_hat (the Bernoulli
// variance r_hat*(1-r_hat) stands in for the sample variance).
inline double bernstein_width_at(int n, double delta_prime, double r_hat) {
  detail::check_n_delta(n, delta_prime, "bernstein_width_at");
  if (!(r_hat >= 0.0 && r_hat <= 1.0))
    throw std::invalid_argument("bernstein_width_at: r_hat must be in [0,1]");
  const double l = std::log(4.0 / delta_prime);
  const double var = r_hat * (1.0 - r_hat);
  return std::sqrt(2.0 * var * l / static_cast<double>(n)) + 7.0 * l / (3.0 * static_cast<double>(n - 1));
}

// p-value against the null "true risk exceeds beta_null" given observed mean
// r_hat: min of the KL (Chernoff) tail bound and e times the exact binomial
// tail. Super-uniform under the null for means of [0,1] losses.
inline double hb_pvalue(int n, double r_hat, double beta_null) {
  if (n < 1) throw std::invalid_argument("hb_pvalue: n must be >= 1");
  if (!(r_hat >= 0.0 && r_hat <= 1.0)) throw std::invalid_argument("hb_pvalue: r_hat must be in [0,1]");
  if (!(beta_null > 0.0 && beta_null < 1.0))
    throw std::invalid_argument("hb_pvalue: degenerate null, beta_null must be in (0,1)");
  const double a = std::min(r_hat, beta_null);
  const double exp_branch = std::exp(-static_cast<double>(n) * detail::bernoulli_kl(a, beta_null));
  // ceil(n * r_hat) with a nudge so exact products (0.3 * 2000) don't round up
  const double x = static_cast<double>(n) * r_hat;
  long long m = static_cast<long long>(std::ceil(x - 1e-9));
  m = std::max<long long>(0, std::min<long long>(m, n));
  const double bin_branch = 2.718281828459045235360287 * detail::binomial_cdf(n, beta_null, m);
  return std::clamp(std::min(exp_branch, bin_branch), 0.0, 1.0);
}

// Smallest symmetric half-width c whose two one-sided p-values (upper deviation
// for the mean, lower deviation via the complement losses) sum to at most
// delta_prime. Bisection to 1e-6, returning the conservative upper endpoint;
// hypotheses pushed outside [0,1] are vacuous and score zero.
inline double hb_width_at(int n, double delta_prime, double r_hat) {
  detail::check_n_delta(n, delta_prime, "hb_width_at");
  if (!(r_hat >= 0.0 && r_hat <= 1.0)) throw std::invalid_argument("hb_width_at: r_hat must be in [0,1]");
  const auto excess = [&](double c) {
    const double p_up = (r_hat + c >= 1.0) ? 0.0 : hb_pvalue(n, r_hat, r_hat + c);
    const double p_dn = (r_hat - c <= 0.0) ? 0.0 : hb_pvalue(n, 1.0 - r_hat, 1.0 - (r_hat - c));
    return p_up + p_dn - delta_prime;
  };
  if (excess(0.0) <= 0.0) return 0.0;
  if (excess(1.0) > 0.0) return 1.0;
  double lo = 0.0, hi = 1.0;
  while (hi - lo > 1e-6) {
    const double mid = 0.5 * (lo + hi);
    (excess(mid) <= 0.0 ? hi : lo) = mid;
  }
  return hi;
}

inline double clt_width_at(int n, double delta_prime, double sigma_hat) {
  detail::check_n_delta(n, delta_prime, "clt_width_at");
  if (!(sigma_hat >= 0.0)) throw std::invalid_argument("clt_width_at: sigma_hat must be >= 0");
  return normal_quantile(1.0 - delta_prime / 2.0) * sigma_hat / std::sqrt(static_cast<double>(n));
}

// Asymptotic CVaR(beta) half-width for the loss law "cost ~ U[0,1] with
// probability p_rate, else 0", whose CVaR variance is (4-3p)p/12 / (1-beta)^2
// when the whole atom fits in the tail (beta <= 1 - p_rate); the variance is
// maximal at the full positive rate, so p_rate is the worst case to plug in.
inline double cvar_clt_width(int n, double delta_prime, double beta, double p_rate) {
  detail::check_n_delta(n, delta_prime, "cvar_clt_width");
  if (!(beta >= 0.0 && beta < 1.0)) throw std::invalid_argument("cvar_clt_width: beta must be in [0,1)");
  if (!(p_rate > 0.0 && p_rate < 1.0))
    throw std::invalid_argument("cvar_clt_width: p_rate must be in (0,1)");
  if (beta > 1.0 - p_rate)
    throw std::domain_error("cvar_clt_width: requires beta <= 1 - p_rate (atom must fit inside the tail)");
  const double var = (4.0 - 3.0 * p_rate) * p_rate / 12.0;
  return normal_quantile(1.0 - delta_prime / 2.0) / (1.0 - beta) *
         std::sqrt(var / static_cast<double>(n));
}

enum class WidthKind { hoeffding, empirical_bernstein, hoeffding_bentkus, clt, quantile_clt };

struct WidthMethod {
  WidthKind kind = WidthKind::clt;
  double beta = 0.0;    // quantile_clt tail level, in [0,1)
  double p_rate = 0.0;  // quantile_clt positive rate, in (0,1)

  static WidthMethod Hoeffding() { return {WidthKind::hoeffding}; }
  static WidthMethod EmpiricalBernstein() { return {WidthKind::empirical_bernstein}; }
  static WidthMethod HoeffdingBentkus() { return {WidthKind::hoeffding_bentkus}; }
  static WidthMethod Clt() { return {WidthKind::clt}; }
  static WidthMethod QuantileClt(double beta_, double p_rate_) {
    return {WidthKind::quantile_clt, beta_, p_rate_};
  }

  void validate() const {
    if (kind == WidthKind::quantile_clt) {
      if (!(beta >= 0.0 && beta < 1.0))
        throw std::invalid_argument("WidthMethod: quantile_clt beta must be in [0,1)");
      if (!(p_rate > 0.0 && p_rate < 1.0))
        throw std::invalid_argument("WidthMethod: quantile_clt p_rate must be in (0,1)");
      if (beta > 1.0 - p_rate)
        throw std::invalid_argument("WidthMethod: quantile_clt requires beta <= 1 - p_rate");
    }
  }
};

// Deployment-time width: evaluated once before any data is seen, at the
// worst-case mean r* = min(alpha, 1/2). Hoeffding ignores alpha entirely;
// QuantileCLT has its own worst case built in.
inline double precomputed_width(const WidthMethod& method, int n, double delta_prime, double alpha) {
  method.validate();
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("precomputed_width: alpha must be in (0,1)");
  const double r_star = std::min(alpha, 0.5);
  switch (method.kind) {
    case WidthKind::hoeffding:
      return hoeffding_width(n, delta_prime);
    case WidthKind::empirical_bernstein:
      return bernstein_width_at(n, delta_prime, r_star);
    case WidthKind::hoeffding_bentkus:
      return hb_width_at(n, delta_prime, r_star);
    case WidthKind::clt:
      return clt_width_at(n, delta_prime, std::sqrt(r_star * (1.0 - r_star)));
    case WidthKind::quantile_clt:
      return cvar_clt_width(n, delta_prime, method.beta, method.p_rate);
  }
  throw std::logic_error("precomputed_width: unknown method");
}

}  // namespace riskcal
