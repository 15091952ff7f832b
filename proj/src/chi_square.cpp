#include "hdmed/chi_square.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hdmed/errors.hpp"

namespace hdmed {

namespace {

constexpr int kMaxGammaIters = 1000;
constexpr double kGammaEps = 1e-16;

// Series expansion of P(a, x), valid for x < a + 1.
double gamma_p_series(double a, double x) {
  double ap = a;
  double sum = 1.0 / a;
  double del = sum;
  for (int i = 0; i < kMaxGammaIters; ++i) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::abs(del) < std::abs(sum) * kGammaEps) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Continued fraction for Q(a, x) = 1 - P(a, x), valid for x >= a + 1.
// Modified Lentz's method.
double gamma_q_cf(double a, double x) {
  const double tiny = std::numeric_limits<double>::min() / kGammaEps;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= kMaxGammaIters; ++i) {
    const double an = -static_cast<double>(i) * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < kGammaEps) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace

double gamma_p(double a, double x) {
  if (!(a > 0)) throw ValidationError("gamma_p: shape must be positive");
  if (x <= 0) return 0.0;
  if (std::isinf(x)) return 1.0;
  if (x < a + 1.0) return gamma_p_series(a, x);
  return 1.0 - gamma_q_cf(a, x);
}

double chi2_cdf(double x, int df, double ncp) {
  if (df < 1) throw ValidationError("chi2_cdf: df must be >= 1");
  if (ncp < 0) throw ValidationError("chi2_cdf: ncp must be nonnegative");
  if (std::isnan(x)) return std::numeric_limits<double>::quiet_NaN();
  if (x <= 0) return 0.0;
  if (std::isinf(x)) return 1.0;

  const double half_df = 0.5 * df;
  const double half_x = 0.5 * x;
  if (ncp == 0.0) return gamma_p(half_df, half_x);

  // Poisson mixture: sum_j w_j P(df/2 + j, x/2), w_j ~ Poisson(ncp/2).
  // The central CDF terms decrease in j, so once the remaining Poisson
  // mass times the current term is below tolerance the tail is bounded.
  const double half_ncp = 0.5 * ncp;
  double weight = std::exp(-half_ncp);
  double cum_weight = weight;
  double term = gamma_p(half_df, half_x);
  double sum = weight * term;
  const long max_terms = std::max<long>(200, 10L * (df + static_cast<long>(ncp) + 1));
  for (long j = 1; j <= max_terms; ++j) {
    weight *= half_ncp / static_cast<double>(j);
    cum_weight += weight;
    term = gamma_p(half_df + static_cast<double>(j), half_x);
    const double contrib = weight * term;
    sum += contrib;
    const double tail_bound = (1.0 - cum_weight) * term;
    if (tail_bound < 1e-15 && contrib < 1e-14 * std::max(sum, 1e-300)) break;
  }
  return std::min(sum, 1.0);
}

double chi2_sf(double x, int df, double ncp) { return 1.0 - chi2_cdf(x, df, ncp); }

double chi2_quantile(double prob, int df) {
  if (df < 1) throw ValidationError("chi2_quantile: df must be >= 1");
  if (!(prob >= 0 && prob < 1)) throw ValidationError("chi2_quantile: prob must be in [0,1)");
  if (prob == 0.0) return 0.0;
  double lo = 0.0;
  double hi = df + 10.0 * std::sqrt(2.0 * df) + 10.0;
  while (chi2_cdf(hi, df) < prob) hi *= 2.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (chi2_cdf(mid, df) < prob)
      lo = mid;
    else
      hi = mid;
    if (hi - lo < 1e-13 * std::max(1.0, hi)) break;
  }
  return 0.5 * (lo + hi);
}

}  // namespace hdmed
