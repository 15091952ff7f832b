#pragma once

// Chi-square CDF reference by adaptive Simpson integration of the
// closed-form density (Bessel form in the noncentral case), with the
// u = sqrt(t) substitution to remove the endpoint singularity at df = 1.
// Independent of the Poisson-mixture evaluation in the library.

#include <cmath>
#include <functional>
#include <limits>

namespace hdmed_test {

inline double log_bessel_i(double nu, double z) {
  // Power series sum_m (z/2)^{2m+nu} / (m! Gamma(m+nu+1)), accumulated in
  // log space around the largest term.
  if (z == 0.0) return nu == 0.0 ? 0.0 : -std::numeric_limits<double>::infinity();
  const double lz = std::log(0.5 * z);
  double max_log = -std::numeric_limits<double>::infinity();
  double terms[400];
  int m = 0;
  for (; m < 400; ++m) {
    const double lt = (2.0 * m + nu) * lz - std::lgamma(m + 1.0) - std::lgamma(m + nu + 1.0);
    terms[m] = lt;
    if (lt > max_log) max_log = lt;
    if (m > 3 && lt < max_log - 60.0 && lt < terms[m - 1]) break;
  }
  double sum = 0.0;
  for (int i = 0; i <= m && i < 400; ++i) sum += std::exp(terms[i] - max_log);
  return max_log + std::log(sum);
}

inline double chi2_pdf_reference(double x, int df, double ncp) {
  if (x <= 0.0) return 0.0;
  const double k = df;
  if (ncp == 0.0) {
    const double lp = (0.5 * k - 1.0) * std::log(x) - 0.5 * x - 0.5 * k * std::log(2.0) -
                      std::lgamma(0.5 * k);
    return std::exp(lp);
  }
  const double nu = 0.5 * k - 1.0;
  const double lp = -0.5 * (x + ncp) + (0.25 * k - 0.5) * (std::log(x) - std::log(ncp)) +
                    log_bessel_i(nu, std::sqrt(ncp * x)) + std::log(0.5);
  return std::exp(lp);
}

namespace detail {

inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                               double fa, double fm, double fb, double whole, double tol,
                               int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return adaptive_simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         adaptive_simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace detail

inline double integrate(const std::function<double(double)>& f, double a, double b, double tol) {
  const double m = 0.5 * (a + b);
  const double fa = f(a);
  const double fm = f(m);
  const double fb = f(b);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return detail::adaptive_simpson(f, a, b, fa, fm, fb, whole, tol, 40);
}

inline double chi2_cdf_reference(double x, int df, double ncp) {
  if (x <= 0.0) return 0.0;
  const auto integrand = [df, ncp](double u) {
    return 2.0 * u * chi2_pdf_reference(u * u, df, ncp);
  };
  return integrate(integrand, 0.0, std::sqrt(x), 1e-12);
}

}  // namespace hdmed_test
