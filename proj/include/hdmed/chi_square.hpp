#pragma once

namespace hdmed {

/// Regularized lower incomplete gamma P(a, x).
double gamma_p(double a, double x);

/// CDF of the (noncentral) chi-square distribution with df degrees of
/// freedom and noncentrality parameter ncp. The central case (ncp = 0)
/// uses the regularized incomplete gamma directly; the noncentral case
/// sums the Poisson mixture of central CDFs until the remaining mass is
/// negligible. Returns 0 for x < 0.
double chi2_cdf(double x, int df, double ncp = 0.0);

/// Upper-tail probability P(X > x); computed as 1 - chi2_cdf.
double chi2_sf(double x, int df, double ncp = 0.0);

/// Quantile of the central chi-square distribution, solved by bisection
/// on chi2_cdf to ~1e-12.
double chi2_quantile(double prob, int df);

}  // namespace hdmed
