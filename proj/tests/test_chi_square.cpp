#include "hdmed/chi_square.hpp"

#include <doctest.h>

#include <cmath>

#include "hdmed/errors.hpp"
#include "oracle/quadrature.hpp"

using namespace hdmed;

TEST_CASE("central cdf known values") {
  CHECK(chi2_cdf(0.0, 1) == 0.0);
  CHECK(chi2_cdf(-3.0, 4) == 0.0);
  CHECK(chi2_cdf(3.8415, 1, 0.0) == doctest::Approx(0.95).epsilon(1e-4));
  // classical table entries
  CHECK(chi2_cdf(9.260, 23) == doctest::Approx(0.005).epsilon(1e-3));
  CHECK(chi2_cdf(18.307, 10) == doctest::Approx(0.95).epsilon(1e-4));
  CHECK(chi2_cdf(1000.0, 3) == doctest::Approx(1.0));
}

TEST_CASE("zero noncentrality reduces to the central case") {
  for (int df : {1, 2, 5, 17}) {
    for (double x : {0.3, 1.0, 4.2, 29.0}) {
      CHECK(chi2_cdf(x, df, 0.0) == doctest::Approx(chi2_cdf(x, df)).epsilon(1e-12));
    }
  }
}

TEST_CASE("noncentral cdf against quadrature") {
  for (int df : {1, 2, 4, 9}) {
    for (double ncp : {0.0, 0.7, 5.0, 25.0, 60.0}) {
      for (double x : {0.5, 2.0, static_cast<double>(df) + ncp, 2.0 * (df + ncp) + 5.0}) {
        const double got = chi2_cdf(x, df, ncp);
        const double want = hdmed_test::chi2_cdf_reference(x, df, ncp);
        CHECK(std::abs(got - want) < 1e-9);
      }
    }
  }
}

TEST_CASE("accuracy holds at the large-parameter corner") {
  // df <= 50, ncp <= 200 must stay within 1e-10 absolute.
  const double got = chi2_cdf(250.0, 50, 200.0);
  const double want = hdmed_test::chi2_cdf_reference(250.0, 50, 200.0);
  CHECK(std::abs(got - want) < 1e-10);
  CHECK(chi2_cdf(1e9, 50, 200.0) == doctest::Approx(1.0));
}

TEST_CASE("survival and monotonicity") {
  CHECK(chi2_sf(25.0, 1) == doctest::Approx(5.7330314e-7).epsilon(1e-5));
  double prev = 1.0;
  for (double x : {0.1, 0.5, 2.0, 5.0, 11.0}) {
    const double sf = chi2_sf(x, 3);
    CHECK(sf < prev);
    prev = sf;
  }
}

TEST_CASE("quantile inverts the cdf") {
  for (int df : {1, 2, 7}) {
    for (double prob : {0.05, 0.5, 0.95, 0.999}) {
      const double x = chi2_quantile(prob, df);
      CHECK(chi2_cdf(x, df) == doctest::Approx(prob).epsilon(1e-9));
    }
  }
  CHECK(chi2_quantile(0.95, 1) == doctest::Approx(3.8414588).epsilon(1e-6));
  CHECK(chi2_quantile(0.0, 4) == 0.0);
}

TEST_CASE("invalid arguments are rejected") {
  CHECK_THROWS_AS(chi2_cdf(1.0, 0), ValidationError);
  CHECK_THROWS_AS(chi2_cdf(1.0, 2, -0.5), ValidationError);
  CHECK_THROWS_AS(chi2_quantile(1.0, 2), ValidationError);
}
