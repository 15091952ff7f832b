#include "hdmed/dataset.hpp"

#include <doctest.h>

#include <cmath>

#include "hdmed/simulation.hpp"
#include "hdmed/solver.hpp"

using namespace hdmed;

namespace {

Dataset small_random_dataset(int n, int q, int p, std::uint64_t seed) {
  Rng rng(seed);
  MatrixXd X(n, q), M(n, p);
  VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    y[i] = rng.normal();
    for (int j = 0; j < q; ++j) X(i, j) = rng.normal();
    for (int j = 0; j < p; ++j) M(i, j) = (1.0 + 0.5 * j) * rng.normal();
  }
  return Dataset::validate(y, X, M, false);
}

}  // namespace

TEST_CASE("validation accepts the reference dimensions") {
  const Dataset d = small_random_dataset(300, 1, 500, 1);
  CHECK(d.n() == 300);
  CHECK(d.q() == 1);
  CHECK(d.p() == 500);
}

TEST_CASE("intercept augmentation adds an unpenalized constant column") {
  Rng rng(2);
  VectorXd y(10);
  MatrixXd X(10, 1), M(10, 3);
  for (int i = 0; i < 10; ++i) {
    y[i] = rng.normal();
    X(i, 0) = rng.normal();
    for (int j = 0; j < 3; ++j) M(i, j) = rng.normal();
  }
  const Dataset d = Dataset::validate(y, X, M, true);
  CHECK(d.q() == 2);
  CHECK(d.has_intercept());
  CHECK(d.X().col(1).isOnes());
}

TEST_CASE("degenerate sizes and bad values are rejected") {
  VectorXd y = VectorXd::Ones(3);
  MatrixXd X = MatrixXd::Ones(3, 2);
  MatrixXd M = MatrixXd::Ones(3, 5);
  CHECK_THROWS_AS(Dataset::validate(y, X, M, false), ValidationError);  // n <= q+1

  VectorXd y2 = VectorXd::Ones(10);
  MatrixXd X2 = MatrixXd::Ones(10, 1);
  MatrixXd M2 = MatrixXd::Ones(10, 2);
  M2(4, 1) = std::nan("");
  CHECK_THROWS_AS(Dataset::validate(y2, X2, M2, false), ValidationError);

  MatrixXd M3(10, 0);
  CHECK_THROWS_AS(Dataset::validate(y2, X2, M3, false), ValidationError);

  VectorXd y3 = VectorXd::Ones(9);
  CHECK_THROWS_AS(Dataset::validate(y3, X2, M2, false), ValidationError);  // row mismatch
}

TEST_CASE("standardization gives unit sample sd and exact back-mapping") {
  const Dataset d = small_random_dataset(50, 2, 6, 3);
  const auto [ds, scaling] = standardize_mediators(d);
  for (int j = 0; j < 6; ++j) {
    const auto col = ds.M().col(j);
    const double mean = col.mean();
    const double sd = std::sqrt((col.array() - mean).square().sum() / (ds.n() - 1));
    CHECK(sd == doctest::Approx(1.0).epsilon(1e-12));
    CHECK_FALSE(scaling.zero_variance[j]);
    // round trip: scaled column times scale restores the original
    CHECK((ds.M().col(j) * scaling.scale[j] - d.M().col(j)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("column with sample sd 2 gets scale 2") {
  VectorXd y = VectorXd::Zero(4);
  y[0] = 1;
  MatrixXd X = MatrixXd::Ones(4, 1);
  MatrixXd M(4, 1);
  M << 1, -1, std::sqrt(5.0), -std::sqrt(5.0);  // mean 0, sum of squares 12, sample sd 2
  const Dataset d = Dataset::validate(y, X, M, false);
  const auto [ds, scaling] = standardize_mediators(d);
  CHECK(scaling.scale[0] == doctest::Approx(2.0).epsilon(1e-12));
  const double sd_after =
      std::sqrt((ds.M().col(0).array() - ds.M().col(0).mean()).square().sum() / 3.0);
  CHECK(sd_after == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("constant mediator column is flagged, not fatal") {
  Rng rng(4);
  VectorXd y(12);
  MatrixXd X(12, 1), M(12, 2);
  for (int i = 0; i < 12; ++i) {
    y[i] = rng.normal();
    X(i, 0) = rng.normal();
    M(i, 0) = 7.5;  // constant
    M(i, 1) = rng.normal();
  }
  const auto [ds, scaling] = standardize_mediators(Dataset::validate(y, X, M, false));
  CHECK(scaling.zero_variance[0]);
  CHECK_FALSE(scaling.zero_variance[1]);
  CHECK(scaling.scale[0] == 1.0);
  CHECK(ds.M().col(0)(0) == 7.5);
  CHECK(scaling.any_zero_variance());
}

TEST_CASE("standardized fit with rescaled weights equals raw fit") {
  // Penalizing w_j = lambda * scale_j on the raw columns matches the
  // uniform-lambda fit on standardized columns after back-mapping.
  const Dataset d = small_random_dataset(60, 1, 8, 5);
  const auto [ds, scaling] = standardize_mediators(d);
  SolverConfig cfg;
  cfg.cd_tol = 1e-12;

  const double lambda = 0.08;
  const VectorXd w_std = VectorXd::Constant(8, lambda);
  const VectorXd w_raw = lambda * scaling.scale;

  const auto fit_std = solve_weighted_partial_l1(ds, w_std, cfg);
  const auto fit_raw = solve_weighted_partial_l1(d, w_raw, cfg);

  for (int j = 0; j < 8; ++j)
    CHECK(fit_std.alpha0[j] / scaling.scale[j] == doctest::Approx(fit_raw.alpha0[j]).epsilon(1e-8));
  CHECK((fit_std.alpha1 - fit_raw.alpha1).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("accessors are pure") {
  const Dataset d = small_random_dataset(20, 1, 4, 6);
  const VectorXd y1 = d.y();
  const MatrixXd m1 = d.M();
  CHECK(y1 == d.y());
  CHECK(m1 == d.M());
}
