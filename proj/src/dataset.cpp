#include "hdmed/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace hdmed {

Dataset Dataset::validate(VectorXd y, MatrixXd X, MatrixXd M, bool include_intercept) {
  const Eigen::Index n = y.size();
  if (n == 0) throw ValidationError("dataset: empty outcome vector");
  if (X.rows() != n || M.rows() != n)
    throw ValidationError("dataset: row counts differ (y " + std::to_string(n) + ", X " +
                          std::to_string(X.rows()) + ", M " + std::to_string(M.rows()) + ")");
  if (X.cols() < 1) throw ValidationError("dataset: need at least one exposure column");
  if (M.cols() < 1) throw ValidationError("dataset: empty mediator matrix");

  if (include_intercept) {
    X.conservativeResize(Eigen::NoChange, X.cols() + 1);
    X.col(X.cols() - 1).setOnes();
  }
  const Eigen::Index q = X.cols();
  if (n <= q + 1)
    throw ValidationError("dataset: n=" + std::to_string(n) + " too small for q=" +
                          std::to_string(q) + " exposures (need n >= q + 2)");

  if (!y.allFinite()) throw ValidationError("dataset: non-finite value in outcome");
  if (!X.allFinite()) throw ValidationError("dataset: non-finite value in exposures");
  if (!M.allFinite()) throw ValidationError("dataset: non-finite value in mediators");

  return Dataset(std::move(y), std::move(X), std::move(M), include_intercept);
}

Dataset Dataset::with_mediators(MatrixXd M) const {
  if (M.rows() != n() || M.cols() != p())
    throw ValidationError("dataset: replacement mediator block has wrong shape");
  if (!M.allFinite()) throw ValidationError("dataset: non-finite value in mediators");
  return Dataset(y_, X_, std::move(M), intercept_);
}

bool MediatorScaling::any_zero_variance() const {
  return std::find(zero_variance.begin(), zero_variance.end(), true) != zero_variance.end();
}

std::pair<Dataset, MediatorScaling> standardize_mediators(const Dataset& d) {
  const Eigen::Index n = d.n();
  const Eigen::Index p = d.p();
  MatrixXd M = d.M();
  MediatorScaling info;
  info.scale = VectorXd::Ones(p);
  info.zero_variance.assign(static_cast<size_t>(p), false);

  for (Eigen::Index j = 0; j < p; ++j) {
    const double mean = M.col(j).mean();
    const double ss = (M.col(j).array() - mean).square().sum();
    const double sd = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
    if (sd <= 1e-12 * (std::abs(mean) + 1.0)) {
      info.zero_variance[static_cast<size_t>(j)] = true;
      continue;  // scale stays 1, column untouched
    }
    info.scale[j] = sd;
    M.col(j) /= sd;
  }
  return {d.with_mediators(std::move(M)), std::move(info)};
}

}  // namespace hdmed
