#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "hdmed/errors.hpp"

namespace hdmed {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Immutable regression data: outcome y (n), unpenalized exposures X (n x q),
// candidate mediators M (n x p). When include_intercept is set a constant
// column is appended to X and counted in q.
class Dataset {
public:
  static Dataset validate(VectorXd y, MatrixXd X, MatrixXd M, bool include_intercept = false);

  Eigen::Index n() const { return y_.size(); }
  Eigen::Index q() const { return X_.cols(); }
  Eigen::Index p() const { return M_.cols(); }
  const VectorXd& y() const { return y_; }
  const MatrixXd& X() const { return X_; }
  const MatrixXd& M() const { return M_; }
  bool has_intercept() const { return intercept_; }

  // Copy with the mediator block replaced (same shape), flags preserved.
  Dataset with_mediators(MatrixXd M) const;

private:
  Dataset(VectorXd y, MatrixXd X, MatrixXd M, bool intercept)
      : y_(std::move(y)), X_(std::move(X)), M_(std::move(M)), intercept_(intercept) {}

  VectorXd y_;
  MatrixXd X_;
  MatrixXd M_;
  bool intercept_;
};

// Per-column scale factors applied to M, plus flags for columns whose
// sample standard deviation is (numerically) zero. Flagged columns keep
// scale 1 and must be pinned to a zero coefficient by the solver.
struct MediatorScaling {
  VectorXd scale;
  std::vector<bool> zero_variance;
  bool any_zero_variance() const;
};

// Rescales every mediator column to unit sample standard deviation.
// Exposures are never rescaled. Coefficients fitted on the scaled data
// map back to the original scale as alpha0_j / scale_j.
std::pair<Dataset, MediatorScaling> standardize_mediators(const Dataset& d);

}  // namespace hdmed
