#pragma once

// Reference solver for the weighted partial-L1 objective. FISTA on the
// joint coefficient vector with an exact Lipschitz step; deliberately
// shares no code with the coordinate-descent implementation it checks.

#include <Eigen/Dense>
#include <cmath>
#include <limits>

namespace hdmed_test {

struct ProxGradResult {
  Eigen::VectorXd alpha0;
  Eigen::VectorXd alpha1;
  double objective = 0.0;
};

inline ProxGradResult prox_grad_reference(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
                                          const Eigen::MatrixXd& M, const Eigen::VectorXd& weights,
                                          int iters = 5000) {
  const Eigen::Index n = y.size();
  const Eigen::Index p = M.cols();
  const Eigen::Index q = X.cols();
  Eigen::MatrixXd Z(n, q + p);
  if (q > 0) Z.leftCols(q) = X;
  Z.rightCols(p) = M;

  const Eigen::MatrixXd G = Z.transpose() * Z / static_cast<double>(n);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G);
  const double lipschitz = es.eigenvalues().maxCoeff();
  const double step = 1.0 / lipschitz;

  Eigen::VectorXd theta = Eigen::VectorXd::Zero(q + p);
  Eigen::VectorXd momentum = theta;
  double t_acc = 1.0;

  auto prox = [&](Eigen::VectorXd v) {
    for (Eigen::Index j = 0; j < p; ++j) {
      const double w = weights[j];
      double& c = v[q + j];
      if (std::isinf(w)) {
        c = 0.0;
        continue;
      }
      const double thr = step * w;
      c = c > thr ? c - thr : (c < -thr ? c + thr : 0.0);
    }
    return v;
  };

  for (int k = 0; k < iters; ++k) {
    const Eigen::VectorXd r = y - Z * momentum;
    const Eigen::VectorXd grad = -Z.transpose() * r / static_cast<double>(n);
    const Eigen::VectorXd theta_next = prox(momentum - step * grad);
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t_acc * t_acc));
    momentum = theta_next + ((t_acc - 1.0) / t_next) * (theta_next - theta);
    theta = theta_next;
    t_acc = t_next;
  }

  ProxGradResult res;
  res.alpha1 = theta.head(q);
  res.alpha0 = theta.tail(p);
  double obj = 0.5 * (y - Z * theta).squaredNorm() / static_cast<double>(n);
  for (Eigen::Index j = 0; j < p; ++j)
    if (theta[q + j] != 0.0) obj += weights[j] * std::abs(theta[q + j]);
  res.objective = obj;
  return res;
}

}  // namespace hdmed_test
