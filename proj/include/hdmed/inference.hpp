#pragma once

#include <Eigen/Dense>
#include <optional>
#include <utility>
#include <vector>

#include "hdmed/dataset.hpp"
#include "hdmed/solver.hpp"

namespace hdmed {

// Full output of the mediation pipeline: effect estimates, the selected
// active set, residual variances and the plug-in covariance matrices of
// alpha1_hat and beta_hat (already divided by n, i.e. on the standard
// error scale).
struct MediationFit {
  VectorXd alpha1_hat;             // direct effect, length q
  VectorXd alpha0_hat;             // mediator coefficients, length p
  std::vector<int> active_set;     // indices with alpha0_hat != 0
  VectorXd gamma_hat;              // total effect, length q
  VectorXd beta_hat;               // indirect effect = gamma_hat - alpha1_hat
  double sigma1_sq = 0.0;
  double sigma2_sq = 0.0;
  double rss1 = 0.0;
  std::optional<double> rss0;      // null-model RSS (direct-effect test)
  MatrixXd cov_alpha1;             // q x q
  MatrixXd cov_beta;               // q x q
  double lambda_selected = 0.0;

  bool sigma2_clipped = false;     // sigma_total^2 < sigma1^2 happened
  bool cd_converged = true;
  bool lla_converged = true;
  int n_lla_iters = 0;
  double fixed_point_gap = 0.0;

  int s_hat() const { return static_cast<int>(active_set.size()); }
};

enum class TestKind { WaldIndirect, FDirect };

struct TestReport {
  TestKind kind = TestKind::WaldIndirect;
  double statistic = 0.0;
  int df = 1;
  double p_value = 1.0;
  std::optional<double> noncentrality;  // theoretical power queries only
  bool floored = false;                 // statistic clamped at 0
};

// Second-moment matrices and residual variances feeding the plug-in
// covariance formulas.
struct VarianceComponents {
  MatrixXd Sigma_hat;     // (q + s) x (q + s) sample second moment of (X, M_active)
  MatrixXd Sigma_XX_hat;  // q x q
  double sigma1_sq = 0.0;
  double sigma_total_sq = 0.0;
  double sigma2_sq = 0.0;  // max(sigma_total_sq - sigma1_sq, 0)
};

// OLS of y on X: total-effect coefficients and residual variance
// ||y - X g||^2 / (n - q). Throws SingularError naming collinear columns.
std::pair<VectorXd, double> estimate_total_effect(const Dataset& d);

VarianceComponents variance_components(const Dataset& d, const std::vector<int>& active,
                                       double sigma1_sq, double sigma_total_sq);

// Plug-in covariance matrices of alpha1_hat and beta_hat (divided by n).
// Requires Sigma_hat well-conditioned (condition number <= 1e12);
// otherwise throws SingularError rather than regularizing.
std::pair<MatrixXd, MatrixXd> variance_estimates(const VarianceComponents& vc, Eigen::Index n,
                                                 Eigen::Index q);

// Penalized-path fit with HBIC selection, total-effect OLS, indirect
// effect by differencing, residual variances and plug-in covariances.
MediationFit fit_mediation(const Dataset& d, const SolverConfig& cfg);

// Wald test of the indirect effect: S = n b' {n cov(b)}^{-1} b ~ chi2_q
// under the null.
TestReport wald_indirect_test(const MediationFit& fit, Eigen::Index n);

// F-type test of the direct effect: T = (RSS0 - RSS1) / (RSS1 / (n - q)),
// RSS0 from a separately tuned null fit with the exposures removed and
// every mediator penalized. Negative statistics are floored at 0.
TestReport f_direct_test(const Dataset& d, const SolverConfig& cfg);
TestReport f_direct_test(const Dataset& d, const SolverConfig& cfg, const MediationFit& alt_fit);

// Statistic and p-value from precomputed residual sums of squares.
TestReport f_test_from_rss(double rss0, double rss1, Eigen::Index n, Eigen::Index q);

// Least-squares fit on (X, M_A) with a known active set; downstream
// variance and test formulas are shared with the penalized pipeline.
// rss0 is populated from the companion fit of y on M_A alone.
MediationFit oracle_fit(const Dataset& d, const std::vector<int>& true_active);

// Population second moments for the asymptotic variance formulas. The
// *_active blocks are restricted to the true active set; the *_full
// blocks span all p mediators (used for the competitor formula only).
struct PopulationMoments {
  MatrixXd Sigma_XX;
  MatrixXd Sigma_XM_active;
  MatrixXd Sigma_MM_active;
  MatrixXd Sigma_XM_full;
  MatrixXd Sigma_MM_full;
};

struct AsymptoticVariances {
  MatrixXd var_alpha1;           // sigma1^2 (Sigma_XX^{-1} + B)
  MatrixXd var_beta;             // sigma2^2 Sigma_XX^{-1} + sigma1^2 B
  MatrixXd var_beta_competitor;  // same with the full-mediator analogue of B
};

AsymptoticVariances asymptotic_variances(const PopulationMoments& pm, double sigma1_sq,
                                         double sigma2_sq);

}  // namespace hdmed
