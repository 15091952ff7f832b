#include "hdmed/inference.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "hdmed/chi_square.hpp"

namespace hdmed {

namespace {

// Symmetric inverse with a hard condition-number gate.
MatrixXd symmetric_inverse(const MatrixXd& A, const char* what) {
  const MatrixXd sym = 0.5 * (A + A.transpose());
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(sym);
  if (es.info() != Eigen::Success) throw SingularError(std::string(what) + ": eigensolver failed");
  const VectorXd& ev = es.eigenvalues();
  const double emin = ev.minCoeff();
  const double emax = ev.maxCoeff();
  if (!(emin > 0) || emax / emin > 1e12)
    throw SingularError(std::string(what) +
                        ": near-singular matrix (condition number > 1e12); "
                        "a smaller active set or larger n is needed");
  return es.eigenvectors() * ev.cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
}

// Clamp tiny negative eigenvalues introduced by round-off; the input is
// PSD in exact arithmetic.
MatrixXd psd_project(const MatrixXd& A) {
  const MatrixXd sym = 0.5 * (A + A.transpose());
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(sym);
  VectorXd ev = es.eigenvalues().cwiseMax(0.0);
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

MatrixXd active_columns(const MatrixXd& M, const std::vector<int>& active) {
  MatrixXd out(M.rows(), static_cast<Eigen::Index>(active.size()));
  for (size_t k = 0; k < active.size(); ++k) {
    const int j = active[k];
    if (j < 0 || j >= M.cols()) throw ValidationError("active set index out of range");
    out.col(static_cast<Eigen::Index>(k)) = M.col(j);
  }
  return out;
}

TestReport make_report(TestKind kind, double stat, int df) {
  TestReport rep;
  rep.kind = kind;
  rep.statistic = stat;
  rep.df = df;
  rep.p_value = chi2_sf(stat, df);
  return rep;
}

}  // namespace

std::pair<VectorXd, double> estimate_total_effect(const Dataset& d) {
  const Eigen::Index n = d.n();
  const Eigen::Index q = d.q();
  Eigen::ColPivHouseholderQR<MatrixXd> qr(d.X());
  if (qr.rank() < q) {
    // The pivot ordering puts the dependent columns last.
    std::string cols;
    for (Eigen::Index k = qr.rank(); k < q; ++k) {
      if (!cols.empty()) cols += ", ";
      cols += std::to_string(qr.colsPermutation().indices()[k]);
    }
    throw SingularError("total effect: X'X singular; collinear column(s) " + cols);
  }
  VectorXd gamma = qr.solve(d.y());
  const double rss = (d.y() - d.X() * gamma).squaredNorm();
  return {std::move(gamma), rss / static_cast<double>(n - q)};
}

VarianceComponents variance_components(const Dataset& d, const std::vector<int>& active,
                                       double sigma1_sq, double sigma_total_sq) {
  const double dn = static_cast<double>(d.n());
  const Eigen::Index q = d.q();
  const Eigen::Index s = static_cast<Eigen::Index>(active.size());

  MatrixXd Z(d.n(), q + s);
  Z.leftCols(q) = d.X();
  if (s > 0) Z.rightCols(s) = active_columns(d.M(), active);

  VarianceComponents vc;
  vc.Sigma_hat = (Z.transpose() * Z) / dn;
  vc.Sigma_XX_hat = vc.Sigma_hat.topLeftCorner(q, q);
  vc.sigma1_sq = sigma1_sq;
  vc.sigma_total_sq = sigma_total_sq;
  vc.sigma2_sq = std::max(sigma_total_sq - sigma1_sq, 0.0);
  return vc;
}

std::pair<MatrixXd, MatrixXd> variance_estimates(const VarianceComponents& vc, Eigen::Index n,
                                                 Eigen::Index q) {
  const double dn = static_cast<double>(n);
  const MatrixXd Sigma_inv = symmetric_inverse(vc.Sigma_hat, "variance estimates");
  const MatrixXd Phi = Sigma_inv.topLeftCorner(q, q);  // (I_q, 0) Sigma^{-1} (I_q, 0)'
  const MatrixXd Sxx_inv = symmetric_inverse(vc.Sigma_XX_hat, "variance estimates (X block)");

  MatrixXd cov_alpha1 = vc.sigma1_sq * Phi / dn;
  // Phi - Sxx^{-1} is a Schur-complement difference, PSD in exact arithmetic.
  const MatrixXd bracket = psd_project(Phi - Sxx_inv);
  MatrixXd cov_beta = (vc.sigma2_sq * Sxx_inv + vc.sigma1_sq * bracket) / dn;
  cov_alpha1 = 0.5 * (cov_alpha1 + cov_alpha1.transpose()).eval();
  cov_beta = 0.5 * (cov_beta + cov_beta.transpose()).eval();
  return {std::move(cov_alpha1), std::move(cov_beta)};
}

namespace {

// Shared tail of the pipeline once coefficients and the active set are known.
MediationFit finish_fit(const Dataset& d, VectorXd alpha0, VectorXd alpha1,
                        std::vector<int> active, double rss1, double lambda_selected) {
  const Eigen::Index n = d.n();
  const Eigen::Index q = d.q();
  const Eigen::Index s = static_cast<Eigen::Index>(active.size());
  if (n <= s + q)
    throw DegenerateFitError("fit: active set too large for inference (n=" + std::to_string(n) +
                             ", s=" + std::to_string(s) + ", q=" + std::to_string(q) + ")");

  MediationFit fit;
  fit.alpha0_hat = std::move(alpha0);
  fit.alpha1_hat = std::move(alpha1);
  fit.active_set = std::move(active);
  fit.rss1 = rss1;
  fit.lambda_selected = lambda_selected;

  auto [gamma, sigma_total_sq] = estimate_total_effect(d);
  fit.gamma_hat = std::move(gamma);
  fit.beta_hat = fit.gamma_hat - fit.alpha1_hat;

  fit.sigma1_sq = rss1 / static_cast<double>(n - s - q);
  fit.sigma2_sq = std::max(sigma_total_sq - fit.sigma1_sq, 0.0);
  fit.sigma2_clipped = sigma_total_sq < fit.sigma1_sq;

  const VarianceComponents vc =
      variance_components(d, fit.active_set, fit.sigma1_sq, sigma_total_sq);
  auto [cov_a1, cov_b] = variance_estimates(vc, n, q);
  fit.cov_alpha1 = std::move(cov_a1);
  fit.cov_beta = std::move(cov_b);
  return fit;
}

}  // namespace

MediationFit fit_mediation(const Dataset& d, const SolverConfig& cfg) {
  const PathResult path = fit_path_select(d, cfg, /*penalize_all=*/false);
  const PathFit& sel = path.selected();

  MediationFit fit = finish_fit(d, sel.alpha0, sel.alpha1, sel.active_set, sel.rss, sel.lambda);
  fit.cd_converged = sel.cd_converged;
  fit.lla_converged = sel.lla_converged;
  fit.n_lla_iters = sel.n_lla_iters;
  fit.fixed_point_gap = sel.fixed_point_gap;
  return fit;
}

TestReport wald_indirect_test(const MediationFit& fit, Eigen::Index n) {
  const Eigen::Index q = fit.beta_hat.size();
  const MatrixXd avar = static_cast<double>(n) * fit.cov_beta;  // asymptotic variance of sqrt(n) b
  const MatrixXd avar_inv = symmetric_inverse(avar, "wald test");
  const double stat =
      static_cast<double>(n) * (fit.beta_hat.transpose() * avar_inv * fit.beta_hat)(0, 0);
  return make_report(TestKind::WaldIndirect, std::max(stat, 0.0), static_cast<int>(q));
}

TestReport f_direct_test(const Dataset& d, const SolverConfig& cfg) {
  return f_direct_test(d, cfg, fit_mediation(d, cfg));
}

TestReport f_direct_test(const Dataset& d, const SolverConfig& cfg, const MediationFit& alt_fit) {
  const PathResult null_path = fit_path_select(d, cfg, /*penalize_all=*/true);
  return f_test_from_rss(null_path.selected().rss, alt_fit.rss1, d.n(), d.q());
}

TestReport f_test_from_rss(double rss0, double rss1, Eigen::Index n, Eigen::Index q) {
  if (!(rss1 > 0)) throw DegenerateFitError("direct-effect test: zero residual sum of squares");
  const double stat = (rss0 - rss1) / (rss1 / static_cast<double>(n - q));
  TestReport rep = make_report(TestKind::FDirect, std::max(stat, 0.0), static_cast<int>(q));
  rep.floored = stat < 0;
  return rep;
}

MediationFit oracle_fit(const Dataset& d, const std::vector<int>& true_active) {
  const Eigen::Index n = d.n();
  const Eigen::Index q = d.q();
  const Eigen::Index s = static_cast<Eigen::Index>(true_active.size());
  if (n <= s + q)
    throw ValidationError("oracle fit: |active| + q must be smaller than n");

  MatrixXd Z(n, q + s);
  Z.leftCols(q) = d.X();
  const MatrixXd Ma = active_columns(d.M(), true_active);
  if (s > 0) Z.rightCols(s) = Ma;

  Eigen::ColPivHouseholderQR<MatrixXd> qr(Z);
  if (qr.rank() < Z.cols()) throw SingularError("oracle fit: singular design on (X, M_A)");
  const VectorXd coef = qr.solve(d.y());

  VectorXd alpha0 = VectorXd::Zero(d.p());
  for (Eigen::Index k = 0; k < s; ++k) alpha0[true_active[static_cast<size_t>(k)]] = coef[q + k];
  VectorXd alpha1 = coef.head(q);
  const double rss1 = (d.y() - Z * coef).squaredNorm();

  MediationFit fit = finish_fit(d, std::move(alpha0), std::move(alpha1), true_active, rss1, 0.0);

  // Null-model RSS with the exposures removed, active set still known.
  if (s > 0) {
    Eigen::ColPivHouseholderQR<MatrixXd> qr0(Ma);
    if (qr0.rank() < s) throw SingularError("oracle fit: singular design on M_A");
    fit.rss0 = (d.y() - Ma * qr0.solve(d.y())).squaredNorm();
  } else {
    fit.rss0 = d.y().squaredNorm();
  }
  return fit;
}

AsymptoticVariances asymptotic_variances(const PopulationMoments& pm, double sigma1_sq,
                                         double sigma2_sq) {
  if (sigma1_sq < 0 || sigma2_sq < 0)
    throw ValidationError("asymptotic variances: variances must be nonnegative");

  const MatrixXd Sxx_inv = symmetric_inverse(pm.Sigma_XX, "asymptotic variances (Sigma_XX)");

  auto b_matrix = [&](const MatrixXd& Sxm, const MatrixXd& Smm) -> MatrixXd {
    if (Sxm.size() == 0) return MatrixXd::Zero(pm.Sigma_XX.rows(), pm.Sigma_XX.cols());
    const MatrixXd schur = 0.5 * ((Smm - Sxm.transpose() * Sxx_inv * Sxm).eval() +
                                  (Smm - Sxm.transpose() * Sxx_inv * Sxm).transpose().eval());
    Eigen::LLT<MatrixXd> llt(schur);
    if (llt.info() != Eigen::Success)
      throw SingularError("asymptotic variances: Schur complement not positive definite");
    const MatrixXd t = llt.solve(Sxm.transpose() * Sxx_inv);
    return Sxx_inv * Sxm * t;
  };

  const MatrixXd B = b_matrix(pm.Sigma_XM_active, pm.Sigma_MM_active);
  const MatrixXd B_tilde = b_matrix(pm.Sigma_XM_full, pm.Sigma_MM_full);

  AsymptoticVariances av;
  av.var_alpha1 = sigma1_sq * (Sxx_inv + B);
  av.var_beta = sigma2_sq * Sxx_inv + sigma1_sq * B;
  av.var_beta_competitor = sigma2_sq * Sxx_inv + sigma1_sq * B_tilde;
  return av;
}

}  // namespace hdmed
