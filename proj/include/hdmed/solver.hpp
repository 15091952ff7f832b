#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "hdmed/dataset.hpp"

namespace hdmed {

enum class PenaltyFamily { SCAD, L1 };

struct PenaltySpec {
  PenaltyFamily family = PenaltyFamily::SCAD;
  double lambda = 0.0;
  double a = 3.7;  // SCAD shape

  static PenaltySpec scad(double lambda, double a = 3.7);
  static PenaltySpec l1(double lambda);
};

// SCAD penalty derivative p'_lambda(t) for t >= 0:
// lambda on [0, lambda], (a*lambda - t)+ / (a - 1) on (lambda, a*lambda), 0 beyond.
double scad_derivative(double t, double lambda, double a);

struct SolverConfig {
  int max_cd_iters = 10000;
  double cd_tol = 1e-7;
  // Reweighting budget for path-scan fits; the initial L1 solve counts.
  // Supports stabilize after one reweighted solve, so the scan does not
  // chase exact coefficient fixed points. The fit at the selected lambda
  // is polished to a genuine fixed point afterwards.
  int max_lla_iters = 3;
  int lambda_grid_size = 100;
  double lambda_min_ratio = 0.01;
  // When set, every LLA fit re-runs one extra iteration from its solution
  // and records the largest coefficient movement (fixed-point gap).
  bool verify_lla_fixed_point = false;

  void check() const;
};

struct WeightedL1Fit {
  VectorXd alpha0;
  VectorXd alpha1;
  double rss = 0.0;
  int sweeps = 0;
  bool converged = true;
};

// Precomputed cross-products for repeated solves on one design; turns a
// coordinate sweep from O(n p) into O(p s) where s is the active size.
struct CdWorkspace {
  MatrixXd gram;      // M'M
  VectorXd m_y;       // M'y
  MatrixXd m_x;       // M'X
  MatrixXd xtx;       // X'X
  VectorXd x_y;       // X'y
  VectorXd col_sq;    // diag(M'M)/n
  double y_sq = 0.0;  // y'y

  static CdWorkspace build(const VectorXd& y, const MatrixXd& X, const MatrixXd& M);
};

// Minimizes (1/2n)||y - M a0 - X a1||^2 + sum_j w_j |a0_j| by cyclic
// coordinate descent on a0 with an exact least-squares refresh of the
// unpenalized block a1 each sweep. X may have zero columns. A weight of
// +inf pins that coordinate at zero. Non-convergence after max_cd_iters
// is reported via the converged flag, never silently dropped.
WeightedL1Fit solve_weighted_partial_l1(const VectorXd& y, const MatrixXd& X, const MatrixXd& M,
                                        const VectorXd& weights, const SolverConfig& cfg,
                                        const VectorXd* warm_alpha0 = nullptr,
                                        const CdWorkspace* ws = nullptr);

WeightedL1Fit solve_weighted_partial_l1(const Dataset& d, const VectorXd& weights,
                                        const SolverConfig& cfg,
                                        const VectorXd* warm_alpha0 = nullptr);

// Subgradient optimality report for the weighted partial-L1 problem.
// active gap: | |M_j' r| / n - w_j | with sign agreement, over active j.
// inactive excess: max(|M_j' r| / n - w_j, 0) over inactive j.
// unpenalized grad: ||X' r||_inf / n.
struct KktCertificate {
  double max_active_gap = 0.0;
  double max_inactive_excess = 0.0;
  double max_unpenalized_grad = 0.0;
  bool within(double tol) const {
    return max_active_gap <= tol && max_inactive_excess <= tol && max_unpenalized_grad <= tol;
  }
};

KktCertificate kkt_certificate(const VectorXd& y, const MatrixXd& X, const MatrixXd& M,
                               const VectorXd& weights, const VectorXd& alpha0,
                               const VectorXd& alpha1);

struct LlaFit {
  VectorXd alpha0;
  VectorXd alpha1;
  double rss = 0.0;
  int n_iters = 0;         // weighted solves performed, initial L1 included
  bool lla_converged = true;  // stabilized before the cap
  bool cd_converged = true;
  double fixed_point_gap = 0.0;  // populated when cfg.verify_lla_fixed_point
};

// SCAD fit at a fixed lambda: initial partial-L1 solve with uniform
// weights, then reweighted solves with w_j = p'_lambda(|a0_j|) until the
// weight vector repeats exactly or successive solutions move less than
// cd_tol, capped at max_lla_iters. Once the iterate is close, the fixed
// point is solved for directly (see solver.cpp).
// Coordinates flagged in `pinned` are excluded from the model.
LlaFit lla_fit(const VectorXd& y, const MatrixXd& X, const MatrixXd& M, const PenaltySpec& pen,
               const SolverConfig& cfg, const std::vector<bool>* pinned = nullptr,
               const VectorXd* warm_alpha0 = nullptr, const CdWorkspace* ws = nullptr);

// Dataset-level variant. With penalize_all the exposures are dropped from
// the model entirely (null model: y on penalized mediators alone).
LlaFit lla_fit(const Dataset& d, const PenaltySpec& pen, const SolverConfig& cfg,
               bool penalize_all);

// Log-spaced grid from lambda_max = max_j |M_j' r| / n down to
// lambda_max * lambda_min_ratio, where r is the residual of y on X alone
// (or y itself when penalize_all). A vanishing lambda_max collapses the
// grid to {0} and sets *degenerate.
VectorXd lambda_grid(const VectorXd& y, const MatrixXd& X, const MatrixXd& M,
                     const SolverConfig& cfg, bool* degenerate = nullptr);

// HBIC(lambda) = log(rss) + df * log(log n) * log(p_plus_q) / n.
// rss == 0 returns a large negative sentinel so comparisons stay total.
double hbic_score(double rss, int df, int n, int p_plus_q);

constexpr double kHbicZeroRssSentinel = -1e300;

struct PathFit {
  double lambda = 0.0;
  // Least-squares refit on the selected support, original mediator scale.
  // The refit realizes the oracle normal equations on the support, which
  // is the estimator the downstream variance formulas describe; the
  // penalized solution that produced the support is kept alongside.
  VectorXd alpha0;
  VectorXd alpha1;
  double rss = 0.0;
  VectorXd alpha0_penalized;  // original mediator scale
  VectorXd alpha1_penalized;
  double rss_penalized = 0.0;
  std::vector<int> active_set;
  int df = 0;
  int n_lla_iters = 0;
  bool cd_converged = true;
  bool lla_converged = true;
  double fixed_point_gap = 0.0;
  bool failed = false;
  bool over_size_cap = false;
};

struct PathResult {
  VectorXd lambdas;  // strictly decreasing
  std::vector<PathFit> fits;
  VectorXd hbic_scores;
  int selected_index = 0;
  bool degenerate_grid = false;
  const PathFit& selected() const { return fits[static_cast<size_t>(selected_index)]; }
};

// Fits the SCAD path over the lambda grid with warm starts from the
// previous (larger) lambda, scores every support by the HBIC of its
// least-squares refit and selects the argmin (first index on ties).
// Mediators are standardized inside the solver; reported coefficients
// are on the original scale. Supports larger than n/2 score +inf and
// terminate the path early (no admissible model lies beyond them).
PathResult fit_path_select(const Dataset& d, const SolverConfig& cfg, bool penalize_all = false,
                           PenaltyFamily family = PenaltyFamily::SCAD, bool warm_starts = true);

}  // namespace hdmed
