#include "hdmed/solver.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <string>

namespace hdmed {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double soft_threshold(double z, double t) {
  if (z > t) return z - t;
  if (z < -t) return z + t;
  return 0.0;
}

#ifndef NDEBUG
double penalized_objective(const VectorXd& r, const VectorXd& weights, const VectorXd& alpha0) {
  double obj = 0.5 * r.squaredNorm() / static_cast<double>(r.size());
  for (Eigen::Index j = 0; j < alpha0.size(); ++j)
    if (alpha0[j] != 0.0) obj += weights[j] * std::abs(alpha0[j]);
  return obj;
}
#endif

}  // namespace

PenaltySpec PenaltySpec::scad(double lambda, double a) {
  if (lambda < 0) throw ValidationError("penalty: lambda must be nonnegative");
  if (a <= 2) throw ValidationError("penalty: SCAD shape a must exceed 2");
  return PenaltySpec{PenaltyFamily::SCAD, lambda, a};
}

PenaltySpec PenaltySpec::l1(double lambda) {
  if (lambda < 0) throw ValidationError("penalty: lambda must be nonnegative");
  return PenaltySpec{PenaltyFamily::L1, lambda, 0.0};
}

double scad_derivative(double t, double lambda, double a) {
  if (t <= lambda) return lambda;
  if (t >= a * lambda) return 0.0;
  return (a * lambda - t) / (a - 1.0);
}

void SolverConfig::check() const {
  if (max_cd_iters < 1) throw ValidationError("solver: max_cd_iters must be >= 1");
  if (!(cd_tol > 0)) throw ValidationError("solver: cd_tol must be positive");
  if (max_lla_iters < 1) throw ValidationError("solver: max_lla_iters must be >= 1");
  if (lambda_grid_size < 1) throw ValidationError("solver: lambda_grid_size must be >= 1");
  if (!(lambda_min_ratio > 0 && lambda_min_ratio < 1))
    throw ValidationError("solver: lambda_min_ratio must be in (0,1)");
}

CdWorkspace CdWorkspace::build(const VectorXd& y, const MatrixXd& X, const MatrixXd& M) {
  CdWorkspace ws;
  ws.gram = M.transpose() * M;
  ws.m_y = M.transpose() * y;
  ws.m_x = M.transpose() * X;
  ws.xtx = X.transpose() * X;
  ws.x_y = X.transpose() * y;
  ws.col_sq = ws.gram.diagonal() / static_cast<double>(y.size());
  ws.y_sq = y.squaredNorm();
  return ws;
}

WeightedL1Fit solve_weighted_partial_l1(const VectorXd& y, const MatrixXd& X, const MatrixXd& M,
                                        const VectorXd& weights, const SolverConfig& cfg,
                                        const VectorXd* warm_alpha0, const CdWorkspace* ws) {
  cfg.check();
  const Eigen::Index n = y.size();
  const Eigen::Index p = M.cols();
  const Eigen::Index q = X.cols();
  if (M.rows() != n || (q > 0 && X.rows() != n))
    throw ValidationError("solver: design row counts differ from outcome length");
  if (weights.size() != p) throw ValidationError("solver: weight vector length != p");
  for (Eigen::Index j = 0; j < p; ++j)
    if (std::isnan(weights[j]) || weights[j] < 0)
      throw ValidationError("solver: weights must be nonnegative");

  const double dn = static_cast<double>(n);
  VectorXd own_col_sq;
  const VectorXd* col_sq = nullptr;
  if (ws != nullptr) {
    col_sq = &ws->col_sq;
  } else {
    own_col_sq.resize(p);
    for (Eigen::Index j = 0; j < p; ++j) own_col_sq[j] = M.col(j).squaredNorm() / dn;
    col_sq = &own_col_sq;
  }

  Eigen::HouseholderQR<MatrixXd> xqr;
  Eigen::LLT<MatrixXd> xtx_llt;
  if (q > 0) {
    Eigen::ColPivHouseholderQR<MatrixXd> pivqr(X);
    if (pivqr.rank() < q)
      throw SingularError("solver: unpenalized block X is rank deficient (rank " +
                          std::to_string(pivqr.rank()) + " < " + std::to_string(q) + ")");
    if (ws != nullptr)
      xtx_llt.compute(ws->xtx);
    else
      xqr.compute(X);
  }

  WeightedL1Fit fit;
  fit.alpha0 = VectorXd::Zero(p);
  if (warm_alpha0 != nullptr) {
    if (warm_alpha0->size() != p) throw ValidationError("solver: warm start length != p");
    fit.alpha0 = *warm_alpha0;
    for (Eigen::Index j = 0; j < p; ++j)
      if (std::isinf(weights[j]) || (*col_sq)[j] == 0.0) fit.alpha0[j] = 0.0;
  }
  fit.alpha1 = VectorXd::Zero(q);

  // Residual bookkeeping. Residual mode tracks r = y - M a0 - X a1;
  // covariance mode tracks the mediator gradient M'r and the running
  // projection M'X a1 instead, never touching the n-vector.
  VectorXd r;
  VectorXd m_grad;   // M' r (unnormalized), covariance mode
  VectorXd mx_a0;    // (M'X)' a0 accumulator, q-vector, covariance mode
  if (ws != nullptr) {
    m_grad = ws->m_y - ws->gram * fit.alpha0;
    mx_a0 = ws->m_x.transpose() * fit.alpha0;
  } else {
    r = y - M * fit.alpha0;
  }

  std::vector<Eigen::Index> active;
  active.reserve(static_cast<size_t>(p));
  bool active_mode = false;
  bool converged = false;

#ifndef NDEBUG
  double prev_obj = kInf;
#endif

  int sweep = 0;
  for (; sweep < cfg.max_cd_iters; ++sweep) {
    double max_change = 0.0;

    if (q > 0) {
      VectorXd new_alpha1;
      if (ws != nullptr) {
        new_alpha1 = xtx_llt.solve(ws->x_y - mx_a0);
      } else {
        const VectorXd partial = r + X * fit.alpha1;  // y - M alpha0
        new_alpha1 = xqr.solve(partial);
      }
      const VectorXd d1 = new_alpha1 - fit.alpha1;
      max_change = d1.cwiseAbs().maxCoeff();
      if (ws != nullptr)
        m_grad.noalias() -= ws->m_x * d1;
      else
        r.noalias() -= X * d1;
      fit.alpha1 = new_alpha1;
    }

    auto update_coord = [&](Eigen::Index j) {
      if (std::isinf(weights[j]) || (*col_sq)[j] == 0.0) return;
      const double old = fit.alpha0[j];
      const double grad = (ws != nullptr ? m_grad[j] : M.col(j).dot(r)) / dn;
      const double rho = grad + (*col_sq)[j] * old;
      const double next = soft_threshold(rho, weights[j]) / (*col_sq)[j];
      if (next != old) {
        const double diff = next - old;
        if (ws != nullptr) {
          m_grad.noalias() -= ws->gram.col(j) * diff;
          mx_a0.noalias() += ws->m_x.row(j).transpose() * diff;
        } else {
          r.noalias() -= M.col(j) * diff;
        }
        fit.alpha0[j] = next;
        max_change = std::max(max_change, std::abs(diff));
      }
    };

    if (active_mode) {
      for (Eigen::Index j : active) update_coord(j);
    } else {
      for (Eigen::Index j = 0; j < p; ++j) update_coord(j);
      active.clear();
      for (Eigen::Index j = 0; j < p; ++j)
        if (fit.alpha0[j] != 0.0) active.push_back(j);
    }

#ifndef NDEBUG
    if (ws == nullptr) {
      const double obj = penalized_objective(r, weights, fit.alpha0);
      assert(obj <= prev_obj + 1e-10 * (1.0 + std::abs(prev_obj)));
      prev_obj = obj;
    }
#endif

    if (max_change < cfg.cd_tol) {
      if (active_mode) {
        active_mode = false;  // verify with a full sweep
      } else {
        converged = true;
        ++sweep;
        break;
      }
    } else if (!active_mode) {
      active_mode = true;
    }
  }

  fit.sweeps = sweep;
  fit.converged = converged;
  if (ws != nullptr) {
    VectorXd fitted = M * fit.alpha0;
    if (q > 0) fitted.noalias() += X * fit.alpha1;
    fit.rss = (y - fitted).squaredNorm();
  } else {
    fit.rss = r.squaredNorm();
  }
  return fit;
}

WeightedL1Fit solve_weighted_partial_l1(const Dataset& d, const VectorXd& weights,
                                        const SolverConfig& cfg, const VectorXd* warm_alpha0) {
  return solve_weighted_partial_l1(d.y(), d.X(), d.M(), weights, cfg, warm_alpha0);
}

KktCertificate kkt_certificate(const VectorXd& y, const MatrixXd& X, const MatrixXd& M,
                               const VectorXd& weights, const VectorXd& alpha0,
                               const VectorXd& alpha1) {
  const double dn = static_cast<double>(y.size());
  VectorXd r = y - M * alpha0;
  if (X.cols() > 0) r -= X * alpha1;

  KktCertificate cert;
  for (Eigen::Index j = 0; j < M.cols(); ++j) {
    if (std::isinf(weights[j])) continue;
    const double g = M.col(j).dot(r) / dn;
    if (alpha0[j] != 0.0) {
      const double gap = std::abs(g - weights[j] * (alpha0[j] > 0 ? 1.0 : -1.0));
      cert.max_active_gap = std::max(cert.max_active_gap, gap);
    } else {
      cert.max_inactive_excess = std::max(cert.max_inactive_excess, std::abs(g) - weights[j]);
    }
  }
  cert.max_inactive_excess = std::max(cert.max_inactive_excess, 0.0);
  if (X.cols() > 0) cert.max_unpenalized_grad = (X.transpose() * r).cwiseAbs().maxCoeff() / dn;
  return cert;
}

namespace {

VectorXd lla_weights(const VectorXd& alpha0, const PenaltySpec& pen,
                     const std::vector<bool>* pinned) {
  VectorXd w(alpha0.size());
  for (Eigen::Index j = 0; j < alpha0.size(); ++j) {
    if (pinned != nullptr && (*pinned)[static_cast<size_t>(j)])
      w[j] = kInf;
    else
      w[j] = scad_derivative(std::abs(alpha0[j]), pen.lambda, pen.a);
  }
  return w;
}

VectorXd uniform_weights(Eigen::Index p, double lambda, const std::vector<bool>* pinned) {
  VectorXd w = VectorXd::Constant(p, lambda);
  if (pinned != nullptr)
    for (Eigen::Index j = 0; j < p; ++j)
      if ((*pinned)[static_cast<size_t>(j)]) w[j] = kInf;
  return w;
}

// Attempts to jump straight to the LLA fixed point from the current
// iterate. With support, signs and SCAD zones of the active coefficients
// held fixed, the stationarity conditions are linear:
//   flat  (|t| >= a*lambda): [G theta]_j = rhs_j
//   mid   (lambda < |t| < a*lambda):
//         [G theta]_j - theta_j/(a-1) = rhs_j - a*lambda*s_j/(a-1)
//   soft  (|t| <= lambda): [G theta]_j = rhs_j - lambda*s_j
// Zones, signs and the support are unknown a priori, so the solve runs
// active-set style: zones are re-derived from each candidate, zero-
// crossing coordinates leave, and inactive coordinates whose gradient
// exceeds lambda enter. The candidate is adopted only once it verifies
// as a genuine fixed point. Plain reweighted iteration contracts very
// slowly when correlated coefficients sit near zone boundaries; this
// solve replaces that tail.
bool zone_refine(const VectorXd& y, const MatrixXd& X, const MatrixXd& M, const PenaltySpec& pen,
                 const std::vector<bool>* pinned, WeightedL1Fit* sol,
                 const CdWorkspace* ws = nullptr) {
  const Eigen::Index n = y.size();
  const Eigen::Index q = X.cols();
  const Eigen::Index p = M.cols();
  const double lambda = pen.lambda;
  const double a = pen.a;
  if (lambda <= 0) return false;

  auto classify = [&](double abs_t) {
    if (abs_t >= a * lambda) return 2;  // flat
    if (abs_t > lambda) return 1;       // mid
    return 0;                           // soft
  };

  std::vector<Eigen::Index> support;
  std::vector<int> zone;
  std::vector<double> sign;
  for (Eigen::Index j = 0; j < p; ++j) {
    const double t = sol->alpha0[j];
    if (t == 0.0) continue;
    support.push_back(j);
    zone.push_back(classify(std::abs(t)));
    sign.push_back(t > 0 ? 1.0 : -1.0);
  }

  const double slack = lambda * (1.0 + 1e-9) + 1e-12;
  VectorXd theta;
  VectorXd resid;

  for (int attempt = 0; attempt < 15; ++attempt) {
    const Eigen::Index s = static_cast<Eigen::Index>(support.size());
    if (q + s >= n || s > p || s > 64) return false;

    MatrixXd Z(n, q + s);
    if (q > 0) Z.leftCols(q) = X;
    for (Eigen::Index k = 0; k < s; ++k) Z.col(q + k) = M.col(support[static_cast<size_t>(k)]);
    MatrixXd G(q + s, q + s);
    VectorXd rhs(q + s);
    if (ws != nullptr) {
      G.topLeftCorner(q, q) = ws->xtx;
      rhs.head(q) = ws->x_y;
      for (Eigen::Index k = 0; k < s; ++k) {
        const Eigen::Index j = support[static_cast<size_t>(k)];
        G.col(q + k).head(q) = ws->m_x.row(j).transpose();
        G.row(q + k).head(q) = ws->m_x.row(j);
        for (Eigen::Index l = 0; l < s; ++l)
          G(q + k, q + l) = ws->gram(j, support[static_cast<size_t>(l)]);
        rhs[q + k] = ws->m_y[j];
      }
      G /= static_cast<double>(n);
      rhs /= static_cast<double>(n);
    } else {
      G = Z.transpose() * Z / static_cast<double>(n);
      rhs = Z.transpose() * y / static_cast<double>(n);
    }
    for (Eigen::Index k = 0; k < s; ++k) {
      if (zone[static_cast<size_t>(k)] == 1) {
        G(q + k, q + k) -= 1.0 / (a - 1.0);
        rhs[q + k] -= a * lambda * sign[static_cast<size_t>(k)] / (a - 1.0);
      } else if (zone[static_cast<size_t>(k)] == 0) {
        rhs[q + k] -= lambda * sign[static_cast<size_t>(k)];
      }
    }
    Eigen::LDLT<MatrixXd> ldlt(G);
    if (ldlt.info() != Eigen::Success) return false;
    theta = ldlt.solve(rhs);
    if (!theta.allFinite()) return false;

    // Drop coordinates whose candidate crossed zero.
    bool dropped = false;
    for (Eigen::Index k = s - 1; k >= 0; --k) {
      if (theta[q + k] * sign[static_cast<size_t>(k)] <= 0) {
        support.erase(support.begin() + k);
        zone.erase(zone.begin() + k);
        sign.erase(sign.begin() + k);
        dropped = true;
      }
    }
    if (dropped) continue;

    // Re-derive zones from the candidate.
    bool zones_stable = true;
    for (Eigen::Index k = 0; k < s; ++k) {
      const int z = classify(std::abs(theta[q + k]));
      if (z != zone[static_cast<size_t>(k)]) {
        zone[static_cast<size_t>(k)] = z;
        zones_stable = false;
      }
    }
    if (!zones_stable) continue;

    // Bring in the worst inactive violator, if any.
    VectorXd grad_all;  // M'resid, unnormalized
    if (ws != nullptr) {
      grad_all = ws->m_y;
      for (Eigen::Index k = 0; k < s; ++k)
        grad_all.noalias() -= ws->gram.col(support[static_cast<size_t>(k)]) * theta[q + k];
      if (q > 0) grad_all.noalias() -= ws->m_x * theta.head(q);
    } else {
      resid = y - Z * theta;
      grad_all = M.transpose() * resid;
    }
    Eigen::Index worst = -1;
    double worst_grad = slack;
    size_t next_in = 0;
    for (Eigen::Index j = 0; j < p; ++j) {
      if (next_in < support.size() && support[next_in] == j) {
        ++next_in;
        continue;
      }
      if (pinned != nullptr && (*pinned)[static_cast<size_t>(j)]) continue;
      const double g = std::abs(grad_all[j]) / static_cast<double>(n);
      if (g > worst_grad) {
        worst_grad = g;
        worst = j;
      }
    }
    if (worst >= 0) {
      const auto pos = std::lower_bound(support.begin(), support.end(), worst);
      const auto k = pos - support.begin();
      support.insert(pos, worst);
      zone.insert(zone.begin() + k, 0);
      sign.insert(sign.begin() + k, grad_all[worst] > 0 ? 1.0 : -1.0);
      continue;
    }
    if (ws != nullptr) resid = y - Z * theta;

    // Verified fixed point.
    sol->alpha0.setZero();
    for (Eigen::Index k = 0; k < s; ++k)
      sol->alpha0[support[static_cast<size_t>(k)]] = theta[q + k];
    sol->alpha1 = theta.head(q);
    sol->rss = resid.squaredNorm();
    sol->converged = true;
    return true;
  }
  return false;
}

}  // namespace

LlaFit lla_fit(const VectorXd& y, const MatrixXd& X, const MatrixXd& M, const PenaltySpec& pen,
               const SolverConfig& cfg, const std::vector<bool>* pinned,
               const VectorXd* warm_alpha0, const CdWorkspace* ws) {
  cfg.check();
  if (pen.lambda < 0) throw ValidationError("lla: lambda must be nonnegative");
  if (pinned != nullptr && static_cast<Eigen::Index>(pinned->size()) != M.cols())
    throw ValidationError("lla: pinned mask length != p");

  LlaFit out;
  VectorXd w = uniform_weights(M.cols(), pen.lambda, pinned);
  WeightedL1Fit sol = solve_weighted_partial_l1(y, X, M, w, cfg, warm_alpha0, ws);
  out.n_iters = 1;
  out.cd_converged = sol.converged;
  out.lla_converged = true;

  if (pen.family == PenaltyFamily::SCAD) {
    if (pen.a <= 2) throw ValidationError("lla: SCAD shape a must exceed 2");
    out.lla_converged = false;
    double delta = kInf;
    double prev_delta = kInf;
    VectorXd prev_alpha0;
    while (out.n_iters < cfg.max_lla_iters) {
      VectorXd w_next = lla_weights(sol.alpha0, pen, pinned);
      if (w_next == w) {
        out.lla_converged = true;
        break;
      }
      if (out.n_iters >= 2 && zone_refine(y, X, M, pen, pinned, &sol, ws)) {
        ++out.n_iters;
        out.lla_converged = true;
        break;
      }
      // Geometric contraction toward a zone boundary: extrapolate the
      // iterate to its projected limit and solve for the fixed point
      // there instead of crawling across the boundary.
      if (prev_alpha0.size() > 0 && delta > cfg.cd_tol && delta < prev_delta) {
        const double ratio = delta / prev_delta;
        if (ratio > 0.3 && ratio < 0.9995) {
          const double leap = std::min(ratio / (1.0 - ratio), 1e4);
          WeightedL1Fit guess = sol;
          guess.alpha0 += leap * (sol.alpha0 - prev_alpha0);
          for (Eigen::Index j = 0; j < guess.alpha0.size(); ++j)
            if (guess.alpha0[j] * sol.alpha0[j] <= 0) guess.alpha0[j] = 0.0;
          if (zone_refine(y, X, M, pen, pinned, &guess, ws)) {
            sol = std::move(guess);
            ++out.n_iters;
            out.lla_converged = true;
            break;
          }
        }
      }
      w = std::move(w_next);
      WeightedL1Fit next = solve_weighted_partial_l1(y, X, M, w, cfg, &sol.alpha0, ws);
      out.cd_converged = out.cd_converged && next.converged;
      ++out.n_iters;
      prev_delta = delta;
      delta = (next.alpha0 - sol.alpha0).cwiseAbs().maxCoeff();
      if (X.cols() > 0) delta = std::max(delta, (next.alpha1 - sol.alpha1).cwiseAbs().maxCoeff());
      prev_alpha0 = sol.alpha0;
      sol = std::move(next);
      if (delta <= cfg.cd_tol) {
        out.lla_converged = true;
        break;
      }
    }

    if (cfg.verify_lla_fixed_point) {
      const VectorXd w_extra = lla_weights(sol.alpha0, pen, pinned);
      const WeightedL1Fit extra = solve_weighted_partial_l1(y, X, M, w_extra, cfg, &sol.alpha0, ws);
      double gap = (extra.alpha0 - sol.alpha0).cwiseAbs().maxCoeff();
      if (X.cols() > 0)
        gap = std::max(gap, (extra.alpha1 - sol.alpha1).cwiseAbs().maxCoeff());
      out.fixed_point_gap = gap;
    }
  }

  out.alpha0 = std::move(sol.alpha0);
  out.alpha1 = std::move(sol.alpha1);
  out.rss = sol.rss;
  return out;
}

LlaFit lla_fit(const Dataset& d, const PenaltySpec& pen, const SolverConfig& cfg,
               bool penalize_all) {
  if (penalize_all) {
    const MatrixXd empty(d.n(), 0);
    return lla_fit(d.y(), empty, d.M(), pen, cfg);
  }
  return lla_fit(d.y(), d.X(), d.M(), pen, cfg);
}

VectorXd lambda_grid(const VectorXd& y, const MatrixXd& X, const MatrixXd& M,
                     const SolverConfig& cfg, bool* degenerate) {
  cfg.check();
  const double dn = static_cast<double>(y.size());
  VectorXd r = y;
  if (X.cols() > 0) {
    Eigen::ColPivHouseholderQR<MatrixXd> qr(X);
    if (qr.rank() < X.cols()) throw SingularError("lambda grid: X is rank deficient");
    r -= X * qr.solve(y);
  }
  double lmax = 0.0;
  for (Eigen::Index j = 0; j < M.cols(); ++j)
    lmax = std::max(lmax, std::abs(M.col(j).dot(r)) / dn);

  if (degenerate != nullptr) *degenerate = (lmax == 0.0);
  if (lmax == 0.0) return VectorXd::Zero(1);

  const int size = cfg.lambda_grid_size;
  VectorXd grid(size);
  if (size == 1) {
    grid[0] = lmax;
    return grid;
  }
  const double log_max = std::log10(lmax);
  const double step = -std::log10(cfg.lambda_min_ratio) / static_cast<double>(size - 1);
  for (int i = 0; i < size; ++i) grid[i] = std::pow(10.0, log_max - step * i);
  return grid;
}

double hbic_score(double rss, int df, int n, int p_plus_q) {
  if (rss < 0) throw ValidationError("hbic: rss must be nonnegative");
  if (df < 0) throw ValidationError("hbic: df must be nonnegative");
  if (n < 3) throw ValidationError("hbic: n must be >= 3");
  if (p_plus_q < 1) throw ValidationError("hbic: p_plus_q must be positive");
  if (rss == 0.0) return kHbicZeroRssSentinel;
  return std::log(rss) + static_cast<double>(df) * std::log(std::log(static_cast<double>(n))) *
                             std::log(static_cast<double>(p_plus_q)) / static_cast<double>(n);
}

namespace {

// Least squares of y on (X_model, M columns in `support`), original scale.
struct SupportRefit {
  VectorXd alpha0;  // length p, zeros off the support
  VectorXd alpha1;
  double rss = 0.0;
};

SupportRefit refit_support(const VectorXd& y, const MatrixXd& X, const MatrixXd& M,
                           const std::vector<int>& support) {
  const Eigen::Index n = y.size();
  const Eigen::Index q = X.cols();
  const Eigen::Index s = static_cast<Eigen::Index>(support.size());
  SupportRefit out;
  out.alpha0 = VectorXd::Zero(M.cols());
  if (q + s == 0) {
    out.alpha1 = VectorXd(0);
    out.rss = y.squaredNorm();
    return out;
  }
  MatrixXd Z(n, q + s);
  if (q > 0) Z.leftCols(q) = X;
  for (Eigen::Index k = 0; k < s; ++k) Z.col(q + k) = M.col(support[static_cast<size_t>(k)]);
  Eigen::ColPivHouseholderQR<MatrixXd> qr(Z);
  if (qr.rank() < Z.cols())
    throw SingularError("path refit: singular design on the selected support");
  const VectorXd coef = qr.solve(y);
  out.alpha1 = coef.head(q);
  for (Eigen::Index k = 0; k < s; ++k)
    out.alpha0[support[static_cast<size_t>(k)]] = coef[q + k];
  out.rss = (y - Z * coef).squaredNorm();
  return out;
}

}  // namespace

PathResult fit_path_select(const Dataset& d, const SolverConfig& cfg, bool penalize_all,
                           PenaltyFamily family, bool warm_starts) {
  cfg.check();
  auto [ds, scaling] = standardize_mediators(d);
  const VectorXd& y = ds.y();
  const MatrixXd empty(ds.n(), 0);
  const MatrixXd& X = penalize_all ? empty : ds.X();
  const MatrixXd& M = ds.M();
  const int n = static_cast<int>(ds.n());
  const int p = static_cast<int>(ds.p());
  const int q_model = static_cast<int>(X.cols());
  const int size_cap = n / 2;  // largest support eligible for selection

  // Zero-variance columns carry no signal for the grid either.
  MatrixXd M_grid = M;
  for (int j = 0; j < p; ++j)
    if (scaling.zero_variance[static_cast<size_t>(j)]) M_grid.col(j).setZero();

  PathResult path;
  path.lambdas = lambda_grid(y, X, M_grid, cfg, &path.degenerate_grid);

  const Eigen::Index n_lambda = path.lambdas.size();
  path.fits.resize(static_cast<size_t>(n_lambda));
  path.hbic_scores = VectorXd::Constant(n_lambda, std::numeric_limits<double>::infinity());

  const std::vector<bool>* pinned = scaling.any_zero_variance() ? &scaling.zero_variance : nullptr;
  const CdWorkspace ws = CdWorkspace::build(y, X, M);

  // Scan fits keep the small reweighting budget and skip fixed-point
  // verification; only the winner gets polished below.
  SolverConfig scan_cfg = cfg;
  scan_cfg.verify_lla_fixed_point = false;

  auto fill_record = [&](PathFit& rec, const LlaFit& fit) {
    rec.alpha1_penalized = fit.alpha1;
    rec.alpha0_penalized = fit.alpha0;
    for (int j = 0; j < p; ++j) rec.alpha0_penalized[j] /= scaling.scale[j];  // original scale
    rec.active_set.clear();
    for (int j = 0; j < p; ++j)
      if (rec.alpha0_penalized[j] != 0.0) rec.active_set.push_back(j);
    rec.rss_penalized = fit.rss;
    rec.df = static_cast<int>(rec.active_set.size()) + q_model;
    rec.n_lla_iters = fit.n_iters;
    rec.cd_converged = fit.cd_converged;
    rec.lla_converged = fit.lla_converged;
    rec.fixed_point_gap = fit.fixed_point_gap;
  };

  VectorXd warm;
  bool have_warm = false;
  std::vector<int> prev_support;
  SupportRefit prev_refit;
  bool have_refit = false;

  for (Eigen::Index i = 0; i < n_lambda; ++i) {
    PathFit& rec = path.fits[static_cast<size_t>(i)];
    rec.lambda = path.lambdas[i];
    try {
      const PenaltySpec pen = family == PenaltyFamily::SCAD
                                  ? PenaltySpec::scad(path.lambdas[i])
                                  : PenaltySpec::l1(path.lambdas[i]);
      const VectorXd* warm_ptr = (warm_starts && have_warm) ? &warm : nullptr;
      LlaFit fit = lla_fit(y, X, M, pen, scan_cfg, pinned, warm_ptr, &ws);
      warm = fit.alpha0;
      have_warm = warm_starts;
      fill_record(rec, fit);

      if (rec.df > size_cap) {
        // Supports only grow from here; stop the path.
        rec.over_size_cap = true;
        for (Eigen::Index k = i + 1; k < n_lambda; ++k) {
          path.fits[static_cast<size_t>(k)].lambda = path.lambdas[k];
          path.fits[static_cast<size_t>(k)].over_size_cap = true;
        }
        break;
      }

      if (!have_refit || rec.active_set != prev_support) {
        prev_refit = refit_support(d.y(), penalize_all ? empty : d.X(), d.M(), rec.active_set);
        prev_support = rec.active_set;
        have_refit = true;
      }
      rec.alpha0 = prev_refit.alpha0;
      rec.alpha1 = prev_refit.alpha1;
      rec.rss = prev_refit.rss;
      path.hbic_scores[i] = hbic_score(rec.rss, rec.df, n, p + q_model);
    } catch (const Error&) {
      rec.failed = true;  // scored +inf
    }
  }

  // Polish the winner to a genuine LLA fixed point and rescore it. If
  // polishing shifts the support enough to move the argmin, polish the
  // new winner; this settles after one or two rounds.
  SolverConfig polish_cfg = cfg;
  polish_cfg.max_lla_iters = std::max(cfg.max_lla_iters, 200);
  std::vector<char> polished(static_cast<size_t>(n_lambda), 0);
  for (int round = 0; round < 10; ++round) {
    int best = 0;
    for (Eigen::Index i = 1; i < n_lambda; ++i)
      if (path.hbic_scores[i] < path.hbic_scores[best]) best = static_cast<int>(i);
    path.selected_index = best;
    PathFit& sel = path.fits[static_cast<size_t>(best)];
    if (sel.failed || sel.over_size_cap)
      throw Error("path fit: no admissible model on the lambda grid");
    if (polished[static_cast<size_t>(best)] || family != PenaltyFamily::SCAD) break;
    try {
      VectorXd warm_std = sel.alpha0_penalized;
      for (int j = 0; j < p; ++j) warm_std[j] *= scaling.scale[j];
      const LlaFit fit = lla_fit(y, X, M, PenaltySpec::scad(sel.lambda), polish_cfg, pinned,
                                 &warm_std, &ws);
      fill_record(sel, fit);
      if (sel.df > size_cap) {
        sel.over_size_cap = true;
        path.hbic_scores[best] = std::numeric_limits<double>::infinity();
      } else {
        const SupportRefit refit =
            refit_support(d.y(), penalize_all ? empty : d.X(), d.M(), sel.active_set);
        sel.alpha0 = refit.alpha0;
        sel.alpha1 = refit.alpha1;
        sel.rss = refit.rss;
        path.hbic_scores[best] = hbic_score(sel.rss, sel.df, n, p + q_model);
      }
    } catch (const Error&) {
      sel.failed = true;
      path.hbic_scores[best] = std::numeric_limits<double>::infinity();
    }
    polished[static_cast<size_t>(best)] = 1;
  }
  return path;
}

}  // namespace hdmed
