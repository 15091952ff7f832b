#include "hdmed/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <thread>

#include "hdmed/chi_square.hpp"

namespace hdmed {

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

const double kTwoPi = 6.283185307179586476925286766559;

VectorXd truth_alpha0(int p) {
  VectorXd a = VectorXd::Zero(p);
  a[0] = 1.0;
  a[1] = 0.8;
  a[2] = 0.6;
  a[3] = 0.4;
  a[4] = 0.2;
  return a;
}

MatrixXd ar_covariance(int size, double rho) {
  MatrixXd s(size, size);
  for (int i = 0; i < size; ++i)
    for (int j = 0; j < size; ++j) s(i, j) = std::pow(rho, std::abs(i - j));
  return s;
}

}  // namespace

Rng::Rng(std::uint64_t seed) {
  std::uint64_t s = seed;
  for (auto& st : state_) st = splitmix64(s);
}

std::uint64_t Rng::next_u64() {
  // xoshiro256++
  const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
  const std::uint64_t t = state_[1] << 17;
  state_[2] ^= state_[0];
  state_[3] ^= state_[1];
  state_[1] ^= state_[2];
  state_[0] ^= state_[3];
  state_[2] ^= t;
  state_[3] = rotl(state_[3], 45);
  return result;
}

double Rng::uniform() {
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  spare_ = radius * std::sin(kTwoPi * u2);
  has_spare_ = true;
  return radius * std::cos(kTwoPi * u2);
}

double Rng::scaled_t(int dof) {
  const double z = normal();
  double ss = 0.0;
  for (int i = 0; i < dof; ++i) {
    const double w = normal();
    ss += w * w;
  }
  return z / std::sqrt(ss);
}

std::uint64_t derive_stream(std::uint64_t seed, std::uint64_t counter) {
  std::uint64_t s = seed + 0x9E3779B97F4A7C15ULL * (counter + 1);
  const std::uint64_t a = splitmix64(s);
  const std::uint64_t b = splitmix64(s);
  return a ^ rotl(b, 32);
}

void SimConfig::check() const {
  if (n < 3) throw ValidationError("sim config: n must be >= 3");
  if (p < 5) throw ValidationError("sim config: p must be >= 5");
  if (q != 1) throw ValidationError("sim config: the built-in generator requires q = 1");
  if (!(std::abs(rho) < 1)) throw ValidationError("sim config: |rho| must be < 1");
  if (n_reps < 1) throw ValidationError("sim config: n_reps must be >= 1");
  if (!(alpha_level > 0 && alpha_level < 1))
    throw ValidationError("sim config: alpha_level must be in (0,1)");
}

Eigen::RowVectorXd build_gamma(int p, double c1, Rng& rng) {
  if (p < 5) throw ValidationError("build_gamma: p must be >= 5");
  Eigen::RowVectorXd g(p);
  for (int k = 0; k < 5; ++k) g[k] = c1 * 0.2 * static_cast<double>(k + 1);
  for (int k = 5; k < p; ++k) g[k] = c1 * 0.1 * rng.normal();
  return g;
}

SimTruth sim_truth(const SimConfig& cfg) { return SimTruth{cfg.c2, 1.4 * cfg.c1}; }

std::pair<Dataset, TruthRecord> generate_dataset(const SimConfig& cfg, int rep_id) {
  cfg.check();
  Rng rng(derive_stream(cfg.seed, static_cast<std::uint64_t>(rep_id)));
  const int n = cfg.n;
  const int p = cfg.p;

  const Eigen::RowVectorXd gamma_row = build_gamma(p, cfg.c1, rng);

  VectorXd x(n);
  for (int i = 0; i < n; ++i) x[i] = rng.normal();

  // AR(rho) noise generated by its Markov recursion, which applies the
  // (unique) Cholesky factor of the covariance in O(p) per row.
  const double innov_sd = std::sqrt(1.0 - cfg.rho * cfg.rho);
  MatrixXd M(n, p);
  for (int i = 0; i < n; ++i) {
    double prev = rng.normal();
    M(i, 0) = gamma_row[0] * x[i] + prev;
    for (int k = 1; k < p; ++k) {
      prev = cfg.rho * prev + innov_sd * rng.normal();
      M(i, k) = gamma_row[k] * x[i] + prev;
    }
  }

  VectorXd eps1(n);
  if (cfg.error_law == ErrorLaw::Gaussian) {
    for (int i = 0; i < n; ++i) eps1[i] = 0.5 * rng.normal();
  } else {
    for (int i = 0; i < n; ++i) eps1[i] = rng.scaled_t(6);
  }

  const VectorXd alpha0 = truth_alpha0(p);
  VectorXd y = M * alpha0 + cfg.c2 * x + eps1;

  TruthRecord truth;
  truth.alpha0 = alpha0;
  truth.alpha1 = cfg.c2;
  truth.beta = 1.4 * cfg.c1;
  truth.gamma = truth.beta + truth.alpha1;
  truth.active_set = {0, 1, 2, 3, 4};

  MatrixXd X(n, 1);
  X.col(0) = x;
  return {Dataset::validate(std::move(y), std::move(X), std::move(M), false), std::move(truth)};
}

namespace {

RepOutcome run_one(const Dataset& d, const TruthRecord& truth, Method method, int rep_id,
                   const SolverConfig& solver_cfg, double critical_value) {
  RepOutcome out;
  out.rep_id = rep_id;
  out.method = method;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    MediationFit fit = method == Method::Penalized ? fit_mediation(d, solver_cfg)
                                                   : oracle_fit(d, truth.active_set);
    const TestReport wald = wald_indirect_test(fit, d.n());
    const TestReport fdir = method == Method::Penalized
                                ? f_direct_test(d, solver_cfg, fit)
                                : f_test_from_rss(*fit.rss0, fit.rss1, d.n(), d.q());
    out.alpha1_hat = fit.alpha1_hat[0];
    out.beta_hat = fit.beta_hat[0];
    out.se_alpha1 = std::sqrt(fit.cov_alpha1(0, 0));
    out.se_beta = std::sqrt(fit.cov_beta(0, 0));
    out.active_set_size = fit.s_hat();
    out.S_n = wald.statistic;
    out.T_n = fdir.statistic;
    out.reject_indirect = wald.statistic > critical_value;
    out.reject_direct = fdir.statistic > critical_value;
  } catch (const std::exception& e) {
    out.ok = false;
    out.error = e.what();
  }
  out.fit_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

}  // namespace

std::vector<RepOutcome> run_replications(const SimConfig& cfg, const SolverConfig& solver_cfg,
                                         MethodSet methods, int workers) {
  cfg.check();
  solver_cfg.check();
  if (!methods.penalized && !methods.oracle)
    throw ValidationError("run_replications: no methods requested");
  const int n_methods = (methods.penalized ? 1 : 0) + (methods.oracle ? 1 : 0);
  const double crit = chi2_quantile(1.0 - cfg.alpha_level, cfg.q);

  std::vector<RepOutcome> table(static_cast<size_t>(cfg.n_reps) * n_methods);
  std::atomic<int> next{0};

  auto worker = [&]() {
    for (;;) {
      const int rep = next.fetch_add(1);
      if (rep >= cfg.n_reps) return;
      const auto [d, truth] = generate_dataset(cfg, rep);
      size_t slot = static_cast<size_t>(rep) * n_methods;
      if (methods.penalized)
        table[slot++] = run_one(d, truth, Method::Penalized, rep, solver_cfg, crit);
      if (methods.oracle) table[slot] = run_one(d, truth, Method::Oracle, rep, solver_cfg, crit);
    }
  };

  const int n_workers = std::max(1, std::min(workers, cfg.n_reps));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(n_workers));
    for (int t = 0; t < n_workers; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  return table;
}

namespace {

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sd_of(const std::vector<double>& v) {
  if (v.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

MethodSummary summarize_method(const std::vector<RepOutcome>& outcomes, Method method,
                               const SimTruth& truth) {
  MethodSummary s;
  s.method = method == Method::Penalized ? "penalized" : "oracle";
  std::vector<double> a1, b, se_a1, se_b;
  double reject_ind = 0.0, reject_dir = 0.0, active = 0.0, secs = 0.0;
  for (const RepOutcome& o : outcomes) {
    if (o.method != method) continue;
    ++s.n_total;
    if (!o.ok) continue;
    ++s.n_ok;
    a1.push_back(o.alpha1_hat);
    b.push_back(o.beta_hat);
    se_a1.push_back(o.se_alpha1);
    se_b.push_back(o.se_beta);
    reject_ind += o.reject_indirect ? 1.0 : 0.0;
    reject_dir += o.reject_direct ? 1.0 : 0.0;
    active += o.active_set_size;
    secs += o.fit_seconds;
  }
  const double denom = std::max(1, s.n_ok);
  s.bias_alpha1 = mean_of(a1) - truth.alpha1;
  s.sd_alpha1 = sd_of(a1);
  s.mean_se_alpha1 = mean_of(se_a1);
  s.sd_se_alpha1 = sd_of(se_a1);
  s.bias_beta = mean_of(b) - truth.beta;
  s.sd_beta = sd_of(b);
  s.mean_se_beta = mean_of(se_b);
  s.sd_se_beta = sd_of(se_b);
  s.reject_rate_indirect = reject_ind / denom;
  s.reject_rate_direct = reject_dir / denom;
  s.mean_active_set_size = active / denom;
  s.mean_fit_seconds = secs / denom;
  return s;
}

}  // namespace

SimSummary aggregate_tables(const std::vector<RepOutcome>& outcomes, const SimTruth& truth) {
  if (outcomes.empty()) throw ValidationError("aggregate: empty outcome table");
  SimSummary summary;
  summary.truth = truth;
  bool has_pen = false, has_ora = false;
  for (const RepOutcome& o : outcomes) {
    has_pen = has_pen || o.method == Method::Penalized;
    has_ora = has_ora || o.method == Method::Oracle;
  }
  if (has_pen) summary.methods.push_back(summarize_method(outcomes, Method::Penalized, truth));
  if (has_ora) summary.methods.push_back(summarize_method(outcomes, Method::Oracle, truth));
  return summary;
}

std::vector<PowerPoint> power_curve(const SimConfig& cfg_template, SweepVar sweep,
                                    const std::vector<double>& values,
                                    const SolverConfig& solver_cfg, int workers) {
  if (values.empty()) throw ValidationError("power curve: empty sweep values");
  std::vector<PowerPoint> points;
  points.reserve(values.size());
  for (size_t i = 0; i < values.size(); ++i) {
    SimConfig cfg = cfg_template;
    (sweep == SweepVar::C1 ? cfg.c1 : cfg.c2) = values[i];
    cfg.seed = derive_stream(cfg_template.seed, i);
    const auto outcomes = run_replications(cfg, solver_cfg, MethodSet{true, false}, workers);

    PowerPoint pt;
    pt.value = values[i];
    pt.n_reps = cfg.n_reps;
    double rejections = 0.0;
    for (const RepOutcome& o : outcomes) {
      if (!o.ok) continue;
      ++pt.n_ok;
      rejections += (sweep == SweepVar::C1 ? o.reject_indirect : o.reject_direct) ? 1.0 : 0.0;
    }
    if (pt.n_ok > 0) {
      pt.rejection_rate = rejections / pt.n_ok;
      pt.mc_se = std::sqrt(pt.rejection_rate * (1.0 - pt.rejection_rate) / pt.n_ok);
    }
    pt.theoretical = theoretical_power(cfg, sweep);
    points.push_back(pt);
  }
  return points;
}

PopulationMoments population_moments_active(const SimConfig& cfg) {
  PopulationMoments pm;
  pm.Sigma_XX = MatrixXd::Identity(1, 1);
  Eigen::RowVectorXd gamma_a(5);
  for (int k = 0; k < 5; ++k) gamma_a[k] = cfg.c1 * 0.2 * static_cast<double>(k + 1);
  pm.Sigma_XM_active = gamma_a;
  pm.Sigma_MM_active = gamma_a.transpose() * gamma_a + ar_covariance(5, cfg.rho);
  return pm;
}

PopulationMoments population_moments(const SimConfig& cfg, const Eigen::RowVectorXd& gamma_full) {
  if (gamma_full.size() != cfg.p)
    throw ValidationError("population moments: gamma length != p");
  PopulationMoments pm = population_moments_active(cfg);
  pm.Sigma_XM_full = gamma_full;
  pm.Sigma_MM_full = gamma_full.transpose() * gamma_full + ar_covariance(cfg.p, cfg.rho);
  return pm;
}

double population_sigma1_sq(const SimConfig&) { return 0.25; }

double population_sigma2_sq(const SimConfig& cfg) {
  const VectorXd a = truth_alpha0(5);
  return a.dot(ar_covariance(5, cfg.rho) * a);
}

double theoretical_power(const SimConfig& cfg, SweepVar sweep) {
  const double s1 = population_sigma1_sq(cfg);
  const double s2 = population_sigma2_sq(cfg);
  const AsymptoticVariances av =
      asymptotic_variances(population_moments_active(cfg), s1, s2);
  const double n = static_cast<double>(cfg.n);
  double ncp;
  if (sweep == SweepVar::C1) {
    const double beta = 1.4 * cfg.c1;
    ncp = n * beta * beta / av.var_beta(0, 0);
  } else {
    ncp = n * cfg.c2 * cfg.c2 / av.var_alpha1(0, 0);
  }
  const double crit = chi2_quantile(1.0 - cfg.alpha_level, cfg.q);
  return chi2_sf(crit, cfg.q, ncp);
}

}  // namespace hdmed
