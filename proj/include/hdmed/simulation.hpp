#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "hdmed/dataset.hpp"
#include "hdmed/inference.hpp"

namespace hdmed {

// Deterministic random source. Distributions are implemented here rather
// than taken from <random> so that streams are reproducible across
// standard libraries.
class Rng {
public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  double uniform();  // (0, 1)
  double normal();   // standard normal, Box-Muller with cached spare
  // Standard t variate with `dof` degrees of freedom divided by
  // sqrt(dof): z0 / sqrt(z1^2 + ... + z_dof^2).
  double scaled_t(int dof);

private:
  std::uint64_t state_[4];
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Counter-based stream splitting: mixes (seed, counter) into an
// independent stream seed. Used for per-replication and per-sweep-value
// streams so execution order cannot change results.
std::uint64_t derive_stream(std::uint64_t seed, std::uint64_t counter);

enum class ErrorLaw { Gaussian, ScaledT6 };

struct SimConfig {
  int n = 300;
  int p = 500;
  int q = 1;  // the built-in generator supports a single exposure
  double rho = 0.5;
  double c1 = 0.0;  // mediator-model signal multiplier
  double c2 = 0.0;  // direct effect
  ErrorLaw error_law = ErrorLaw::Gaussian;
  int n_reps = 500;
  std::uint64_t seed = 20200430;
  double alpha_level = 0.05;

  void check() const;
};

struct TruthRecord {
  VectorXd alpha0;
  double alpha1 = 0.0;
  double beta = 0.0;
  double gamma = 0.0;
  std::vector<int> active_set;
};

// First five entries c1 * (0.2, 0.4, 0.6, 0.8, 1.0); the rest are
// c1 * N(0, 0.1^2) draws from the given stream. Requires p >= 5.
Eigen::RowVectorXd build_gamma(int p, double c1, Rng& rng);

// One synthetic dataset from the mediation generator: x ~ N(0,1),
// m = Gamma' x + eps with eps ~ N(0, AR(rho)), y = alpha0' m + c2 x + eps1.
std::pair<Dataset, TruthRecord> generate_dataset(const SimConfig& cfg, int rep_id);

enum class Method { Penalized, Oracle };

struct MethodSet {
  bool penalized = true;
  bool oracle = false;
};

struct RepOutcome {
  int rep_id = 0;
  Method method = Method::Penalized;
  bool ok = true;
  std::string error;
  double alpha1_hat = 0.0;
  double beta_hat = 0.0;
  double se_alpha1 = 0.0;
  double se_beta = 0.0;
  int active_set_size = 0;
  double S_n = 0.0;
  double T_n = 0.0;
  bool reject_indirect = false;
  bool reject_direct = false;
  double fit_seconds = 0.0;
};

// Runs n_reps replications, each on its own derived RNG stream, applying
// the requested methods. Deterministic given (cfg, solver_cfg, methods);
// workers only changes scheduling, not results. Individual failures are
// recorded as flagged rows.
std::vector<RepOutcome> run_replications(const SimConfig& cfg, const SolverConfig& solver_cfg,
                                         MethodSet methods, int workers = 1);

struct MethodSummary {
  std::string method;
  int n_total = 0;
  int n_ok = 0;
  double bias_alpha1 = 0.0;
  double sd_alpha1 = 0.0;  // NaN when fewer than two successful reps
  double mean_se_alpha1 = 0.0;
  double sd_se_alpha1 = 0.0;
  double bias_beta = 0.0;
  double sd_beta = 0.0;
  double mean_se_beta = 0.0;
  double sd_se_beta = 0.0;
  double reject_rate_indirect = 0.0;
  double reject_rate_direct = 0.0;
  double mean_active_set_size = 0.0;
  double mean_fit_seconds = 0.0;
};

struct SimTruth {
  double alpha1 = 0.0;
  double beta = 0.0;
};

SimTruth sim_truth(const SimConfig& cfg);

struct SimSummary {
  SimTruth truth;
  std::vector<MethodSummary> methods;
};

SimSummary aggregate_tables(const std::vector<RepOutcome>& outcomes, const SimTruth& truth);

enum class SweepVar { C1, C2 };

struct PowerPoint {
  double value = 0.0;
  double rejection_rate = 0.0;
  double mc_se = 0.0;
  double theoretical = 0.0;
  int n_ok = 0;
  int n_reps = 0;
};

// One replication batch per sweep value with a value-indexed derived
// seed. Sweeping c1 reports the indirect-effect (Wald) rejection rate,
// sweeping c2 the direct-effect (F) rejection rate.
std::vector<PowerPoint> power_curve(const SimConfig& cfg_template, SweepVar sweep,
                                    const std::vector<double>& values,
                                    const SolverConfig& solver_cfg, int workers = 1);

// Population second moments of the generator restricted to the true
// active set (full-mediator blocks need a realized Gamma; see overload).
PopulationMoments population_moments_active(const SimConfig& cfg);
PopulationMoments population_moments(const SimConfig& cfg, const Eigen::RowVectorXd& gamma_full);

// Error variance of the outcome equation (0.25 under both laws) and
// var(alpha0' eps) under the AR(rho) mediator noise.
double population_sigma1_sq(const SimConfig& cfg);
double population_sigma2_sq(const SimConfig& cfg);

// Asymptotic rejection probability of the test targeted by the sweep at
// the config's signal values, from the noncentral chi-square law.
double theoretical_power(const SimConfig& cfg, SweepVar sweep);

}  // namespace hdmed
