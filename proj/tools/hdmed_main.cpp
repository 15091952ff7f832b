// Command-line front end: fit mediation models from CSV, run the
// simulation harness, and sweep power curves. Every run writes a
// manifest.json with the resolved configuration and seed so results can
// be reproduced exactly.

#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "hdmed/csv.hpp"
#include "hdmed/inference.hpp"
#include "hdmed/serialize.hpp"
#include "hdmed/simulation.hpp"

namespace fs = std::filesystem;
using hdmed::json;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitDegenerate = 3;
constexpr int kExitTooManyFailures = 4;

std::string iso_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%FT%TZ", std::gmtime(&t));
  return buf;
}

json load_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw hdmed::ValidationError("cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw hdmed::ValidationError("malformed JSON in " + path.string() + ": " + e.what());
  }
  return j;
}

void write_manifest(const fs::path& out_dir, const std::string& command, const json& inputs,
                    const json& config, std::uint64_t seed, int workers,
                    const std::vector<std::string>& outputs) {
  json manifest{{"tool", "hdmed"},
                {"version", HDMED_VERSION},
                {"command", command},
                {"timestamp", iso_timestamp()},
                {"seed", seed},
                {"workers", workers},
                {"inputs", inputs},
                {"config", config},
                {"outputs", outputs}};
  hdmed::write_json_atomic(out_dir / "manifest.json", manifest);
}

struct SolverFlags {
  std::optional<int> lambda_grid;
  std::optional<double> lambda_min_ratio;
  std::optional<double> cd_tol;
  std::optional<int> max_lla_iters;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--lambda-grid", lambda_grid, "Number of lambda grid points");
    cmd->add_option("--lambda-min-ratio", lambda_min_ratio, "Smallest lambda as a fraction of lambda_max");
    cmd->add_option("--cd-tol", cd_tol, "Coordinate-descent convergence tolerance");
    cmd->add_option("--max-lla-iters", max_lla_iters, "Reweighting budget per path fit");
  }

  hdmed::SolverConfig apply(hdmed::SolverConfig cfg) const {
    if (lambda_grid) cfg.lambda_grid_size = *lambda_grid;
    if (lambda_min_ratio) cfg.lambda_min_ratio = *lambda_min_ratio;
    if (cd_tol) cfg.cd_tol = *cd_tol;
    if (max_lla_iters) cfg.max_lla_iters = *max_lla_iters;
    cfg.check();
    return cfg;
  }
};

hdmed::SimConfig preset_config(const std::string& name) {
  hdmed::SimConfig cfg;  // reference design: n=300, p=500, rho=0.5
  cfg.c1 = 0.5;
  cfg.c2 = 0.0;
  if (name == "paper-example-1") {
    cfg.error_law = hdmed::ErrorLaw::Gaussian;
  } else if (name == "paper-example-2") {
    cfg.error_law = hdmed::ErrorLaw::ScaledT6;
  } else {
    throw hdmed::ValidationError("unknown preset '" + name +
                                 "' (expected paper-example-1 or paper-example-2)");
  }
  return cfg;
}

// Standard errors of the selected mediator coefficients from the same
// plug-in second-moment matrix the effect variances use.
std::vector<double> mediator_coef_ses(const hdmed::Dataset& d, const hdmed::MediationFit& fit) {
  const auto vc =
      hdmed::variance_components(d, fit.active_set, fit.sigma1_sq, fit.sigma1_sq + fit.sigma2_sq);
  const Eigen::MatrixXd inv = vc.Sigma_hat.inverse();
  const Eigen::Index q = d.q();
  std::vector<double> ses;
  for (size_t k = 0; k < fit.active_set.size(); ++k) {
    const Eigen::Index idx = q + static_cast<Eigen::Index>(k);
    ses.push_back(std::sqrt(fit.sigma1_sq * inv(idx, idx) / static_cast<double>(d.n())));
  }
  return ses;
}

std::string fit_summary_text(const hdmed::Dataset& d, const hdmed::MediationFit& fit,
                             const hdmed::TestReport& wald, const hdmed::TestReport& fdir,
                             const std::vector<std::string>& exposure_names,
                             const std::vector<std::string>& mediator_names) {
  char line[256];
  std::string out;
  out += "Effect estimates (per exposure)\n";
  out += "  exposure              direct        se  indirect        se     total\n";
  for (Eigen::Index k = 0; k < d.q(); ++k) {
    std::snprintf(line, sizeof(line), "  %-16s %9.4f %9.4f %9.4f %9.4f %9.4f\n",
                  exposure_names[static_cast<size_t>(k)].c_str(), fit.alpha1_hat[k],
                  std::sqrt(fit.cov_alpha1(k, k)), fit.beta_hat[k], std::sqrt(fit.cov_beta(k, k)),
                  fit.gamma_hat[k]);
    out += line;
  }
  out += "\nTests\n";
  std::snprintf(line, sizeof(line), "  indirect effect (Wald): S = %.4f, df = %d, p = %.4g\n",
                wald.statistic, wald.df, wald.p_value);
  out += line;
  std::snprintf(line, sizeof(line), "  direct effect (F-type): T = %.4f, df = %d, p = %.4g\n",
                fdir.statistic, fdir.df, fdir.p_value);
  out += line;
  const auto ses = mediator_coef_ses(d, fit);
  out += "\nSelected mediators (coefficient, se)\n";
  if (fit.active_set.empty()) out += "  (none)\n";
  for (size_t k = 0; k < fit.active_set.size(); ++k) {
    const int j = fit.active_set[k];
    std::snprintf(line, sizeof(line), "  %-24s %9.4f %9.4f\n", mediator_names[static_cast<size_t>(j)].c_str(),
                  fit.alpha0_hat[j], ses[k]);
    out += line;
  }
  std::snprintf(line, sizeof(line),
                "\nn = %ld, q = %ld, p = %ld, selected lambda = %.6g, sigma1^2 = %.4g, sigma2^2 = %.4g\n",
                static_cast<long>(d.n()), static_cast<long>(d.q()), static_cast<long>(d.p()),
                fit.lambda_selected, fit.sigma1_sq, fit.sigma2_sq);
  out += line;
  return out;
}

int cmd_fit(const fs::path& data_csv, const std::optional<fs::path>& roles_path, bool intercept,
            const fs::path& out_dir, std::uint64_t seed, double alpha_level,
            const SolverFlags& sflags) {
  hdmed::CsvTable table;
  hdmed::ColumnRoles roles;
  hdmed::SolverConfig solver_cfg;
  try {
    solver_cfg = sflags.apply(hdmed::SolverConfig{});
    table = hdmed::read_csv(data_csv);
    if (roles_path) {
      const json rj = load_json_file(*roles_path);
      roles = hdmed::assign_roles(table.header, rj.at("outcome").get<std::string>(),
                                  rj.at("exposures").get<std::vector<std::string>>(),
                                  rj.at("mediators").get<std::vector<std::string>>());
    } else {
      roles = hdmed::assign_roles_by_name(table.header);
    }
  } catch (const json::exception& e) {
    std::cerr << "hdmed fit: roles file: " << e.what() << "\n";
    return kExitUsage;
  } catch (const hdmed::Error& e) {
    std::cerr << "hdmed fit: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    const hdmed::Dataset d = hdmed::dataset_from_table(table, roles, intercept);
    const hdmed::MediationFit fit = hdmed::fit_mediation(d, solver_cfg);
    const hdmed::TestReport wald = hdmed::wald_indirect_test(fit, d.n());
    const hdmed::TestReport fdir = hdmed::f_direct_test(d, solver_cfg, fit);

    fs::create_directories(out_dir);
    hdmed::write_json_atomic(out_dir / "fit.json", hdmed::to_json(fit));
    json tests{{"alpha_level", alpha_level},
               {"wald_indirect", hdmed::to_json(wald)},
               {"f_direct", hdmed::to_json(fdir)}};
    hdmed::write_json_atomic(out_dir / "tests.json", tests);

    std::vector<std::string> exposure_names, mediator_names;
    for (int c : roles.exposures) exposure_names.push_back(table.header[static_cast<size_t>(c)]);
    if (intercept) exposure_names.push_back("(intercept)");
    for (int c : roles.mediators) mediator_names.push_back(table.header[static_cast<size_t>(c)]);
    const std::string summary =
        fit_summary_text(d, fit, wald, fdir, exposure_names, mediator_names);
    hdmed::write_file_atomic(out_dir / "summary.txt", summary);
    std::cout << summary;

    write_manifest(out_dir, "fit",
                   json{{"data_csv", data_csv.string()},
                        {"roles", roles_path ? json(roles_path->string()) : json(nullptr)}},
                   json{{"include_intercept", intercept},
                        {"alpha_level", alpha_level},
                        {"solver", hdmed::to_json(solver_cfg)}},
                   seed, 1, {"fit.json", "tests.json", "summary.txt"});
    return 0;
  } catch (const hdmed::DegenerateFitError& e) {
    std::cerr << "hdmed fit: " << e.what() << "\n";
    return kExitDegenerate;
  } catch (const hdmed::Error& e) {
    std::cerr << "hdmed fit: " << e.what() << "\n";
    return kExitDegenerate;
  }
}

struct SimFlags {
  std::optional<std::string> config_path;
  std::optional<std::string> preset;
  std::optional<std::uint64_t> seed;
  std::optional<int> reps;
  std::optional<double> c1, c2, alpha_level;
  std::optional<int> n, p;
  bool oracle = false;
  int workers = 1;

  hdmed::SimConfig resolve() const {
    hdmed::SimConfig cfg;
    if (preset) cfg = preset_config(*preset);
    if (config_path) cfg = hdmed::sim_config_from_json(load_json_file(*config_path));
    if (seed) cfg.seed = *seed;
    if (reps) cfg.n_reps = *reps;
    if (c1) cfg.c1 = *c1;
    if (c2) cfg.c2 = *c2;
    if (alpha_level) cfg.alpha_level = *alpha_level;
    if (n) cfg.n = *n;
    if (p) cfg.p = *p;
    cfg.check();
    return cfg;
  }

  hdmed::SolverConfig resolve_solver(const SolverFlags& sflags) const {
    hdmed::SolverConfig base;
    if (config_path) base = hdmed::solver_config_from_json(load_json_file(*config_path), base);
    return sflags.apply(base);
  }
};

int cmd_simulate(const SimFlags& flags, const SolverFlags& sflags, const fs::path& out_dir) {
  hdmed::SimConfig cfg;
  hdmed::SolverConfig solver_cfg;
  try {
    cfg = flags.resolve();
    solver_cfg = flags.resolve_solver(sflags);
  } catch (const hdmed::Error& e) {
    std::cerr << "hdmed simulate: " << e.what() << "\n";
    return kExitUsage;
  }

  const hdmed::MethodSet methods{true, flags.oracle};
  const auto outcomes = hdmed::run_replications(cfg, solver_cfg, methods, flags.workers);
  const hdmed::SimSummary summary = hdmed::aggregate_tables(outcomes, hdmed::sim_truth(cfg));

  fs::create_directories(out_dir);
  hdmed::write_replications_csv(out_dir / "replications.csv", outcomes);
  hdmed::write_json_atomic(out_dir / "summary.json", hdmed::to_json(summary));
  write_manifest(out_dir, "simulate",
                 json{{"config", flags.config_path ? json(*flags.config_path) : json(nullptr)},
                      {"preset", flags.preset ? json(*flags.preset) : json(nullptr)}},
                 json{{"sim", hdmed::to_json(cfg)},
                      {"solver", hdmed::to_json(solver_cfg)},
                      {"oracle", flags.oracle}},
                 cfg.seed, flags.workers, {"replications.csv", "summary.json"});

  int n_ok = 0;
  for (const auto& m : summary.methods) n_ok += m.n_ok;
  int n_total = 0;
  for (const auto& m : summary.methods) n_total += m.n_total;
  for (const auto& m : summary.methods) {
    std::printf("%s: n_ok=%d/%d reject_indirect=%.3f reject_direct=%.3f "
                "bias(a1)=%.4g sd(a1)=%.4g mean_se(a1)=%.4g sd(b)=%.4g mean_se(b)=%.4g\n",
                m.method.c_str(), m.n_ok, m.n_total, m.reject_rate_indirect,
                m.reject_rate_direct, m.bias_alpha1, m.sd_alpha1, m.mean_se_alpha1, m.sd_beta,
                m.mean_se_beta);
  }
  if (n_ok < n_total * 95 / 100) {
    std::cerr << "hdmed simulate: more than 5% of replications failed\n";
    return kExitTooManyFailures;
  }
  return 0;
}

int cmd_power(const SimFlags& flags, const SolverFlags& sflags, const std::string& sweep_var,
              std::vector<double> values, const fs::path& out_dir) {
  hdmed::SimConfig cfg;
  hdmed::SolverConfig solver_cfg;
  hdmed::SweepVar sweep;
  try {
    cfg = flags.resolve();
    solver_cfg = flags.resolve_solver(sflags);
    if (sweep_var == "c1")
      sweep = hdmed::SweepVar::C1;
    else if (sweep_var == "c2")
      sweep = hdmed::SweepVar::C2;
    else
      throw hdmed::ValidationError("--sweep must be c1 or c2");
    if (values.empty() && flags.config_path) {
      const json j = load_json_file(*flags.config_path);
      if (j.contains("sweep") && j.at("sweep").contains("values"))
        values = j.at("sweep").at("values").get<std::vector<double>>();
    }
    if (values.empty()) throw hdmed::ValidationError("no sweep values given");
  } catch (const json::exception& e) {
    std::cerr << "hdmed power: " << e.what() << "\n";
    return kExitUsage;
  } catch (const hdmed::Error& e) {
    std::cerr << "hdmed power: " << e.what() << "\n";
    return kExitUsage;
  }

  const auto points = hdmed::power_curve(cfg, sweep, values, solver_cfg, flags.workers);

  fs::create_directories(out_dir);
  hdmed::write_power_csv(out_dir / "power.csv", points);
  write_manifest(out_dir, "power",
                 json{{"config", flags.config_path ? json(*flags.config_path) : json(nullptr)},
                      {"preset", flags.preset ? json(*flags.preset) : json(nullptr)}},
                 json{{"sim", hdmed::to_json(cfg)},
                      {"solver", hdmed::to_json(solver_cfg)},
                      {"sweep", sweep_var},
                      {"values", values}},
                 cfg.seed, flags.workers, {"power.csv"});

  int failures = 0, total = 0;
  for (const auto& pt : points) {
    std::printf("value=%+.3f rejection=%.3f mc_se=%.4f theoretical=%.3f (n_ok=%d)\n", pt.value,
                pt.rejection_rate, pt.mc_se, pt.theoretical, pt.n_ok);
    failures += pt.n_reps - pt.n_ok;
    total += pt.n_reps;
  }
  if (failures > total * 5 / 100) {
    std::cerr << "hdmed power: more than 5% of replications failed\n";
    return kExitTooManyFailures;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Partial-penalized inference for linear mediation models with "
               "high-dimensional mediators"};
  app.require_subcommand(1);

  // fit
  auto* fit = app.add_subcommand("fit", "Fit a mediation model from a CSV file");
  std::string data_csv;
  std::optional<fs::path> roles_path;
  bool no_intercept = false;
  std::string fit_out = "hdmed-fit";
  std::uint64_t fit_seed = 20200430;
  double fit_alpha = 0.05;
  SolverFlags fit_solver;
  fit->add_option("data", data_csv, "Input CSV (header: y, x1..xq, m1..mp)")->required();
  fit->add_option("--roles", roles_path, "JSON file mapping column names to roles");
  fit->add_flag("--no-intercept", no_intercept, "Do not append an intercept column");
  fit->add_option("--out", fit_out, "Output directory");
  fit->add_option("--seed", fit_seed, "Seed recorded in the manifest");
  fit->add_option("--alpha-level", fit_alpha, "Test level recorded in tests.json");
  fit_solver.add_to(fit);

  // simulate
  auto* sim = app.add_subcommand("simulate", "Run seeded replications of the study design");
  SimFlags sim_flags;
  SolverFlags sim_solver;
  std::string sim_out = "hdmed-sim";
  sim->add_option("--config", sim_flags.config_path, "SimConfig JSON file");
  sim->add_option("--preset", sim_flags.preset, "paper-example-1 or paper-example-2");
  sim->add_option("--seed", sim_flags.seed, "Base seed");
  sim->add_option("--reps", sim_flags.reps, "Replication count");
  sim->add_option("--c1", sim_flags.c1, "Mediator-model signal multiplier");
  sim->add_option("--c2", sim_flags.c2, "Direct effect");
  sim->add_option("--n", sim_flags.n, "Sample size");
  sim->add_option("--p", sim_flags.p, "Mediator count");
  sim->add_option("--alpha-level", sim_flags.alpha_level, "Test level");
  sim->add_flag("--oracle", sim_flags.oracle, "Also run the known-support reference method");
  sim->add_option("--workers", sim_flags.workers, "Worker threads");
  sim->add_option("--out", sim_out, "Output directory");
  sim_solver.add_to(sim);

  // power
  auto* pow = app.add_subcommand("power", "Sweep c1 or c2 and tabulate rejection rates");
  SimFlags pow_flags;
  SolverFlags pow_solver;
  std::string pow_out = "hdmed-power";
  std::string sweep_var = "c1";
  std::vector<double> sweep_values;
  pow->add_option("--config", pow_flags.config_path, "SimConfig JSON file");
  pow->add_option("--preset", pow_flags.preset, "paper-example-1 or paper-example-2");
  pow->add_option("--sweep", sweep_var, "Variable to sweep: c1 or c2")->required();
  pow->add_option("--values", sweep_values, "Sweep values")->delimiter(',');
  pow->add_option("--seed", pow_flags.seed, "Base seed");
  pow->add_option("--reps", pow_flags.reps, "Replications per sweep value");
  pow->add_option("--c1", pow_flags.c1, "Fixed c1 (when sweeping c2)");
  pow->add_option("--c2", pow_flags.c2, "Fixed c2 (when sweeping c1)");
  pow->add_option("--n", pow_flags.n, "Sample size");
  pow->add_option("--p", pow_flags.p, "Mediator count");
  pow->add_option("--alpha-level", pow_flags.alpha_level, "Test level");
  pow->add_option("--workers", pow_flags.workers, "Worker threads");
  pow->add_option("--out", pow_out, "Output directory");
  pow_solver.add_to(pow);

  CLI11_PARSE(app, argc, argv);

  try {
    if (fit->parsed())
      return cmd_fit(data_csv, roles_path, !no_intercept, fit_out, fit_seed, fit_alpha,
                     fit_solver);
    if (sim->parsed()) return cmd_simulate(sim_flags, sim_solver, sim_out);
    if (pow->parsed()) return cmd_power(pow_flags, pow_solver, sweep_var, sweep_values, pow_out);
  } catch (const std::exception& e) {
    std::cerr << "hdmed: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
