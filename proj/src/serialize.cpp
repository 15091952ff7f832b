#include "hdmed/serialize.hpp"

#include <cmath>
#include <fstream>

namespace hdmed {

namespace {

json matrix_to_json(const MatrixXd& m) {
  json data = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) data.push_back(m(i, j));
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

json vector_to_json(const VectorXd& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

json finite_or_null(double v) {
  if (std::isfinite(v)) return json(v);
  return json(nullptr);
}

}  // namespace

json to_json(const MediationFit& fit) {
  json sparse{{"size", fit.alpha0_hat.size()},
              {"indices", json::array()},
              {"values", json::array()}};
  for (int j : fit.active_set) {
    sparse["indices"].push_back(j);
    sparse["values"].push_back(fit.alpha0_hat[j]);
  }
  json j{{"alpha1_hat", vector_to_json(fit.alpha1_hat)},
         {"alpha0_hat", std::move(sparse)},
         {"active_set", fit.active_set},
         {"gamma_hat", vector_to_json(fit.gamma_hat)},
         {"beta_hat", vector_to_json(fit.beta_hat)},
         {"sigma1_sq", fit.sigma1_sq},
         {"sigma2_sq", fit.sigma2_sq},
         {"rss1", fit.rss1},
         {"cov_alpha1", matrix_to_json(fit.cov_alpha1)},
         {"cov_beta", matrix_to_json(fit.cov_beta)},
         {"lambda_selected", fit.lambda_selected},
         {"diagnostics",
          {{"sigma2_clipped", fit.sigma2_clipped},
           {"cd_converged", fit.cd_converged},
           {"lla_converged", fit.lla_converged},
           {"n_lla_iters", fit.n_lla_iters}}}};
  j["rss0"] = fit.rss0.has_value() ? json(*fit.rss0) : json(nullptr);
  return j;
}

json to_json(const TestReport& report) {
  json j{{"kind", report.kind == TestKind::WaldIndirect ? "wald_indirect" : "f_direct"},
         {"statistic", report.statistic},
         {"df", report.df},
         {"p_value", report.p_value},
         {"floored", report.floored}};
  j["noncentrality"] =
      report.noncentrality.has_value() ? json(*report.noncentrality) : json(nullptr);
  return j;
}

json to_json(const SimConfig& cfg) {
  return json{{"n", cfg.n},
              {"p", cfg.p},
              {"q", cfg.q},
              {"rho", cfg.rho},
              {"c1", cfg.c1},
              {"c2", cfg.c2},
              {"error_law", cfg.error_law == ErrorLaw::Gaussian ? "gaussian" : "scaled_t6"},
              {"n_reps", cfg.n_reps},
              {"seed", cfg.seed},
              {"alpha_level", cfg.alpha_level}};
}

json to_json(const SolverConfig& cfg) {
  return json{{"max_cd_iters", cfg.max_cd_iters},
              {"cd_tol", cfg.cd_tol},
              {"max_lla_iters", cfg.max_lla_iters},
              {"lambda_grid_size", cfg.lambda_grid_size},
              {"lambda_min_ratio", cfg.lambda_min_ratio}};
}

json to_json(const SimSummary& summary) {
  json methods = json::array();
  for (const MethodSummary& m : summary.methods) {
    methods.push_back(json{{"method", m.method},
                           {"n_total", m.n_total},
                           {"n_ok", m.n_ok},
                           {"bias_alpha1", finite_or_null(m.bias_alpha1)},
                           {"sd_alpha1", finite_or_null(m.sd_alpha1)},
                           {"mean_se_alpha1", finite_or_null(m.mean_se_alpha1)},
                           {"sd_se_alpha1", finite_or_null(m.sd_se_alpha1)},
                           {"bias_beta", finite_or_null(m.bias_beta)},
                           {"sd_beta", finite_or_null(m.sd_beta)},
                           {"mean_se_beta", finite_or_null(m.mean_se_beta)},
                           {"sd_se_beta", finite_or_null(m.sd_se_beta)},
                           {"reject_rate_indirect", m.reject_rate_indirect},
                           {"reject_rate_direct", m.reject_rate_direct},
                           {"mean_active_set_size", m.mean_active_set_size},
                           {"mean_fit_seconds", m.mean_fit_seconds}});
  }
  return json{{"truth", {{"alpha1", summary.truth.alpha1}, {"beta", summary.truth.beta}}},
              {"scale_note", "compare bias/sd/se with published tables after multiplying by 100"},
              {"methods", std::move(methods)}};
}

SimConfig sim_config_from_json(const json& j) {
  SimConfig cfg;
  try {
    if (j.contains("n")) cfg.n = j.at("n").get<int>();
    if (j.contains("p")) cfg.p = j.at("p").get<int>();
    if (j.contains("q")) cfg.q = j.at("q").get<int>();
    if (j.contains("rho")) cfg.rho = j.at("rho").get<double>();
    if (j.contains("c1")) cfg.c1 = j.at("c1").get<double>();
    if (j.contains("c2")) cfg.c2 = j.at("c2").get<double>();
    if (j.contains("error_law")) {
      const std::string law = j.at("error_law").get<std::string>();
      if (law == "gaussian")
        cfg.error_law = ErrorLaw::Gaussian;
      else if (law == "scaled_t6")
        cfg.error_law = ErrorLaw::ScaledT6;
      else
        throw ValidationError("config: unknown error_law '" + law + "'");
    }
    if (j.contains("n_reps")) cfg.n_reps = j.at("n_reps").get<int>();
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("alpha_level")) cfg.alpha_level = j.at("alpha_level").get<double>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  cfg.check();
  return cfg;
}

SolverConfig solver_config_from_json(const json& j, SolverConfig base) {
  SolverConfig cfg = base;
  if (!j.contains("solver")) return cfg;
  const json& s = j.at("solver");
  try {
    if (s.contains("max_cd_iters")) cfg.max_cd_iters = s.at("max_cd_iters").get<int>();
    if (s.contains("cd_tol")) cfg.cd_tol = s.at("cd_tol").get<double>();
    if (s.contains("max_lla_iters")) cfg.max_lla_iters = s.at("max_lla_iters").get<int>();
    if (s.contains("lambda_grid_size"))
      cfg.lambda_grid_size = s.at("lambda_grid_size").get<int>();
    if (s.contains("lambda_min_ratio"))
      cfg.lambda_min_ratio = s.at("lambda_min_ratio").get<double>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  cfg.check();
  return cfg;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out << contents;
    if (!out) throw Error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void write_json_atomic(const std::filesystem::path& path, const json& j) {
  write_file_atomic(path, j.dump(2) + "\n");
}

}  // namespace hdmed
