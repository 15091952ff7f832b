#include "hdmed/csv.hpp"

#include <algorithm>
#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "hdmed/serialize.hpp"

namespace hdmed {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

// Writes with enough digits to round-trip doubles; integral values and
// flags print compactly so repeated runs stay byte-identical trivially.
std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("csv: cannot open " + path.string());

  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("csv: empty file " + path.string());
  for (const std::string& name : split_line(line)) table.header.push_back(trim(name));
  if (table.header.empty()) throw ValidationError("csv: empty header row");

  size_t row_no = 1;
  while (std::getline(in, line)) {
    ++row_no;
    if (trim(line).empty()) continue;
    const auto cells = split_line(line);
    if (cells.size() != table.header.size())
      throw ValidationError("csv: row " + std::to_string(row_no) + " has " +
                            std::to_string(cells.size()) + " cells, header has " +
                            std::to_string(table.header.size()));
    std::vector<double> row(cells.size());
    for (size_t c = 0; c < cells.size(); ++c) {
      const std::string cell = trim(cells[c]);
      char* end = nullptr;
      errno = 0;
      const double v = std::strtod(cell.c_str(), &end);
      if (cell.empty() || end != cell.c_str() + cell.size() || errno == ERANGE)
        throw ValidationError("csv: non-numeric cell at row " + std::to_string(row_no) +
                              ", column " + std::to_string(c + 1) + " ('" + cell + "', header '" +
                              table.header[c] + "')");
      row[c] = v;
    }
    table.rows.push_back(std::move(row));
  }
  if (table.rows.empty()) throw ValidationError("csv: no data rows in " + path.string());
  return table;
}

namespace {

// Name of the form prefix + digits; returns the numeric suffix or -1.
long suffix_of(const std::string& name, char prefix) {
  if (name.size() < 2 || name[0] != prefix) return -1;
  for (size_t i = 1; i < name.size(); ++i)
    if (!std::isdigit(static_cast<unsigned char>(name[i]))) return -1;
  return std::strtol(name.c_str() + 1, nullptr, 10);
}

int find_column(const std::vector<std::string>& header, const std::string& name) {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw ValidationError("csv roles: column '" + name + "' not found");
  return static_cast<int>(it - header.begin());
}

}  // namespace

ColumnRoles assign_roles_by_name(const std::vector<std::string>& header) {
  ColumnRoles roles;
  std::vector<std::pair<long, int>> xs, ms;
  for (size_t c = 0; c < header.size(); ++c) {
    const std::string& name = header[c];
    if (name == "y") {
      if (roles.outcome >= 0) throw ValidationError("csv roles: duplicate outcome column 'y'");
      roles.outcome = static_cast<int>(c);
    } else if (long sx = suffix_of(name, 'x'); sx >= 0) {
      xs.emplace_back(sx, static_cast<int>(c));
    } else if (long sm = suffix_of(name, 'm'); sm >= 0) {
      ms.emplace_back(sm, static_cast<int>(c));
    } else {
      throw ValidationError("csv roles: column '" + name +
                            "' matches no role (expected y, x<k>, m<k>); "
                            "pass an explicit roles file for custom headers");
    }
  }
  if (roles.outcome < 0) throw ValidationError("csv roles: outcome column 'y' not found");
  std::sort(xs.begin(), xs.end());
  std::sort(ms.begin(), ms.end());
  for (const auto& [_, c] : xs) roles.exposures.push_back(c);
  for (const auto& [_, c] : ms) roles.mediators.push_back(c);
  if (roles.exposures.empty()) throw ValidationError("csv roles: no exposure columns x<k>");
  if (roles.mediators.empty()) throw ValidationError("csv roles: no mediator columns m<k>");
  return roles;
}

ColumnRoles assign_roles(const std::vector<std::string>& header, const std::string& outcome_name,
                         const std::vector<std::string>& exposure_names,
                         const std::vector<std::string>& mediator_names) {
  ColumnRoles roles;
  roles.outcome = find_column(header, outcome_name);
  for (const auto& name : exposure_names) roles.exposures.push_back(find_column(header, name));
  for (const auto& name : mediator_names) roles.mediators.push_back(find_column(header, name));
  if (roles.exposures.empty()) throw ValidationError("csv roles: empty exposure list");
  if (roles.mediators.empty()) throw ValidationError("csv roles: empty mediator list");
  return roles;
}

Dataset dataset_from_table(const CsvTable& table, const ColumnRoles& roles,
                           bool include_intercept) {
  const Eigen::Index n = static_cast<Eigen::Index>(table.rows.size());
  VectorXd y(n);
  MatrixXd X(n, static_cast<Eigen::Index>(roles.exposures.size()));
  MatrixXd M(n, static_cast<Eigen::Index>(roles.mediators.size()));
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& row = table.rows[static_cast<size_t>(i)];
    y[i] = row[static_cast<size_t>(roles.outcome)];
    for (size_t k = 0; k < roles.exposures.size(); ++k)
      X(i, static_cast<Eigen::Index>(k)) = row[static_cast<size_t>(roles.exposures[k])];
    for (size_t k = 0; k < roles.mediators.size(); ++k)
      M(i, static_cast<Eigen::Index>(k)) = row[static_cast<size_t>(roles.mediators[k])];
  }
  return Dataset::validate(std::move(y), std::move(X), std::move(M), include_intercept);
}

std::string replications_csv(const std::vector<RepOutcome>& outcomes) {
  std::string out;
  // fit_seconds is deliberately not serialized: wall time varies between
  // runs and the table is required to be byte-reproducible.
  out += "rep_id,method,ok,alpha1_hat,beta_hat,se_alpha1,se_beta,active_set_size,"
         "S_n,T_n,reject_indirect,reject_direct,note\n";
  for (const RepOutcome& o : outcomes) {
    std::string note = o.error;
    std::replace(note.begin(), note.end(), ',', ';');
    std::replace(note.begin(), note.end(), '\n', ' ');
    out += std::to_string(o.rep_id);
    out += o.method == Method::Penalized ? ",penalized," : ",oracle,";
    out += o.ok ? "1," : "0,";
    out += format_double(o.alpha1_hat) + ',' + format_double(o.beta_hat) + ',' +
           format_double(o.se_alpha1) + ',' + format_double(o.se_beta) + ',' +
           std::to_string(o.active_set_size) + ',' + format_double(o.S_n) + ',' +
           format_double(o.T_n) + ',';
    out += o.reject_indirect ? "1," : "0,";
    out += o.reject_direct ? "1," : "0,";
    out += note + '\n';
  }
  return out;
}

std::string power_csv(const std::vector<PowerPoint>& points) {
  std::string out = "value,rejection_rate,mc_se,theoretical,n_ok,n_reps\n";
  for (const PowerPoint& pt : points) {
    out += format_double(pt.value) + ',' + format_double(pt.rejection_rate) + ',' +
           format_double(pt.mc_se) + ',' + format_double(pt.theoretical) + ',' +
           std::to_string(pt.n_ok) + ',' + std::to_string(pt.n_reps) + '\n';
  }
  return out;
}

void write_replications_csv(const std::filesystem::path& path,
                            const std::vector<RepOutcome>& outcomes) {
  write_file_atomic(path, replications_csv(outcomes));
}

void write_power_csv(const std::filesystem::path& path, const std::vector<PowerPoint>& points) {
  write_file_atomic(path, power_csv(points));
}

}  // namespace hdmed
