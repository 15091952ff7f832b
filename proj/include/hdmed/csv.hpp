#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "hdmed/dataset.hpp"
#include "hdmed/simulation.hpp"

namespace hdmed {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

// Strict numeric CSV with a header row. Errors carry 1-based row and
// column positions.
CsvTable read_csv(const std::filesystem::path& path);

// Column roles for the mediation model. Default assignment is by name:
// outcome column `y`, exposures `x1..xq`, mediators `m1..mp` (sorted by
// numeric suffix). An explicit roles file overrides the convention.
struct ColumnRoles {
  int outcome = -1;
  std::vector<int> exposures;
  std::vector<int> mediators;
};

ColumnRoles assign_roles_by_name(const std::vector<std::string>& header);
ColumnRoles assign_roles(const std::vector<std::string>& header, const std::string& outcome_name,
                         const std::vector<std::string>& exposure_names,
                         const std::vector<std::string>& mediator_names);

Dataset dataset_from_table(const CsvTable& table, const ColumnRoles& roles,
                           bool include_intercept);

// CSV bodies; writers below emit them atomically (temp + rename).
std::string replications_csv(const std::vector<RepOutcome>& outcomes);
std::string power_csv(const std::vector<PowerPoint>& points);

void write_replications_csv(const std::filesystem::path& path,
                            const std::vector<RepOutcome>& outcomes);

void write_power_csv(const std::filesystem::path& path, const std::vector<PowerPoint>& points);

}  // namespace hdmed
