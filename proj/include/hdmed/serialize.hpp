#pragma once

#include <filesystem>
#include <json.hpp>
#include <string>

#include "hdmed/inference.hpp"
#include "hdmed/simulation.hpp"

namespace hdmed {

using json = nlohmann::json;

json to_json(const MediationFit& fit);
json to_json(const TestReport& report);
json to_json(const SimConfig& cfg);
json to_json(const SolverConfig& cfg);
json to_json(const SimSummary& summary);

SimConfig sim_config_from_json(const json& j);
// Reads solver overrides from the optional "solver" object.
SolverConfig solver_config_from_json(const json& j, SolverConfig base = {});

// Write-to-temp-then-rename so failures never leave partial files.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);
void write_json_atomic(const std::filesystem::path& path, const json& j);

}  // namespace hdmed
