#pragma once

#include <string>

#include <json.hpp>

#include "penergy/criteria.hpp"

namespace penergy {

// Form document: {vertices: [labels], p: number, coeffs: [[x, y, c], ...]}
nlohmann::json form_to_json(const StandardForm& form);
StandardForm form_from_json(const nlohmann::json& j);

// Fractal spec document:
// {boundary: [...], cells: [{images: {v0label: v1label,...}}], r: [...],
//  group: [{sigma: {...}, cell_perm: [...]}], geometry: {label: [x,y],...},
//  fixed_words: {label: [cells...]}, solver: {...}}   (trailing keys optional)
nlohmann::json structure_to_json(const PcfStructure& s);
PcfStructure structure_from_json(const nlohmann::json& j);
PcfStructure load_structure(const std::string& path);

// Optional "solver" block of a fractal spec; returns defaults when absent.
SolverConfig solver_config_from_json(const nlohmann::json& j, SolverConfig base = {});

struct RunManifest {
    std::string command;
    std::string input_path;
    SolverConfig cfg;
    std::uint64_t seed = 0;
    std::string tool_version;
    std::string timestamp;
};

RunManifest make_manifest(const std::string& command, const std::string& input_path,
                          const SolverConfig& cfg);
nlohmann::json manifest_to_json(const RunManifest& m);

const char* sabot_verdict_name(SabotVerdict v);

nlohmann::json sabot_report_to_json(const SabotReport& report);
nlohmann::json eigen_report_to_json(const EigenReport& report);
nlohmann::json renorm_states_to_json(const std::vector<RenormState>& states);

}  // namespace penergy
