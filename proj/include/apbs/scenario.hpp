// scenario.hpp: JSON scenario files, the runner behind `apbs run` and
// config validation.
//
// Interface units: frequencies in GHz, couplings and rates in MHz, times in
// ns. Each run writes plot-ready CSV files and a manifest.json that lists every
// file with its SHA-256 and the resolved parameter set.

#pragma once

#include "apbs/model_io.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace apbs {

inline constexpr int scenario_schema_version = 1;

enum class ExitCode : int { ok = 0, runtime = 1, usage = 2 };

struct Scenario {
    std::string name;
    std::string kind;  // spectroscopy, hold_sweep, quench_emission, phif_sweep, taur_sweep, lz, fit
    std::filesystem::path model_file;  // resolved against the scenario's directory
    ModelForm form = ModelForm::effective;
    std::filesystem::path output_dir;  // relative to the output root unless absolute
    std::uint64_t seed = 0;
    json params;
};

const std::vector<std::string>& scenario_kinds();

// Schema checks on a parsed scenario document; `base_dir` resolves the model
// path. Model files referenced by the scenario are validated as well.
ValidationReport validate_scenario_json(const json& doc, const std::filesystem::path& base_dir);

// Throws SpecError listing the first violation.
Scenario scenario_from_json(const json& doc, const std::filesystem::path& base_dir);
Scenario load_scenario(const std::filesystem::path& path);

// APBS_OUTPUT_ROOT, or ./apbs_out when unset.
std::filesystem::path output_root();

struct RunOutcome {
    ExitCode code = ExitCode::ok;
    std::filesystem::path manifest;
    std::string message;
    json results;  // scalar summaries, also stored in the manifest
};

// Runs the scenario and writes its artifacts under root/output_dir. A failing
// stage aborts the run; the manifest then has "status": "incomplete" and names
// the stage.
RunOutcome run_scenario(const Scenario& scenario, const std::filesystem::path& root);

// Scenario or model file, told apart by the "kind" key. Throws on an
// unreadable file.
ValidationReport validate_config(const std::filesystem::path& path);

std::string sha256_hex(const std::string& bytes);

} // namespace apbs
