// model_io.hpp: JSON model files.
//
// Interface units: frequencies in GHz, couplings and rates in MHz, times in µs
// for T1. Everything is converted to rad/ns on load. One file may carry both
// model forms ("tight_binding" and "effective" blocks); the caller picks one.

#pragma once

#include "apbs/core_model.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace apbs {

using json = nlohmann::json;

inline constexpr int model_schema_version = 1;

struct LoadedModel {
    Model model;
    double emitter_decay = 0.0;        // 1/T1, 1/ns (0 if absent)
    ModelWarnings warnings;
    std::string name;
};

// Named findings, each prefixed with the JSON path it refers to.
struct ValidationReport {
    std::vector<std::string> errors;
    std::vector<std::string> warnings;
    bool ok() const noexcept { return errors.empty(); }
};

// Throws SpecError with the JSON path of the first violation.
LoadedModel model_from_json(const json& doc, ModelForm form);
LoadedModel load_model(const std::filesystem::path& path, ModelForm form);

ModelForm parse_form(const std::string& name);

// Collects every violation instead of stopping at the first.
ValidationReport validate_model_json(const json& doc);

// Resolved parameters in interface units, for manifests.
json model_to_json(const LoadedModel& loaded);

json read_json_file(const std::filesystem::path& path);

} // namespace apbs
