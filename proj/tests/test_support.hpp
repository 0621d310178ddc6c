// Shared fixtures for the unit tests.
#pragma once

#include "apbs/model_io.hpp"

#include <filesystem>
#include <string>

namespace test_support {

inline std::filesystem::path data_dir() { return APBS_DATA_DIR; }
inline std::filesystem::path model_path() { return data_dir() / "models" / "device21.json"; }

inline const apbs::LoadedModel& effective() {
    static const auto m = apbs::load_model(model_path(), apbs::ModelForm::effective);
    return m;
}

inline const apbs::LoadedModel& tight_binding() {
    static const auto m = apbs::load_model(model_path(), apbs::ModelForm::tight_binding);
    return m;
}

inline bool contains(const std::vector<std::string>& list, const std::string& needle) {
    for (const auto& s : list) {
        if (s.find(needle) != std::string::npos) return true;
    }
    return false;
}

} // namespace test_support
