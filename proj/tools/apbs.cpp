// apbs: command line front end.
//
//   apbs run <scenario.json> [--output-root DIR]
//   apbs validate <file.json>
//   apbs fit <data.csv> --model <model.json> [--out FILE] [--apbs-weight W]
//
// Exit codes: 0 success, 1 runtime failure, 2 invalid input.

#include "apbs/calibration.hpp"
#include "apbs/errors.hpp"
#include "apbs/scenario.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

namespace {

int code(apbs::ExitCode c) { return static_cast<int>(c); }

void print_report(const apbs::ValidationReport& r) {
    for (const auto& w : r.warnings) std::cerr << "warning " << w << '\n';
    for (const auto& e : r.errors) std::cerr << "error " << e << '\n';
}

int cmd_run(const std::string& path, const std::string& root_opt) {
    const std::filesystem::path file(path);
    apbs::json doc;
    try {
        doc = apbs::read_json_file(file);
    } catch (const std::exception& e) {
        std::cerr << e.what() << '\n';
        return code(apbs::ExitCode::usage);
    }
    const auto report = apbs::validate_scenario_json(doc, file.parent_path());
    print_report(report);
    if (!report.ok()) return code(apbs::ExitCode::usage);

    const auto scenario = apbs::scenario_from_json(doc, file.parent_path());
    const auto root = root_opt.empty() ? apbs::output_root() : std::filesystem::path(root_opt);
    try {
        const auto outcome = apbs::run_scenario(scenario, root);
        if (outcome.code != apbs::ExitCode::ok) {
            std::cerr << "run failed: " << outcome.message << '\n';
            std::cerr << "partial results in " << outcome.manifest.parent_path().string() << '\n';
            return code(outcome.code);
        }
        std::cout << outcome.manifest.string() << '\n';
    } catch (const std::exception& e) {
        std::cerr << "run failed: " << e.what() << '\n';
        return code(apbs::ExitCode::runtime);
    }
    return 0;
}

int cmd_validate(const std::string& path) {
    try {
        const auto report = apbs::validate_config(path);
        print_report(report);
        if (!report.ok()) return code(apbs::ExitCode::usage);
    } catch (const std::exception& e) {
        std::cerr << "error " << e.what() << '\n';
        return code(apbs::ExitCode::usage);
    }
    std::cout << "ok\n";
    return 0;
}

int cmd_fit(const std::string& data_path, const std::string& model_path, const std::string& out_path,
            double apbs_weight) {
    apbs::SpectroscopyDataset data;
    apbs::LoadedModel loaded;
    try {
        data = apbs::read_spectroscopy_csv(std::filesystem::path(data_path));
        loaded = apbs::load_model(model_path, apbs::ModelForm::effective);
    } catch (const std::exception& e) {
        std::cerr << e.what() << '\n';
        return code(apbs::ExitCode::usage);
    }
    apbs::FitOptions options;
    options.apbs_weight = apbs_weight;
    int status = 0;
    apbs::json out;
    try {
        // Start from the model's couplings and the measured mode peaks.
        apbs::Model guess = loaded.model;
        guess.lattice.mode_freqs = apbs::measured_mode_peaks(data, loaded.model);
        out = apbs::fit_effective_model(data, guess, options).to_json();
    } catch (const apbs::FitError& e) {
        std::cerr << "fit failed: " << e.what() << '\n';
        out = e.best().to_json();
        status = code(apbs::ExitCode::runtime);
    } catch (const std::exception& e) {
        std::cerr << "fit failed: " << e.what() << '\n';
        return code(apbs::ExitCode::runtime);
    }
    if (out_path.empty()) {
        std::cout << out.dump(2) << '\n';
    } else {
        std::ofstream(out_path) << out.dump(2) << '\n';
    }
    return status;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bound-state emitter simulations"};
    app.require_subcommand(1);

    std::string run_file, root;
    auto* run = app.add_subcommand("run", "Run a scenario file");
    run->add_option("scenario", run_file)->required()->check(CLI::ExistingFile);
    run->add_option("--output-root", root, "Overrides APBS_OUTPUT_ROOT");

    std::string validate_file;
    auto* validate = app.add_subcommand("validate", "Check a scenario or model file");
    validate->add_option("file", validate_file)->required()->check(CLI::ExistingFile);

    std::string data_file, model_file, out_file;
    double weight = 3.0;
    auto* fit = app.add_subcommand("fit", "Fit the effective model to spectroscopy data");
    fit->add_option("data", data_file)->required()->check(CLI::ExistingFile);
    fit->add_option("--model", model_file)->required()->check(CLI::ExistingFile);
    fit->add_option("--out", out_file);
    fit->add_option("--apbs-weight", weight)->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : code(apbs::ExitCode::usage);
    }
    if (*run) return cmd_run(run_file, root);
    if (*validate) return cmd_validate(validate_file);
    return cmd_fit(data_file, model_file, out_file, weight);
}
