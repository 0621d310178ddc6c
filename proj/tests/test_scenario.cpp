// Scenario files, the runner and the command line.

#include "apbs/errors.hpp"
#include "apbs/scenario.hpp"

#include "test_support.hpp"

#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

using namespace apbs;
using test_support::contains;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("apbs_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

json base(const std::string& kind) {
    return {{"schema_version", 1},
            {"name", "t_" + kind},
            {"kind", kind},
            {"model", "models/device21.json"},
            {"form", "effective"},
            {"params", json::object()}};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(APBS_CLI) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

} // namespace

TEST_CASE("sha256") {
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("scenario validation") {
    const fs::path dir = test_support::data_dir();
    json s = base("lz");
    s["params"] = {{"omega_f_GHz", 5.2}, {"delta_t_ns", {100, 200}}};
    CHECK(validate_scenario_json(s, dir).ok());

    json bad = s;
    bad["kind"] = "teleport";
    CHECK(contains(validate_scenario_json(bad, dir).errors, "/kind"));

    bad = s;
    bad["params"]["omega_f_GHz"] = 5.4;
    CHECK(contains(validate_scenario_json(bad, dir).errors, "/params/omega_f_GHz"));

    bad = s;
    bad["params"].erase("delta_t_ns");
    CHECK(contains(validate_scenario_json(bad, dir).errors, "/params/delta_t_ns: missing"));

    bad = s;
    bad["params"]["delta_t_ns"] = {100, -5};
    CHECK(contains(validate_scenario_json(bad, dir).errors, "/params/delta_t_ns/1"));

    bad = s;
    bad["model"] = "models/none.json";
    CHECK(contains(validate_scenario_json(bad, dir).errors, "/model"));

    json extra = s;
    extra["params"]["colour"] = "blue";
    const auto r = validate_scenario_json(extra, dir);
    CHECK(r.ok());
    CHECK(contains(r.warnings, "/params/colour"));

    CHECK_THROWS_AS(scenario_from_json(bad, dir), SpecError);
}

TEST_CASE("every shipped scenario validates") {
    for (const auto& entry : fs::directory_iterator(test_support::data_dir() / "scenarios")) {
        CAPTURE(entry.path().string());
        const auto r = validate_config(entry.path());
        CHECK(r.ok());
    }
    CHECK(validate_config(test_support::model_path()).ok());
}

TEST_CASE("runner writes hashed artifacts and a manifest") {
    const fs::path root = scratch("lz");
    json s = base("lz");
    s["params"] = {{"omega_f_GHz", 5.2}, {"delta_t_ns", {100, 250}}};
    const auto outcome = run_scenario(scenario_from_json(s, test_support::data_dir()), root);
    CHECK(outcome.code == ExitCode::ok);
    const json manifest = read_json_file(outcome.manifest);
    CHECK(manifest["status"] == "complete");
    CHECK(manifest["parameters"]["omega_f_GHz"] == 5.2);
    CHECK(manifest["model"]["form"] == "effective");
    REQUIRE(manifest["files"].size() == 1);
    const auto& f = manifest["files"][0];
    CHECK(f["path"] == "lz.csv");
    CHECK(f["sha256"] == sha256_hex(slurp(root / "t_lz" / "lz.csv")));
    CHECK(outcome.results["band_edge_mode_adiabatic_time_ns"].get<double>() ==
          doctest::Approx(248.65107655330345).epsilon(1e-9));
}

TEST_CASE("empty grid writes no data files") {
    const fs::path root = scratch("empty");
    json s = base("phif_sweep");
    s["params"] = {{"omega_f_GHz", json::array()}, {"tau_r_ns", 300}};
    const auto outcome = run_scenario(scenario_from_json(s, test_support::data_dir()), root);
    CHECK(outcome.code == ExitCode::ok);
    const json manifest = read_json_file(outcome.manifest);
    CHECK(manifest["status"] == "complete");
    CHECK(manifest["files"].empty());
    std::size_t n = 0;
    for ([[maybe_unused]] const auto& e : fs::directory_iterator(root / "t_phif_sweep")) ++n;
    CHECK(n == 1);
}

TEST_CASE("a failing stage leaves an incomplete manifest") {
    const fs::path root = scratch("fail");
    json s = base("fit");
    s["seed"] = 7;
    s["params"] = {{"flux_points", 101}, {"max_iterations", 1}};
    const auto outcome = run_scenario(scenario_from_json(s, test_support::data_dir()), root);
    CHECK(outcome.code == ExitCode::runtime);
    const json manifest = read_json_file(outcome.manifest);
    CHECK(manifest["status"] == "incomplete");
    CHECK(manifest["error"]["module"] == "fit");
    CHECK(fs::exists(root / "t_fit" / "fit.json"));
}

TEST_CASE("command line exit codes") {
    const fs::path dir = scratch("cli");
    CHECK(run_cli("validate " + test_support::model_path().string()) == 0);
    CHECK(run_cli("frobnicate") == 2);
    CHECK(run_cli("run /no/such/file.json") == 2);

    json s = base("lz");
    s["model"] = test_support::model_path().string();
    s["params"] = {{"omega_f_GHz", 9.0}, {"delta_t_ns", {100}}};
    std::ofstream(dir / "bad.json") << s.dump();
    CHECK(run_cli("validate " + (dir / "bad.json").string()) == 2);
    CHECK(run_cli("run " + (dir / "bad.json").string()) == 2);

    s["params"]["omega_f_GHz"] = 5.2;
    std::ofstream(dir / "good.json") << s.dump();
    CHECK(run_cli("run " + (dir / "good.json").string() + " --output-root " + (dir / "out").string()) == 0);
    CHECK(fs::exists(dir / "out" / "t_lz" / "manifest.json"));

    std::ofstream(dir / "garbage.json") << "{ not json";
    CHECK(run_cli("validate " + (dir / "garbage.json").string()) == 2);
}
