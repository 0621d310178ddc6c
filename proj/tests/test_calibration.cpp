// CSV tables, spectroscopy data and the effective-model fit.

#include "apbs/calibration.hpp"
#include "apbs/csv.hpp"
#include "apbs/errors.hpp"
#include "apbs/units.hpp"

#include "test_support.hpp"

#include <doctest.h>

#include <sstream>

using namespace apbs;
using doctest::Approx;

namespace {

std::vector<double> grid(double a, double b, int n) {
    std::vector<double> out;
    for (int i = 0; i < n; ++i) out.push_back(a + (b - a) * i / (n - 1));
    return out;
}

} // namespace

TEST_CASE("csv round trip is exact") {
    csv::Table t;
    t.header = {"x", "y"};
    t.rows = {{0.1, 1.0 / 3.0}, {-2.5e-17, 6.02214076e23}};
    std::stringstream ss;
    csv::write(ss, t);
    const auto back = csv::read(ss);
    CHECK(back.header == t.header);
    CHECK(back.rows == t.rows);
    CHECK(back.column("y") == 1);
    CHECK_THROWS_AS(back.column("z"), SpecError);
}

TEST_CASE("csv errors name the line") {
    std::istringstream bad("# comment\na,b\n1,2\n\n3,oops\n");
    try {
        csv::read(bad);
        FAIL("expected SpecError");
    } catch (const SpecError& e) {
        CHECK(std::string(e.what()).find("line 5") != std::string::npos);
    }
    std::istringstream ragged("a,b\n1,2,3\n");
    CHECK_THROWS_AS(csv::read(ragged), SpecError);
}

TEST_CASE("synthesized spectroscopy") {
    const auto& m = test_support::effective().model;
    const auto g = grid(0.5, 0.0, 201);
    const auto data = synthesize_spectroscopy(m, g);
    CHECK(data.branch_count() == 9);
    CHECK(data.apbs_curve.size() == g.size());
    // the APBS stays below the lowest mode branch everywhere
    for (std::size_t i = 0; i < g.size(); ++i) CHECK(data.apbs_curve[i] < data.mode_curves[0][i]);
    CHECK(units::to_ghz(data.apbs_curve.front()) == Approx(3.22887590043359).epsilon(1e-12));

    std::stringstream ss;
    write_spectroscopy_csv(ss, data);
    const auto back = read_spectroscopy_csv(ss);
    CHECK(back.flux_grid == data.flux_grid);
    CHECK(back.branch_count() == 9);
    for (std::size_t i = 0; i < g.size(); ++i) CHECK(back.mode_curves[8][i] == Approx(data.mode_curves[8][i]).epsilon(1e-15));

    SpectroscopyDataset broken = data;
    broken.mode_curves[3].pop_back();
    CHECK_THROWS_AS(broken.validate(), SpecError);
}

TEST_CASE("measured peaks and the seeded guess") {
    const auto& m = test_support::effective().model;
    const auto data = synthesize_spectroscopy(m, grid(0.5, 0.0, 401));
    const auto peaks = measured_mode_peaks(data, m);
    REQUIRE(peaks.size() == 9);
    for (std::size_t k = 0; k < 9; ++k) CHECK(std::abs(units::to_mhz(peaks[k] - m.lattice.mode_freqs[k])) < 5.0);

    const Model a = perturbed_guess(m, peaks, 0.2, 7);
    const Model b = perturbed_guess(m, peaks, 0.2, 7);
    const Model c = perturbed_guess(m, peaks, 0.2, 8);
    CHECK(a.emitter.g_modes == b.emitter.g_modes);
    CHECK(a.emitter.g_modes != c.emitter.g_modes);
    for (std::size_t k = 0; k < 9; ++k) {
        const double r = a.emitter.g_modes[k] / m.emitter.g_modes[k];
        CHECK(r >= 0.8);
        CHECK(r <= 1.2);
    }
}

TEST_CASE("fit recovers the generating parameters") {
    const auto& m = test_support::effective().model;
    const auto data = synthesize_spectroscopy(m, grid(0.5, 0.0, 301));
    const Model guess = perturbed_guess(m, measured_mode_peaks(data, m), 0.2, 3);
    const auto r = fit_effective_model(data, guess);
    CHECK(r.converged);
    for (std::size_t k = 0; k < 9; ++k) {
        CHECK(r.g_modes[k] == Approx(m.emitter.g_modes[k]).epsilon(1e-6));
        CHECK(std::abs(units::to_mhz(r.mode_freqs[k] - m.lattice.mode_freqs[k])) < 1e-6);
    }
    CHECK(units::to_mhz(r.residual_rms) < 1e-6);
    const auto j = r.to_json();
    CHECK(j["g_MHz"][0].get<double>() == Approx(20.67).epsilon(1e-6));

    FitOptions capped;
    capped.max_iterations = 1;
    try {
        fit_effective_model(data, guess, capped);
        FAIL("expected FitError");
    } catch (const FitError& e) {
        CHECK_FALSE(e.best().converged);
        CHECK(e.best().g_modes.size() == 9);
    }
}
