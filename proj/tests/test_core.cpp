// Units, flux map, Hamiltonians and model files.
// Reference numbers come from tests/oracles/oracles.py.

#include "apbs/core_model.hpp"
#include "apbs/emission.hpp"
#include "apbs/errors.hpp"
#include "apbs/flux_map.hpp"
#include "apbs/model_io.hpp"
#include "apbs/units.hpp"

#include "test_support.hpp"

#include <doctest.h>

#include <cmath>

using namespace apbs;
using doctest::Approx;
using test_support::contains;

TEST_CASE("unit conversions") {
    CHECK(units::from_ghz(1.0) == Approx(2.0 * M_PI));
    CHECK(units::to_mhz(units::from_mhz(72.85)) == Approx(72.85));
    CHECK(units::to_ghz(units::default_frame) == Approx(5.5));
}

TEST_CASE("flux map sweet spots and inverse") {
    const auto& m = test_support::effective().model;
    const FluxMap map = m.flux_map();
    CHECK(map.d == Approx(0.4032544340930974).epsilon(1e-12));
    CHECK(units::to_ghz(map.frequency(0.0)) == Approx(5.23).epsilon(1e-12));
    CHECK(units::to_ghz(map.frequency(0.5)) == Approx(3.23).epsilon(1e-12));
    CHECK(units::to_ghz(map.frequency(0.25)) == Approx(4.535025557642713).epsilon(1e-12));
    CHECK(map.flux_for(units::from_ghz(3.8)) == Approx(0.36812102752041).epsilon(1e-10));
    CHECK(map.flux_for(units::from_ghz(5.2)) == Approx(0.05148812506635054).epsilon(1e-10));
    CHECK_THROWS_AS(map.flux_for(units::from_ghz(5.3)), SpecError);
    CHECK_THROWS_AS(map.flux_for(units::from_ghz(3.0)), SpecError);
}

TEST_CASE("tight-binding chain band edges") {
    const auto& lat = test_support::tight_binding().model.lattice;
    const Spectrum s = open_chain_modes(lat);
    REQUIRE(s.values.size() == 21);
    CHECK(units::to_ghz(s.values(0)) == Approx(5.091876789374146).epsilon(1e-12));
    CHECK(units::to_ghz(s.values(20)) == Approx(5.928275961287886).epsilon(1e-12));
}

TEST_CASE("port rates of the open chain") {
    const auto& lat = test_support::tight_binding().model.lattice;
    CHECK(units::to_mhz(lat.kappa_in) == Approx(35.41872792519704).epsilon(1e-9));
    CHECK(lat.kappa_in == Approx(lat.kappa_out));
    const PortRates r = tight_binding_port_rates(lat);
    const double expected[] = {0.12899960947572667, 0.5057219281258265, 1.1001395987219154, 1.8648216000707865,
                               2.7386511628967596};
    for (int n = 0; n < 5; ++n) CHECK(units::to_mhz(r.kappa_total[n]) == Approx(expected[n]).epsilon(1e-9));
    CHECK(units::to_mhz(r.kappa_total[10]) == Approx(6.44).epsilon(1e-12));
}

TEST_CASE("effective model inherits tight-binding rates") {
    const auto& lat = test_support::effective().model.lattice;
    REQUIRE(lat.mode_kappas.size() == 9);
    CHECK(units::to_mhz(lat.mode_kappas[0]) == Approx(0.12899960947572667).epsilon(1e-9));
    CHECK(lat.collective_ports);
}

TEST_CASE("effective Hamiltonian spectrum") {
    const auto& m = test_support::effective().model;
    SUBCASE("emitter parked at the lower sweet spot") {
        const Spectrum s = diagonalize(m.hamiltonian(m.flux_map().frequency(0.5)));
        const double expected[] = {3.22887590043359,  5.088227557854969, 5.105013367403672, 5.11404614805928,
                                   5.145188455881662, 5.174004812844787, 5.194065861872064, 5.236323008653183,
                                   5.283059126437903, 5.3221957605589};
        for (int k = 0; k < 10; ++k) CHECK(units::to_ghz(s.values(k)) == Approx(expected[k]).epsilon(1e-12));
    }
    SUBCASE("emitter just below the band") {
        const auto h = m.hamiltonian(units::from_ghz(5.06));
        const Spectrum s = diagonalize(h);
        CHECK(units::to_ghz(s.values(0)) == Approx(5.039955366456109).epsilon(1e-12));
        CHECK(units::to_ghz(s.values(1)) == Approx(5.095325265267246).epsilon(1e-12));
        const auto apbs = extract_apbs(h);
        CHECK(units::to_ghz(apbs.energy) == Approx(5.039955366456109).epsilon(1e-12));
        CHECK(apbs.photonic_weight > 0.0);
        CHECK(apbs.photonic_weight < 1.0);
        CHECK(std::norm(apbs.c_e) + apbs.photonic_weight == Approx(1.0));
    }
}

TEST_CASE("lossy Hamiltonian only changes the anti-Hermitian part") {
    const auto& m = test_support::effective().model;
    const double wq = units::from_ghz(4.5);
    const auto h0 = m.hamiltonian(wq, false).matrix;
    const auto h1 = m.hamiltonian(wq, true).matrix;
    CHECK((0.5 * (h1 + h1.adjoint()) - h0).norm() < 1e-12);
    // trace of the loss part is −i·Σκ/2
    const double loss = -(h1 - h0).trace().imag();
    double sum = 0.0;
    for (double k : m.lattice.mode_kappas) sum += k;
    CHECK(loss == Approx(sum / 2.0));
}

TEST_CASE("model file validation names the offending path") {
    json doc = read_json_file(test_support::model_path());
    CHECK(validate_model_json(doc).ok());

    json bad = doc;
    bad["emitter"]["omega_min_GHz"] = 6.0;
    auto r = validate_model_json(bad);
    CHECK_FALSE(r.ok());
    CHECK(contains(r.errors, "/emitter/omega_min_GHz"));

    bad = doc;
    bad["effective"]["g_MHz"].erase(0);
    r = validate_model_json(bad);
    CHECK_FALSE(r.ok());
    CHECK(contains(r.errors, "/effective"));

    bad = doc;
    bad["schema_version"] = 7;
    CHECK(contains(validate_model_json(bad).errors, "/schema_version"));
    CHECK_THROWS_AS(model_from_json(bad, ModelForm::effective), SpecError);

    CHECK_THROWS_AS(parse_form("lattice"), SpecError);
}

TEST_CASE("model round-trips through the manifest form") {
    const auto& loaded = test_support::effective();
    const json out = model_to_json(loaded);
    CHECK(out.dump().find("5.088") != std::string::npos);
    CHECK(out.contains("effective"));
}
