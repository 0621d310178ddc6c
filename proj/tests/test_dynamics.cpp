// Pulses and time evolution.

#include "apbs/calibration.hpp"
#include "apbs/errors.hpp"
#include "apbs/propagator.hpp"
#include "apbs/pulse.hpp"
#include "apbs/units.hpp"

#include "test_support.hpp"

#include <doctest.h>

#include <cmath>

using namespace apbs;
using doctest::Approx;

namespace {

// One mode at 5 GHz and an emitter whose flux map spans ±1 GHz around it.
Model single_mode(double g, double kappa = 0.0) {
    Model m;
    m.lattice.n_sites = 1;
    m.lattice.mode_freqs = {units::from_ghz(5.0)};
    if (kappa > 0.0) m.lattice.mode_kappas = {kappa};
    m.emitter.omega_max = units::from_ghz(6.0);
    m.emitter.omega_min = units::from_ghz(4.0);
    m.emitter.g_modes = {g};
    return m;
}

double norm_at(const PropagationResult& r, std::size_t i) {
    return r.emitter_population[i] + r.mode_amplitudes.row(static_cast<Eigen::Index>(i)).squaredNorm();
}

} // namespace

TEST_CASE("trapezoid pulse shape") {
    const TrapezoidPulse p{0.4, 0.1, 10.0, 5.0, 20.0, true};
    CHECK(p.duration() == Approx(35.0));
    CHECK(p.flux_at(0.0) == Approx(0.4));
    CHECK(p.flux_at(5.0) == Approx(0.25));
    CHECK(p.flux_at(12.0) == Approx(0.1));
    CHECK(p.flux_at(25.0) == Approx(0.25));
    CHECK(p.flux_at(35.0) == Approx(0.4));

    const TrapezoidPulse q{0.4, 0.1, 10.0, 5.0, 20.0, false};
    CHECK(q.duration() == Approx(15.0));
    CHECK(q.flux_at(14.0) == Approx(0.1));

    CHECK_THROWS_AS((TrapezoidPulse{0.4, 0.1, -1.0, 0.0, 1.0, true}.validate()), SpecError);
}

TEST_CASE("pulse sampling and the flux-line filter") {
    const TrapezoidPulse p{0.0, 0.2, 3.0, 1.0, 3.0, true};
    const auto s = sample_pulse(p, 0.4);
    CHECK(s.front().t == Approx(0.0));
    CHECK(s.back().t == Approx(p.duration()));
    const auto f = apply_line_filter(s, LineFilter{units::from_mhz(100.0)});
    REQUIRE(f.size() == s.size());
    CHECK(f.front().phi == Approx(0.0));
    for (const auto& x : f) {
        CHECK(x.phi >= -1e-15);
        CHECK(x.phi <= 0.2 + 1e-15);
    }
    // a long hold relaxes to the input
    const TrapezoidPulse flat{0.1, 0.1, 1.0, 200.0, 1.0, true};
    const auto g = apply_line_filter(sample_pulse(flat, 0.1), LineFilter{units::from_mhz(50.0)});
    CHECK(g.back().phi == Approx(0.1));
}

TEST_CASE("resonant vacuum Rabi oscillation") {
    const double g = units::from_mhz(10.0);
    const Model m = single_mode(g);
    PropagationOptions opt;
    opt.frame = units::from_ghz(5.0);
    const auto r = propagate(m, constant_drive(units::from_ghz(5.0), 100.0), ExcitationState::emitter_excited(m.dim()), opt);
    for (std::size_t i = 0; i < r.times.size(); i += 997) {
        CHECK(r.emitter_population[i] == Approx(std::pow(std::cos(g * r.times[i]), 2)).epsilon(1e-9));
    }
}

TEST_CASE("lossy mode decays at kappa") {
    const double kappa = units::from_mhz(2.0);
    const Model m = single_mode(0.0, kappa);
    ExcitationState psi;
    psi.amplitudes = Eigen::VectorXcd::Zero(m.dim());
    psi.amplitudes(1) = 1.0;
    PropagationOptions opt;
    opt.with_decay = true;
    opt.record_stride = 100;
    const auto r = propagate(m, constant_drive(units::from_ghz(4.5), 300.0), psi, opt);
    for (std::size_t i = 0; i < r.times.size(); i += 50) {
        CHECK(std::norm(r.mode_amplitudes(static_cast<Eigen::Index>(i), 0)) ==
              Approx(std::exp(-kappa * r.times[i])).epsilon(1e-9));
    }
}

TEST_CASE("norm conservation over a pulse") {
    const auto& m = test_support::effective().model;
    const auto map = m.flux_map();
    const TrapezoidPulse p{map.flux_for(units::from_ghz(3.8)), map.flux_for(units::from_ghz(5.2)), 30.0, 940.0, 30.0,
                           true};
    const auto drive = make_drive(p, map);
    const auto start = ExcitationState::emitter_excited(m.dim());

    PropagationOptions opt;
    opt.record_stride = 10;
    const auto closed = propagate(m, drive, start, opt);
    double worst = 0.0;
    for (std::size_t i = 0; i < closed.times.size(); ++i) worst = std::max(worst, std::abs(norm_at(closed, i) - 1.0));
    CHECK(worst < 1e-9);

    opt.with_decay = true;
    opt.emitter_decay = 1.0 / 8450.0;
    const auto open = propagate(m, drive, start, opt);
    for (std::size_t i = 1; i < open.times.size(); ++i) REQUIRE(norm_at(open, i) <= norm_at(open, i - 1) + 1e-15);
    CHECK(norm_at(open, open.times.size() - 1) < 1.0);
}

TEST_CASE("segment propagator is unitary without loss") {
    const auto& m = test_support::effective().model;
    const auto drive = constant_drive(units::from_ghz(5.0), 20.0);
    const Eigen::MatrixXcd u = segment_propagator(m, drive, 0.0, 20.0);
    CHECK((u.adjoint() * u - Eigen::MatrixXcd::Identity(u.rows(), u.cols())).norm() < 1e-10);
}

TEST_CASE("round-trip ramp populations match an independent integrator") {
    // Rise 3.8 -> 5.2 GHz and straight back, no hold.
    const auto& m = test_support::effective().model;
    const auto map = m.flux_map();
    const double phi_i = map.flux_for(units::from_ghz(3.8)), phi_f = map.flux_for(units::from_ghz(5.2));
    const std::vector<double> hold{0.0};
    CHECK(hold_time_sweep(m, {phi_i, phi_f, 10.0, 0.0, 10.0, true}, hold)[0] ==
          Approx(0.19794365283286075).epsilon(1e-6));
    CHECK(hold_time_sweep(m, {phi_i, phi_f, 50.0, 0.0, 50.0, true}, hold)[0] ==
          Approx(0.39010243036270914).epsilon(1e-6));
}

TEST_CASE("hold sweep agrees with full propagation") {
    const auto& m = test_support::effective().model;
    const auto map = m.flux_map();
    const TrapezoidPulse p{map.flux_for(units::from_ghz(3.8)), map.flux_for(units::from_ghz(5.2)), 20.0, 37.0, 20.0,
                           true};
    const std::vector<double> hold{37.0};
    const double fast = hold_time_sweep(m, p, hold)[0];
    PropagationOptions opt;
    opt.record_stride = 0;
    const auto r = propagate(m, make_drive(p, map), ExcitationState::emitter_excited(m.dim()), opt);
    CHECK(fast == Approx(std::norm(r.final_state.amplitudes(0))).epsilon(1e-9));
    CHECK_THROWS_AS(hold_time_sweep(m, p, std::vector<double>{-1.0}), SpecError);
}

TEST_CASE("Landau-Zener formula and sweep") {
    const auto e = lz_estimate(units::from_mhz(20.67), units::from_ghz(1.4), 100.0);
    CHECK(e.adiabatic_time == Approx(248.65107655330345).epsilon(1e-12));
    CHECK(lz_estimate(1.0, 1.0, 0.1).p_lz == Approx(0.5334880910911033));
    CHECK(std::isinf(lz_estimate(0.0, 1.0, 10.0).adiabatic_time));
    CHECK(lz_estimate(0.0, 1.0, 10.0).p_lz == 1.0);

    const double g = units::from_mhz(5.0), de = units::from_ghz(4.0);
    const double dt = 0.1 * de / (g * g);
    CHECK(lz_numeric(g, de, dt, 0.0, 0.02) == Approx(0.5334880910911033).epsilon(0.03 / 0.53));
    CHECK(lz_numeric(0.0, de, 50.0, 0.0) == Approx(1.0));
}
