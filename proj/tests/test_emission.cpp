// FFT helpers and the emission analysis chain on synthetic traces.

#include "apbs/emission.hpp"
#include "apbs/errors.hpp"
#include "apbs/spectrum.hpp"
#include "apbs/units.hpp"

#include "test_support.hpp"

#include <doctest.h>

#include <cmath>
#include <complex>

using namespace apbs;
using doctest::Approx;
using cd = std::complex<double>;

namespace {

struct Line {
    double freq_ghz;  // absolute
    double tau;       // ns, field envelope
    double amplitude;
};

// Decaying lines sampled every dt ns around the band center.
EmissionTrace make_trace(const std::vector<Line>& lines, double window = 20000.0, double dt = 1.0,
                         AcquisitionBand band = {}) {
    EmissionTrace tr;
    tr.band = band;
    const auto n = static_cast<std::size_t>(window / dt);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) * dt;
        cd v = 0.0;
        for (const auto& l : lines) {
            v += l.amplitude * std::exp(-t / l.tau) * std::exp(cd(0.0, -units::two_pi * (l.freq_ghz - band.center_ghz) * t));
        }
        tr.times.push_back(t);
        tr.field.push_back(v);
    }
    return tr;
}

} // namespace

TEST_CASE("real DFT matches the reference") {
    const std::vector<double> x{0.3, -1.2, 2.5, 0.7, -0.1, 1.9, 0.0, -2.2};
    const auto X = dsp::rdft(x);
    const double expected[] = {1.9, 4.508744910628459, 3.1827660925679098, 5.341462283952025, 3.5000000000000004};
    REQUIRE(X.size() == 5);
    for (int k = 0; k < 5; ++k) CHECK(std::abs(X[k]) == Approx(expected[k]).epsilon(1e-12));
}

TEST_CASE("complex DFT inverts") {
    std::vector<cd> x;
    for (int i = 0; i < 37; ++i) x.emplace_back(std::sin(0.3 * i), std::cos(1.7 * i));
    const auto y = dsp::dft(dsp::dft(x, -1), +1);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(y[i] / 37.0 - x[i]) < 1e-12);
}

TEST_CASE("peak picking") {
    const std::vector<double> m{5.0, 1.0, 3.0, 1.0, 0.2, 0.4, 0.1, 10.0, 2.0};
    CHECK(dsp::find_peaks(m, 0.1, 1, true) == std::vector<std::size_t>{2, 7});
    CHECK(dsp::find_peaks(m, 0.1, 1, false) == std::vector<std::size_t>{0, 2, 7});
    CHECK(dsp::find_peaks(m, 0.35, 1, true) == std::vector<std::size_t>{7});
    CHECK(dsp::uniform_spacing(std::vector<double>{0.0, 0.5, 1.0}) == Approx(0.5));
    CHECK_THROWS_AS(dsp::uniform_spacing(std::vector<double>{0.0, 0.5, 1.2}), SamplingError);
}

TEST_CASE("emission FFT locates an off-bin line") {
    const double f = 5.0123456;
    const auto tr = make_trace({{f, 4000.0, 0.01}});
    const auto s = emission_fft(tr);
    REQUIRE(s.peaks.size() == 1);
    CHECK(s.bin_ghz == Approx(1.0 / 20000.0));
    CHECK(std::abs(s.peaks[0].freq_ghz - f) < 0.2 * s.bin_ghz);
    CHECK(s.freqs_ghz.front() >= 4.5 - 1e-12);
    CHECK(s.freqs_ghz.back() <= 5.5 + 1e-12);
}

TEST_CASE("exponential fit recovers tau") {
    std::vector<double> t;
    std::vector<cd> env;
    for (int i = 0; i < 5000; ++i) {
        t.push_back(i);
        env.push_back(0.3 * std::exp(-i / 700.0) * std::exp(cd(0.0, 0.01 * i)));
    }
    const auto fit = fit_exponential_decay(env, t);
    CHECK(fit.tau == Approx(700.0).epsilon(1e-6));
    CHECK(fit.amplitude == Approx(0.3).epsilon(1e-6));
    std::vector<cd> flat(200, cd(1.0, 0.0));
    CHECK_THROWS_AS(fit_exponential_decay(flat, std::span<const double>(t.data(), 200)), FitDomainError);
}

TEST_CASE("photon count of a single exponential") {
    // a·exp(−t/τ): |∫|² / 2τ = a²τ/2 = ∫|env|²
    std::vector<double> t;
    std::vector<cd> env;
    const double a = 0.02, tau = 300.0;
    for (int i = 0; i < 20000; ++i) {
        t.push_back(i * 0.5);
        env.push_back(a * std::exp(-t.back() / tau));
    }
    const auto c = photon_count(env, t, tau);
    CHECK(c.photons == Approx(a * a * tau / 2.0).epsilon(2e-3));
    CHECK_FALSE(c.truncated);
}

TEST_CASE("two-line trace: per-mode demodulation and fits") {
    const Line l1{5.010, 2000.0, 0.010}, l2{5.030, 300.0, 0.020};
    const auto tr = make_trace({l1, l2});
    const std::vector<double> freqs{l1.freq_ghz, l2.freq_ghz};
    const auto m1 = analyze_mode(tr, 1, l1.freq_ghz, 5.0, std::vector<double>{l2.freq_ghz});
    const auto m2 = analyze_mode(tr, 2, l2.freq_ghz, 5.0, std::vector<double>{l1.freq_ghz});
    CHECK(m1.fit_ok);
    CHECK(m2.fit_ok);
    CHECK(m1.tau_fit == Approx(l1.tau).epsilon(0.01));
    CHECK(m2.tau_fit == Approx(l2.tau).epsilon(0.01));
    CHECK(m1.kappa == Approx(2.0 / m1.tau_fit));
    CHECK(m1.kappa_2pi_over_tau == Approx(units::two_pi / m1.tau_fit));
    CHECK(m1.photons == Approx(l1.amplitude * l1.amplitude * l1.tau / 2.0).epsilon(0.02));
    CHECK(m2.photons == Approx(l2.amplitude * l2.amplitude * l2.tau / 2.0).epsilon(0.02));
    CHECK(m1.peak_freq_ghz == Approx(l1.freq_ghz).epsilon(1e-8));

    CHECK_THROWS_AS(demodulate_mode(tr, l1.freq_ghz, 12.0, std::vector<double>{l2.freq_ghz}), LeakageError);
}

TEST_CASE("resonances of the lossy effective model") {
    const auto& m = test_support::effective().model;
    const double wq = units::from_ghz(3.8);
    const auto res = resonance_frequencies(m, wq);
    const auto dressed = dressed_mode_frequencies(m, wq);
    REQUIRE(res.size() == 9);
    REQUIRE(dressed.size() == 9);
    for (std::size_t k = 0; k < 9; ++k) {
        CHECK(std::abs(units::to_mhz(res[k] - dressed[k])) < 2.0);
        CHECK(std::abs(units::to_ghz(res[k]) - units::to_ghz(m.lattice.mode_freqs[k])) < 1e-3);
    }
}

TEST_CASE("output couplings carry the monitored share") {
    const auto& m = test_support::effective().model;
    const auto c = output_couplings(m);
    REQUIRE(c.size() == 9);
    for (std::size_t k = 0; k < 9; ++k) CHECK(c[k] * c[k] == Approx(0.5 * m.lattice.mode_kappas[k]));
    const auto& tb = test_support::tight_binding().model;
    const auto d = output_couplings(tb);
    CHECK(d.back() * d.back() == Approx(tb.lattice.kappa_out));
}
