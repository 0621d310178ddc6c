#include "apbs/emission.hpp"

#include "apbs/errors.hpp"
#include "apbs/spectrum.hpp"
#include "apbs/units.hpp"

#include <ceres/ceres.h>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>

namespace apbs {

namespace {

using cd = std::complex<double>;
constexpr cd I{0.0, 1.0};
constexpr double pi = std::numbers::pi;

// Blackman-windowed sinc, normalized to unit DC gain. Length ≈ 4/(fc·dt),
// which puts the stop band (−74 dB) at about 1.7·fc.
std::vector<double> lowpass_taps(double fc_ghz, double dt) {
    auto len = static_cast<std::size_t>(std::ceil(4.0 / (fc_ghz * dt)));
    if (len % 2 == 0) ++len;
    len = std::max<std::size_t>(len, 3);
    std::vector<double> h(len);
    const double mid = static_cast<double>(len - 1) / 2.0;
    double sum = 0.0;
    for (std::size_t j = 0; j < len; ++j) {
        const double m = static_cast<double>(j) - mid;
        const double x = 2.0 * fc_ghz * dt * m;
        const double sinc = m == 0.0 ? 1.0 : std::sin(pi * x) / (pi * x);
        const double w = 0.42 - 0.5 * std::cos(2.0 * pi * static_cast<double>(j) / static_cast<double>(len - 1)) +
                         0.08 * std::cos(4.0 * pi * static_cast<double>(j) / static_cast<double>(len - 1));
        h[j] = sinc * w;
        sum += h[j];
    }
    for (auto& v : h) v /= sum;
    return h;
}

// Full linear convolution (length x.size() + h.size() − 1) via FFT.
std::vector<cd> convolve(std::span<const cd> x, std::span<const double> h) {
    const std::size_t m = x.size() + h.size() - 1;
    std::vector<cd> xp(m, cd{}), hp(m, cd{});
    std::copy(x.begin(), x.end(), xp.begin());
    for (std::size_t j = 0; j < h.size(); ++j) hp[j] = h[j];
    auto xf = dsp::dft(xp, -1);
    const auto hf = dsp::dft(hp, -1);
    for (std::size_t k = 0; k < m; ++k) xf[k] *= hf[k];
    auto y = dsp::dft(xf, +1);
    for (auto& v : y) v /= static_cast<double>(m);
    return y;
}

struct ExpResidual {
    double t;
    double y;
    template <typename T>
    bool operator()(const T* p, T* r) const {
        r[0] = p[0] * exp(-p[1] * T(t)) - T(y);
        return true;
    }
};

double weighted_emitter_overlap(const Eigen::MatrixXcd& vectors, Eigen::Index row, Eigen::Index col) {
    return std::norm(vectors(row, col));
}

// Indices of photon-like eigenvectors (all but the most emitter-like and, if
// present, the most TLS-like).
std::vector<Eigen::Index> photon_like_indices(const SingleExcitationHamiltonian& h, const Spectrum& s) {
    const Eigen::Index dim = h.dim();
    std::vector<bool> excluded(static_cast<std::size_t>(dim), false);
    auto exclude_max = [&](Eigen::Index row) {
        Eigen::Index best = -1;
        double w = -1.0;
        for (Eigen::Index k = 0; k < dim; ++k) {
            if (excluded[static_cast<std::size_t>(k)]) continue;
            const double o = weighted_emitter_overlap(s.vectors, row, k);
            if (o > w) {
                w = o;
                best = k;
            }
        }
        if (best >= 0) excluded[static_cast<std::size_t>(best)] = true;
    };
    exclude_max(0);
    if (h.has_tls) exclude_max(h.tls_index());
    std::vector<Eigen::Index> out;
    for (Eigen::Index k = 0; k < dim; ++k) {
        if (!excluded[static_cast<std::size_t>(k)]) out.push_back(k);
    }
    return out;
}

} // namespace

double EmissionTrace::dt() const {
    if (times.size() < 2) return 0.0;
    return (times.back() - times.front()) / static_cast<double>(times.size() - 1);
}

double EmissionTrace::energy() const {
    double e = 0.0;
    for (const auto& f : field) e += std::norm(f);
    return e * dt();
}

std::vector<double> output_couplings(const Model& model) {
    const auto& lat = model.lattice;
    if (model.form() == ModelForm::tight_binding) {
        std::vector<double> c(static_cast<std::size_t>(lat.n_sites), 0.0);
        c.back() = std::sqrt(lat.kappa_out);
        return c;
    }
    const std::size_t n = lat.mode_freqs.size();
    const auto w = output_share(lat);
    std::vector<double> c(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double kappa = lat.mode_kappas.empty() ? 0.0 : lat.mode_kappas[i];
        const double sign = lat.collective_ports && i % 2 == 1 ? -1.0 : 1.0;
        c[i] = sign * std::sqrt(w[i] * kappa);
    }
    return c;
}

EmissionTrace synthesize_output_field(const PropagationResult& propagation, std::span<const double> couplings,
                                      const AcquisitionBand& band, double scale) {
    const Eigen::Index n_modes = propagation.mode_amplitudes.cols();
    if (static_cast<Eigen::Index>(couplings.size()) != n_modes) {
        throw SpecError("synthesize_output_field: coupling vector length does not match the mode count");
    }
    EmissionTrace trace;
    trace.band = band;
    const std::size_t n = propagation.times.size();
    if (n == 0) return trace;
    if (n > 1) dsp::uniform_spacing(propagation.times);
    const double t0 = propagation.times.front();
    const double shift = propagation.frame - units::from_ghz(band.center_ghz);
    Eigen::VectorXcd c(n_modes);
    for (Eigen::Index m = 0; m < n_modes; ++m) c(m) = couplings[static_cast<std::size_t>(m)];

    trace.times.resize(n);
    trace.field.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double t = propagation.times[k];
        const cd a = propagation.mode_amplitudes.row(static_cast<Eigen::Index>(k)).transpose().cwiseProduct(c).sum();
        trace.times[k] = t - t0;
        trace.field[k] = scale * a * std::exp(-I * (shift * t));
    }
    return trace;
}

EmissionTrace synthesize_output_field(const PropagationResult& propagation, std::span<const double> mode_kappas,
                                      std::span<const double> port_weights, const AcquisitionBand& band,
                                      double scale) {
    if (mode_kappas.size() != port_weights.size()) {
        throw SpecError("synthesize_output_field: weight vector length does not match mode_kappas");
    }
    std::vector<double> c(mode_kappas.size());
    for (std::size_t i = 0; i < c.size(); ++i) c[i] = std::sqrt(port_weights[i] * mode_kappas[i]);
    return synthesize_output_field(propagation, c, band, scale);
}

EmissionSpectrum emission_fft(const EmissionTrace& trace, double rel_threshold) {
    EmissionSpectrum out;
    const std::size_t n = trace.field.size();
    if (n < 2) return out;
    const double dt = trace.dt();
    const auto bins = dsp::dft(trace.field, +1);
    out.bin_ghz = 1.0 / (static_cast<double>(n) * dt);
    const double half_width = trace.band.width_ghz / 2.0;

    // Reorder to ascending baseband frequency.
    const std::size_t neg = n / 2;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t k = (i + n - neg) % n;
        const double f = (k < n - neg ? static_cast<double>(k) : static_cast<double>(k) - static_cast<double>(n)) *
                         out.bin_ghz;
        if (std::abs(f) > half_width + 1e-12) continue;
        out.freqs_ghz.push_back(trace.band.center_ghz + f);
        out.magnitudes.push_back(std::abs(bins[k]) * dt);
    }
    for (std::size_t idx : dsp::find_peaks(out.magnitudes, rel_threshold, 2, false)) {
        // Three-point parabolic refinement of the peak position.
        double shift = 0.0;
        if (idx > 0 && idx + 1 < out.magnitudes.size()) {
            const double a = out.magnitudes[idx - 1], b = out.magnitudes[idx], c = out.magnitudes[idx + 1];
            const double den = a - 2.0 * b + c;
            if (den < 0.0) shift = std::clamp(0.5 * (a - c) / den, -0.5, 0.5);
        }
        out.peaks.push_back({out.freqs_ghz[idx] + shift * out.bin_ghz, out.magnitudes[idx], idx});
    }
    return out;
}

namespace {

struct Demodulated {
    ModeEmission mode;
    std::vector<cd> causal;  // full causal output, length N + L − 1
};

Demodulated demodulate(const EmissionTrace& trace, double peak_freq_ghz, double lp_cutoff_mhz,
                       std::span<const double> neighbours) {
    if (!(lp_cutoff_mhz > 0.0)) throw SpecError("demodulate_mode: cutoff must be > 0");
    const double offset = peak_freq_ghz - trace.band.center_ghz;
    if (std::abs(offset) > trace.band.width_ghz / 2.0) {
        throw SpecError("demodulate_mode: frequency outside the acquisition band");
    }
    double nearest = std::numeric_limits<double>::infinity();
    for (double f : neighbours) {
        const double d = std::abs(f - peak_freq_ghz) * 1e3;
        if (d > 1e-9) nearest = std::min(nearest, d);
    }
    if (lp_cutoff_mhz > 0.5 * nearest * (1.0 + 1e-9)) {
        throw LeakageError("demodulate_mode: cutoff wider than half the spacing to the nearest line");
    }
    const std::size_t n = trace.field.size();
    const double dt = trace.dt();
    const auto taps = lowpass_taps(lp_cutoff_mhz * 1e-3, dt);
    if (taps.size() > n) throw SamplingError("demodulate_mode: trace shorter than the low-pass filter");

    std::vector<cd> mixed(n);
    for (std::size_t k = 0; k < n; ++k) {
        mixed[k] = trace.field[k] * std::exp(I * (2.0 * pi * offset * trace.times[k]));
    }
    Demodulated out;
    out.causal = convolve(mixed, taps);
    const std::size_t delay = (taps.size() - 1) / 2;
    out.mode.peak_freq_ghz = peak_freq_ghz;
    out.mode.cutoff_mhz = lp_cutoff_mhz;
    out.mode.transient_samples = delay;
    out.mode.envelope.assign(out.causal.begin() + static_cast<std::ptrdiff_t>(delay),
                             out.causal.begin() + static_cast<std::ptrdiff_t>(delay + n));
    double e = 0.0;
    for (const auto& v : out.mode.envelope) e += std::norm(v);
    out.mode.energy = e * dt;
    return out;
}

} // namespace

ModeEmission demodulate_mode(const EmissionTrace& trace, double peak_freq_ghz, double lp_cutoff_mhz,
                             std::span<const double> neighbour_freqs_ghz) {
    return demodulate(trace, peak_freq_ghz, lp_cutoff_mhz, neighbour_freqs_ghz).mode;
}

DecayFit fit_exponential_decay(std::span<const std::complex<double>> envelope, std::span<const double> times,
                               std::size_t skip) {
    if (envelope.size() != times.size()) throw SpecError("fit_exponential_decay: length mismatch");
    const std::size_t n = envelope.size();
    if (skip >= n) throw FitDomainError("fit_exponential_decay: nothing left after the transient");

    std::size_t peak = skip;
    double top = 0.0;
    for (std::size_t k = skip; k < n; ++k) {
        const double a = std::abs(envelope[k]);
        if (a > top) {
            top = a;
            peak = k;
        }
    }
    if (!(top > 0.0)) throw FitDomainError("fit_exponential_decay: zero envelope");
    std::size_t last = n;
    for (std::size_t k = peak; k < n; ++k) {
        if (std::abs(envelope[k]) < 0.01 * top) {
            last = k;
            break;
        }
    }
    const std::size_t first = skip;
    if (last - first < 50) throw FitDomainError("fit_exponential_decay: fewer than 50 samples in the fit window");

    // Log-linear start values.
    const double t_ref = times[first];
    double sx = 0, sy = 0, sxx = 0, sxy = 0, m = 0;
    for (std::size_t k = first; k < last; ++k) {
        const double a = std::abs(envelope[k]);
        if (a <= 0.0) continue;
        const double x = times[k] - t_ref;
        const double y = std::log(a);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        m += 1;
    }
    const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    if (!(slope < 0.0) || !std::isfinite(slope)) {
        throw FitDomainError("fit_exponential_decay: envelope is not decaying");
    }
    double p[2] = {std::exp((sy - slope * sx) / m), -slope};

    ceres::Problem problem;
    for (std::size_t k = first; k < last; ++k) {
        problem.AddResidualBlock(new ceres::AutoDiffCostFunction<ExpResidual, 1, 2>(
                                     new ExpResidual{times[k] - t_ref, std::abs(envelope[k])}),
                                 nullptr, p);
    }
    ceres::Solver::Options options;
    options.linear_solver_type = ceres::DENSE_QR;
    options.max_num_iterations = 200;
    options.function_tolerance = 1e-16;
    options.gradient_tolerance = 1e-16;
    options.parameter_tolerance = 1e-14;
    options.logging_type = ceres::SILENT;
    ceres::Solver::Summary summary;
    ceres::Solve(options, &problem, &summary);
    if (!(p[1] > 0.0) || !(p[0] > 0.0)) throw FitDomainError("fit_exponential_decay: fit did not converge to a decay");

    DecayFit fit;
    fit.tau = 1.0 / p[1];
    fit.amplitude = p[0] * std::exp(t_ref / fit.tau);
    double ss = 0.0;
    for (std::size_t k = first; k < last; ++k) {
        const double r = p[0] * std::exp(-p[1] * (times[k] - t_ref)) - std::abs(envelope[k]);
        ss += r * r;
    }
    fit.residual = std::sqrt(ss / static_cast<double>(last - first)) / p[0];
    fit.first = first;
    fit.last = last;
    return fit;
}

PhotonCount photon_count(std::span<const std::complex<double>> envelope, std::span<const double> times,
                         double tau_fit) {
    if (envelope.size() != times.size()) throw SpecError("photon_count: length mismatch");
    PhotonCount out;
    if (envelope.size() < 2) return out;
    if (!(tau_fit > 0.0)) throw SpecError("photon_count: tau must be > 0");
    const double dt = (times.back() - times.front()) / static_cast<double>(times.size() - 1);
    cd integral{};
    double total = 0.0, tail = 0.0;
    const std::size_t tail_start = envelope.size() - envelope.size() / 10;
    for (std::size_t k = 0; k < envelope.size(); ++k) {
        integral += envelope[k];
        const double e = std::norm(envelope[k]);
        total += e;
        if (k >= tail_start) tail += e;
    }
    integral *= dt;
    out.photons = std::norm(integral) / (2.0 * tau_fit);
    out.truncated = total > 0.0 && tail > 0.01 * total;
    return out;
}

namespace {

// Residual angular frequency of a demodulated line from the |env|²-weighted
// slope of its unwrapped phase over [first, last).
double phase_slope(std::span<const cd> env, std::span<const double> times, std::size_t first, std::size_t last) {
    double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
    double prev = std::arg(env[first]), unwrapped = prev;
    for (std::size_t k = first; k < last; ++k) {
        const double ph = std::arg(env[k]);
        double d = ph - prev;
        d -= 2.0 * pi * std::round(d / (2.0 * pi));
        unwrapped += k == first ? 0.0 : d;
        prev = ph;
        const double w = std::norm(env[k]);
        const double x = times[k] - times[first];
        sw += w;
        sx += w * x;
        sy += w * unwrapped;
        sxx += w * x * x;
        sxy += w * x * unwrapped;
    }
    const double den = sw * sxx - sx * sx;
    return den > 0.0 ? (sw * sxy - sx * sy) / den : 0.0;
}

} // namespace

ModeEmission analyze_mode(const EmissionTrace& trace, int mode_index, double freq_ghz, double cutoff_mhz,
                          std::span<const double> neighbour_freqs_ghz) {
    auto demod = demodulate(trace, freq_ghz, cutoff_mhz, neighbour_freqs_ghz);
    const double dt = trace.dt();
    try {
        auto fit = fit_exponential_decay(demod.mode.envelope, trace.times, demod.mode.transient_samples);
        // A line off the demodulation frequency by δ loses a factor
        // 1/(1 + (δτ)²) in |∫env|², so move onto the line first.
        for (int pass = 0; pass < 2; ++pass) {
            const double slope = phase_slope(demod.mode.envelope, trace.times, fit.first, fit.last);
            const double refined = demod.mode.peak_freq_ghz - slope / (2.0 * pi);
            demod = demodulate(trace, refined, cutoff_mhz, {});
            fit = fit_exponential_decay(demod.mode.envelope, trace.times, demod.mode.transient_samples);
        }
        ModeEmission mode = std::move(demod.mode);
        mode.mode_index = mode_index;
        mode.tau_fit = fit.tau;
        mode.amplitude = fit.amplitude;
        mode.fit_residual = fit.residual;
        mode.kappa = 2.0 / fit.tau;
        mode.kappa_2pi_over_tau = 2.0 * pi / fit.tau;
        mode.fit_ok = true;
        std::vector<double> causal_times(demod.causal.size());
        for (std::size_t k = 0; k < causal_times.size(); ++k) causal_times[k] = static_cast<double>(k) * dt;
        const auto count = photon_count(demod.causal, causal_times, fit.tau);
        mode.photons = count.photons;
        mode.truncated = count.truncated;
        if (fit.residual > 0.05) {
            mode.low_quality = true;
            mode.note = "poor exponential fit";
        }
        return mode;
    } catch (const FitDomainError& e) {
        ModeEmission mode = std::move(demod.mode);
        mode.mode_index = mode_index;
        mode.fit_ok = false;
        mode.low_quality = true;
        mode.note = e.what();
        mode.photons = mode.energy;
        return mode;
    }
}

std::vector<double> dressed_mode_frequencies(const Model& model, double omega_q) {
    const auto h = model.hamiltonian(omega_q);
    const Spectrum s = diagonalize(h);
    std::vector<double> out;
    for (Eigen::Index k : photon_like_indices(h, s)) out.push_back(s.values(k));
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<double> resonance_frequencies(const Model& model, double omega_q) {
    const auto h = model.hamiltonian(omega_q, true);
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(h.matrix);
    if (es.info() != Eigen::Success) throw NumericError("resonance_frequencies: eigensolver failed");
    Spectrum s;
    s.values = es.eigenvalues().real();
    s.vectors = es.eigenvectors().colwise().normalized();
    std::vector<double> out;
    for (Eigen::Index k : photon_like_indices(h, s)) out.push_back(s.values(k));
    std::sort(out.begin(), out.end());
    return out;
}

PortRates tight_binding_port_rates(const LatticeSpec& lattice) {
    const Spectrum modes = open_chain_modes(lattice);
    const Eigen::Index n = lattice.n_sites;
    PortRates out;
    for (Eigen::Index k = 0; k < n; ++k) {
        const double first = std::norm(modes.vectors(0, k));
        const double last = std::norm(modes.vectors(n - 1, k));
        out.freqs.push_back(modes.values(k));
        out.kappa_out.push_back(lattice.kappa_out * last);
        out.kappa_total.push_back(lattice.kappa_in * first + lattice.kappa_out * last);
    }
    return out;
}

double calibrate_port_rate(const LatticeSpec& lattice, double kappa_mid) {
    LatticeSpec unit = lattice;
    unit.kappa_in = unit.kappa_out = 1.0;
    const auto rates = tight_binding_port_rates(unit);
    const double mid = rates.kappa_total[rates.kappa_total.size() / 2];
    if (!(mid > 0.0)) throw NumericError("calibrate_port_rate: central mode has no port weight");
    return kappa_mid / mid;
}

PropagationResult record_free_decay(const Model& model, double omega_q, const ExcitationState& initial,
                                    double window, double dt, double frame,
                                    const std::optional<AcquisitionBand>& band) {
    if (!(dt > 0.0) || !(window >= 0.0)) throw SpecError("record_free_decay: need dt > 0 and window >= 0");
    const auto h = model.hamiltonian(omega_q, true);
    Eigen::MatrixXcd gen = h.matrix;
    gen.diagonal().array() -= frame;
    if (!gen.allFinite()) throw NumericError("record_free_decay: non-finite generator");
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(gen);
    if (es.info() != Eigen::Success) throw NumericError("record_free_decay: eigendecomposition failed");
    const Eigen::MatrixXcd& v = es.eigenvectors();
    const Eigen::VectorXcd& lambda = es.eigenvalues();
    Eigen::VectorXcd b = v.fullPivLu().solve(initial.amplitudes);
    if (band) {
        const double lo = units::from_ghz(band->center_ghz - band->width_ghz / 2.0) - frame;
        const double hi = units::from_ghz(band->center_ghz + band->width_ghz / 2.0) - frame;
        for (Eigen::Index k = 0; k < b.size(); ++k) {
            if (lambda(k).real() < lo || lambda(k).real() > hi) b(k) = 0.0;
        }
    }
    const auto steps = static_cast<std::size_t>(std::llround(window / dt));
    const Eigen::Index n_ph = h.photonic_count();
    PropagationResult out;
    out.frame = frame;
    out.times.resize(steps + 1);
    out.emitter_population.resize(steps + 1);
    out.mode_amplitudes.resize(static_cast<Eigen::Index>(steps + 1), n_ph);
    // Per-step phase factors, refreshed exactly every 1024 steps.
    Eigen::VectorXcd step(lambda.size()), phase(lambda.size());
    for (Eigen::Index k = 0; k < lambda.size(); ++k) step(k) = std::exp(-I * lambda(k) * dt);
    for (std::size_t j = 0; j <= steps; ++j) {
        const double t = static_cast<double>(j) * dt;
        if (j % 1024 == 0) {
            for (Eigen::Index k = 0; k < lambda.size(); ++k) phase(k) = std::exp(-I * lambda(k) * t);
        } else {
            phase = phase.cwiseProduct(step);
        }
        const Eigen::VectorXcd psi = v * phase.cwiseProduct(b);
        out.times[j] = initial.t + t;
        out.emitter_population[j] = std::norm(psi(0));
        out.mode_amplitudes.row(static_cast<Eigen::Index>(j)) = psi.segment(1, n_ph).transpose();
    }
    out.final_state.amplitudes = v * phase.cwiseProduct(b);
    out.final_state.t = initial.t + static_cast<double>(steps) * dt;
    return out;
}

QuenchEmissionResult quench_emission_scenario(const Model& model, const TrapezoidPulse& prep,
                                              const TrapezoidPulse& quench, const QuenchOptions& options) {
    QuenchEmissionResult result;
    const FluxMap map = model.flux_map();
    PropagationOptions prop;
    prop.dt = options.dt;
    prop.frame = options.frame;
    prop.with_decay = true;
    prop.record_stride = 0;

    ExcitationState state;
    try {
        EmitterDrive drive = make_drive(prep, map);
        if (options.line_filter) {
            drive = make_drive(apply_line_filter(sample_pulse(prep, options.dt), *options.line_filter), map);
        }
        state = propagate(model, drive, ExcitationState::emitter_excited(model.dim()), prop).final_state;
    } catch (const Error& e) {
        throw StageError("prepare", e.what());
    }
    const auto h_prep = model.hamiltonian(map.frequency(prep.flux_at(prep.duration())));
    result.emitter_population_prepared = std::norm(state.amplitudes(0));
    result.photonic_weight_prepared = state.amplitudes.segment(1, h_prep.photonic_count()).squaredNorm();

    const double omega_post = map.frequency(quench.phi_f);
    PropagationResult record;
    try {
        TrapezoidPulse ramp = quench;
        ramp.tau_hold = 0.0;
        ramp.return_to_start = false;
        state = propagate(model, make_drive(ramp, map), state, prop).final_state;

        const auto h_post = model.hamiltonian(omega_post);
        const Spectrum s = diagonalize(h_post);
        for (Eigen::Index k : photon_like_indices(h_post, s)) {
            result.photonic_weight_quenched += std::norm(s.vectors.col(k).dot(state.amplitudes));
        }

        record = record_free_decay(model, omega_post, state, options.record_window, options.record_dt, options.frame,
                                   options.band_limit ? std::optional{options.band} : std::nullopt);
    } catch (const Error& e) {
        throw StageError("quench", e.what());
    }

    try {
        const auto couplings = output_couplings(model);
        result.trace = synthesize_output_field(record, couplings, options.band, options.prep_amplitude);
    } catch (const Error& e) {
        throw StageError("synthesize", e.what());
    }
    result.excitation = options.prep_amplitude * options.prep_amplitude;
    result.spectrum = emission_fft(result.trace, options.peak_threshold);

    try {
        const double lo = options.band.center_ghz - options.band.width_ghz / 2.0;
        const double hi = options.band.center_ghz + options.band.width_ghz / 2.0;
        Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(model.hamiltonian(omega_post, true).matrix, false);
        std::vector<double> lines;
        for (Eigen::Index k = 0; k < es.eigenvalues().size(); ++k) {
            const double f = units::to_ghz(es.eigenvalues()(k).real());
            if (f >= lo && f <= hi) lines.push_back(f);
        }
        const auto modes = resonance_frequencies(model, omega_post);
        for (std::size_t i = 0; i < modes.size(); ++i) {
            const double f_model = units::to_ghz(modes[i]);
            if (f_model < lo || f_model > hi) continue;
            result.mode_freqs_ghz.push_back(f_model);

            double nearest = std::numeric_limits<double>::infinity();
            for (double f : lines) {
                const double d = std::abs(f - f_model);
                if (d > 1e-12) nearest = std::min(nearest, d);
            }
            // Cap keeps the filter meaningful for an isolated line.
            const double cutoff_mhz = std::min(0.5 * nearest * 1e3, 50.0);

            double f_demod = f_model;
            bool detected = false;
            for (const auto& pk : result.spectrum.peaks) {
                if (std::abs(pk.freq_ghz - f_model) <= 2.0 * result.spectrum.bin_ghz + 1e-12) {
                    if (!detected || std::abs(pk.freq_ghz - f_model) < std::abs(f_demod - f_model)) f_demod = pk.freq_ghz;
                    detected = true;
                }
            }
            std::vector<double> neighbours;
            for (double f : lines) {
                if (std::abs(f - f_model) > 1e-12) neighbours.push_back(f + (f_demod - f_model));
            }
            auto mode = analyze_mode(result.trace, static_cast<int>(i) + 1, f_demod, cutoff_mhz, neighbours);
            mode.detected = detected;
            if (!detected) {
                mode.low_quality = true;
                if (mode.note.empty()) mode.note = "no FFT peak above threshold";
            }
            result.total_photons += mode.photons;
            result.modes.push_back(std::move(mode));
        }
    } catch (const Error& e) {
        throw StageError("demodulate", e.what());
    }
    return result;
}

void write_trace_csv(std::ostream& os, const EmissionTrace& trace) {
    os << "t_ns,re,im\n";
    os.precision(12);
    for (std::size_t k = 0; k < trace.times.size(); ++k) {
        os << trace.times[k] << ',' << trace.field[k].real() << ',' << trace.field[k].imag() << '\n';
    }
}

void write_mode_table_csv(std::ostream& os, std::span<const ModeEmission> modes, double photon_scale) {
    os << "mode,freq_GHz,tau_ns,kappa_MHz,kappa_2pi_MHz,photons,detected,low_quality\n";
    os.precision(10);
    for (const auto& m : modes) {
        os << m.mode_index << ',' << m.peak_freq_ghz << ',' << m.tau_fit << ',' << units::to_mhz(m.kappa) << ','
           << units::to_mhz(m.kappa_2pi_over_tau) << ',' << m.photons * photon_scale << ',' << (m.detected ? 1 : 0)
           << ',' << (m.low_quality ? 1 : 0) << '\n';
    }
}

} // namespace apbs
