// emission.hpp: output field synthesis and the spectrally resolved emission
// analysis chain: FFT, per-mode demodulation, exponential fits, photon counts.
//
// Conventions:
//  * ⟨a_out⟩(t) = Σ_n sqrt(κ_n^out)·⟨a_n⟩(t) with κ_n^out the monitored-port rate.
//  * The trace is stored in the frame of the acquisition band center; reported
//    frequencies are absolute (center + baseband offset).
//  * Field amplitudes decay at κ/2, so the fitted envelope constant is τ = 2/κ.
//    The alternative reading κ = 2π/τ is reported alongside.
//  * photons = |∫ envelope dt|² / (2τ), the excitation fraction carried by an
//    exponentially decaying mode.

#pragma once

#include "apbs/core_model.hpp"
#include "apbs/propagator.hpp"
#include "apbs/pulse.hpp"

#include <complex>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace apbs {

struct AcquisitionBand {
    double center_ghz = 5.0;
    double width_ghz = 1.0;
};

struct EmissionTrace {
    std::vector<double> times;                  // ns, uniform, starting at 0
    std::vector<std::complex<double>> field;    // baseband ⟨a_out⟩ (1/sqrt(ns))
    AcquisitionBand band;

    double dt() const;
    double energy() const;  // ∫|field|² dt
};

// Output-port coupling per photonic basis index. Effective form:
// sqrt(output_share_n·κ_n), carrying the port parity when the ports are
// collective. Tight-binding form: sqrt(κ_out) on the last site.
std::vector<double> output_couplings(const Model& model);

// `scale` multiplies the field (excited-branch amplitude of the preparation).
EmissionTrace synthesize_output_field(const PropagationResult& propagation, std::span<const double> couplings,
                                      const AcquisitionBand& band = {}, double scale = 1.0);
// Explicit form: κ_n^out = port_weights_n·mode_kappas_n.
EmissionTrace synthesize_output_field(const PropagationResult& propagation, std::span<const double> mode_kappas,
                                      std::span<const double> port_weights, const AcquisitionBand& band,
                                      double scale = 1.0);

struct EmissionPeak {
    double freq_ghz = 0.0;   // parabolic-interpolated between bins
    double magnitude = 0.0;
    std::size_t bin = 0;
};

struct EmissionSpectrum {
    std::vector<double> freqs_ghz;   // ascending, inside the acquisition band
    std::vector<double> magnitudes;
    std::vector<EmissionPeak> peaks; // ascending frequency
    double bin_ghz = 0.0;
};

EmissionSpectrum emission_fft(const EmissionTrace& trace, double rel_threshold = 0.05);

struct ModeEmission {
    int mode_index = 0;
    double peak_freq_ghz = 0.0;
    std::vector<std::complex<double>> envelope;
    std::size_t transient_samples = 0;
    double cutoff_mhz = 0.0;
    double tau_fit = 0.0;        // ns, field envelope
    double amplitude = 0.0;
    double fit_residual = 0.0;   // RMS / amplitude
    double kappa = 0.0;          // rad/ns, 2/τ
    double kappa_2pi_over_tau = 0.0;  // rad/ns, 2π/τ
    double photons = 0.0;
    double energy = 0.0;         // ∫|envelope|² dt
    bool detected = false;       // matched to an FFT peak
    bool fit_ok = false;
    bool low_quality = false;
    bool truncated = false;
    std::string note;
};

// FIR low-pass of trace·exp(+i2π(f − f_center)t). Windowed-sinc (Blackman),
// causal, unit DC gain; the first `transient_samples` outputs are filter
// transient. Throws LeakageError when the cutoff exceeds half the distance to
// the nearest neighbouring line.
ModeEmission demodulate_mode(const EmissionTrace& trace, double peak_freq_ghz, double lp_cutoff_mhz,
                             std::span<const double> neighbour_freqs_ghz = {});

struct DecayFit {
    double tau = 0.0;
    double amplitude = 0.0;
    double residual = 0.0;
    std::size_t first = 0;
    std::size_t last = 0;  // exclusive
};

// Least squares A·exp(−t/τ) against |envelope| after `skip` samples; the window
// ends where |envelope| drops below 1% of its windowed maximum. Throws
// FitDomainError for non-decaying input or fewer than 50 usable samples.
DecayFit fit_exponential_decay(std::span<const std::complex<double>> envelope, std::span<const double> times,
                               std::size_t skip = 0);

struct PhotonCount {
    double photons = 0.0;
    bool truncated = false;  // last decile holds more than 1% of the energy
};

PhotonCount photon_count(std::span<const std::complex<double>> envelope, std::span<const double> times,
                         double tau_fit);

// Demodulate, fit and count one line; fit failures are flagged, not thrown.
// The demodulation frequency is refined twice from the phase slope of the
// envelope, and peak_freq_ghz reports the refined value.
ModeEmission analyze_mode(const EmissionTrace& trace, int mode_index, double freq_ghz, double cutoff_mhz,
                          std::span<const double> neighbour_freqs_ghz);

// Photon-like dressed modes of H(ω_q): every eigenstate except the most
// emitter-like (and most TLS-like) one, ascending in frequency (rad/ns).
std::vector<double> dressed_mode_frequencies(const Model& model, double omega_q);

// Same selection on the lossy Hamiltonian: real parts of its eigenvalues,
// which are the line centres seen in an emission spectrum.
std::vector<double> resonance_frequencies(const Model& model, double omega_q);

// Per-mode κ from open-chain eigenmodes: κ_n = κ_in|φ_n(1)|² + κ_out|φ_n(N)|².
struct PortRates {
    std::vector<double> freqs;        // rad/ns, ascending
    std::vector<double> kappa_total;  // rad/ns
    std::vector<double> kappa_out;    // rad/ns
};
PortRates tight_binding_port_rates(const LatticeSpec& lattice);

// Symmetric port rate κ_port (κ_in = κ_out) giving the central mode a total
// decay rate kappa_mid.
double calibrate_port_rate(const LatticeSpec& lattice, double kappa_mid);

struct QuenchOptions {
    double dt = 0.01;                 // ns, ramps
    double record_dt = 1.0;           // ns, acquisition sampling
    double record_window = 20000.0;   // ns
    double prep_amplitude = 1.0;      // excited-branch amplitude (π: 1, π/2: 1/√2)
    AcquisitionBand band;
    double peak_threshold = 0.05;
    double frame = units::default_frame;
    std::optional<LineFilter> line_filter;
    // Keep only dressed components whose frequency lies inside the band, as an
    // analog anti-alias filter would. Without it, lines outside the band fold
    // back into it at record_dt sampling.
    bool band_limit = true;
};

struct QuenchEmissionResult {
    EmissionTrace trace;
    EmissionSpectrum spectrum;
    std::vector<ModeEmission> modes;
    std::vector<double> mode_freqs_ghz;   // post-quench resonances in band
    double photonic_weight_prepared = 0.0;  // Σ|c_n|² before the quench ramp
    double photonic_weight_quenched = 0.0;  // photon-like dressed weight after it
    double emitter_population_prepared = 0.0;
    double excitation = 1.0;               // prep_amplitude²
    double total_photons = 0.0;
};

// Free evolution under a constant generator over [0, window] in steps of dt,
// from the eigendecomposition of H(omega_q) with decay. With `band` set, only
// eigencomponents inside the band are kept.
PropagationResult record_free_decay(const Model& model, double omega_q, const ExcitationState& initial,
                                    double window, double dt, double frame,
                                    const std::optional<AcquisitionBand>& band = std::nullopt);

// Adiabatic preparation (prep pulse, return_to_start = false), fast quench
// (quench pulse), then free lossy evolution recorded over record_window and
// passed through the analysis chain. Errors carry the failing stage.
QuenchEmissionResult quench_emission_scenario(const Model& model, const TrapezoidPulse& prep,
                                              const TrapezoidPulse& quench, const QuenchOptions& options = {});

// CSV writers: trace (t_ns, re, im) and mode table
// (mode, freq_GHz, tau_ns, kappa_MHz, kappa_2pi_MHz, photons, detected, low_quality).
void write_trace_csv(std::ostream& os, const EmissionTrace& trace);
void write_mode_table_csv(std::ostream& os, std::span<const ModeEmission> modes, double photon_scale = 1.0);

} // namespace apbs
