// propagator.hpp: time evolution in the single-excitation subspace.
//
// The state is advanced with the fourth-order commutator-free Magnus scheme:
// two dense matrix exponentials per step, evaluated at the Gauss nodes of the
// step. For a Hermitian generator every step is exactly unitary. Amplitudes are
// kept in a frame rotating at `frame` (default: band center), which leaves
// populations unchanged.

#pragma once

#include "apbs/core_model.hpp"
#include "apbs/pulse.hpp"
#include "apbs/units.hpp"

#include <Eigen/Dense>

#include <iosfwd>
#include <span>
#include <vector>

namespace apbs {

struct ExcitationState {
    Eigen::VectorXcd amplitudes;  // rotating-frame amplitudes over the basis
    double t = 0.0;               // ns

    static ExcitationState emitter_excited(Eigen::Index dim, double amplitude = 1.0);
};

struct PropagationOptions {
    double dt = 0.01;                   // ns
    double frame = units::default_frame;
    bool with_decay = false;            // photonic port losses from the model
    double emitter_decay = 0.0;         // 1/T1 in 1/ns, off by default
    std::size_t record_stride = 1;      // 0: record only the final state
};

struct PropagationResult {
    std::vector<double> times;
    std::vector<double> emitter_population;
    Eigen::MatrixXcd mode_amplitudes;  // rows: samples, cols: photonic modes
    ExcitationState final_state;
    double frame = 0.0;
};

PropagationResult propagate(const Model& model, const EmitterDrive& drive, const ExcitationState& initial,
                            const PropagationOptions& options = {});

// Propagator over [t_begin, t_end] of the drive's clock (rotating frame).
Eigen::MatrixXcd segment_propagator(const Model& model, const EmitterDrive& drive, double t_begin, double t_end,
                                    const PropagationOptions& options = {});

// Final emitter population after the full pulse for each hold time. The
// rise and fall propagators are shared across hold times; the hold at constant
// flux is one exact exponential.
std::vector<double> hold_time_sweep(const Model& model, TrapezoidPulse pulse, std::span<const double> hold_grid,
                                    const PropagationOptions& options = {});

struct PopulationSpectrum {
    std::vector<double> freqs_mhz;
    std::vector<double> magnitudes;
    double bin_mhz = 0.0;
};

// Mean-subtracted one-sided magnitude spectrum of P(hold). Requires a uniform
// grid of at least 8 points.
PopulationSpectrum population_fft(std::span<const double> hold_grid, std::span<const double> populations);

// CSV columns: t_ns, p1, then re/im pairs per photonic mode.
void write_csv(std::ostream& os, const PropagationResult& result, const std::vector<std::string>& mode_labels);

} // namespace apbs
