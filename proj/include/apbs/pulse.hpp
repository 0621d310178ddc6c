// pulse.hpp: trapezoid flux pulses, flux-line distortion and emitter drives.

#pragma once

#include "apbs/flux_map.hpp"

#include <functional>
#include <span>
#include <vector>

namespace apbs {

// Piecewise-linear flux trajectory: rise Φ_i→Φ_f over tau_r, hold at Φ_f for
// tau_hold, then (return_to_start) fall back to Φ_i over tau_f.
// With return_to_start == false the trajectory stays at Φ_f after the hold and
// tau_f is ignored; a quench is then expressed as a second pulse Φ_f→Φ_i.
struct TrapezoidPulse {
    double phi_i = 0.0;
    double phi_f = 0.0;
    double tau_r = 0.0;     // ns
    double tau_hold = 0.0;  // ns
    double tau_f = 0.0;     // ns
    bool return_to_start = true;

    void validate() const;
    double fall_time() const noexcept { return return_to_start ? tau_f : 0.0; }
    double duration() const noexcept { return tau_r + tau_hold + fall_time(); }
    double flux_at(double t) const noexcept;
};

struct FluxSample {
    double t;    // ns
    double phi;  // Φ0
};

// Single-pole low-pass on the flux line; cutoff in rad/ns.
struct LineFilter {
    double cutoff = 0.0;
};

// Uniform samples from t = 0 to t = duration inclusive. The step is shrunk to
// duration/ceil(duration/dt) so both endpoints land on the grid.
std::vector<FluxSample> sample_pulse(const TrapezoidPulse& pulse, double dt);

// Causal discrete first-order low-pass, y_k = y_{k-1} + α(x_k − y_{k-1}) with
// α = 1 − exp(−ω_c·dt) and y_0 = x_0. Unit DC gain, no overshoot.
std::vector<FluxSample> apply_line_filter(std::span<const FluxSample> samples, const LineFilter& filter);

// Emitter frequency ω_q(t) in rad/ns over [0, duration].
// Breakpoints mark interior times where the derivative jumps; the propagator
// aligns its steps with them.
struct EmitterDrive {
    std::function<double(double)> omega_q;
    double duration = 0.0;
    std::vector<double> breakpoints;
};

EmitterDrive make_drive(const TrapezoidPulse& pulse, const FluxMap& map);
// Linear interpolation between uniformly spaced samples (e.g. filtered pulses).
EmitterDrive make_drive(std::vector<FluxSample> samples, const FluxMap& map);
EmitterDrive constant_drive(double omega_q, double duration);

} // namespace apbs
