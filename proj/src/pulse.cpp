#include "apbs/pulse.hpp"

#include "apbs/errors.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

namespace apbs {

namespace {

bool in_flux_range(double phi) { return phi >= 0.0 && phi <= 0.5; }

} // namespace

void TrapezoidPulse::validate() const {
    if (!(tau_r >= 0.0) || !(tau_hold >= 0.0) || !(tau_f >= 0.0)) {
        throw SpecError("pulse: segment durations must be >= 0");
    }
    if (!in_flux_range(phi_i) || !in_flux_range(phi_f)) {
        throw SpecError("pulse: fluxes must lie in [0, 0.5]");
    }
}

double TrapezoidPulse::flux_at(double t) const noexcept {
    const double delta = phi_f - phi_i;
    if (t < tau_r) {
        return t <= 0.0 ? phi_i : phi_i + delta * (t / tau_r);
    }
    const double fall_start = tau_r + tau_hold;
    const double fall = fall_time();
    if (fall <= 0.0 || t <= fall_start) return phi_f;
    const double end = fall_start + fall;
    if (t >= end) return phi_i;
    // Written from the end so that rise and fall mirror each other exactly.
    return phi_i + delta * ((end - t) / fall);
}

std::vector<FluxSample> sample_pulse(const TrapezoidPulse& pulse, double dt) {
    pulse.validate();
    if (!(dt > 0.0)) throw SamplingError("sample_pulse: dt must be > 0");
    for (double seg : {pulse.tau_r, pulse.tau_hold, pulse.fall_time()}) {
        if (seg > 0.0 && dt > seg * (1.0 + 1e-12)) {
            throw SamplingError("sample_pulse: dt exceeds a nonzero pulse segment");
        }
    }
    const double total = pulse.duration();
    if (total <= 0.0) return {FluxSample{0.0, pulse.flux_at(0.0)}};

    const auto n = static_cast<std::size_t>(std::ceil(total / dt - 1e-9));
    const double step = total / static_cast<double>(n);
    std::vector<FluxSample> out;
    out.reserve(n + 1);
    for (std::size_t k = 0; k <= n; ++k) {
        const double t = (k == n) ? total : static_cast<double>(k) * step;
        out.push_back({t, pulse.flux_at(t)});
    }
    return out;
}

std::vector<FluxSample> apply_line_filter(std::span<const FluxSample> samples, const LineFilter& filter) {
    if (!(filter.cutoff > 0.0)) throw SpecError("line filter: cutoff must be > 0");
    std::vector<FluxSample> out(samples.begin(), samples.end());
    if (samples.size() < 2) return out;
    const double dt = samples[1].t - samples[0].t;
    for (std::size_t k = 2; k < samples.size(); ++k) {
        const double step = samples[k].t - samples[k - 1].t;
        if (std::abs(step - dt) > 1e-9 * std::max(1.0, std::abs(dt))) {
            throw SamplingError("line filter: samples must be uniformly spaced");
        }
    }
    const double alpha = -std::expm1(-filter.cutoff * dt);
    double y = samples[0].phi;
    for (std::size_t k = 1; k < samples.size(); ++k) {
        y += alpha * (samples[k].phi - y);
        out[k].phi = y;
    }
    return out;
}

EmitterDrive make_drive(const TrapezoidPulse& pulse, const FluxMap& map) {
    pulse.validate();
    EmitterDrive drive{[pulse, map](double t) { return map.frequency(pulse.flux_at(t)); }, pulse.duration(), {}};
    const double total = pulse.duration();
    for (double b : {pulse.tau_r, pulse.tau_r + pulse.tau_hold}) {
        if (b > 0.0 && b < total && (drive.breakpoints.empty() || b > drive.breakpoints.back())) {
            drive.breakpoints.push_back(b);
        }
    }
    return drive;
}

EmitterDrive make_drive(std::vector<FluxSample> samples, const FluxMap& map) {
    if (samples.empty()) throw SamplingError("make_drive: no samples");
    auto data = std::make_shared<const std::vector<FluxSample>>(std::move(samples));
    const double t0 = data->front().t;
    const double duration = data->back().t - t0;
    const double dt = data->size() > 1 ? duration / static_cast<double>(data->size() - 1) : 1.0;
    auto omega = [data, map, t0, dt](double t) {
        const auto& s = *data;
        if (s.size() == 1) return map.frequency(s.front().phi);
        const double x = (t - t0) / dt;
        if (x <= 0.0) return map.frequency(s.front().phi);
        const auto k = static_cast<std::size_t>(x);
        if (k + 1 >= s.size()) return map.frequency(s.back().phi);
        const double w = x - static_cast<double>(k);
        return map.frequency((1.0 - w) * s[k].phi + w * s[k + 1].phi);
    };
    return EmitterDrive{std::move(omega), duration, {}};
}

EmitterDrive constant_drive(double omega_q, double duration) {
    return EmitterDrive{[omega_q](double) { return omega_q; }, duration, {}};
}

} // namespace apbs
