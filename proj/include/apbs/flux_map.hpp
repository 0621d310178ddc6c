// flux_map.hpp: flux-to-frequency map of an asymmetric-SQUID transmon.

#pragma once

namespace apbs {

// ω_q(Φ) = (ω_max + E_C)·[cos²(πΦ) + d²·sin²(πΦ)]^(1/4) − E_C, Φ in units of Φ0.
// The asymmetry d is fixed by requiring ω_q(0) = ω_max and ω_q(1/2) = ω_min.
struct FluxMap {
    double omega_max = 0.0;  // upper sweet spot, rad/ns
    double omega_min = 0.0;  // lower sweet spot, rad/ns
    double e_c = 0.0;        // charging energy, rad/ns
    double d = 1.0;          // junction asymmetry, derived

    static FluxMap from_sweet_spots(double omega_max, double omega_min, double e_c);

    double frequency(double phi) const noexcept;

    // Inverse on the monotone branch Φ ∈ [0, 1/2]. Throws SpecError when
    // omega lies outside [omega_min, omega_max].
    double flux_for(double omega) const;
};

inline double flux_to_freq(const FluxMap& map, double phi) noexcept { return map.frequency(phi); }

} // namespace apbs
