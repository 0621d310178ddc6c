// calibration.hpp: spectroscopy synthesis, effective-model fitting and the
// single-mode Landau-Zener estimate.

#pragma once

#include "apbs/core_model.hpp"
#include "apbs/errors.hpp"
#include "apbs/units.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

namespace apbs {

// Branch 0 is the APBS; branches 1..M are the remaining dressed states in
// ascending order at the first flux point. Frequencies in rad/ns.
struct SpectroscopyDataset {
    std::vector<double> flux_grid;
    std::vector<double> apbs_curve;
    std::vector<std::vector<double>> mode_curves;  // [branch][flux]
    std::vector<std::vector<double>> linewidths;   // optional, same shape

    std::size_t branch_count() const noexcept { return mode_curves.size(); }
    // Throws SpecError on misaligned or non-finite data.
    void validate() const;
};

// Each dressed state is followed along flux_grid by maximal eigenvector
// overlap with the previous point. The APBS branch is the one with the largest
// emitter weight at the first grid point. An overlap below 0.5 throws
// TrackingError naming the flux.
SpectroscopyDataset synthesize_spectroscopy(const Model& model, std::span<const double> flux_grid);

// CSV columns: flux, branch_id, freq_GHz.
void write_spectroscopy_csv(std::ostream& os, const SpectroscopyDataset& data);
SpectroscopyDataset read_spectroscopy_csv(std::istream& is);
SpectroscopyDataset read_spectroscopy_csv(const std::filesystem::path& path);

struct FitOptions {
    double apbs_weight = 3.0;
    double g_lower = 0.0;                       // rad/ns
    double g_upper = units::from_mhz(50.0);     // rad/ns
    double freq_window = units::from_mhz(10.0); // ± around the starting ω̃_n
    int max_iterations = 200;
};

struct FitResult {
    std::vector<double> mode_freqs;  // rad/ns
    std::vector<double> g_modes;     // rad/ns
    double residual_rms = 0.0;       // rad/ns, unweighted over all points
    int iterations = 0;
    bool converged = false;

    nlohmann::json to_json() const;  // GHz / MHz
};

class FitError : public Error {
public:
    FitError(const std::string& what, FitResult best) : Error(what), best_(std::move(best)) {}
    const FitResult& best() const noexcept { return best_; }

private:
    FitResult best_;
};

// Least squares over {ω̃_n, g_n} of the effective form, starting from
// `initial`. Branch b of the data is compared with the model eigenvalue of the
// same rank at every flux point; the APBS residuals carry apbs_weight. Ranks
// come from the data's first flux point, so branches must not cross.
// Throws FitError (with the best parameters) when the iteration cap is hit.
FitResult fit_effective_model(const SpectroscopyDataset& data, const Model& initial, const FitOptions& options = {});

// Starting ω̃_n from the data: each mode branch at the flux point where the
// emitter is farthest below it.
std::vector<double> measured_mode_peaks(const SpectroscopyDataset& data, const Model& model);

// Initial guess for the round trip: g_n scaled by independent factors drawn
// uniformly from [1 − spread, 1 + spread].
Model perturbed_guess(const Model& model, std::span<const double> start_freqs, double spread, std::uint64_t seed);

struct LzEstimate {
    double gamma = 0.0;
    double p_lz = 1.0;
    double adiabatic_time = 0.0;  // ns; infinity for g = 0
};

// Γ = g²·Δt/ΔE with g, ΔE in rad/ns and Δt in ns; adiabatic_time solves
// exp(−2πΓ) = threshold.
LzEstimate lz_estimate(double g, double delta_e, double delta_t, double threshold = 0.05);

// Two-level sweep ω_q: −ΔE/2 → +ΔE/2 linearly over Δt against a level at 0
// with coupling g; returns the population left in the starting diabatic
// state, propagated over the ramp extended by `padding` ns on both sides.
double lz_numeric(double g, double delta_e, double delta_t, double padding, double dt = 0.01);

} // namespace apbs
