// spectrum.hpp: FFT wrappers and peak picking.

#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace apbs::dsp {

// Unnormalized DFT, X_k = Σ_n x_n·exp(sign·2πi·kn/N) with sign = ±1.
std::vector<std::complex<double>> dft(std::span<const std::complex<double>> x, int sign);

// One-sided DFT of a real sequence (N/2 + 1 bins), exp(−2πi·kn/N) convention.
std::vector<std::complex<double>> rdft(std::span<const double> x);

// Indices of local maxima that dominate their ±half_window neighbourhood and
// exceed rel_threshold·max. Bin 0 is never reported when skip_dc is set.
std::vector<std::size_t> find_peaks(std::span<const double> magnitudes, double rel_threshold,
                                    std::size_t half_window = 1, bool skip_dc = true);

// Uniform-grid check; returns the spacing or throws SamplingError.
double uniform_spacing(std::span<const double> grid, double rel_tol = 1e-6);

} // namespace apbs::dsp
