#include "apbs/spectrum.hpp"

#include "apbs/errors.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>

namespace apbs::dsp {

namespace {

// The FFTW planner is not thread-safe; execution is.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

} // namespace

std::vector<std::complex<double>> dft(std::span<const std::complex<double>> x, int sign) {
    const int n = static_cast<int>(x.size());
    std::vector<std::complex<double>> in(x.begin(), x.end());
    std::vector<std::complex<double>> out(x.size());
    if (n == 0) return out;
    fftw_plan plan;
    {
        std::lock_guard lock(planner_mutex());
        plan = fftw_plan_dft_1d(n, reinterpret_cast<fftw_complex*>(in.data()),
                                reinterpret_cast<fftw_complex*>(out.data()),
                                sign > 0 ? FFTW_BACKWARD : FFTW_FORWARD, FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    {
        std::lock_guard lock(planner_mutex());
        fftw_destroy_plan(plan);
    }
    return out;
}

std::vector<std::complex<double>> rdft(std::span<const double> x) {
    const int n = static_cast<int>(x.size());
    std::vector<double> in(x.begin(), x.end());
    std::vector<std::complex<double>> out(x.size() / 2 + 1);
    if (n == 0) return {};
    fftw_plan plan;
    {
        std::lock_guard lock(planner_mutex());
        plan = fftw_plan_dft_r2c_1d(n, in.data(), reinterpret_cast<fftw_complex*>(out.data()), FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    {
        std::lock_guard lock(planner_mutex());
        fftw_destroy_plan(plan);
    }
    return out;
}

std::vector<std::size_t> find_peaks(std::span<const double> magnitudes, double rel_threshold,
                                    std::size_t half_window, bool skip_dc) {
    std::vector<std::size_t> peaks;
    if (magnitudes.empty()) return peaks;
    const std::size_t first = skip_dc ? 1 : 0;
    double top = 0.0;
    for (std::size_t i = first; i < magnitudes.size(); ++i) top = std::max(top, magnitudes[i]);
    if (!(top > 0.0)) return peaks;
    const double floor = rel_threshold * top;
    const std::size_t n = magnitudes.size();
    for (std::size_t i = first; i < n; ++i) {
        const double m = magnitudes[i];
        if (m < floor) continue;
        const std::size_t lo = i >= first + half_window ? i - half_window : first;
        const std::size_t hi = std::min(n - 1, i + half_window);
        bool is_peak = true;
        for (std::size_t j = lo; j <= hi && is_peak; ++j) {
            if (j == i) continue;
            // Strict on the left, non-strict on the right: plateaus report once.
            if ((j < i && magnitudes[j] >= m) || (j > i && magnitudes[j] > m)) is_peak = false;
        }
        if (is_peak) peaks.push_back(i);
    }
    return peaks;
}

double uniform_spacing(std::span<const double> grid, double rel_tol) {
    if (grid.size() < 2) throw SamplingError("grid needs at least two points");
    const double step = (grid.back() - grid.front()) / static_cast<double>(grid.size() - 1);
    if (!(step > 0.0)) throw SamplingError("grid must be increasing");
    for (std::size_t i = 1; i < grid.size(); ++i) {
        if (std::abs((grid[i] - grid[i - 1]) - step) > rel_tol * step) {
            throw SamplingError("grid is not uniformly spaced");
        }
    }
    return step;
}

} // namespace apbs::dsp
