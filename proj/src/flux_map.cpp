#include "apbs/flux_map.hpp"

#include "apbs/errors.hpp"

#include <boost/math/tools/roots.hpp>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>

namespace apbs {

FluxMap FluxMap::from_sweet_spots(double omega_max, double omega_min, double e_c) {
    if (!(omega_min > 0.0) || !(omega_max > omega_min)) {
        throw SpecError("flux map: need 0 < omega_min < omega_max");
    }
    if (!(e_c >= 0.0)) {
        throw SpecError("flux map: charging energy must be >= 0");
    }
    const double ratio = (omega_min + e_c) / (omega_max + e_c);
    return FluxMap{omega_max, omega_min, e_c, ratio * ratio};
}

double FluxMap::frequency(double phi) const noexcept {
    const double c = std::cos(std::numbers::pi * phi);
    const double s = std::sin(std::numbers::pi * phi);
    const double arg = c * c + d * d * s * s;
    return (omega_max + e_c) * std::sqrt(std::sqrt(arg)) - e_c;
}

double FluxMap::flux_for(double omega) const {
    const double tol = 1e-12 * omega_max;
    if (omega > omega_max + tol || omega < omega_min - tol) {
        throw SpecError("flux map: target frequency outside the tunable range");
    }
    if (omega >= omega_max) return 0.0;
    if (omega <= omega_min) return 0.5;
    std::uintmax_t max_iter = 200;
    auto f = [&](double phi) { return frequency(phi) - omega; };
    auto [lo, hi] = boost::math::tools::toms748_solve(
        f, 0.0, 0.5, boost::math::tools::eps_tolerance<double>(50), max_iter);
    return 0.5 * (lo + hi);
}

} // namespace apbs
