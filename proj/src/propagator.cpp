#include "apbs/propagator.hpp"

#include "apbs/errors.hpp"
#include "apbs/spectrum.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <complex>
#include <ostream>

namespace apbs {

namespace {

using cd = std::complex<double>;
constexpr cd I{0.0, 1.0};

// Gauss nodes and mixing weights of the fourth-order commutator-free scheme.
const double sqrt3 = std::sqrt(3.0);
const double node1 = 0.5 - sqrt3 / 6.0;
const double node2 = 0.5 + sqrt3 / 6.0;
const double alpha1 = (3.0 - 2.0 * sqrt3) / 12.0;
const double alpha2 = (3.0 + 2.0 * sqrt3) / 12.0;

// Rotating-frame generator H(t) − frame·1 with only the emitter diagonal time
// dependent; step propagators are cached while the drive stays constant.
class Stepper {
public:
    Stepper(const Model& model, const EmitterDrive& drive, const PropagationOptions& options)
        : drive_(drive) {
        const double omega0 = drive.omega_q(0.0);
        base_ = model.hamiltonian(omega0 > 0.0 ? omega0 : 1.0, options.with_decay).matrix;
        base_.diagonal().array() -= options.frame;
        base_(0, 0) = -options.frame - I * (options.emitter_decay / 2.0);
        dim_ = base_.rows();
    }

    Eigen::Index dim() const noexcept { return dim_; }

    const Eigen::MatrixXcd& step(double t, double dt) {
        const double w1 = drive_.omega_q(t + node1 * dt);
        const double w2 = drive_.omega_q(t + node2 * dt);
        const double first = alpha2 * w1 + alpha1 * w2;
        const double second = alpha1 * w1 + alpha2 * w2;
        if (valid_ && first == first_ && second == second_ && dt == dt_) return u_;
        Eigen::MatrixXcd a = 0.5 * base_;
        a(0, 0) += first;
        Eigen::MatrixXcd b = 0.5 * base_;
        b(0, 0) += second;
        const Eigen::MatrixXcd ua = (cd(-dt) * I * a).exp();
        const Eigen::MatrixXcd ub = (cd(-dt) * I * b).exp();
        u_ = ub * ua;
        first_ = first;
        second_ = second;
        dt_ = dt;
        valid_ = true;
        return u_;
    }

    const Eigen::MatrixXcd& base() const noexcept { return base_; }

private:
    const EmitterDrive& drive_;
    Eigen::MatrixXcd base_;
    Eigen::Index dim_ = 0;
    Eigen::MatrixXcd u_;
    double first_ = 0.0, second_ = 0.0, dt_ = 0.0;
    bool valid_ = false;
};

struct Step {
    double t;
    double dt;
};

// Uniform steps inside each breakpoint-delimited segment of [t_begin, t_end].
std::vector<Step> step_plan(const EmitterDrive& drive, double t_begin, double t_end, double dt) {
    if (!(dt > 0.0)) throw SamplingError("propagate: dt must be > 0");
    std::vector<double> edges{t_begin};
    for (double b : drive.breakpoints) {
        if (b > t_begin && b < t_end) edges.push_back(b);
    }
    edges.push_back(t_end);
    std::vector<Step> plan;
    for (std::size_t s = 0; s + 1 < edges.size(); ++s) {
        const double len = edges[s + 1] - edges[s];
        if (len <= 0.0) continue;
        const auto n = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(len / dt - 1e-9)));
        const double h = len / static_cast<double>(n);
        for (std::size_t k = 0; k < n; ++k) plan.push_back({edges[s] + static_cast<double>(k) * h, h});
    }
    return plan;
}

Eigen::MatrixXcd constant_propagator(const Eigen::MatrixXcd& generator, double duration, bool hermitian) {
    if (duration <= 0.0) return Eigen::MatrixXcd::Identity(generator.rows(), generator.cols());
    if (hermitian) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(generator);
        const Eigen::VectorXcd phases = (cd(-duration) * I * es.eigenvalues().cast<cd>()).array().exp();
        return es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
    }
    return (cd(-duration) * I * generator).exp();
}

} // namespace

ExcitationState ExcitationState::emitter_excited(Eigen::Index dim, double amplitude) {
    ExcitationState s;
    s.amplitudes = Eigen::VectorXcd::Zero(dim);
    s.amplitudes(0) = amplitude;
    return s;
}

PropagationResult propagate(const Model& model, const EmitterDrive& drive, const ExcitationState& initial,
                            const PropagationOptions& options) {
    const Eigen::Index dim = model.dim();
    if (initial.amplitudes.size() != dim) throw SpecError("propagate: initial state has the wrong dimension");
    const double norm = initial.amplitudes.norm();
    if (!(norm > 0.0) || norm > 1.0 + 1e-9) throw SpecError("propagate: initial state norm must lie in (0, 1]");
    if (!(drive.duration >= 0.0)) throw SpecError("propagate: drive duration must be >= 0");

    Stepper stepper(model, drive, options);
    const auto plan = step_plan(drive, 0.0, drive.duration, options.dt);
    const Eigen::Index n_photonic = model.hamiltonian(std::max(drive.omega_q(0.0), 1.0)).photonic_count();

    PropagationResult result;
    result.frame = options.frame;
    std::vector<Eigen::VectorXcd> modes;
    auto record = [&](double t, const Eigen::VectorXcd& psi) {
        result.times.push_back(t);
        result.emitter_population.push_back(std::norm(psi(0)));
        modes.push_back(psi.segment(1, n_photonic));
    };

    Eigen::VectorXcd psi = initial.amplitudes;
    if (options.record_stride > 0) record(initial.t, psi);
    for (std::size_t k = 0; k < plan.size(); ++k) {
        psi = stepper.step(plan[k].t, plan[k].dt) * psi;
        if (!psi.allFinite()) throw DivergenceError("propagate: non-finite amplitudes", k);
        const bool last = k + 1 == plan.size();
        if (last || (options.record_stride > 0 && (k + 1) % options.record_stride == 0)) {
            record(initial.t + plan[k].t + plan[k].dt, psi);
        }
    }
    if (plan.empty() && options.record_stride == 0) record(initial.t, psi);

    result.mode_amplitudes.resize(static_cast<Eigen::Index>(modes.size()), n_photonic);
    for (std::size_t r = 0; r < modes.size(); ++r) {
        result.mode_amplitudes.row(static_cast<Eigen::Index>(r)) = modes[r].transpose();
    }
    result.final_state.amplitudes = psi;
    result.final_state.t = initial.t + drive.duration;
    return result;
}

Eigen::MatrixXcd segment_propagator(const Model& model, const EmitterDrive& drive, double t_begin, double t_end,
                                    const PropagationOptions& options) {
    Stepper stepper(model, drive, options);
    Eigen::MatrixXcd u = Eigen::MatrixXcd::Identity(stepper.dim(), stepper.dim());
    const auto plan = step_plan(drive, t_begin, t_end, options.dt);
    for (std::size_t k = 0; k < plan.size(); ++k) {
        u = stepper.step(plan[k].t, plan[k].dt) * u;
        if (!u.allFinite()) throw DivergenceError("segment_propagator: non-finite propagator", k);
    }
    return u;
}

std::vector<double> hold_time_sweep(const Model& model, TrapezoidPulse pulse, std::span<const double> hold_grid,
                                    const PropagationOptions& options) {
    for (double h : hold_grid) {
        if (!(h >= 0.0)) throw SpecError("hold_time_sweep: hold times must be >= 0");
    }
    pulse.return_to_start = true;
    pulse.tau_hold = 0.0;
    pulse.validate();
    const FluxMap map = model.flux_map();
    const EmitterDrive drive = make_drive(pulse, map);

    const Eigen::MatrixXcd u_rise = segment_propagator(model, drive, 0.0, pulse.tau_r, options);
    const Eigen::MatrixXcd u_fall = segment_propagator(model, drive, pulse.tau_r, pulse.duration(), options);

    Stepper stepper(model, drive, options);
    Eigen::MatrixXcd h_final = stepper.base();
    h_final(0, 0) += map.frequency(pulse.phi_f);
    const bool hermitian = !options.with_decay && options.emitter_decay == 0.0;

    const Eigen::VectorXcd psi_rise = u_rise * ExcitationState::emitter_excited(model.dim()).amplitudes;
    std::vector<double> out;
    out.reserve(hold_grid.size());
    for (double hold : hold_grid) {
        const Eigen::VectorXcd psi = u_fall * (constant_propagator(h_final, hold, hermitian) * psi_rise);
        if (!psi.allFinite()) throw DivergenceError("hold_time_sweep: non-finite amplitudes", out.size());
        out.push_back(std::norm(psi(0)));
    }
    return out;
}

PopulationSpectrum population_fft(std::span<const double> hold_grid, std::span<const double> populations) {
    if (hold_grid.size() != populations.size()) throw SpecError("population_fft: length mismatch");
    if (hold_grid.size() < 8) throw SamplingError("population_fft: need at least 8 points");
    const double step = dsp::uniform_spacing(hold_grid);
    const auto n = populations.size();

    // Offsetting by the first sample keeps a constant trace exactly zero.
    std::vector<double> centered(n);
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        centered[i] = populations[i] - populations[0];
        mean += centered[i];
    }
    mean /= static_cast<double>(n);
    for (auto& v : centered) v -= mean;

    const auto bins = dsp::rdft(centered);
    PopulationSpectrum out;
    out.bin_mhz = 1e3 / (static_cast<double>(n) * step);
    out.freqs_mhz.reserve(bins.size());
    out.magnitudes.reserve(bins.size());
    for (std::size_t k = 0; k < bins.size(); ++k) {
        out.freqs_mhz.push_back(static_cast<double>(k) * out.bin_mhz);
        out.magnitudes.push_back(std::abs(bins[k]) / static_cast<double>(n));
    }
    return out;
}

void write_csv(std::ostream& os, const PropagationResult& result, const std::vector<std::string>& mode_labels) {
    os << "t_ns,p1";
    for (Eigen::Index m = 0; m < result.mode_amplitudes.cols(); ++m) {
        const std::string label = static_cast<std::size_t>(m) < mode_labels.size()
                                      ? mode_labels[static_cast<std::size_t>(m)]
                                      : "m" + std::to_string(m + 1);
        os << ',' << label << "_re," << label << "_im";
    }
    os << '\n';
    os.precision(12);
    for (std::size_t r = 0; r < result.times.size(); ++r) {
        os << result.times[r] << ',' << result.emitter_population[r];
        for (Eigen::Index m = 0; m < result.mode_amplitudes.cols(); ++m) {
            const cd a = result.mode_amplitudes(static_cast<Eigen::Index>(r), m);
            os << ',' << a.real() << ',' << a.imag();
        }
        os << '\n';
    }
}

} // namespace apbs
