#include "apbs/calibration.hpp"

#include "apbs/csv.hpp"
#include "apbs/propagator.hpp"
#include "apbs/units.hpp"

#include <ceres/ceres.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <random>

namespace apbs {

namespace {

constexpr double track_threshold = 0.5;

bool all_finite(const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

} // namespace

void SpectroscopyDataset::validate() const {
    const std::size_t n = flux_grid.size();
    if (apbs_curve.size() != n) throw SpecError("spectroscopy: apbs curve length differs from the flux grid");
    if (!all_finite(flux_grid) || !all_finite(apbs_curve)) throw SpecError("spectroscopy: non-finite values");
    for (std::size_t b = 0; b < mode_curves.size(); ++b) {
        if (mode_curves[b].size() != n) {
            throw SpecError("spectroscopy: branch " + std::to_string(b + 1) + " length differs from the flux grid");
        }
        if (!all_finite(mode_curves[b])) throw SpecError("spectroscopy: non-finite values in branch " + std::to_string(b + 1));
    }
    if (!linewidths.empty()) {
        if (linewidths.size() != mode_curves.size()) throw SpecError("spectroscopy: linewidths need one row per branch");
        for (const auto& row : linewidths) {
            if (row.size() != n) throw SpecError("spectroscopy: linewidth row length differs from the flux grid");
        }
    }
}

SpectroscopyDataset synthesize_spectroscopy(const Model& model, std::span<const double> flux_grid) {
    SpectroscopyDataset data;
    if (flux_grid.empty()) return data;
    const FluxMap map = model.flux_map();
    const Eigen::Index dim = model.dim();
    const auto branches = static_cast<std::size_t>(dim);

    data.flux_grid.assign(flux_grid.begin(), flux_grid.end());
    std::vector<std::vector<double>> curves(branches, std::vector<double>(flux_grid.size()));

    // prev.col(b) is the eigenvector currently carried by branch b.
    Eigen::MatrixXcd prev;
    std::size_t apbs_branch = 0;
    for (std::size_t i = 0; i < flux_grid.size(); ++i) {
        const Spectrum s = diagonalize(model.hamiltonian(map.frequency(flux_grid[i])));
        std::vector<Eigen::Index> assign(branches);
        if (i == 0) {
            std::iota(assign.begin(), assign.end(), Eigen::Index{0});
            double best = -1.0;
            for (std::size_t b = 0; b < branches; ++b) {
                const double w = std::norm(s.vectors(0, static_cast<Eigen::Index>(b)));
                if (w > best) {
                    best = w;
                    apbs_branch = b;
                }
            }
        } else {
            const Eigen::MatrixXd overlap = (prev.adjoint() * s.vectors).cwiseAbs2();
            struct Pair {
                double o;
                std::size_t b;
                Eigen::Index k;
            };
            std::vector<Pair> pairs;
            pairs.reserve(branches * branches);
            for (std::size_t b = 0; b < branches; ++b) {
                for (Eigen::Index k = 0; k < dim; ++k) pairs.push_back({overlap(static_cast<Eigen::Index>(b), k), b, k});
            }
            std::stable_sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& c) { return a.o > c.o; });
            std::vector<bool> b_done(branches, false), k_done(branches, false);
            for (const auto& p : pairs) {
                if (b_done[p.b] || k_done[static_cast<std::size_t>(p.k)]) continue;
                if (p.o < track_threshold) {
                    throw TrackingError("synthesize_spectroscopy: branch " + std::to_string(p.b) +
                                            " overlap " + std::to_string(p.o) + " below 0.5",
                                        flux_grid[i]);
                }
                assign[p.b] = p.k;
                b_done[p.b] = true;
                k_done[static_cast<std::size_t>(p.k)] = true;
            }
        }
        Eigen::MatrixXcd next(dim, dim);
        for (std::size_t b = 0; b < branches; ++b) {
            curves[b][i] = s.values(assign[b]);
            next.col(static_cast<Eigen::Index>(b)) = s.vectors.col(assign[b]);
        }
        prev = std::move(next);
    }

    data.apbs_curve = curves[apbs_branch];
    for (std::size_t b = 0; b < branches; ++b) {
        if (b != apbs_branch) data.mode_curves.push_back(std::move(curves[b]));
    }
    return data;
}

void write_spectroscopy_csv(std::ostream& os, const SpectroscopyDataset& data) {
    data.validate();
    csv::Table t;
    t.header = {"flux", "branch_id", "freq_GHz"};
    for (std::size_t i = 0; i < data.flux_grid.size(); ++i) {
        t.rows.push_back({data.flux_grid[i], 0.0, units::to_ghz(data.apbs_curve[i])});
        for (std::size_t b = 0; b < data.mode_curves.size(); ++b) {
            t.rows.push_back({data.flux_grid[i], static_cast<double>(b + 1), units::to_ghz(data.mode_curves[b][i])});
        }
    }
    csv::write(os, t);
}

SpectroscopyDataset read_spectroscopy_csv(std::istream& is) {
    const csv::Table t = csv::read(is);
    const std::size_t c_flux = t.column("flux"), c_branch = t.column("branch_id"), c_freq = t.column("freq_GHz");
    // branch -> (flux -> freq), flux order as first seen on branch 0.
    std::map<int, std::vector<std::pair<double, double>>> by_branch;
    for (const auto& row : t.rows) {
        const double id = row[c_branch];
        if (id < 0.0 || id != std::floor(id)) throw SpecError("spectroscopy csv: branch_id must be a non-negative integer");
        by_branch[static_cast<int>(id)].push_back({row[c_flux], units::from_ghz(row[c_freq])});
    }
    SpectroscopyDataset data;
    if (by_branch.empty()) return data;
    if (by_branch.begin()->first != 0) throw SpecError("spectroscopy csv: branch 0 (APBS) missing");
    int expected = 0;
    for (const auto& [id, points] : by_branch) {
        if (id != expected++) throw SpecError("spectroscopy csv: branch ids must be consecutive from 0");
        std::vector<double> curve;
        for (std::size_t i = 0; i < points.size(); ++i) {
            if (id == 0) {
                data.flux_grid.push_back(points[i].first);
            } else if (i >= data.flux_grid.size() || points[i].first != data.flux_grid[i]) {
                throw SpecError("spectroscopy csv: branch " + std::to_string(id) + " is not on the APBS flux grid");
            }
            curve.push_back(points[i].second);
        }
        if (id == 0) {
            data.apbs_curve = std::move(curve);
        } else {
            data.mode_curves.push_back(std::move(curve));
        }
    }
    data.validate();
    return data;
}

SpectroscopyDataset read_spectroscopy_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw SpecError("cannot read " + path.string());
    return read_spectroscopy_csv(in);
}

nlohmann::json FitResult::to_json() const {
    nlohmann::json j;
    std::vector<double> f, g;
    for (double x : mode_freqs) f.push_back(units::to_ghz(x));
    for (double x : g_modes) g.push_back(units::to_mhz(x));
    j["mode_freqs_GHz"] = f;
    j["g_MHz"] = g;
    j["residual_rms_MHz"] = units::to_mhz(residual_rms);
    j["iterations"] = iterations;
    j["converged"] = converged;
    return j;
}

namespace {

// Residuals w_b·(λ_rank(b)(Φ_i) − data_b(Φ_i)) with Hellmann-Feynman Jacobian.
class SpectrumCost : public ceres::CostFunction {
public:
    SpectrumCost(const SpectroscopyDataset& data, const Model& model, std::vector<Eigen::Index> ranks,
                 std::vector<double> weights)
        : data_(data), model_(model), ranks_(std::move(ranks)), weights_(std::move(weights)) {
        const FluxMap map = model.flux_map();
        for (double phi : data.flux_grid) omega_.push_back(map.frequency(phi));
        m_ = static_cast<int>(model.lattice.mode_freqs.size());
        set_num_residuals(static_cast<int>(data.flux_grid.size() * ranks_.size()));
        mutable_parameter_block_sizes()->push_back(m_);
        mutable_parameter_block_sizes()->push_back(m_);
    }

    bool Evaluate(double const* const* params, double* residuals, double** jacobians) const override {
        Model m = model_;
        m.lattice.mode_freqs.assign(params[0], params[0] + m_);
        m.emitter.g_modes.assign(params[1], params[1] + m_);
        const std::size_t nb = ranks_.size();
        for (std::size_t i = 0; i < omega_.size(); ++i) {
            Spectrum s;
            try {
                s = diagonalize(m.hamiltonian(omega_[i]));
            } catch (const Error&) {
                return false;
            }
            for (std::size_t b = 0; b < nb; ++b) {
                const Eigen::Index k = ranks_[b];
                const std::size_t r = i * nb + b;
                const double target = b == 0 ? data_.apbs_curve[i] : data_.mode_curves[b - 1][i];
                residuals[r] = weights_[b] * (s.values(k) - target);
                const auto v = s.vectors.col(k);
                for (int n = 0; n < m_; ++n) {
                    if (jacobians && jacobians[0]) jacobians[0][r * m_ + n] = weights_[b] * std::norm(v(n + 1));
                    if (jacobians && jacobians[1]) {
                        jacobians[1][r * m_ + n] = weights_[b] * 2.0 * std::real(std::conj(v(0)) * v(n + 1));
                    }
                }
            }
        }
        return true;
    }

private:
    const SpectroscopyDataset& data_;
    Model model_;
    std::vector<Eigen::Index> ranks_;
    std::vector<double> weights_;
    std::vector<double> omega_;
    int m_ = 0;
};

double unweighted_rms(const SpectrumCost& cost, const std::vector<double>& freqs, const std::vector<double>& g,
                      const std::vector<double>& weights, std::size_t n_flux) {
    const double* params[2] = {freqs.data(), g.data()};
    std::vector<double> r(static_cast<std::size_t>(cost.num_residuals()));
    if (!cost.Evaluate(params, r.data(), nullptr)) return std::numeric_limits<double>::infinity();
    double sum = 0.0;
    const std::size_t nb = weights.size();
    for (std::size_t i = 0; i < n_flux; ++i) {
        for (std::size_t b = 0; b < nb; ++b) {
            const double x = r[i * nb + b] / weights[b];
            sum += x * x;
        }
    }
    return r.empty() ? 0.0 : std::sqrt(sum / static_cast<double>(r.size()));
}

} // namespace

FitResult fit_effective_model(const SpectroscopyDataset& data, const Model& initial, const FitOptions& options) {
    data.validate();
    if (initial.form() != ModelForm::effective) throw ModelFormError("fit_effective_model: needs an effective model");
    if (data.flux_grid.empty()) throw SpecError("fit_effective_model: empty dataset");
    const std::size_t m = initial.lattice.mode_freqs.size();
    const auto dim = static_cast<std::size_t>(initial.dim());
    if (data.branch_count() + 1 != dim) {
        throw SpecError("fit_effective_model: dataset has " + std::to_string(data.branch_count()) +
                        " mode branches, model has " + std::to_string(dim - 1));
    }

    // Ranks from the first flux point; tracked branches keep them.
    std::vector<double> first{data.apbs_curve[0]};
    for (const auto& c : data.mode_curves) first.push_back(c[0]);
    std::vector<std::size_t> order(first.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return first[a] < first[b]; });
    std::vector<Eigen::Index> ranks(first.size());
    for (std::size_t r = 0; r < order.size(); ++r) ranks[order[r]] = static_cast<Eigen::Index>(r);

    std::vector<double> weights(first.size(), 1.0);
    weights[0] = options.apbs_weight;

    std::vector<double> freqs = initial.lattice.mode_freqs;
    std::vector<double> g = initial.emitter.g_modes;
    for (double& x : g) x = std::clamp(x, options.g_lower, options.g_upper);
    const std::vector<double> centre = freqs;

    auto* cost = new SpectrumCost(data, initial, ranks, weights);
    ceres::Problem problem;
    problem.AddResidualBlock(cost, nullptr, freqs.data(), g.data());
    for (std::size_t n = 0; n < m; ++n) {
        const int i = static_cast<int>(n);
        problem.SetParameterLowerBound(freqs.data(), i, centre[n] - options.freq_window);
        problem.SetParameterUpperBound(freqs.data(), i, centre[n] + options.freq_window);
        problem.SetParameterLowerBound(g.data(), i, options.g_lower);
        problem.SetParameterUpperBound(g.data(), i, options.g_upper);
    }

    ceres::Solver::Options so;
    so.linear_solver_type = ceres::DENSE_QR;
    so.max_num_iterations = options.max_iterations;
    so.function_tolerance = 1e-16;
    so.gradient_tolerance = 1e-16;
    so.parameter_tolerance = 1e-14;
    so.num_threads = 1;
    so.logging_type = ceres::SILENT;
    ceres::Solver::Summary summary;
    ceres::Solve(so, &problem, &summary);

    FitResult result;
    result.mode_freqs = freqs;
    result.g_modes = g;
    result.iterations = static_cast<int>(summary.iterations.size()) - 1;
    result.residual_rms = unweighted_rms(*cost, freqs, g, weights, data.flux_grid.size());
    result.converged = summary.termination_type == ceres::CONVERGENCE;
    if (!result.converged) {
        throw FitError("fit_effective_model: " + summary.message, result);
    }
    return result;
}

std::vector<double> measured_mode_peaks(const SpectroscopyDataset& data, const Model& model) {
    const FluxMap map = model.flux_map();
    std::vector<double> out;
    for (const auto& curve : data.mode_curves) {
        double best = -std::numeric_limits<double>::infinity();
        double value = curve.empty() ? 0.0 : curve[0];
        for (std::size_t i = 0; i < curve.size(); ++i) {
            const double gap = curve[i] - map.frequency(data.flux_grid[i]);
            if (gap > best) {
                best = gap;
                value = curve[i];
            }
        }
        out.push_back(value);
    }
    return out;
}

Model perturbed_guess(const Model& model, std::span<const double> start_freqs, double spread, std::uint64_t seed) {
    Model out = model;
    if (!start_freqs.empty()) {
        if (start_freqs.size() != out.lattice.mode_freqs.size()) throw SpecError("perturbed_guess: frequency count mismatch");
        out.lattice.mode_freqs.assign(start_freqs.begin(), start_freqs.end());
    }
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> factor(1.0 - spread, 1.0 + spread);
    for (double& g : out.emitter.g_modes) g *= factor(rng);
    return out;
}

LzEstimate lz_estimate(double g, double delta_e, double delta_t, double threshold) {
    if (!(delta_e > 0.0) || !(delta_t > 0.0)) throw SpecError("lz_estimate: delta_e and delta_t must be > 0");
    LzEstimate e;
    e.gamma = g * g * delta_t / delta_e;
    e.p_lz = std::exp(-2.0 * std::numbers::pi * e.gamma);
    e.adiabatic_time = g == 0.0 ? std::numeric_limits<double>::infinity()
                                : -std::log(threshold) * delta_e / (2.0 * std::numbers::pi * g * g);
    return e;
}

double lz_numeric(double g, double delta_e, double delta_t, double padding, double dt) {
    if (!(delta_e > 0.0) || !(delta_t > 0.0) || padding < 0.0) throw SpecError("lz_numeric: invalid sweep");
    const double centre = units::from_ghz(5.0);
    Model m;
    m.lattice.n_sites = 1;
    m.lattice.mode_freqs = {centre};
    m.emitter.omega_max = centre + delta_e;
    m.emitter.omega_min = centre - delta_e;
    m.emitter.e_c = 0.0;
    m.emitter.g_modes = {g};

    const double rate = delta_e / delta_t;
    EmitterDrive drive;
    drive.duration = delta_t + 2.0 * padding;
    drive.omega_q = [=](double t) {
        const double s = std::clamp(t - padding, 0.0, delta_t);
        return centre - delta_e / 2.0 + rate * s;
    };
    if (padding > 0.0) drive.breakpoints = {padding, padding + delta_t};

    PropagationOptions opt;
    opt.dt = dt;
    opt.frame = centre;
    opt.record_stride = 0;
    const auto r = propagate(m, drive, ExcitationState::emitter_excited(m.dim()), opt);
    return std::norm(r.final_state.amplitudes(0));
}

} // namespace apbs
