#include "apbs/core_model.hpp"

#include "apbs/errors.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>

namespace apbs {

namespace {

using cd = std::complex<double>;
constexpr cd I{0.0, 1.0};

// Coinciding modes within 1 kHz are accepted with a warning.
constexpr double degenerate_tol = 2.0 * 3.14159265358979323846 * 1e-6;

void require(bool ok, const std::string& what) {
    if (!ok) throw SpecError(what);
}

std::vector<std::string> labels_for(Eigen::Index n_photonic, const char* prefix, bool tls) {
    std::vector<std::string> labels;
    labels.reserve(static_cast<std::size_t>(n_photonic) + 2);
    labels.emplace_back("E");
    for (Eigen::Index i = 1; i <= n_photonic; ++i) labels.push_back(prefix + std::to_string(i));
    if (tls) labels.emplace_back("T");
    return labels;
}

} // namespace

const char* to_string(ModelForm form) noexcept {
    return form == ModelForm::tight_binding ? "tight_binding" : "effective";
}

ModelForm LatticeSpec::form() const {
    const bool tb = omega_r.has_value();
    const bool eff = !mode_freqs.empty();
    if (tb == eff) {
        throw ModelFormError("lattice: exactly one of omega_r (tight-binding) or mode_freqs (effective) must be set");
    }
    return tb ? ModelForm::tight_binding : ModelForm::effective;
}

std::size_t LatticeSpec::photonic_dim() const {
    return form() == ModelForm::tight_binding ? static_cast<std::size_t>(n_sites) : mode_freqs.size();
}

ModelWarnings validate(const LatticeSpec& lattice, const EmitterSpec& emitter, const std::optional<TlsSpec>& tls) {
    ModelWarnings warnings;
    const ModelForm form = lattice.form();
    require(lattice.n_sites >= 1, "lattice: n_sites must be >= 1");
    require(lattice.kappa_in >= 0.0 && lattice.kappa_out >= 0.0, "lattice: port decay rates must be >= 0");
    require(emitter.omega_min > 0.0 && emitter.omega_min < emitter.omega_max,
            "emitter: need 0 < omega_min < omega_max");
    require(emitter.e_c >= 0.0, "emitter: e_c must be >= 0");

    if (form == ModelForm::tight_binding) {
        require(*lattice.omega_r > 0.0, "lattice: omega_r must be > 0");
        require(emitter.coupling_site >= 1 && emitter.coupling_site <= lattice.n_sites,
                "emitter: coupling_site outside the lattice");
        require(emitter.g_site >= 0.0, "emitter: g_site must be >= 0");
    } else {
        const auto& f = lattice.mode_freqs;
        for (std::size_t i = 0; i < f.size(); ++i) {
            require(f[i] > 0.0, "lattice: mode_freqs must be > 0");
            if (i == 0) continue;
            const double gap = f[i] - f[i - 1];
            if (std::abs(gap) <= degenerate_tol) {
                warnings.messages.push_back("lattice: mode_freqs[" + std::to_string(i - 1) + "] and [" +
                                            std::to_string(i) + "] coincide within 1 kHz");
            } else {
                require(gap > 0.0, "lattice: mode_freqs must be strictly increasing (index " +
                                       std::to_string(i) + ")");
            }
        }
        require(emitter.g_modes.size() == f.size(),
                "emitter: g_modes length " + std::to_string(emitter.g_modes.size()) +
                    " does not match mode_freqs length " + std::to_string(f.size()));
        for (double g : emitter.g_modes) require(g >= 0.0, "emitter: g_modes must be >= 0");
        require(lattice.mode_kappas.empty() || lattice.mode_kappas.size() == f.size(),
                "lattice: mode_kappas length does not match mode_freqs");
        for (double k : lattice.mode_kappas) require(k >= 0.0, "lattice: mode_kappas must be >= 0");
        require(lattice.output_fraction.empty() || lattice.output_fraction.size() == f.size(),
                "lattice: output_fraction length does not match mode_freqs");
        for (double w : lattice.output_fraction) require(w >= 0.0 && w <= 1.0, "lattice: output_fraction must lie in [0, 1]");
    }
    if (tls) {
        require(tls->freq > 0.0, "tls: freq must be > 0");
        require(tls->g_tls >= 0.0, "tls: g_tls must be >= 0");
    }
    return warnings;
}

SingleExcitationHamiltonian build_tight_binding(const LatticeSpec& lattice, const EmitterSpec& emitter,
                                                double omega_q, bool with_decay) {
    if (!lattice.omega_r) throw ModelFormError("build_tight_binding: lattice has no omega_r");
    if (emitter.coupling_site < 1 || emitter.coupling_site > lattice.n_sites) {
        throw SpecError("build_tight_binding: coupling_site outside the lattice");
    }
    if (!(omega_q > 0.0)) throw SpecError("build_tight_binding: omega_q must be > 0");

    const Eigen::Index n = lattice.n_sites;
    SingleExcitationHamiltonian h;
    h.form = ModelForm::tight_binding;
    h.coupling_site = emitter.coupling_site;
    h.matrix = Eigen::MatrixXcd::Zero(n + 1, n + 1);
    h.basis_labels = labels_for(n, "s", false);

    h.matrix(0, 0) = omega_q;
    for (Eigen::Index s = 1; s <= n; ++s) {
        h.matrix(s, s) = *lattice.omega_r;
        if (s + 1 <= n) h.matrix(s, s + 1) = h.matrix(s + 1, s) = lattice.j_nn;
        if (s + 2 <= n) h.matrix(s, s + 2) = h.matrix(s + 2, s) = lattice.j_nnn;
    }
    h.matrix(0, emitter.coupling_site) = h.matrix(emitter.coupling_site, 0) = emitter.g_site;

    if (with_decay) {
        h.matrix(1, 1) -= I * (lattice.kappa_in / 2.0);
        h.matrix(n, n) -= I * (lattice.kappa_out / 2.0);
    }
    return h;
}

std::vector<double> output_share(const LatticeSpec& lattice) {
    if (lattice.output_fraction.empty()) return std::vector<double>(lattice.mode_freqs.size(), 1.0);
    if (lattice.output_fraction.size() != lattice.mode_freqs.size()) {
        throw SpecError("lattice: output_fraction length does not match mode_freqs");
    }
    return lattice.output_fraction;
}

SingleExcitationHamiltonian build_effective(const LatticeSpec& lattice, const EmitterSpec& emitter,
                                            double omega_q, const std::optional<TlsSpec>& tls, bool with_decay) {
    if (lattice.mode_freqs.empty()) throw ModelFormError("build_effective: lattice has no mode_freqs");
    const auto n = static_cast<Eigen::Index>(lattice.mode_freqs.size());
    if (emitter.g_modes.size() != lattice.mode_freqs.size()) {
        throw SpecError("build_effective: g_modes length does not match mode_freqs");
    }
    if (with_decay && !lattice.mode_kappas.empty() && lattice.mode_kappas.size() != lattice.mode_freqs.size()) {
        throw SpecError("build_effective: mode_kappas length does not match mode_freqs");
    }

    const Eigen::Index dim = n + 1 + (tls ? 1 : 0);
    SingleExcitationHamiltonian h;
    h.form = ModelForm::effective;
    h.has_tls = tls.has_value();
    h.matrix = Eigen::MatrixXcd::Zero(dim, dim);
    h.basis_labels = labels_for(n, "m", h.has_tls);

    h.matrix(0, 0) = omega_q;
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto k = static_cast<std::size_t>(i);
        h.matrix(i + 1, i + 1) = lattice.mode_freqs[k];
        h.matrix(0, i + 1) = h.matrix(i + 1, 0) = emitter.g_modes[k];
        if (with_decay && !lattice.mode_kappas.empty() && !lattice.collective_ports) {
            h.matrix(i + 1, i + 1) -= I * (lattice.mode_kappas[k] / 2.0);
        }
    }
    if (with_decay && !lattice.mode_kappas.empty() && lattice.collective_ports) {
        const auto w = output_share(lattice);
        Eigen::VectorXd l_in(n), l_out(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto k = static_cast<std::size_t>(i);
            l_in(i) = std::sqrt((1.0 - w[k]) * lattice.mode_kappas[k]);
            l_out(i) = (i % 2 == 0 ? 1.0 : -1.0) * std::sqrt(w[k] * lattice.mode_kappas[k]);
        }
        const Eigen::MatrixXd loss = l_in * l_in.transpose() + l_out * l_out.transpose();
        h.matrix.block(1, 1, n, n) -= (I / 2.0) * loss.cast<cd>();
    }
    if (tls) {
        h.matrix(dim - 1, dim - 1) = tls->freq;
        h.matrix(0, dim - 1) = h.matrix(dim - 1, 0) = tls->g_tls;
    }
    return h;
}

Spectrum diagonalize(const Eigen::MatrixXcd& matrix) {
    if (matrix.rows() != matrix.cols() || matrix.rows() == 0) {
        throw NumericError("diagonalize: matrix must be square and non-empty");
    }
    if (!matrix.allFinite()) throw NumericError("diagonalize: non-finite matrix entries");
    const Eigen::MatrixXcd herm = 0.5 * (matrix + matrix.adjoint());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(herm);
    if (solver.info() != Eigen::Success) throw NumericError("diagonalize: eigensolver failed");
    return Spectrum{solver.eigenvalues(), solver.eigenvectors()};
}

Spectrum diagonalize(const SingleExcitationHamiltonian& h) { return diagonalize(h.matrix); }

std::optional<double> localization_length(const Eigen::VectorXcd& site_amplitudes, int coupling_site) {
    const auto n = static_cast<int>(site_amplitudes.size());
    if (coupling_site < 1 || coupling_site > n) return std::nullopt;
    // Output port sits at site n; fall back to the input side when the
    // emitter sits on the last site.
    const int step = coupling_site < n ? 1 : -1;
    std::vector<double> xs, ys;
    for (int s = coupling_site + step; s >= 1 && s <= n; s += step) {
        const double a = std::abs(site_amplitudes(s - 1));
        if (a <= 1e-300) continue;
        xs.push_back(std::abs(s - coupling_site));
        ys.push_back(std::log(a));
    }
    if (xs.size() < 2) return std::nullopt;
    const double m = static_cast<double>(xs.size());
    const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / m;
    const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / m;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxy += (xs[i] - mx) * (ys[i] - my);
        sxx += (xs[i] - mx) * (xs[i] - mx);
    }
    const double slope = sxy / sxx;
    if (!(slope < 0.0)) return std::nullopt;
    return -1.0 / slope;
}

ApbsDecomposition decompose(const SingleExcitationHamiltonian& h, const Spectrum& spectrum, Eigen::Index k) {
    Eigen::VectorXcd v = spectrum.vectors.col(k);
    const cd ce = v(0);
    if (std::abs(ce) > 0.0) v *= std::conj(ce) / std::abs(ce);

    ApbsDecomposition out;
    out.eigen_index = k;
    out.energy = spectrum.values(k);
    out.c_e = v(0);
    out.c_modes = v.segment(1, h.photonic_count());
    if (h.has_tls) out.c_tls = v(h.tls_index());
    out.photonic_weight = out.c_modes.squaredNorm();
    if (h.form == ModelForm::tight_binding) {
        out.localization_length = localization_length(out.c_modes, h.coupling_site);
    }
    return out;
}

ApbsDecomposition extract_apbs(const SingleExcitationHamiltonian& h) {
    const Spectrum spectrum = diagonalize(h);
    const Eigen::Index dim = h.dim();
    constexpr double tie_tol = 1e-9;

    double best_weight = -1.0;
    for (Eigen::Index k = 0; k < dim; ++k) best_weight = std::max(best_weight, std::norm(spectrum.vectors(0, k)));

    // Eigenvalues are ascending, so the first candidate is the lowest energy.
    Eigen::Index chosen = -1;
    for (Eigen::Index k = 0; k < dim; ++k) {
        if (std::norm(spectrum.vectors(0, k)) < best_weight - tie_tol) continue;
        if (chosen < 0) {
            chosen = k;
            continue;
        }
        const double scale = std::max(1.0, std::abs(spectrum.values(chosen)));
        if (std::abs(spectrum.values(k) - spectrum.values(chosen)) <= tie_tol * scale) {
            throw AmbiguityError("extract_apbs: degenerate states share the maximal emitter overlap");
        }
    }
    return decompose(h, spectrum, chosen);
}

SingleExcitationHamiltonian Model::hamiltonian(double omega_q, bool with_decay) const {
    if (form() == ModelForm::tight_binding) return build_tight_binding(lattice, emitter, omega_q, with_decay);
    return build_effective(lattice, emitter, omega_q, tls, with_decay);
}

Eigen::Index Model::dim() const {
    return static_cast<Eigen::Index>(lattice.photonic_dim()) + 1 +
           (form() == ModelForm::effective && tls ? 1 : 0);
}

std::vector<ApbsPoint> apbs_flux_curve(const Model& model, std::span<const double> flux_grid) {
    std::vector<ApbsPoint> out(flux_grid.size());
    if (flux_grid.empty()) return out;
    for (double phi : flux_grid) {
        if (!(phi >= 0.0 && phi <= 0.5)) throw SpecError("apbs_flux_curve: flux outside [0, 0.5]");
    }
    const FluxMap map = model.flux_map();

    std::vector<std::size_t> order(flux_grid.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return map.frequency(flux_grid[a]) < map.frequency(flux_grid[b]);
    });

    Eigen::VectorXcd previous;
    for (std::size_t idx : order) {
        const double phi = flux_grid[idx];
        const auto h = model.hamiltonian(map.frequency(phi));
        const Spectrum spectrum = diagonalize(h);
        Eigen::Index k = 0;
        if (previous.size() == 0) {
            k = extract_apbs(h).eigen_index;
        } else {
            double best = -1.0;
            for (Eigen::Index j = 0; j < spectrum.vectors.cols(); ++j) {
                const double ov = std::abs(previous.dot(spectrum.vectors.col(j)));
                if (ov > best) {
                    best = ov;
                    k = j;
                }
            }
        }
        previous = spectrum.vectors.col(k);
        const auto d = decompose(h, spectrum, k);
        out[idx] = ApbsPoint{phi, d.energy, d.photonic_weight};
    }
    return out;
}

Spectrum open_chain_modes(const LatticeSpec& lattice) {
    if (!lattice.omega_r) throw ModelFormError("open_chain_modes: lattice has no omega_r");
    const Eigen::Index n = lattice.n_sites;
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(n, n);
    for (Eigen::Index s = 0; s < n; ++s) {
        m(s, s) = *lattice.omega_r;
        if (s + 1 < n) m(s, s + 1) = m(s + 1, s) = lattice.j_nn;
        if (s + 2 < n) m(s, s + 2) = m(s + 2, s) = lattice.j_nnn;
    }
    return diagonalize(m);
}

} // namespace apbs
