// core_model.hpp: single-excitation Hamiltonians of an emitter coupled to a
// coupled-resonator lattice, their spectra and the atom-photon bound state.
//
// Basis ordering is fixed: index 0 is the emitter, indices 1..N the photonic
// sites (tight-binding form) or modes (effective form), and an optional TLS
// last. All frequencies are angular, rad/ns.

#pragma once

#include "apbs/flux_map.hpp"

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace apbs {

enum class ModelForm { tight_binding, effective };

const char* to_string(ModelForm form) noexcept;

struct LatticeSpec {
    int n_sites = 0;
    // Tight-binding form.
    std::optional<double> omega_r;
    double j_nn = 0.0;
    double j_nnn = 0.0;
    // Effective form: dressed mode frequencies, strictly increasing.
    std::vector<double> mode_freqs;
    // Port decay rates on sites 1 and n_sites.
    double kappa_in = 0.0;
    double kappa_out = 0.0;
    // Effective form: per-mode external decay rates.
    std::vector<double> mode_kappas;
    // Effective form: share of each mode_kappa leaving through the output
    // port, the rest through the input port. Empty: all through the output.
    std::vector<double> output_fraction;
    // Effective form: both ports couple to the modes jointly, with the edge
    // parity of open-chain modes (input +1, output (−1)^(n+1) for mode n).
    // The decay term is then −(i/2)·Σ_p l_p l_pᵀ instead of −(i/2)·diag(κ).
    bool collective_ports = false;

    // Throws ModelFormError unless exactly one form is specified.
    ModelForm form() const;
    std::size_t photonic_dim() const;
};

// Output-port share per effective mode: output_fraction, or 1 when empty.
std::vector<double> output_share(const LatticeSpec& lattice);

struct EmitterSpec {
    double omega_max = 0.0;
    double omega_min = 0.0;
    double e_c = 0.0;
    int coupling_site = 1;  // 1-based, tight-binding form
    double g_site = 0.0;
    std::vector<double> g_modes;

    FluxMap flux_map() const { return FluxMap::from_sweet_spots(omega_max, omega_min, e_c); }
};

struct TlsSpec {
    double freq = 0.0;
    double g_tls = 0.0;
};

struct SingleExcitationHamiltonian {
    ModelForm form = ModelForm::effective;
    Eigen::MatrixXcd matrix;
    std::vector<std::string> basis_labels;
    int coupling_site = 0;  // tight-binding only, 1-based
    bool has_tls = false;

    static constexpr Eigen::Index emitter_index = 0;
    Eigen::Index dim() const noexcept { return matrix.rows(); }
    Eigen::Index photonic_count() const noexcept { return dim() - 1 - (has_tls ? 1 : 0); }
    Eigen::Index tls_index() const noexcept { return dim() - 1; }
};

// Non-fatal findings from spec validation (e.g. near-degenerate modes).
struct ModelWarnings {
    std::vector<std::string> messages;
};

// Throws SpecError/ModelFormError on violated invariants.
ModelWarnings validate(const LatticeSpec& lattice, const EmitterSpec& emitter,
                       const std::optional<TlsSpec>& tls = std::nullopt);

SingleExcitationHamiltonian build_tight_binding(const LatticeSpec& lattice, const EmitterSpec& emitter,
                                                double omega_q, bool with_decay = false);

SingleExcitationHamiltonian build_effective(const LatticeSpec& lattice, const EmitterSpec& emitter,
                                            double omega_q, const std::optional<TlsSpec>& tls = std::nullopt,
                                            bool with_decay = false);

struct Spectrum {
    Eigen::VectorXd values;   // ascending
    Eigen::MatrixXcd vectors; // columns, orthonormal
};

// Diagonalizes the Hermitian part (H + H†)/2. Throws NumericError on
// non-finite entries.
Spectrum diagonalize(const SingleExcitationHamiltonian& h);
Spectrum diagonalize(const Eigen::MatrixXcd& matrix);

struct ApbsDecomposition {
    double energy = 0.0;
    std::complex<double> c_e;
    Eigen::VectorXcd c_modes;
    std::optional<std::complex<double>> c_tls;
    double photonic_weight = 0.0;
    std::optional<double> localization_length;  // sites, tight-binding only
    Eigen::Index eigen_index = 0;
};

// Most emitter-like dressed state: maximal |<E|ψ>|², ties broken by the lower
// energy. The global phase is fixed so that c_e is real and non-negative.
ApbsDecomposition extract_apbs(const SingleExcitationHamiltonian& h);
ApbsDecomposition decompose(const SingleExcitationHamiltonian& h, const Spectrum& spectrum, Eigen::Index k);

// Least-squares 1/e length of |c_site| on the output-port side of the
// coupling site, coupling site excluded.
std::optional<double> localization_length(const Eigen::VectorXcd& site_amplitudes, int coupling_site);

// Lattice + emitter (+ TLS) with the form fixed by the lattice.
struct Model {
    LatticeSpec lattice;
    EmitterSpec emitter;
    std::optional<TlsSpec> tls;

    ModelForm form() const { return lattice.form(); }
    FluxMap flux_map() const { return emitter.flux_map(); }
    SingleExcitationHamiltonian hamiltonian(double omega_q, bool with_decay = false) const;
    Eigen::Index dim() const;
};

struct ApbsPoint {
    double flux = 0.0;
    double energy = 0.0;
    double photonic_weight = 0.0;
};

// APBS energy and photonic weight along a flux grid. The branch starts at the
// most emitter-like state of the most detuned grid point and is continued by
// maximal eigenvector overlap, so it stays on the lowest dressed branch when
// the emitter is tuned into the band.
std::vector<ApbsPoint> apbs_flux_curve(const Model& model, std::span<const double> flux_grid);

// Eigenmodes of the bare tight-binding chain (no emitter): ascending
// frequencies and site-space eigenvectors.
Spectrum open_chain_modes(const LatticeSpec& lattice);

} // namespace apbs
