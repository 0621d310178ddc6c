#include "apbs/scenario.hpp"

#include "apbs/calibration.hpp"
#include "apbs/csv.hpp"
#include "apbs/emission.hpp"
#include "apbs/errors.hpp"
#include "apbs/propagator.hpp"
#include "apbs/spectrum.hpp"
#include "apbs/units.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <thread>

namespace apbs {

namespace fs = std::filesystem;

namespace {

// Default emitter parking point before and after every pulse.
constexpr double default_omega_i_ghz = 3.8;

enum class Kind { number, positive, nonnegative, integer, string, boolean, numbers, positives };

struct Field {
    const char* key;
    Kind kind;
    bool required = false;
};

const std::vector<Field> quench_fields = {
    {"omega_i_GHz", Kind::positive},      {"tau_hold_ns", Kind::nonnegative}, {"tau_q_ns", Kind::positive},
    {"prep", Kind::string},               {"record_window_ns", Kind::positive}, {"record_dt_ns", Kind::positive},
    {"dt_ns", Kind::positive},            {"band_center_GHz", Kind::positive}, {"band_width_GHz", Kind::positive},
    {"peak_threshold", Kind::positive},
};

std::vector<Field> fields_for(const std::string& kind) {
    auto with_quench = [](std::vector<Field> extra) {
        extra.insert(extra.end(), quench_fields.begin(), quench_fields.end());
        return extra;
    };
    if (kind == "spectroscopy") {
        return {{"flux_start", Kind::number}, {"flux_stop", Kind::number}, {"flux_points", Kind::integer, true}};
    }
    if (kind == "hold_sweep") {
        return {{"omega_i_GHz", Kind::positive},  {"omega_f_GHz", Kind::positive, true},
                {"taus_ns", Kind::positives, true}, {"hold_start_ns", Kind::nonnegative},
                {"hold_stop_ns", Kind::nonnegative}, {"hold_step_ns", Kind::positive},
                {"dt_ns", Kind::positive},          {"peak_threshold", Kind::positive}};
    }
    if (kind == "quench_emission") {
        return with_quench({{"omega_f_GHz", Kind::positive, true}, {"tau_r_ns", Kind::positive, true}});
    }
    if (kind == "phif_sweep") {
        return with_quench({{"omega_f_GHz", Kind::positives, true}, {"tau_r_ns", Kind::positive, true}});
    }
    if (kind == "taur_sweep") {
        return with_quench({{"omega_f_GHz", Kind::positive, true}, {"tau_r_ns", Kind::positives, true}});
    }
    if (kind == "lz") {
        return {{"omega_i_GHz", Kind::positive},
                {"omega_f_GHz", Kind::positive, true},
                {"delta_t_ns", Kind::positives, true},
                {"threshold", Kind::positive}};
    }
    if (kind == "fit") {
        return {{"data_csv", Kind::string},     {"flux_start", Kind::number},   {"flux_stop", Kind::number},
                {"flux_points", Kind::integer}, {"spread", Kind::nonnegative}, {"apbs_weight", Kind::positive},
                {"max_iterations", Kind::integer}};
    }
    return {};
}

void check_field(const json& params, const Field& f, std::vector<std::string>& errors) {
    const std::string path = std::string("/params/") + f.key;
    if (!params.contains(f.key)) {
        if (f.required) errors.push_back(path + ": missing");
        return;
    }
    const json& v = params.at(f.key);
    auto finite = [](const json& x) { return x.is_number() && std::isfinite(x.get<double>()); };
    switch (f.kind) {
    case Kind::number:
        if (!finite(v)) errors.push_back(path + ": expected a number");
        break;
    case Kind::positive:
        if (!finite(v) || v.get<double>() <= 0.0) errors.push_back(path + ": expected a number > 0");
        break;
    case Kind::nonnegative:
        if (!finite(v) || v.get<double>() < 0.0) errors.push_back(path + ": expected a number >= 0");
        break;
    case Kind::integer:
        if (!v.is_number_integer() || v.get<long long>() < 0) errors.push_back(path + ": expected an integer >= 0");
        break;
    case Kind::string:
        if (!v.is_string()) errors.push_back(path + ": expected a string");
        break;
    case Kind::boolean:
        if (!v.is_boolean()) errors.push_back(path + ": expected true or false");
        break;
    case Kind::numbers:
    case Kind::positives:
        if (!v.is_array()) {
            errors.push_back(path + ": expected an array");
            break;
        }
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (!finite(v[i]) || (f.kind == Kind::positives && v[i].get<double>() <= 0.0)) {
                errors.push_back(path + "/" + std::to_string(i) +
                                 (f.kind == Kind::positives ? ": expected a number > 0" : ": expected a number"));
            }
        }
        break;
    }
}

std::vector<double> as_list(const json& v) {
    if (v.is_array()) return v.get<std::vector<double>>();
    return {v.get<double>()};
}

// Emitter frequencies must lie on the tunable range of the model.
void check_physics(const json& params, const Model& model, std::vector<std::string>& errors) {
    const double lo = units::to_ghz(model.emitter.omega_min), hi = units::to_ghz(model.emitter.omega_max);
    for (const char* key : {"omega_i_GHz", "omega_f_GHz"}) {
        if (!params.contains(key)) continue;
        const json& v = params.at(key);
        if (!(v.is_number() || v.is_array())) continue;
        const auto values = as_list(v);
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (values[i] < lo - 1e-12 || values[i] > hi + 1e-12) {
                std::ostringstream os;
                os << "/params/" << key << (v.is_array() ? "/" + std::to_string(i) : "") << ": " << values[i]
                   << " GHz outside the tunable range [" << lo << ", " << hi << "] GHz";
                errors.push_back(os.str());
            }
        }
    }
    for (const char* key : {"flux_start", "flux_stop"}) {
        if (params.contains(key) && params.at(key).is_number()) {
            const double phi = params.at(key).get<double>();
            if (phi < 0.0 || phi > 0.5) errors.push_back(std::string("/params/") + key + ": flux outside [0, 0.5]");
        }
    }
    if (params.contains("prep") && params.at("prep").is_string()) {
        const auto p = params.at("prep").get<std::string>();
        if (p != "pi" && p != "pi/2") errors.push_back("/params/prep: expected \"pi\" or \"pi/2\"");
    }
    if (params.contains("hold_start_ns") && params.contains("hold_stop_ns") && params.at("hold_start_ns").is_number() &&
        params.at("hold_stop_ns").is_number() &&
        params.at("hold_stop_ns").get<double>() < params.at("hold_start_ns").get<double>()) {
        errors.push_back("/params/hold_stop_ns: below hold_start_ns");
    }
}

// --- output --------------------------------------------------------------

// Serializes every artifact write and records it for the manifest.
class Writer {
public:
    explicit Writer(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

    void write(const std::string& name, const std::string& bytes) {
        std::ofstream out(dir_ / name, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + (dir_ / name).string());
        out << bytes;
        out.close();
        files_.push_back({{"path", name}, {"sha256", sha256_hex(bytes)}, {"bytes", bytes.size()}});
    }

    void table(const std::string& name, const csv::Table& t) {
        std::ostringstream os;
        csv::write(os, t);
        write(name, os.str());
    }

    const fs::path& dir() const noexcept { return dir_; }
    const json& files() const noexcept { return files_; }

private:
    fs::path dir_;
    json files_ = json::array();
};

// Runs fn(i) for i in [0, n) on worker threads; results land by index.
template <class T, class F>
std::vector<T> parallel_map(std::size_t n, F fn) {
    std::vector<T> out(n);
    std::vector<std::exception_ptr> errors(n);
    const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(n, std::thread::hardware_concurrency()));
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (std::size_t i = w; i < n; i += workers) {
                try {
                    out[i] = fn(i);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return out;
}

double num(const json& p, const char* key, double fallback) { return p.contains(key) ? p.at(key).get<double>() : fallback; }

// --- experiment kinds -------------------------------------------------------

struct Context {
    const Scenario& scenario;
    const LoadedModel& loaded;
    Writer& writer;
    json results = json::object();
    json metadata = json::object();
};

std::vector<double> flux_grid(const json& p, double start, double stop, long long default_points) {
    const double a = num(p, "flux_start", start);
    const double b = num(p, "flux_stop", stop);
    const long long n = p.contains("flux_points") ? p.at("flux_points").get<long long>() : default_points;
    std::vector<double> grid;
    for (long long i = 0; i < n; ++i) grid.push_back(n == 1 ? a : a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1));
    return grid;
}

void run_spectroscopy(Context& c) {
    const Model& m = c.loaded.model;
    const auto grid = flux_grid(c.scenario.params, 0.5, 0.0, 0);
    if (grid.empty()) return;
    const auto data = synthesize_spectroscopy(m, grid);
    std::ostringstream os;
    write_spectroscopy_csv(os, data);
    c.writer.write("spectroscopy.csv", os.str());

    const auto curve = apbs_flux_curve(m, grid);
    const FluxMap map = m.flux_map();
    csv::Table t;
    t.header = {"flux", "bare_GHz", "apbs_GHz", "photonic_weight"};
    double max_apbs = -1.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        t.rows.push_back({grid[i], units::to_ghz(map.frequency(grid[i])), units::to_ghz(data.apbs_curve[i]),
                          curve[i].photonic_weight});
        max_apbs = std::max(max_apbs, units::to_ghz(data.apbs_curve[i]));
    }
    c.writer.table("apbs.csv", t);
    c.results["max_apbs_GHz"] = max_apbs;
    c.results["branches"] = data.branch_count() + 1;
}

void run_hold_sweep(Context& c) {
    const json& p = c.scenario.params;
    const Model& m = c.loaded.model;
    const FluxMap map = m.flux_map();
    const double phi_i = map.flux_for(units::from_ghz(num(p, "omega_i_GHz", default_omega_i_ghz)));
    const double omega_f = units::from_ghz(p.at("omega_f_GHz").get<double>());
    const double phi_f = map.flux_for(omega_f);
    const auto taus = p.at("taus_ns").get<std::vector<double>>();
    if (taus.empty()) return;

    std::vector<double> holds;
    const double h0 = num(p, "hold_start_ns", 0.0), h1 = num(p, "hold_stop_ns", 400.0), hs = num(p, "hold_step_ns", 1.0);
    for (long long i = 0;; ++i) {
        const double h = h0 + static_cast<double>(i) * hs;
        if (h > h1 + 1e-9) break;
        holds.push_back(h);
    }
    PropagationOptions opt;
    opt.dt = num(p, "dt_ns", 0.01);
    const double threshold = num(p, "peak_threshold", 0.2);

    const auto sweeps = parallel_map<std::vector<double>>(taus.size(), [&](std::size_t k) {
        return hold_time_sweep(m, TrapezoidPulse{phi_i, phi_f, taus[k], 0.0, taus[k], true}, holds, opt);
    });

    // Dressed-eigenvalue differences at Φ_f.
    const Spectrum s = diagonalize(m.hamiltonian(omega_f));
    std::vector<double> diffs;
    for (Eigen::Index a = 0; a < s.values.size(); ++a) {
        for (Eigen::Index b = a + 1; b < s.values.size(); ++b) diffs.push_back(units::to_mhz(s.values(b) - s.values(a)));
    }
    std::sort(diffs.begin(), diffs.end());

    csv::Table pop, fft;
    pop.header = {"hold_ns"};
    fft.header = {"freq_MHz"};
    for (double tau : taus) {
        std::ostringstream name;
        name << "tau_" << tau << "ns";
        pop.header.push_back("p1_" + name.str());
        fft.header.push_back("mag_" + name.str());
    }
    for (std::size_t i = 0; i < holds.size(); ++i) {
        std::vector<double> row{holds[i]};
        for (const auto& sw : sweeps) row.push_back(sw[i]);
        pop.rows.push_back(std::move(row));
    }
    json per_tau = json::array();
    std::vector<PopulationSpectrum> spectra;
    for (std::size_t k = 0; k < taus.size(); ++k) {
        const auto& sw = sweeps[k];
        const double mean = std::accumulate(sw.begin(), sw.end(), 0.0) / static_cast<double>(sw.size());
        double var = 0.0;
        for (double x : sw) var += (x - mean) * (x - mean);
        json entry = {{"tau_ns", taus[k]},
                      {"mean_p1", mean},
                      {"std_p1", std::sqrt(var / static_cast<double>(sw.size()))},
                      {"min_p1", *std::min_element(sw.begin(), sw.end())}};
        if (holds.size() >= 8) {
            spectra.push_back(population_fft(holds, sw));
            const auto& sp = spectra.back();
            json peaks = json::array();
            for (std::size_t idx : dsp::find_peaks(sp.magnitudes, threshold, 1, true)) {
                double nearest = std::numeric_limits<double>::infinity();
                for (double d : diffs) nearest = std::min(nearest, std::abs(d - sp.freqs_mhz[idx]));
                peaks.push_back({{"freq_MHz", sp.freqs_mhz[idx]}, {"magnitude", sp.magnitudes[idx]},
                                 {"nearest_difference_bins", nearest / sp.bin_mhz}});
            }
            entry["fft_peaks"] = peaks;
            entry["fft_bin_MHz"] = sp.bin_mhz;
        }
        per_tau.push_back(entry);
    }
    if (!spectra.empty()) {
        for (std::size_t i = 0; i < spectra.front().freqs_mhz.size(); ++i) {
            std::vector<double> row{spectra.front().freqs_mhz[i]};
            for (const auto& sp : spectra) row.push_back(sp.magnitudes[i]);
            fft.rows.push_back(std::move(row));
        }
    }
    c.writer.table("population.csv", pop);
    if (!spectra.empty()) c.writer.table("population_fft.csv", fft);
    csv::Table dt;
    dt.header = {"difference_MHz"};
    for (double d : diffs) dt.rows.push_back({d});
    c.writer.table("dressed_differences.csv", dt);
    c.results["sweeps"] = per_tau;
    c.metadata["phi_i"] = phi_i;
    c.metadata["phi_f"] = phi_f;
}

struct QuenchSetup {
    double phi_i = 0.0;
    double tau_hold = 40.0;
    double tau_q = 1.0;
    QuenchOptions options;
};

QuenchSetup quench_setup(const json& p, const Model& m) {
    QuenchSetup q;
    const FluxMap map = m.flux_map();
    q.phi_i = map.flux_for(units::from_ghz(num(p, "omega_i_GHz", default_omega_i_ghz)));
    q.tau_hold = num(p, "tau_hold_ns", 40.0);
    q.tau_q = num(p, "tau_q_ns", 1.0);
    const std::string prep = p.value("prep", std::string("pi/2"));
    q.options.prep_amplitude = prep == "pi" ? 1.0 : std::sqrt(0.5);
    q.options.record_window = num(p, "record_window_ns", 20000.0);
    q.options.record_dt = num(p, "record_dt_ns", 1.0);
    q.options.dt = num(p, "dt_ns", 0.01);
    q.options.band.center_ghz = num(p, "band_center_GHz", 5.0);
    q.options.band.width_ghz = num(p, "band_width_GHz", 1.0);
    q.options.peak_threshold = num(p, "peak_threshold", 0.05);
    return q;
}

QuenchEmissionResult run_quench(const Model& m, const QuenchSetup& q, double omega_f_ghz, double tau_r) {
    const double phi_f = m.flux_map().flux_for(units::from_ghz(omega_f_ghz));
    const TrapezoidPulse prep{q.phi_i, phi_f, tau_r, q.tau_hold, 0.0, false};
    const TrapezoidPulse quench{phi_f, q.phi_i, q.tau_q, 0.0, 0.0, false};
    return quench_emission_scenario(m, prep, quench, q.options);
}

void run_quench_emission(Context& c) {
    const json& p = c.scenario.params;
    const auto setup = quench_setup(p, c.loaded.model);
    const auto r = run_quench(c.loaded.model, setup, p.at("omega_f_GHz").get<double>(), p.at("tau_r_ns").get<double>());

    std::ostringstream trace;
    write_trace_csv(trace, r.trace);
    c.writer.write("trace.csv", trace.str());
    csv::Table spec;
    spec.header = {"freq_GHz", "magnitude"};
    for (std::size_t i = 0; i < r.spectrum.freqs_ghz.size(); ++i) spec.rows.push_back({r.spectrum.freqs_ghz[i], r.spectrum.magnitudes[i]});
    c.writer.table("spectrum.csv", spec);
    csv::Table peaks;
    peaks.header = {"freq_GHz", "magnitude"};
    for (const auto& pk : r.spectrum.peaks) peaks.rows.push_back({pk.freq_ghz, pk.magnitude});
    c.writer.table("peaks.csv", peaks);
    std::ostringstream modes;
    write_mode_table_csv(modes, r.modes);
    c.writer.write("modes.csv", modes.str());

    json mode_json = json::array();
    for (const auto& md : r.modes) {
        mode_json.push_back({{"mode", md.mode_index},
                             {"freq_GHz", md.peak_freq_ghz},
                             {"tau_ns", md.tau_fit},
                             {"kappa_MHz", units::to_mhz(md.kappa)},
                             {"kappa_2pi_over_tau_MHz", md.tau_fit > 0.0 ? 1e3 / md.tau_fit : 0.0},
                             {"photons", md.photons},
                             {"detected", md.detected},
                             {"low_quality", md.low_quality}});
    }
    c.results = {{"total_photons", r.total_photons},
                 {"photonic_weight_prepared", r.photonic_weight_prepared},
                 {"photonic_weight_quenched", r.photonic_weight_quenched},
                 {"excitation", r.excitation},
                 {"fft_peaks", r.spectrum.peaks.size()},
                 {"fft_bin_GHz", r.spectrum.bin_ghz},
                 {"modes", mode_json}};
    c.metadata["envelope_convention"] = "fits use |envelope| of the field amplitude; kappa = 2/tau";
}

void run_photon_sweep(Context& c, bool over_phi_f) {
    const json& p = c.scenario.params;
    const Model& m = c.loaded.model;
    const auto setup = quench_setup(p, m);
    const auto grid = over_phi_f ? p.at("omega_f_GHz").get<std::vector<double>>() : p.at("tau_r_ns").get<std::vector<double>>();
    if (grid.empty()) return;
    const auto runs = parallel_map<QuenchEmissionResult>(grid.size(), [&](std::size_t i) {
        return over_phi_f ? run_quench(m, setup, grid[i], p.at("tau_r_ns").get<double>())
                          : run_quench(m, setup, p.at("omega_f_GHz").get<double>(), grid[i]);
    });

    csv::Table raw;
    raw.header = {over_phi_f ? "omega_f_GHz" : "tau_r_ns", "total", "photonic_weight_quenched"};
    const std::size_t n_modes = runs.front().modes.size();
    for (std::size_t k = 0; k < n_modes; ++k) raw.header.push_back("m" + std::to_string(runs.front().modes[k].mode_index));
    double max_total = 0.0;
    json totals = json::array(), shares = json::array(), m1 = json::array(), dominant = json::array();
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const auto& r = runs[i];
        std::vector<double> row{grid[i], r.total_photons, r.photonic_weight_quenched * r.excitation};
        std::size_t best = 0;
        for (std::size_t k = 0; k < n_modes; ++k) {
            row.push_back(r.modes[k].photons);
            if (r.modes[k].photons > r.modes[best].photons) best = k;
        }
        raw.rows.push_back(std::move(row));
        max_total = std::max(max_total, r.total_photons);
        totals.push_back(r.total_photons);
        const double first = n_modes ? r.modes[0].photons : 0.0;
        m1.push_back(first);
        shares.push_back(r.total_photons > 0.0 ? 1.0 - first / r.total_photons : 0.0);
        dominant.push_back(n_modes ? r.modes[best].mode_index : 0);
    }
    c.writer.table("photons.csv", raw);
    if (max_total > 0.0) {
        csv::Table scaled = raw;
        const double s = 0.5 / max_total;
        for (auto& row : scaled.rows) {
            for (std::size_t k = 1; k < row.size(); ++k) row[k] *= s;
        }
        c.writer.table("photons_normalized.csv", scaled);
        c.metadata["normalization"] = "photons_normalized.csv is scaled so the largest total equals 0.5 photons";
        c.metadata["normalization_factor"] = s;
    }
    c.results = {{"grid", grid}, {"total", totals}, {"mode1", m1}, {"higher_mode_share", shares}, {"dominant_mode", dominant}};
}

void run_lz(Context& c) {
    const json& p = c.scenario.params;
    const Model& m = c.loaded.model;
    if (m.form() != ModelForm::effective) throw ModelFormError("lz: needs the effective model form");
    const double e_i = units::from_ghz(num(p, "omega_i_GHz", default_omega_i_ghz));
    const double e_f = units::from_ghz(p.at("omega_f_GHz").get<double>());
    const double delta_e = std::abs(e_f - e_i);
    const double threshold = num(p, "threshold", 0.05);
    const auto times = p.at("delta_t_ns").get<std::vector<double>>();
    csv::Table t;
    t.header = {"mode", "g_MHz", "delta_t_ns", "gamma", "p_lz", "adiabatic_time_ns"};
    for (std::size_t n = 0; n < m.emitter.g_modes.size(); ++n) {
        for (double dt : times) {
            const auto e = lz_estimate(m.emitter.g_modes[n], delta_e, dt, threshold);
            t.rows.push_back({static_cast<double>(n + 1), units::to_mhz(m.emitter.g_modes[n]), dt, e.gamma, e.p_lz,
                              e.adiabatic_time});
        }
    }
    if (!times.empty()) c.writer.table("lz.csv", t);
    // Coarse single-mode figure: the band-edge mode that hosts the APBS.
    if (!m.emitter.g_modes.empty()) {
        const auto e = lz_estimate(m.emitter.g_modes[0], delta_e, 1.0, threshold);
        c.results["band_edge_mode_adiabatic_time_ns"] = e.adiabatic_time;
    }
    c.results["delta_E_GHz"] = units::to_ghz(delta_e);
    c.results["threshold"] = threshold;
}

void run_fit(Context& c) {
    const json& p = c.scenario.params;
    const Model& truth = c.loaded.model;
    if (truth.form() != ModelForm::effective) throw ModelFormError("fit: needs the effective model form");
    SpectroscopyDataset data;
    bool synthesized = false;
    if (p.contains("data_csv")) {
        fs::path path = p.at("data_csv").get<std::string>();
        if (path.is_relative()) path = c.scenario.model_file.parent_path() / path;
        data = read_spectroscopy_csv(path);
    } else {
        const auto grid = flux_grid(p, 0.5, 0.0, 1001);
        if (grid.empty()) return;
        data = synthesize_spectroscopy(truth, grid);
        synthesized = true;
        std::ostringstream os;
        write_spectroscopy_csv(os, data);
        c.writer.write("spectroscopy.csv", os.str());
    }
    const auto peaks = measured_mode_peaks(data, truth);
    const Model guess = perturbed_guess(truth, peaks, num(p, "spread", 0.2), c.scenario.seed);
    FitOptions opt;
    opt.apbs_weight = num(p, "apbs_weight", 3.0);
    if (p.contains("max_iterations")) opt.max_iterations = p.at("max_iterations").get<int>();

    FitResult r;
    try {
        r = fit_effective_model(data, guess, opt);
    } catch (const FitError& e) {
        c.writer.write("fit.json", e.best().to_json().dump(2) + "\n");
        throw;
    }
    json out = r.to_json();
    std::vector<double> g0;
    for (double g : guess.emitter.g_modes) g0.push_back(units::to_mhz(g));
    out["initial_g_MHz"] = g0;
    if (synthesized) {
        double g_err = 0.0, f_err = 0.0;
        for (std::size_t n = 0; n < r.g_modes.size(); ++n) {
            if (truth.emitter.g_modes[n] > 0.0) {
                g_err = std::max(g_err, std::abs(r.g_modes[n] / truth.emitter.g_modes[n] - 1.0));
            }
            f_err = std::max(f_err, std::abs(units::to_mhz(r.mode_freqs[n] - truth.lattice.mode_freqs[n])));
        }
        out["max_relative_g_error"] = g_err;
        out["max_freq_error_MHz"] = f_err;
    }
    c.writer.write("fit.json", out.dump(2) + "\n");
    c.results = out;
}

} // namespace

const std::vector<std::string>& scenario_kinds() {
    static const std::vector<std::string> kinds = {"spectroscopy", "hold_sweep", "quench_emission", "phif_sweep",
                                                   "taur_sweep",   "lz",         "fit"};
    return kinds;
}

ValidationReport validate_scenario_json(const json& doc, const fs::path& base_dir) {
    ValidationReport report;
    auto& errors = report.errors;
    if (!doc.is_object()) {
        errors.push_back(": scenario must be a JSON object");
        return report;
    }
    if (!doc.contains("schema_version") || !doc["schema_version"].is_number_integer()) {
        errors.push_back("/schema_version: missing or not an integer");
    } else if (doc["schema_version"].get<int>() != scenario_schema_version) {
        errors.push_back("/schema_version: unsupported version " + std::to_string(doc["schema_version"].get<int>()));
    }
    if (!doc.contains("name") || !doc["name"].is_string() || doc["name"].get<std::string>().empty()) {
        errors.push_back("/name: missing or empty");
    }
    std::string kind;
    if (!doc.contains("kind") || !doc["kind"].is_string()) {
        errors.push_back("/kind: missing");
    } else {
        kind = doc["kind"].get<std::string>();
        const auto& kinds = scenario_kinds();
        if (std::find(kinds.begin(), kinds.end(), kind) == kinds.end()) {
            errors.push_back("/kind: unknown experiment kind \"" + kind + "\"");
            kind.clear();
        }
    }
    if (doc.contains("seed") && !(doc["seed"].is_number_integer() && doc["seed"].get<long long>() >= 0)) {
        errors.push_back("/seed: expected a non-negative integer");
    }
    if (doc.contains("output_dir") && !doc["output_dir"].is_string()) errors.push_back("/output_dir: expected a string");
    ModelForm form = ModelForm::effective;
    if (doc.contains("form")) {
        try {
            form = parse_form(doc["form"].get<std::string>());
        } catch (const std::exception& e) {
            errors.push_back(std::string("/form: ") + e.what());
        }
    }
    const json params = doc.contains("params") ? doc["params"] : json::object();
    if (!params.is_object()) errors.push_back("/params: expected an object");

    std::optional<Model> model;
    if (!doc.contains("model") || !doc["model"].is_string()) {
        errors.push_back("/model: missing model file path");
    } else {
        const fs::path path = base_dir / doc["model"].get<std::string>();
        if (!fs::exists(path)) {
            errors.push_back("/model: file not found: " + path.string());
        } else {
            try {
                const json mdoc = read_json_file(path);
                const auto sub = validate_model_json(mdoc);
                for (const auto& e : sub.errors) errors.push_back("/model -> " + e);
                for (const auto& w : sub.warnings) report.warnings.push_back("/model -> " + w);
                if (sub.ok()) model = model_from_json(mdoc, form).model;
            } catch (const std::exception& e) {
                errors.push_back(std::string("/model: ") + e.what());
            }
        }
    }
    if (!kind.empty() && params.is_object()) {
        const auto fields = fields_for(kind);
        for (const auto& f : fields) check_field(params, f, errors);
        for (const auto& [key, value] : params.items()) {
            const bool known = std::any_of(fields.begin(), fields.end(), [&](const Field& f) { return key == f.key; });
            if (!known) report.warnings.push_back("/params/" + key + ": unknown key ignored");
        }
        if (model) check_physics(params, *model, errors);
    }
    return report;
}

Scenario scenario_from_json(const json& doc, const fs::path& base_dir) {
    const auto report = validate_scenario_json(doc, base_dir);
    if (!report.ok()) throw SpecError(report.errors.front());
    Scenario s;
    s.name = doc["name"].get<std::string>();
    s.kind = doc["kind"].get<std::string>();
    s.model_file = base_dir / doc["model"].get<std::string>();
    s.form = doc.contains("form") ? parse_form(doc["form"].get<std::string>()) : ModelForm::effective;
    s.output_dir = doc.value("output_dir", s.name);
    s.seed = doc.value("seed", std::uint64_t{0});
    s.params = doc.contains("params") ? doc["params"] : json::object();
    return s;
}

Scenario load_scenario(const fs::path& path) {
    return scenario_from_json(read_json_file(path), path.parent_path());
}

fs::path output_root() {
    if (const char* env = std::getenv("APBS_OUTPUT_ROOT"); env && *env) return env;
    return "apbs_out";
}

RunOutcome run_scenario(const Scenario& scenario, const fs::path& root) {
    RunOutcome outcome;
    const fs::path dir = scenario.output_dir.is_absolute() ? scenario.output_dir : root / scenario.output_dir;
    const LoadedModel loaded = load_model(scenario.model_file, scenario.form);
    Writer writer(dir);
    Context ctx{scenario, loaded, writer};

    json manifest;
    manifest["schema_version"] = scenario_schema_version;
    manifest["scenario"] = scenario.name;
    manifest["kind"] = scenario.kind;
    manifest["seed"] = scenario.seed;
    manifest["model_file"] = scenario.model_file.filename().string();
    manifest["model"] = model_to_json(loaded);
    manifest["parameters"] = scenario.params;
    manifest["units"] = {{"frequency", "GHz"}, {"rates", "MHz"}, {"time", "ns"}};

    try {
        if (scenario.kind == "spectroscopy") run_spectroscopy(ctx);
        else if (scenario.kind == "hold_sweep") run_hold_sweep(ctx);
        else if (scenario.kind == "quench_emission") run_quench_emission(ctx);
        else if (scenario.kind == "phif_sweep") run_photon_sweep(ctx, true);
        else if (scenario.kind == "taur_sweep") run_photon_sweep(ctx, false);
        else if (scenario.kind == "lz") run_lz(ctx);
        else if (scenario.kind == "fit") run_fit(ctx);
        else throw SpecError("unknown experiment kind \"" + scenario.kind + "\"");
        manifest["status"] = "complete";
    } catch (const StageError& e) {
        manifest["status"] = "incomplete";
        manifest["error"] = {{"module", scenario.kind}, {"stage", e.stage()}, {"message", e.what()}};
        outcome.code = ExitCode::runtime;
        outcome.message = scenario.kind + "/" + e.stage() + ": " + e.what();
    } catch (const std::exception& e) {
        manifest["status"] = "incomplete";
        manifest["error"] = {{"module", scenario.kind}, {"stage", "run"}, {"message", e.what()}};
        outcome.code = ExitCode::runtime;
        outcome.message = scenario.kind + ": " + e.what();
    }
    manifest["results"] = ctx.results;
    manifest["metadata"] = ctx.metadata;
    manifest["files"] = writer.files();

    std::ofstream out(dir / "manifest.json");
    out << manifest.dump(2) << '\n';
    outcome.manifest = dir / "manifest.json";
    outcome.results = ctx.results;
    return outcome;
}

ValidationReport validate_config(const fs::path& path) {
    const json doc = read_json_file(path);
    if (doc.is_object() && doc.contains("kind")) return validate_scenario_json(doc, path.parent_path());
    return validate_model_json(doc);
}

std::string sha256_hex(const std::string& bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw NumericError("sha256 failed");
    }
    std::ostringstream os;
    os << std::hex << std::setfill('0');
    for (unsigned int i = 0; i < len; ++i) os << std::setw(2) << static_cast<int>(digest[i]);
    return os.str();
}

} // namespace apbs
