#include "apbs/model_io.hpp"

#include "apbs/emission.hpp"
#include "apbs/errors.hpp"
#include "apbs/units.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace apbs {

namespace {

// Reader that records violations as "<path>: message".
struct Reader {
    std::vector<std::string>* errors;

    void fail(const std::string& path, const std::string& msg) const { errors->push_back(path + ": " + msg); }

    std::optional<double> number(const json& obj, const std::string& base, const char* key, bool required) const {
        const std::string path = base + "/" + key;
        if (!obj.contains(key)) {
            if (required) fail(path, "missing");
            return std::nullopt;
        }
        const auto& v = obj.at(key);
        if (!v.is_number()) {
            fail(path, "expected a number");
            return std::nullopt;
        }
        const double x = v.get<double>();
        if (!std::isfinite(x)) {
            fail(path, "not finite");
            return std::nullopt;
        }
        return x;
    }

    std::vector<double> numbers(const json& obj, const std::string& base, const char* key, bool required) const {
        const std::string path = base + "/" + key;
        std::vector<double> out;
        if (!obj.contains(key)) {
            if (required) fail(path, "missing");
            return out;
        }
        const auto& v = obj.at(key);
        if (!v.is_array()) {
            fail(path, "expected an array of numbers");
            return out;
        }
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (!v[i].is_number()) {
                fail(path + "/" + std::to_string(i), "expected a number");
                continue;
            }
            out.push_back(v[i].get<double>());
        }
        return out;
    }
};

struct Parsed {
    std::string name;
    EmitterSpec emitter;
    std::optional<LatticeSpec> tb;
    std::optional<LatticeSpec> eff;
    std::optional<TlsSpec> tls;
    double emitter_decay = 0.0;
    bool kappas_from_tb = false;
};

Parsed parse(const json& doc, std::vector<std::string>& errors, std::vector<std::string>& warnings) {
    Reader r{&errors};
    Parsed p;
    if (!doc.is_object()) {
        r.fail("", "model file must be a JSON object");
        return p;
    }
    if (!doc.contains("schema_version") || !doc["schema_version"].is_number_integer()) {
        r.fail("/schema_version", "missing or not an integer");
    } else if (doc["schema_version"].get<int>() != model_schema_version) {
        r.fail("/schema_version", "unsupported version " + std::to_string(doc["schema_version"].get<int>()));
    }
    p.name = doc.value("name", std::string{});

    if (!doc.contains("emitter") || !doc["emitter"].is_object()) {
        r.fail("/emitter", "missing block");
        return p;
    }
    const json& e = doc["emitter"];
    const auto wmax = r.number(e, "/emitter", "omega_max_GHz", true);
    const auto wmin = r.number(e, "/emitter", "omega_min_GHz", true);
    const auto ec = r.number(e, "/emitter", "E_C_MHz", true);
    if (wmax) p.emitter.omega_max = units::from_ghz(*wmax);
    if (wmin) p.emitter.omega_min = units::from_ghz(*wmin);
    if (ec) p.emitter.e_c = units::from_mhz(*ec);
    if (wmax && wmin && !(*wmin > 0.0 && *wmin < *wmax)) {
        r.fail("/emitter/omega_min_GHz", "need 0 < omega_min_GHz < omega_max_GHz");
    }
    if (ec && *ec < 0.0) r.fail("/emitter/E_C_MHz", "must be >= 0");
    if (const auto t1 = r.number(e, "/emitter", "T1_us", false)) {
        if (*t1 <= 0.0) r.fail("/emitter/T1_us", "must be > 0");
        else p.emitter_decay = 1.0 / (*t1 * 1e3);
    }

    const bool has_tb = doc.contains("tight_binding");
    const bool has_eff = doc.contains("effective");
    if (!has_tb && !has_eff) r.fail("", "need a tight_binding or effective block");

    if (has_tb) {
        const json& t = doc["tight_binding"];
        const std::string base = "/tight_binding";
        LatticeSpec lat;
        if (!t.contains("n_sites") || !t["n_sites"].is_number_integer() || t["n_sites"].get<int>() < 1) {
            r.fail(base + "/n_sites", "missing or not an integer >= 1");
        } else {
            lat.n_sites = t["n_sites"].get<int>();
        }
        if (const auto w = r.number(t, base, "omega_r_GHz", true)) {
            if (*w <= 0.0) r.fail(base + "/omega_r_GHz", "must be > 0");
            lat.omega_r = units::from_ghz(*w);
        }
        if (const auto j = r.number(t, base, "J_MHz", true)) lat.j_nn = units::from_mhz(*j);
        if (const auto j = r.number(t, base, "J_nnn_MHz", false)) lat.j_nnn = units::from_mhz(*j);
        for (const char* key : {"kappa_in_MHz", "kappa_out_MHz"}) {
            if (const auto k = r.number(t, base, key, false)) {
                if (*k < 0.0) r.fail(base + "/" + key, "must be >= 0");
                (std::string(key) == "kappa_in_MHz" ? lat.kappa_in : lat.kappa_out) = units::from_mhz(*k);
            }
        }
        // kappa_r: total decay of the central chain mode; fixes κ_in = κ_out.
        if (const auto k = r.number(t, base, "kappa_r_MHz", false)) {
            if (t.contains("kappa_in_MHz") || t.contains("kappa_out_MHz")) {
                r.fail(base + "/kappa_r_MHz", "give either kappa_r_MHz or kappa_in_MHz/kappa_out_MHz");
            } else if (*k < 0.0) {
                r.fail(base + "/kappa_r_MHz", "must be >= 0");
            } else if (lat.n_sites >= 1 && lat.omega_r) {
                lat.kappa_in = lat.kappa_out = calibrate_port_rate(lat, units::from_mhz(*k));
            }
        }
        if (!t.contains("coupling_site") || !t["coupling_site"].is_number_integer()) {
            r.fail(base + "/coupling_site", "missing or not an integer");
        } else {
            p.emitter.coupling_site = t["coupling_site"].get<int>();
            if (p.emitter.coupling_site < 1 || p.emitter.coupling_site > lat.n_sites) {
                r.fail(base + "/coupling_site", "outside [1, n_sites]");
            }
        }
        if (const auto g = r.number(t, base, "g_MHz", true)) {
            if (*g < 0.0) r.fail(base + "/g_MHz", "must be >= 0");
            p.emitter.g_site = units::from_mhz(*g);
        }
        p.tb = lat;
    }

    if (has_eff) {
        const json& f = doc["effective"];
        const std::string base = "/effective";
        LatticeSpec lat;
        const auto freqs = r.numbers(f, base, "mode_freqs_GHz", true);
        for (std::size_t i = 0; i < freqs.size(); ++i) {
            if (freqs[i] <= 0.0) r.fail(base + "/mode_freqs_GHz/" + std::to_string(i), "must be > 0");
            if (i > 0 && !(freqs[i] > freqs[i - 1])) {
                r.fail(base + "/mode_freqs_GHz/" + std::to_string(i), "mode_freqs not strictly increasing");
            }
            if (i > 0 && std::abs(freqs[i] - freqs[i - 1]) < 1e-6) {
                warnings.push_back(base + "/mode_freqs_GHz/" + std::to_string(i) + ": within 1 kHz of the previous mode");
            }
            lat.mode_freqs.push_back(units::from_ghz(freqs[i]));
        }
        lat.n_sites = static_cast<int>(freqs.size());
        const auto g = r.numbers(f, base, "g_MHz", true);
        if (g.size() != freqs.size()) {
            r.fail(base + "/g_MHz", "length " + std::to_string(g.size()) + " does not match " +
                                        std::to_string(freqs.size()) + " modes");
        }
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (g[i] < 0.0) r.fail(base + "/g_MHz/" + std::to_string(i), "must be >= 0");
            p.emitter.g_modes.push_back(units::from_mhz(g[i]));
        }
        if (f.contains("mode_kappas_MHz")) {
            if (f["mode_kappas_MHz"].is_string()) {
                if (f["mode_kappas_MHz"].get<std::string>() != "tight_binding") {
                    r.fail(base + "/mode_kappas_MHz", "string value must be \"tight_binding\"");
                } else if (!has_tb) {
                    r.fail(base + "/mode_kappas_MHz", "derivation needs a tight_binding block");
                } else {
                    p.kappas_from_tb = true;
                }
            } else {
                const auto k = r.numbers(f, base, "mode_kappas_MHz", true);
                if (k.size() != freqs.size()) r.fail(base + "/mode_kappas_MHz", "length does not match mode_freqs_GHz");
                for (std::size_t i = 0; i < k.size(); ++i) {
                    if (k[i] < 0.0) r.fail(base + "/mode_kappas_MHz/" + std::to_string(i), "must be >= 0");
                    lat.mode_kappas.push_back(units::from_mhz(k[i]));
                }
            }
        }
        if (f.contains("output_fraction")) {
            if (f["output_fraction"].is_number()) {
                const double w = f["output_fraction"].get<double>();
                if (w < 0.0 || w > 1.0) r.fail(base + "/output_fraction", "must lie in [0, 1]");
                lat.output_fraction.assign(freqs.size(), w);
            } else {
                lat.output_fraction = r.numbers(f, base, "output_fraction", true);
                if (lat.output_fraction.size() != freqs.size()) {
                    r.fail(base + "/output_fraction", "length does not match mode_freqs_GHz");
                }
            }
        }
        if (f.contains("port_model")) {
            const auto& pm = f["port_model"];
            if (!pm.is_string() || (pm != "collective" && pm != "independent")) {
                r.fail(base + "/port_model", "expected \"collective\" or \"independent\"");
            } else {
                lat.collective_ports = pm == "collective";
            }
        }
        p.eff = lat;

        if (f.contains("tls")) {
            const json& t = f["tls"];
            TlsSpec tls;
            if (const auto v = r.number(t, base + "/tls", "freq_GHz", true)) tls.freq = units::from_ghz(*v);
            if (const auto v = r.number(t, base + "/tls", "g_MHz", true)) {
                if (*v < 0.0) r.fail(base + "/tls/g_MHz", "must be >= 0");
                tls.g_tls = units::from_mhz(*v);
            }
            p.tls = tls;
        }
    }

    // Derived effective κ_n: open-chain port rates of the lowest modes.
    if (p.kappas_from_tb && p.tb && p.eff && errors.empty()) {
        const auto rates = tight_binding_port_rates(*p.tb);
        if (rates.kappa_total.size() < p.eff->mode_freqs.size()) {
            r.fail("/effective/mode_kappas_MHz", "more effective modes than tight-binding sites");
        } else {
            p.eff->mode_kappas.assign(rates.kappa_total.begin(),
                                      rates.kappa_total.begin() + static_cast<std::ptrdiff_t>(p.eff->mode_freqs.size()));
        }
    }
    return p;
}

} // namespace

ModelForm parse_form(const std::string& name) {
    if (name == "tight_binding") return ModelForm::tight_binding;
    if (name == "effective") return ModelForm::effective;
    throw SpecError("unknown model form \"" + name + "\" (expected tight_binding or effective)");
}

ValidationReport validate_model_json(const json& doc) {
    ValidationReport report;
    const Parsed p = parse(doc, report.errors, report.warnings);
    if (!report.ok()) return report;
    auto check = [&](const std::optional<LatticeSpec>& lat, const std::optional<TlsSpec>& tls) {
        if (!lat) return;
        try {
            const auto w = validate(*lat, p.emitter, tls);
            report.warnings.insert(report.warnings.end(), w.messages.begin(), w.messages.end());
        } catch (const Error& e) {
            report.errors.emplace_back(e.what());
        }
    };
    check(p.tb, std::nullopt);
    check(p.eff, p.tls);
    return report;
}

LoadedModel model_from_json(const json& doc, ModelForm form) {
    std::vector<std::string> errors, warnings;
    Parsed p = parse(doc, errors, warnings);
    if (!errors.empty()) throw SpecError(errors.front());
    LoadedModel out;
    out.name = p.name;
    out.emitter_decay = p.emitter_decay;
    out.model.emitter = p.emitter;
    if (form == ModelForm::tight_binding) {
        if (!p.tb) throw ModelFormError("model file has no tight_binding block");
        out.model.lattice = *p.tb;
    } else {
        if (!p.eff) throw ModelFormError("model file has no effective block");
        out.model.lattice = *p.eff;
        out.model.tls = p.tls;
    }
    out.warnings = validate(out.model.lattice, out.model.emitter, out.model.tls);
    out.warnings.messages.insert(out.warnings.messages.begin(), warnings.begin(), warnings.end());
    return out;
}

json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw SpecError(path.string() + ": " + e.what());
    }
}

LoadedModel load_model(const std::filesystem::path& path, ModelForm form) {
    return model_from_json(read_json_file(path), form);
}

json model_to_json(const LoadedModel& loaded) {
    const Model& m = loaded.model;
    json j;
    j["name"] = loaded.name;
    j["form"] = to_string(m.form());
    j["emitter"] = {{"omega_max_GHz", units::to_ghz(m.emitter.omega_max)},
                    {"omega_min_GHz", units::to_ghz(m.emitter.omega_min)},
                    {"E_C_MHz", units::to_mhz(m.emitter.e_c)}};
    if (m.form() == ModelForm::tight_binding) {
        j["tight_binding"] = {{"n_sites", m.lattice.n_sites},
                              {"omega_r_GHz", units::to_ghz(*m.lattice.omega_r)},
                              {"J_MHz", units::to_mhz(m.lattice.j_nn)},
                              {"J_nnn_MHz", units::to_mhz(m.lattice.j_nnn)},
                              {"kappa_in_MHz", units::to_mhz(m.lattice.kappa_in)},
                              {"kappa_out_MHz", units::to_mhz(m.lattice.kappa_out)},
                              {"coupling_site", m.emitter.coupling_site},
                              {"g_MHz", units::to_mhz(m.emitter.g_site)}};
    } else {
        json eff;
        std::vector<double> f, g, k;
        for (double v : m.lattice.mode_freqs) f.push_back(units::to_ghz(v));
        for (double v : m.emitter.g_modes) g.push_back(units::to_mhz(v));
        for (double v : m.lattice.mode_kappas) k.push_back(units::to_mhz(v));
        eff["mode_freqs_GHz"] = f;
        eff["g_MHz"] = g;
        eff["mode_kappas_MHz"] = k;
        eff["output_fraction"] = output_share(m.lattice);
        eff["port_model"] = m.lattice.collective_ports ? "collective" : "independent";
        if (m.tls) eff["tls"] = {{"freq_GHz", units::to_ghz(m.tls->freq)}, {"g_MHz", units::to_mhz(m.tls->g_tls)}};
        j["effective"] = eff;
    }
    return j;
}

} // namespace apbs
