#pragma once

#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "dynstiff/control.hpp"
#include "dynstiff/identify.hpp"
#include "dynstiff/sim.hpp"
#include "dynstiff/stats.hpp"
#include "dynstiff/types.hpp"
#include "dynstiff/version.hpp"

namespace dynstiff::io {

using json = nlohmann::json;

/// Shortest text form that round-trips a double exactly.
inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// ---------------------------------------------------------------------
// time-series CSV: header "t,tau_c,theta_e", %.17g columns
// ---------------------------------------------------------------------

inline void write_time_series_csv(const std::filesystem::path& path, const TimeSeries& ts) {
    validate(ts);
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot open for writing: " + path.string());
    out << "t,tau_c,theta_e\n";
    for (std::size_t i = 0; i < ts.tau_c.size(); ++i) {
        const double t = ts.t0 + static_cast<double>(i) * ts.dt;
        out << format_double(t) << ',' << format_double(ts.tau_c[i]) << ','
            << format_double(ts.theta_e[i]) << '\n';
    }
    if (!out) throw ValidationError("write failed: " + path.string());
}

inline TimeSeries read_time_series_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open for reading: " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw ValidationError("empty CSV: " + path.string());
    // tolerate trailing CR from foreign line endings
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "t,tau_c,theta_e")
        throw ValidationError("unexpected CSV header in " + path.string() + ": " + line);

    std::vector<double> t;
    TimeSeries ts;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        double v[3];
        const char* p = line.c_str();
        for (int c = 0; c < 3; ++c) {
            char* end = nullptr;
            v[c] = std::strtod(p, &end);
            if (end == p)
                throw ValidationError(path.string() + ":" + std::to_string(lineno) +
                                      ": expected a number");
            p = end;
            if (c < 2) {
                if (*p != ',')
                    throw ValidationError(path.string() + ":" + std::to_string(lineno) +
                                          ": expected 3 comma-separated columns");
                ++p;
            }
        }
        t.push_back(v[0]);
        ts.tau_c.push_back(v[1]);
        ts.theta_e.push_back(v[2]);
    }
    if (t.size() < 2) throw ValidationError("CSV has fewer than 2 samples: " + path.string());
    ts.t0 = t.front();
    ts.dt = t[1] - t[0];
    if (!(ts.dt > 0.0)) throw ValidationError("CSV time column must be increasing: " + path.string());
    for (std::size_t i = 0; i < t.size(); ++i) {
        const double expect = ts.t0 + static_cast<double>(i) * ts.dt;
        if (std::fabs(t[i] - expect) > 1e-9 * std::max(1.0, std::fabs(expect)))
            throw ValidationError(path.string() + ": time column is not uniformly sampled near t=" +
                                  format_double(t[i]));
    }
    validate(ts);
    return ts;
}

// ---------------------------------------------------------------------
// Bode CSV: "omega,mag_db,phase_deg", phase unwrapped along the grid
// ---------------------------------------------------------------------

inline void write_bode_csv(const std::filesystem::path& path, const std::vector<double>& grid,
                           const control::LoopFn& system) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot open for writing: " + path.string());
    out << "omega,mag_db,phase_deg\n";
    double prev = 0.0;
    bool first = true;
    for (double w : grid) {
        const auto v = system(w);
        const double mag_db = 20.0 * std::log10(std::abs(v));
        double ph = std::arg(v);
        if (!first) {
            double d = ph - std::fmod(prev, 2.0 * M_PI);
            d -= 2.0 * M_PI * std::round(d / (2.0 * M_PI));
            ph = prev + d;
        }
        prev = ph;
        first = false;
        out << format_double(w) << ',' << format_double(mag_db) << ','
            << format_double(ph * 180.0 / M_PI) << '\n';
    }
    if (!out) throw ValidationError("write failed: " + path.string());
}

// ---------------------------------------------------------------------
// JSON plumbing
// ---------------------------------------------------------------------

inline json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open for reading: " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ValidationError("malformed JSON in " + path.string() + ": " + e.what());
    }
}

inline void write_json_file(const std::filesystem::path& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot open for writing: " + path.string());
    out << j.dump(2) << '\n';
    if (!out) throw ValidationError("write failed: " + path.string());
}

namespace detail {

inline double need_num(const json& j, const char* key, const std::string& where) {
    const auto it = j.find(key);
    if (it == j.end() || !it->is_number())
        throw ValidationError(where + ": missing numeric field \"" + key + "\"");
    return it->get<double>();
}

inline double num_or(const json& j, const char* key, double fallback, const std::string& where) {
    const auto it = j.find(key);
    if (it == j.end()) return fallback;
    if (!it->is_number())
        throw ValidationError(where + ": field \"" + key + "\" must be a number");
    return it->get<double>();
}

inline std::string str_or(const json& j, const char* key, const std::string& fallback) {
    const auto it = j.find(key);
    if (it == j.end()) return fallback;
    return it->get<std::string>();
}

}  // namespace detail

// ---- frequency response ----

inline json to_json(const FrequencyResponse& frf) {
    json samples = json::array();
    for (const auto& s : frf.samples)
        samples.push_back({{"omega", s.omega}, {"re", s.value.real()}, {"im", s.value.imag()}});
    return {{"meta", {{"exp", frf.exp_label}, {"alpha", frf.alpha}, {"M_e", frf.M_e}}},
            {"samples", samples}};
}

inline FrequencyResponse frf_from_json(const json& j) {
    FrequencyResponse frf;
    if (j.contains("meta")) {
        const auto& m = j.at("meta");
        frf.exp_label = detail::str_or(m, "exp", "");
        frf.alpha = detail::num_or(m, "alpha", 1.0, "frf meta");
        frf.M_e = detail::num_or(m, "M_e", 0.0, "frf meta");
    }
    if (!j.contains("samples") || !j.at("samples").is_array())
        throw ValidationError("frf JSON: missing \"samples\" array");
    for (const auto& s : j.at("samples"))
        frf.samples.push_back({detail::need_num(s, "omega", "frf sample"),
                               {detail::need_num(s, "re", "frf sample"),
                                detail::need_num(s, "im", "frf sample")}});
    validate(frf);
    return frf;
}

// ---- model parameters ----

inline json params_to_json(const identify::ModelParams& p) {
    json j{{"model", identify::model_code(p)}};
    std::visit(
        [&j](const auto& m) {
            using T = std::decay_t<decltype(m)>;
            j["K_h"] = m.K_h;
            if constexpr (std::is_same_v<T, identify::ModelParamsM1>) {
                j["B_h"] = m.B_h;
            } else if constexpr (std::is_same_v<T, identify::ModelParamsM2>) {
                j["C_h"] = m.C_h;
            } else {
                j["C_h"] = m.C_h;
                j["B_h"] = m.B_h;
            }
            j["M"] = m.M;
        },
        p);
    return j;
}

inline identify::ModelParams params_from_json(const json& j) {
    const std::string code = detail::str_or(j, "model", "");
    const std::string where = "model params (" + code + ")";
    if (code == "M1")
        return identify::ModelParamsM1{detail::need_num(j, "K_h", where),
                                       detail::need_num(j, "B_h", where),
                                       detail::need_num(j, "M", where)};
    if (code == "M2")
        return identify::ModelParamsM2{detail::need_num(j, "K_h", where),
                                       detail::need_num(j, "C_h", where),
                                       detail::need_num(j, "M", where)};
    if (code == "M3")
        return identify::ModelParamsM3{detail::need_num(j, "K_h", where),
                                       detail::need_num(j, "C_h", where),
                                       detail::need_num(j, "B_h", where),
                                       detail::need_num(j, "M", where)};
    throw ValidationError("model params: \"model\" must be M1, M2 or M3");
}

/// One fitted model plus its fit quality, as written by the identify command.
struct IdentifiedModel {
    std::string exp_label;
    identify::ModelParams params;
    double omega_n = 0.0;
    double zeta = 0.0;
    double rss = 0.0;
    int n = 0;  // complex samples entering the fit
};

inline json to_json(const IdentifiedModel& m) {
    json j = params_to_json(m.params);
    j["exp"] = m.exp_label;
    j["omega_n"] = m.omega_n;
    j["zeta"] = m.zeta;
    j["rss"] = m.rss;
    j["n"] = m.n;
    return j;
}

inline IdentifiedModel identified_from_json(const json& j) {
    IdentifiedModel m;
    m.params = params_from_json(j);
    m.exp_label = detail::str_or(j, "exp", "");
    m.omega_n = detail::need_num(j, "omega_n", "identified model");
    m.zeta = detail::need_num(j, "zeta", "identified model");
    m.rss = detail::need_num(j, "rss", "identified model");
    m.n = static_cast<int>(detail::need_num(j, "n", "identified model"));
    return m;
}

// ---- statistics reports ----

inline json to_json(const stats::FTestReport& r) {
    return {{"exp", r.exp_label},       {"comparison", r.comparison},
            {"rss_reduced", r.rss_reduced}, {"rss_full", r.rss_full},
            {"n", r.n},                 {"f_stat", r.f_stat},
            {"f_critical", r.f_critical},   {"significant", r.significant}};
}

inline json to_json(const stats::RegressionReport& r) {
    return {{"c_h", r.c_h}, {"d_h", r.d_h}, {"r_squared", r.r_squared}};
}

inline json to_json(const stats::ViscousHypothesisReport& r) {
    return {{"a_h", r.a_h},
            {"rss_proportional", r.rss_proportional},
            {"const_zeta", r.const_zeta},
            {"rss_constant", r.rss_constant},
            {"proportional_rejected", r.proportional_rejected}};
}

// ---- synthetic subject + protocol ----

inline json to_json(const sim::SubjectTruth& t) {
    json j = params_to_json(t.params);
    j["sigma_tau"] = t.sigma_tau;
    j["sigma_theta"] = t.sigma_theta;
    j["seed"] = t.seed;
    return j;
}

inline sim::SubjectTruth truth_from_json(const json& j) {
    sim::SubjectTruth t;
    t.params = params_from_json(j);
    t.sigma_tau = detail::num_or(j, "sigma_tau", 0.0, "truth");
    t.sigma_theta = detail::num_or(j, "sigma_theta", 0.0, "truth");
    if (const auto it = j.find("seed"); it != j.end()) t.seed = it->get<std::uint64_t>();
    validate(t);
    return t;
}

inline ChirpSpec chirp_from_json(const json& j) {
    ChirpSpec c;
    c.omega_min = detail::need_num(j, "omega_min", "chirp");
    c.omega_max = detail::need_num(j, "omega_max", "chirp");
    c.duration = detail::need_num(j, "duration", "chirp");
    c.amplitude = detail::need_num(j, "amplitude", "chirp");
    c.sample_rate = detail::num_or(j, "sample_rate", c.sample_rate, "chirp");
    validate(c);
    return c;
}

inline SegmentationSpec segmentation_from_json(const json& j) {
    SegmentationSpec s;
    s.n_segments = static_cast<int>(detail::num_or(j, "n_segments", s.n_segments, "segmentation"));
    s.segment_period = detail::num_or(j, "segment_period", s.segment_period, "segmentation");
    s.used_duration = detail::num_or(j, "used_duration", s.used_duration, "segmentation");
    validate(s);
    return s;
}

inline ExperimentConfig experiment_from_json(const json& j) {
    ExperimentConfig e;
    e.label = detail::str_or(j, "label", "");
    e.alpha = detail::num_or(j, "alpha", e.alpha, "experiment");
    e.M_e = detail::num_or(j, "M_e", e.M_e, "experiment");
    e.bias_torque = detail::num_or(j, "bias_torque", e.bias_torque, "experiment");
    e.load_label = detail::str_or(j, "load_label", "");
    e.grip_label = detail::str_or(j, "grip_label", "");
    validate(e);
    return e;
}

/// Config file layout: {"chirp": {...}, "segmentation": {...},
/// "experiment": {...}, "truth": {...}}. segmentation and experiment
/// fall back to defaults when absent.
inline sim::ProtocolSpec protocol_from_json(const json& config) {
    sim::ProtocolSpec p;
    if (!config.contains("chirp")) throw ValidationError("config: missing \"chirp\" section");
    p.chirp = chirp_from_json(config.at("chirp"));
    if (config.contains("segmentation"))
        p.segmentation = segmentation_from_json(config.at("segmentation"));
    if (config.contains("experiment")) p.experiment = experiment_from_json(config.at("experiment"));
    validate(p);
    return p;
}

// ---- fixture table ----

/// One published model row: fitted parameters plus the reported summary
/// statistics (natural frequency, damping ratio).
struct FixtureRow {
    std::string exp_label;
    identify::ModelParams params;
    double omega_n = 0.0;
    double zeta = 0.0;
};

inline std::vector<FixtureRow> load_fixture(const std::filesystem::path& path) {
    const json j = read_json_file(path);
    if (!j.is_array()) throw ValidationError("fixture must be a JSON array: " + path.string());
    std::vector<FixtureRow> rows;
    for (const auto& r : j) {
        FixtureRow row;
        row.exp_label = detail::str_or(r, "exp", "");
        if (row.exp_label.empty())
            throw ValidationError("fixture row missing \"exp\" label: " + path.string());
        row.params = params_from_json(r);
        row.omega_n = detail::need_num(r, "omega_n", "fixture row " + row.exp_label);
        row.zeta = detail::need_num(r, "zeta", "fixture row " + row.exp_label);
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ValidationError("fixture is empty: " + path.string());
    return rows;
}

// ---- controller design ----

inline json to_json(const control::MarginReport& m) {
    json crossings = json::array();
    for (const auto& c : m.all_crossings)
        crossings.push_back(
            {{"omega", c.omega}, {"phase_deg", c.phase_deg}, {"margin_deg", c.margin_deg}});
    json j{{"all_crossings", crossings}};
    if (m.has_crossover()) {
        j["omega_crossover"] = m.omega_crossover();
        j["phase_margin_deg"] = m.phase_margin_deg();
    }
    return j;
}

inline json to_json(const control::PlantConfig& p) {
    return {{"K_h", p.model.K_h},   {"c_h", p.model.c_h},       {"M_h", p.model.M_h},
            {"M_e", p.M_e},         {"alpha", p.alpha},         {"omega_sea", p.omega_sea},
            {"zeta_sea", p.zeta_sea}};
}

inline control::PlantConfig plant_from_json(const json& j) {
    control::PlantConfig p;
    p.model.K_h = detail::need_num(j, "K_h", "plant");
    p.model.c_h = detail::need_num(j, "c_h", "plant");
    p.model.M_h = detail::need_num(j, "M_h", "plant");
    p.M_e = detail::num_or(j, "M_e", p.M_e, "plant");
    p.alpha = detail::num_or(j, "alpha", p.alpha, "plant");
    p.omega_sea = detail::num_or(j, "omega_sea", p.omega_sea, "plant");
    p.zeta_sea = detail::num_or(j, "zeta_sea", p.zeta_sea, "plant");
    validate(p);
    return p;
}

inline json to_json(const control::DesignSpec& d) {
    return {{"plant", to_json(d.plant)},
            {"phi_deg", d.phi_deg},
            {"f", d.f},
            {"k_f", d.k_f},
            {"omega_c", d.omega_c},
            {"cascade",
             {{"n", d.cascade_n},
              {"w_lo", d.cascade_w_lo},
              {"w_hi", d.cascade_w_hi},
              {"r_pp", d.r_pp},
              {"r_zp", d.r_zp}}}};
}

inline control::DesignSpec design_from_json(const json& j) {
    control::DesignSpec d;
    if (!j.contains("plant")) throw ValidationError("design JSON: missing \"plant\"");
    d.plant = plant_from_json(j.at("plant"));
    d.phi_deg = detail::need_num(j, "phi_deg", "design");
    d.f = detail::need_num(j, "f", "design");
    d.k_f = detail::need_num(j, "k_f", "design");
    d.omega_c = detail::need_num(j, "omega_c", "design");
    if (!j.contains("cascade")) throw ValidationError("design JSON: missing \"cascade\"");
    const auto& c = j.at("cascade");
    d.cascade_n = static_cast<int>(detail::need_num(c, "n", "design cascade"));
    d.cascade_w_lo = detail::need_num(c, "w_lo", "design cascade");
    d.cascade_w_hi = detail::need_num(c, "w_hi", "design cascade");
    d.r_pp = detail::need_num(c, "r_pp", "design cascade");
    d.r_zp = detail::need_num(c, "r_zp", "design cascade");
    return d;
}

// ---- run manifest ----

/// Provenance record echoed next to every command's outputs. The
/// timestamp is informational; determinism checks must ignore it.
struct RunManifest {
    std::string command;
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    json parameters = json::object();
    std::optional<std::uint64_t> seed;
};

inline json to_json(const RunManifest& m) {
    char stamp[32];
    const std::time_t now = std::time(nullptr);
    std::tm tm_utc{};
    gmtime_r(&now, &tm_utc);
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    json j{{"command", m.command}, {"inputs", m.inputs},   {"outputs", m.outputs},
           {"parameters", m.parameters}, {"version", version}, {"timestamp", stamp}};
    if (m.seed) j["seed"] = *m.seed;
    return j;
}

}  // namespace dynstiff::io
