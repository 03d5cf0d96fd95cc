// Dataset CSV, JSON reports and the run configuration.
//
// Dataset CSV: header `stress,unit,time,value` (any column order, extra
// columns ignored, lines starting with '#' skipped). stress is in native
// units (degrees C for Arrhenius), time in hours, value in degradation units.
//
// Requires nlohmann/json (vendor/json.hpp).
#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <initializer_list>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "fbmadt/adt_model.hpp"
#include "fbmadt/dataset.hpp"
#include "fbmadt/errors.hpp"
#include "fbmadt/evaluation.hpp"
#include "fbmadt/inference.hpp"
#include "fbmadt/reliability.hpp"
#include "fbmadt/simulator.hpp"
#include "fbmadt/sweep.hpp"

namespace fbmadt {

using json = nlohmann::json;

/// Shortest text that reads back to the same double.
inline std::string format_double(double v) {
    char buf[32];
    for (int prec : {15, 16, 17}) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

/// Acceleration model and stress normalization endpoints; the highest stress
/// defaults to the largest stress in the data.
struct StressSettings {
    AccelerationKind acceleration = AccelerationKind::Arrhenius;
    double normal_stress = 40.0;
    std::optional<double> highest_stress;

    StressSpec resolve(const std::vector<StressLevel>& levels) const {
        StressSpec s{acceleration, normal_stress, highest_stress ? *highest_stress : max_stress(levels)};
        s.validate();
        return s;
    }
    friend bool operator==(const StressSettings&, const StressSettings&) = default;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string_view> split_csv(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
        if (i == line.size() || line[i] == ',') {
            out.push_back(trim(line.substr(start, i - start)));
            start = i + 1;
        }
    }
    return out;
}

inline double parse_number(std::string_view field, std::string_view column, std::size_t line_no) {
    double v = 0.0;
    const auto* end = field.data() + field.size();
    const auto [ptr, ec] = std::from_chars(field.data(), end, v);
    if (field.empty() || ec != std::errc() || ptr != end || !std::isfinite(v))
        throw ParseError("line " + std::to_string(line_no) + ": column '" + std::string(column) +
                         "' is not a finite number: '" + std::string(field) + "'");
    return v;
}

}  // namespace detail

/// Reads a dataset. Levels and units keep their order of first appearance;
/// times within a unit must be strictly increasing in file order.
inline AdtDataset read_dataset_csv(std::istream& in, const StressSettings& stress) {
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string_view> header;
    std::string header_line;
    while (std::getline(in, line)) {
        ++line_no;
        const auto t = detail::trim(line);
        if (t.empty() || t.front() == '#') continue;
        header_line = std::string(t);
        header = detail::split_csv(header_line);
        break;
    }
    if (header.empty()) throw ParseError("empty file: no header row");

    std::map<std::string, std::size_t> col;
    for (std::size_t i = 0; i < header.size(); ++i) col.emplace(std::string(header[i]), i);
    for (const char* name : {"stress", "unit", "time", "value"})
        if (!col.count(name))
            throw ParseError("line " + std::to_string(line_no) + ": missing column '" + name + "'");
    const std::size_t c_s = col["stress"], c_u = col["unit"], c_t = col["time"], c_v = col["value"];
    const std::size_t need = std::max({c_s, c_u, c_t, c_v}) + 1;

    struct Pending {
        std::vector<double> t, v;
        std::size_t last_line = 0;
    };
    std::vector<double> level_order;
    std::map<double, std::vector<std::string>> unit_order;
    std::map<std::pair<double, std::string>, Pending> pending;
    std::size_t rows = 0;

    while (std::getline(in, line)) {
        ++line_no;
        const auto t = detail::trim(line);
        if (t.empty() || t.front() == '#') continue;
        const auto f = detail::split_csv(t);
        if (f.size() < need)
            throw ParseError("line " + std::to_string(line_no) + ": expected at least " + std::to_string(need) +
                             " fields, got " + std::to_string(f.size()));
        const double s = detail::parse_number(f[c_s], "stress", line_no);
        const std::string unit(f[c_u]);
        if (unit.empty()) throw ParseError("line " + std::to_string(line_no) + ": empty unit id");
        const double time = detail::parse_number(f[c_t], "time", line_no);
        const double value = detail::parse_number(f[c_v], "value", line_no);

        if (!unit_order.count(s)) level_order.push_back(s);
        auto& units = unit_order[s];
        auto [it, fresh] = pending.try_emplace({s, unit});
        if (fresh) units.push_back(unit);
        auto& p = it->second;
        if (!p.t.empty()) {
            const std::string where = "unit '" + unit + "' at stress " + format_double(s) + ", line " +
                                      std::to_string(line_no);
            if (time == p.t.back())
                throw ParseError("duplicate time " + format_double(time) + " for " + where);
            if (time < p.t.back())
                throw ParseError("decreasing time " + format_double(time) + " after " + format_double(p.t.back()) +
                                 " for " + where);
        }
        p.t.push_back(time);
        p.v.push_back(value);
        p.last_line = line_no;
        ++rows;
    }
    if (rows == 0) throw ParseError("no data rows after the header");

    AdtDataset data;
    for (double s : level_order) {
        StressLevel lvl;
        lvl.stress = s;
        for (const auto& id : unit_order[s]) {
            auto& p = pending[{s, id}];
            UnitSeries u;
            u.id = id;
            try {
                u.times = TimeGrid(std::move(p.t));
            } catch (const Error& e) {
                throw ParseError("unit '" + id + "' ending at line " + std::to_string(p.last_line) + ": " + e.what());
            }
            u.values = std::move(p.v);
            lvl.units.push_back(std::move(u));
        }
        data.levels.push_back(std::move(lvl));
    }
    data.stress_spec = stress.resolve(data.levels);
    data.validate();
    return data;
}

inline AdtDataset ingest_csv(const std::string& path, const StressSettings& stress) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open '" + path + "'");
    return read_dataset_csv(in, stress);
}

inline void write_dataset_csv(std::ostream& out, const AdtDataset& data, const std::string& comment = {}) {
    out << "# stress: " << (data.stress_spec.kind == AccelerationKind::Arrhenius ? "degrees C" : "native units")
        << "; time: hours; value: degradation units\n";
    if (!comment.empty()) out << "# " << comment << "\n";
    out << "stress,unit,time,value\n";
    for (const auto& l : data.levels)
        for (const auto& u : l.units)
            for (std::size_t j = 0; j < u.size(); ++j)
                out << format_double(l.stress) << ',' << u.id << ',' << format_double(u.times[j]) << ','
                    << format_double(u.values[j]) << '\n';
}

// ---- JSON ----

inline json to_json(const Theta& t) {
    return json{{"variant", to_string(t.variant)}, {"mu_a", t.mu_a},     {"sigma_a2", t.sigma_a2},
                {"sigma_a", t.sigma_a()},          {"alpha1", t.alpha1}, {"beta", t.beta},
                {"sigma2", t.sigma2},              {"sigma", t.sigma()}, {"H", t.h.value()}};
}

/// Accepts variance (sigma_a2, sigma2) or standard-deviation (sigma_a, sigma) keys;
/// variances win when both are present.
inline Theta theta_from_json(const json& j) {
    try {
        Theta t;
        t.variant = parse_variant(j.value("variant", std::string("M0")));
        t.mu_a = j.at("mu_a").get<double>();
        if (j.contains("sigma_a2")) t.sigma_a2 = j["sigma_a2"].get<double>();
        else if (j.contains("sigma_a")) t.sigma_a2 = std::pow(j["sigma_a"].get<double>(), 2);
        else t.sigma_a2 = 0.0;
        t.alpha1 = j.at("alpha1").get<double>();
        t.beta = j.at("beta").get<double>();
        if (j.contains("sigma2")) t.sigma2 = j["sigma2"].get<double>();
        else t.sigma2 = std::pow(j.at("sigma").get<double>(), 2);
        t.h = Hurst(j.value("H", 0.5));
        t = t.enforce_variant();
        t.validate();
        return t;
    } catch (const json::exception& e) {
        throw ParseError(std::string("invalid parameter object: ") + e.what());
    }
}

/// A parameter object, a fit report (first fit) or a bare fit entry.
inline Theta load_theta(const json& j) {
    if (j.contains("fits")) {
        if (!j["fits"].is_array() || j["fits"].empty()) throw ParseError("fit report has no fits");
        return theta_from_json(j["fits"].front().at("theta_hat"));
    }
    if (j.contains("theta_hat")) return theta_from_json(j["theta_hat"]);
    return theta_from_json(j);
}

inline json to_json(const FitResult& r) {
    json trace = json::array();
    for (const auto& e : r.trace) trace.push_back({{"theta", to_json(e.theta)}, {"loglik", e.loglik}});
    return json{{"variant", to_string(r.theta_hat.variant)},
                {"method", to_string(r.method)},
                {"n_params", n_params(r.theta_hat.variant)},
                {"theta_hat", to_json(r.theta_hat)},
                {"l_max", r.l_max},
                {"aic", r.aic},
                {"iterations", r.iterations},
                {"converged", r.converged},
                {"optimizer_warning", r.optimizer_warning},
                {"trace", trace}};
}

inline json to_json(const ErReport& r) {
    json levels = json::array();
    for (const auto& l : r.levels)
        levels.push_back({{"stress", l.stress},
                          {"er_mean", l.er_mean},
                          {"er_upper", l.er_upper},
                          {"er_lower", l.er_lower},
                          {"skipped_terms", l.skipped}});
    return json{{"er_mean", r.er_mean},
                {"er_upper", r.er_upper},
                {"er_lower", r.er_lower},
                {"skipped_terms", r.skipped},
                {"levels", levels}};
}

inline json to_json(const ReliabilityCurve& c) {
    return json{{"n_paths", c.n_paths},
                {"censored_fraction", c.censored_fraction},
                {"horizon_warning", c.horizon_warning},
                {"times", c.times.values()},
                {"reliability", c.r_values}};
}

inline json to_json(const SweepReport& r) {
    json rows = json::array();
    for (const auto& row : r.rows) {
        json j{{"n_units", row.design.n_units},
               {"n_measurements", row.design.n_measurements},
               {"replication", row.replication},
               {"seed", row.seed},
               {"method", to_string(row.method)}};
        if (row.fit) {
            j["theta_hat"] = to_json(row.fit->theta_hat);
            j["l_max"] = row.fit->l_max;
            j["iterations"] = row.fit->iterations;
            j["re"] = row.re;
        } else {
            j["error"] = row.error;
        }
        rows.push_back(std::move(j));
    }
    json sums = json::array();
    for (const auto& s : r.summaries)
        sums.push_back({{"n_units", s.design.n_units},
                        {"n_measurements", s.design.n_measurements},
                        {"method", to_string(s.method)},
                        {"n_ok", s.n_ok},
                        {"n_failed", s.n_failed},
                        {"median_re", s.median_re},
                        {"median_l_max", s.median_l_max}});
    return json{{"rows", rows},
                {"summaries", sums},
                {"em_l_max_wins", r.em_l_max_wins},
                {"paired_runs", r.paired_runs},
                {"em_re_design_wins", r.em_re_design_wins},
                {"designs_compared", r.designs_compared}};
}

inline void write_curve_csv(std::ostream& out, const ReliabilityCurve& c, const std::string& comment = {}) {
    out << "# time: hours; reliability: fraction of paths not yet at the threshold; censored: paths that never reached it\n";
    if (!comment.empty()) out << "# " << comment << "\n";
    out << "time_hours,reliability,n_paths,censored_fraction\n";
    const std::string tail = "," + std::to_string(c.n_paths) + "," + format_double(c.censored_fraction) + "\n";
    for (std::size_t j = 0; j < c.times.size(); ++j)
        out << format_double(c.times[j]) << ',' << format_double(c.r_values[j]) << tail;
}

inline void write_residuals_csv(std::ostream& out, const std::vector<ResidualRow>& rows,
                                const std::string& comment = {}) {
    out << "# time: hours; value, fitted, residual: degradation units; whitened: dimensionless\n";
    if (!comment.empty()) out << "# " << comment << "\n";
    out << "stress,unit,time,value,fitted,residual,whitened\n";
    for (const auto& r : rows)
        out << format_double(r.stress) << ',' << r.unit << ',' << format_double(r.time) << ','
            << format_double(r.value) << ',' << format_double(r.fitted) << ',' << format_double(r.residual) << ','
            << format_double(r.whitened) << '\n';
}

// ---- run configuration ----

struct DesignSettings {
    std::vector<double> stress_levels{80.0, 100.0, 120.0};
    std::size_t n_units = 6;
    std::size_t n_measurements = 10;
    double inspection_interval = 100.0;
    bool truncate_negative_drift = false;
    Theta theta = SimDesign::reference_theta();
    friend bool operator==(const DesignSettings&, const DesignSettings&) = default;
};

struct McSettings {
    std::optional<Theta> theta;          // falls back to the fit report passed on the command line
    std::optional<double> stress;        // defaults to the normal stress
    double x_th = SimDesign::kReferenceThreshold;
    std::size_t n_paths = 10000;
    double horizon = 10000.0;            // hours
    std::size_t n_steps = 2000;
    unsigned workers = 1;
    double target = 0.99;
    bool truncate_negative_drift = false;
    friend bool operator==(const McSettings&, const McSettings&) = default;
};

struct RunConfig {
    std::uint64_t master_seed = 0;
    std::string output_dir = "out";
    StressSettings stress{};
    std::vector<Variant> variants{Variant::M0};
    FitMethod method = FitMethod::Em;
    double epsilon = 0.01;
    int max_iter = 500;
    ProfileBounds bounds{};
    DesignSettings design{};
    McSettings mc{};
    std::size_t er_paths = 1000;
    double er_quantile = 0.05;
    HeldOut held_out = HeldOut::LowestStress;

    EmOptions em_options() const { return EmOptions{epsilon, max_iter, bounds}; }

    SimDesign sim_design() const {
        SimDesign d;
        d.stress_levels = design.stress_levels;
        d.normal_stress = stress.normal_stress;
        d.highest_stress = stress.highest_stress;
        d.acceleration = stress.acceleration;
        d.n_units_per_level = design.n_units;
        d.n_measurements = design.n_measurements;
        d.inspection_interval = design.inspection_interval;
        d.theta_true = design.theta;
        d.master_seed = master_seed;
        d.truncate_negative_drift = design.truncate_negative_drift;
        return d;
    }

    void validate() const {
        bounds.validate();
        if (variants.empty()) throw InvalidArgumentError("config lists no variants");
        if (!(epsilon > 0.0) || max_iter < 1) throw InvalidArgumentError("EM tolerance and max_iter must be positive");
        if (!(mc.horizon > 0.0) || mc.n_steps < 1 || mc.n_paths < 1)
            throw InvalidArgumentError("Monte-Carlo horizon, steps and paths must be positive");
        if (!(mc.target > 0.0 && mc.target < 1.0)) throw DomainError("target reliability must lie in (0, 1)");
        if (er_paths < 1 || !(er_quantile > 0.0 && er_quantile < 0.5))
            throw InvalidArgumentError("invalid ER simulation settings");
    }

    friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

inline json to_json(const RunConfig& c) {
    json variants = json::array();
    for (auto v : c.variants) variants.push_back(to_string(v));
    const auto& b = c.bounds;
    return json{
        {"master_seed", c.master_seed},
        {"output_dir", c.output_dir},
        {"stress",
         {{"acceleration", to_string(c.stress.acceleration)},
          {"normal_stress", c.stress.normal_stress},
          {"highest_stress", c.stress.highest_stress ? json(*c.stress.highest_stress) : json(nullptr)}}},
        {"fit",
         {{"variants", variants},
          {"method", to_string(c.method)},
          {"epsilon", c.epsilon},
          {"max_iter", c.max_iter},
          {"bounds",
           {{"alpha1", {b.alpha1_lo, b.alpha1_hi}},
            {"beta", {b.beta_lo, b.beta_hi}},
            {"h", {b.h_lo, b.h_hi}},
            {"alpha1_points", b.alpha1_points},
            {"beta_step", b.beta_step},
            {"h_step", b.h_step}}}}},
        {"simulate",
         {{"stress_levels", c.design.stress_levels},
          {"n_units", c.design.n_units},
          {"n_measurements", c.design.n_measurements},
          {"inspection_interval", c.design.inspection_interval},
          {"truncate_negative_drift", c.design.truncate_negative_drift},
          {"theta", to_json(c.design.theta)}}},
        {"reliability",
         {{"theta", c.mc.theta ? to_json(*c.mc.theta) : json(nullptr)},
          {"stress", c.mc.stress ? json(*c.mc.stress) : json(nullptr)},
          {"x_th", c.mc.x_th},
          {"n_paths", c.mc.n_paths},
          {"horizon", c.mc.horizon},
          {"n_steps", c.mc.n_steps},
          {"workers", c.mc.workers},
          {"target", c.mc.target},
          {"truncate_negative_drift", c.mc.truncate_negative_drift}}},
        {"evaluate", {{"er_paths", c.er_paths}, {"quantile", c.er_quantile}}},
        {"crossval", {{"held_out", to_string(c.held_out)}}}};
}

namespace detail {

inline void only_keys(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
    if (!j.is_object()) throw ParseError("config section '" + where + "' must be an object");
    for (const auto& [k, _] : j.items()) {
        bool known = false;
        for (const char* key : keys) known = known || k == key;
        if (!known) throw ParseError("unknown config key '" + where + "." + k + "'");
    }
}

template <typename T>
void read_key(const json& j, const char* key, T& field) {
    if (j.contains(key)) field = j[key].get<T>();
}

inline void read_pair(const json& j, const char* key, double& lo, double& hi) {
    if (!j.contains(key)) return;
    const auto& a = j[key];
    if (!a.is_array() || a.size() != 2) throw ParseError(std::string("bounds.") + key + " must be [lo, hi]");
    lo = a[0].get<double>();
    hi = a[1].get<double>();
}

inline std::optional<Theta> optional_theta(const json& j, const char* key) {
    if (!j.contains(key) || j[key].is_null()) return std::nullopt;
    return theta_from_json(j[key]);
}

inline std::optional<double> optional_number(const json& j, const char* key) {
    if (!j.contains(key) || j[key].is_null()) return std::nullopt;
    return j[key].get<double>();
}

}  // namespace detail

/// Missing keys keep their defaults; unknown keys are rejected.
inline RunConfig config_from_json(const json& j) {
    using detail::only_keys, detail::read_key;
    RunConfig c;
    try {
        only_keys(j, {"master_seed", "output_dir", "stress", "fit", "simulate", "reliability", "evaluate", "crossval"},
                  "config");
        read_key(j, "master_seed", c.master_seed);
        read_key(j, "output_dir", c.output_dir);
        if (j.contains("stress")) {
            const auto& s = j["stress"];
            only_keys(s, {"acceleration", "normal_stress", "highest_stress"}, "stress");
            if (s.contains("acceleration")) c.stress.acceleration = parse_acceleration_kind(s["acceleration"].get<std::string>());
            read_key(s, "normal_stress", c.stress.normal_stress);
            c.stress.highest_stress = detail::optional_number(s, "highest_stress");
        }
        if (j.contains("fit")) {
            const auto& f = j["fit"];
            only_keys(f, {"variants", "method", "epsilon", "max_iter", "bounds"}, "fit");
            if (f.contains("variants")) {
                c.variants.clear();
                for (const auto& v : f["variants"]) c.variants.push_back(parse_variant(v.get<std::string>()));
            }
            if (f.contains("method")) c.method = parse_fit_method(f["method"].get<std::string>());
            read_key(f, "epsilon", c.epsilon);
            read_key(f, "max_iter", c.max_iter);
            if (f.contains("bounds")) {
                const auto& b = f["bounds"];
                only_keys(b, {"alpha1", "beta", "h", "alpha1_points", "beta_step", "h_step"}, "fit.bounds");
                detail::read_pair(b, "alpha1", c.bounds.alpha1_lo, c.bounds.alpha1_hi);
                detail::read_pair(b, "beta", c.bounds.beta_lo, c.bounds.beta_hi);
                detail::read_pair(b, "h", c.bounds.h_lo, c.bounds.h_hi);
                read_key(b, "alpha1_points", c.bounds.alpha1_points);
                read_key(b, "beta_step", c.bounds.beta_step);
                read_key(b, "h_step", c.bounds.h_step);
            }
        }
        if (j.contains("simulate")) {
            const auto& s = j["simulate"];
            only_keys(s, {"stress_levels", "n_units", "n_measurements", "inspection_interval",
                          "truncate_negative_drift", "theta"},
                      "simulate");
            read_key(s, "stress_levels", c.design.stress_levels);
            read_key(s, "n_units", c.design.n_units);
            read_key(s, "n_measurements", c.design.n_measurements);
            read_key(s, "inspection_interval", c.design.inspection_interval);
            read_key(s, "truncate_negative_drift", c.design.truncate_negative_drift);
            if (auto t = detail::optional_theta(s, "theta")) c.design.theta = *t;
        }
        if (j.contains("reliability")) {
            const auto& r = j["reliability"];
            only_keys(r, {"theta", "stress", "x_th", "n_paths", "horizon", "n_steps", "workers", "target",
                          "truncate_negative_drift"},
                      "reliability");
            c.mc.theta = detail::optional_theta(r, "theta");
            c.mc.stress = detail::optional_number(r, "stress");
            read_key(r, "x_th", c.mc.x_th);
            read_key(r, "n_paths", c.mc.n_paths);
            read_key(r, "horizon", c.mc.horizon);
            read_key(r, "n_steps", c.mc.n_steps);
            read_key(r, "workers", c.mc.workers);
            read_key(r, "target", c.mc.target);
            read_key(r, "truncate_negative_drift", c.mc.truncate_negative_drift);
        }
        if (j.contains("evaluate")) {
            const auto& e = j["evaluate"];
            only_keys(e, {"er_paths", "quantile"}, "evaluate");
            read_key(e, "er_paths", c.er_paths);
            read_key(e, "quantile", c.er_quantile);
        }
        if (j.contains("crossval")) {
            const auto& x = j["crossval"];
            only_keys(x, {"held_out"}, "crossval");
            if (x.contains("held_out")) c.held_out = parse_held_out(x["held_out"].get<std::string>());
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("invalid config: ") + e.what());
    }
    c.validate();
    return c;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open config '" + path + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError("config '" + path + "' is not valid JSON: " + e.what());
    }
    return config_from_json(j);
}

/// FNV-1a 64 over the canonical (sorted-key, compact) JSON form, as 16 hex digits.
/// Execution-only settings (output_dir, reliability.workers) are excluded, so
/// they do not change artifact bytes.
inline std::string config_hash(const RunConfig& c) {
    json j = to_json(c);
    j.erase("output_dir");
    j["reliability"].erase("workers");
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : j.dump()) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace fbmadt
