// fbmadt: batch front end for simulation, fitting, reliability and evaluation.
//
// Every artifact embeds the effective config hash and master seed. Module
// errors exit with status 2 and print {"error": {"kind", "message"}} on stderr.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fbmadt/fbmadt.hpp"
#include "fbmadt/io.hpp"

namespace fs = std::filesystem;
using namespace fbmadt;

namespace {

struct Flags {
    std::string config, data, out, theta, variants, method, held_out;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> workers;
};

RunConfig effective_config(const Flags& f) {
    RunConfig c = f.config.empty() ? RunConfig{} : load_config(f.config);
    if (f.seed) c.master_seed = *f.seed;
    if (!f.out.empty()) c.output_dir = f.out;
    if (!f.method.empty()) c.method = parse_fit_method(f.method);
    if (!f.held_out.empty()) c.held_out = parse_held_out(f.held_out);
    if (f.workers) c.mc.workers = *f.workers;
    if (!f.variants.empty()) {
        c.variants.clear();
        std::stringstream ss(f.variants);
        for (std::string v; std::getline(ss, v, ',');)
            if (!v.empty()) c.variants.push_back(parse_variant(v));
    }
    c.validate();
    return c;
}

json meta(const RunConfig& c, const std::string& command) {
    return json{{"generator", "fbmadt"},
                {"command", command},
                {"config_hash", config_hash(c)},
                {"master_seed", c.master_seed}};
}

std::string stamp(const RunConfig& c) {
    return "config_hash=" + config_hash(c) + " master_seed=" + std::to_string(c.master_seed);
}

fs::path out_file(const RunConfig& c, const std::string& name) {
    fs::create_directories(c.output_dir);
    return fs::path(c.output_dir) / name;
}

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream o(p, std::ios::binary);
    if (!o) throw InvalidArgumentError("cannot write '" + p.string() + "'");
    o << text;
}

void write_json(const fs::path& p, const json& j) { write_text(p, j.dump(2) + "\n"); }

AdtDataset load_data(const Flags& f, const RunConfig& c) {
    if (f.data.empty()) throw InvalidArgumentError("--data is required");
    return ingest_csv(f.data, c.stress);
}

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError("'" + path + "' is not valid JSON: " + e.what());
    }
}

Theta reliability_theta(const Flags& f, const RunConfig& c) {
    if (!f.theta.empty()) return load_theta(read_json_file(f.theta));
    if (c.mc.theta) return *c.mc.theta;
    throw InvalidArgumentError("reliability needs --theta or reliability.theta in the config");
}

/// Highest stress: config, else the fit report's data section, else the largest design stress.
StressSpec reliability_spec(const Flags& f, const RunConfig& c) {
    std::optional<double> high = c.stress.highest_stress;
    if (!high && !f.theta.empty()) {
        const auto j = read_json_file(f.theta);
        if (j.contains("data") && j["data"].contains("highest_stress")) high = j["data"]["highest_stress"].get<double>();
    }
    if (!high) high = *std::max_element(c.design.stress_levels.begin(), c.design.stress_levels.end());
    StressSpec spec{c.stress.acceleration, c.stress.normal_stress, *high};
    spec.validate();
    return spec;
}

int cmd_simulate(const Flags& f) {
    RunConfig c = effective_config(f);
    if (!f.variants.empty()) {
        c.design.theta.variant = c.variants.front();
        c.design.theta = c.design.theta.enforce_variant();
    }
    const auto data = generate_dataset(c.sim_design());
    std::ostringstream csv;
    write_dataset_csv(csv, data, stamp(c));
    write_text(out_file(c, "data.csv"), csv.str());

    json truth{{"meta", meta(c, "simulate")}, {"fits", json::array()}};
    truth["fits"].push_back({{"variant", to_string(c.design.theta.variant)},
                             {"method", "ground_truth"},
                             {"n_params", n_params(c.design.theta.variant)},
                             {"theta_hat", to_json(c.design.theta)}});
    write_json(out_file(c, "truth.json"), truth);
    std::cout << "wrote " << data.n_observations() << " observations to " << out_file(c, "data.csv").string() << "\n";
    return 0;
}

int cmd_fit(const Flags& f) {
    const RunConfig c = effective_config(f);
    const auto data = load_data(f, c);
    json report{{"meta", meta(c, "fit")},
                {"data", {{"levels", data.levels.size()},
                          {"units", data.n_units()},
                          {"observations", data.n_observations()},
                          {"normal_stress", data.stress_spec.s0},
                          {"highest_stress", data.stress_spec.s_high},
                          {"acceleration", to_string(data.stress_spec.kind)}}},
                {"fits", json::array()}};
    for (Variant v : c.variants) {
        const auto r = fit(data, v, c.method, c.em_options());
        report["fits"].push_back(to_json(r));
        std::ostringstream csv;
        write_residuals_csv(csv, residual_diagnostics(r.theta_hat, data), stamp(c));
        write_text(out_file(c, "residuals_" + std::string(to_string(v)) + ".csv"), csv.str());
        std::cout << to_string(v) << ": l_max=" << format_double(r.l_max) << " AIC=" << format_double(r.aic)
                  << " iterations=" << r.iterations << "\n";
    }
    write_json(out_file(c, "fit_report.json"), report);
    return 0;
}

int cmd_reliability(const Flags& f) {
    const RunConfig c = effective_config(f);
    const Theta theta = reliability_theta(f, c);
    const StressSpec spec = reliability_spec(f, c);
    const double stress = c.mc.stress.value_or(c.stress.normal_stress);
    const double s_star = normalize_stress(stress, spec);

    McConfig mc;
    mc.n_paths = c.mc.n_paths;
    mc.grid = McConfig::horizon_grid(c.mc.horizon, c.mc.n_steps);
    mc.x_th = c.mc.x_th;
    mc.master_seed = c.master_seed;
    mc.workers = c.mc.workers;
    mc.truncate_negative_drift = c.mc.truncate_negative_drift;
    const auto curve = reliability_curve(theta, s_star, mc);

    json rep{{"meta", meta(c, "reliability")},
             {"theta", to_json(theta)},
             {"stress", stress},
             {"s_star", s_star},
             {"x_th", c.mc.x_th},
             {"target", c.mc.target},
             {"curve", to_json(curve)}};
    try {
        rep["time_at_target"] = time_at_reliability(curve, c.mc.target);
    } catch (const HorizonExceededError& e) {
        rep["time_at_target"] = nullptr;
        rep["time_at_target_error"] = e.what();
    }
    write_json(out_file(c, "reliability.json"), rep);
    std::ostringstream csv;
    write_curve_csv(csv, curve, stamp(c));
    write_text(out_file(c, "reliability.csv"), csv.str());
    write_text(out_file(c, "reliability.svg"),
               svg::reliability_plot(curve, "Reliability at stress " + format_double(stress)));
    if (curve.horizon_warning)
        std::cerr << "warning: " << format_double(100.0 * curve.censored_fraction)
                  << "% of paths never reached the threshold; consider a longer horizon\n";
    if (rep["time_at_target"].is_null())
        std::cout << "reliability stays above " << format_double(c.mc.target) << " up to the horizon\n";
    else
        std::cout << "t(R=" << format_double(c.mc.target) << ") = " << format_double(rep["time_at_target"].get<double>())
                  << " h\n";
    return 0;
}

int cmd_evaluate(const Flags& f) {
    RunConfig c = effective_config(f);
    if (f.variants.empty()) c.variants = {Variant::M0, Variant::M1, Variant::M2, Variant::M3};
    const auto data = load_data(f, c);
    json rep{{"meta", meta(c, "evaluate")}, {"rows", json::array()}};
    std::ostringstream csv;
    csv << "# " << stamp(c) << "\nvariant,n_params,l_max,aic,er_mean,er_upper,er_lower\n";
    std::optional<std::vector<PathBands>> first_bands;
    for (Variant v : c.variants) {
        const auto r = fit_variant(data, v, c.em_options());
        const auto sims = simulate_level_ensembles(r.theta_hat, data, c.er_paths, c.master_seed);
        const auto er = er_indices(data, sims, c.er_quantile);
        rep["rows"].push_back({{"fit", to_json(r)}, {"er", to_json(er)}});
        csv << to_string(v) << ',' << n_params(v) << ',' << format_double(r.l_max) << ',' << format_double(r.aic)
            << ',' << format_double(er.er_mean) << ',' << format_double(er.er_upper) << ','
            << format_double(er.er_lower) << '\n';
        if (!first_bands) {
            first_bands.emplace();
            for (const auto& s : sims) first_bands->push_back(path_bands(s, c.er_quantile));
        }
    }
    write_json(out_file(c, "evaluation.json"), rep);
    write_text(out_file(c, "evaluation.csv"), csv.str());
    write_text(out_file(c, "degradation_fan.svg"),
               svg::degradation_fan(data, *first_bands,
                                    "Observed paths and " + std::string(to_string(c.variants.front())) + " bands"));
    std::cout << csv.str();
    return 0;
}

int cmd_crossval(const Flags& f) {
    const RunConfig c = effective_config(f);
    const auto data = load_data(f, c);
    json rep{{"meta", meta(c, "crossval")}, {"held_out", to_string(c.held_out)}, {"rows", json::array()}};
    std::ostringstream csv;
    csv << "# " << stamp(c) << "\nvariant,test_stress,er_mean,er_upper,er_lower\n";
    for (Variant v : c.variants) {
        const auto r = cross_validate(data, c.held_out, v, c.method, c.em_options(), c.er_paths, c.master_seed);
        rep["rows"].push_back({{"variant", to_string(v)},
                               {"test_stress", r.test_stress},
                               {"fit", to_json(r.fit)},
                               {"er", to_json(r.report)}});
        csv << to_string(v) << ',' << format_double(r.test_stress) << ',' << format_double(r.report.er_mean) << ','
            << format_double(r.report.er_upper) << ',' << format_double(r.report.er_lower) << '\n';
    }
    write_json(out_file(c, "crossval.json"), rep);
    write_text(out_file(c, "crossval.csv"), csv.str());
    std::cout << csv.str();
    return 0;
}

int cmd_sweep(const Flags& f, const std::vector<std::string>& designs, std::size_t reps) {
    const RunConfig c = effective_config(f);
    std::vector<DesignSize> ds;
    for (const auto& d : designs) {
        const auto x = d.find('x');
        if (x == std::string::npos) throw InvalidArgumentError("design must look like NxM, got '" + d + "'");
        ds.push_back({std::stoul(d.substr(0, x)), std::stoul(d.substr(x + 1))});
    }
    SweepOptions opt;
    opt.theta_true = c.design.theta;
    opt.base_seed = c.master_seed;
    opt.em = c.em_options();
    const auto rep = run_design_sweep(ds, reps, {FitMethod::TwoStep, FitMethod::Em}, opt);
    json j = to_json(rep);
    j["meta"] = meta(c, "sweep");
    write_json(out_file(c, "sweep.json"), j);
    std::cout << "EM l_max wins " << rep.em_l_max_wins << "/" << rep.paired_runs << ", median RE wins "
              << rep.em_re_design_wins << "/" << rep.designs_compared << "\n";
    return 0;
}

void print_error(const std::string& kind, const std::string& message) {
    std::cerr << json{{"error", {{"kind", kind}, {"message", message}}}}.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Degradation modelling with fractional Brownian motion and random drift"};
    app.require_subcommand(1);
    Flags f;
    std::vector<std::string> designs{"6x10", "12x20", "18x30"};
    std::size_t reps = 5;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", f.config, "JSON run configuration");
        sub->add_option("--out", f.out, "output directory");
        sub->add_option("--seed", f.seed, "master seed (overrides the config)");
    };
    auto* sim = app.add_subcommand("simulate", "generate a synthetic ADT dataset");
    common(sim);
    sim->add_option("--variant", f.variants, "variant of the ground truth");

    auto* fit_cmd = app.add_subcommand("fit", "estimate parameters");
    common(fit_cmd);
    fit_cmd->add_option("--data", f.data, "dataset CSV (stress,unit,time,value)")->required();
    fit_cmd->add_option("--variant", f.variants, "comma-separated variants, e.g. M0,M2");
    fit_cmd->add_option("--method", f.method, "em | two_step | mle_fixed");

    auto* rel = app.add_subcommand("reliability", "Monte-Carlo reliability curve");
    common(rel);
    rel->add_option("--theta", f.theta, "parameter JSON or fit report");
    rel->add_option("--workers", f.workers, "worker threads");

    auto* ev = app.add_subcommand("evaluate", "AIC and ER indices per variant");
    common(ev);
    ev->add_option("--data", f.data, "dataset CSV")->required();
    ev->add_option("--variant", f.variants, "comma-separated variants (default all)");

    auto* cv = app.add_subcommand("crossval", "hold out one stress level");
    common(cv);
    cv->add_option("--data", f.data, "dataset CSV")->required();
    cv->add_option("--variant", f.variants, "comma-separated variants");
    cv->add_option("--method", f.method, "em | two_step | mle_fixed");
    cv->add_option("--held-out", f.held_out, "lowest_stress | highest_stress");

    auto* sw = app.add_subcommand("sweep", "EM versus two-step over (N, M) designs");
    common(sw);
    sw->add_option("--designs", designs, "designs as NxM")->delimiter(',');
    sw->add_option("--replications", reps, "replications per design");

    CLI11_PARSE(app, argc, argv);
    try {
        if (*sim) return cmd_simulate(f);
        if (*fit_cmd) return cmd_fit(f);
        if (*rel) return cmd_reliability(f);
        if (*ev) return cmd_evaluate(f);
        if (*cv) return cmd_crossval(f);
        if (*sw) return cmd_sweep(f, designs, reps);
    } catch (const Error& e) {
        print_error(e.kind(), e.what());
        return 2;
    } catch (const std::exception& e) {
        print_error("internal", e.what());
        return 3;
    }
    return 1;
}
