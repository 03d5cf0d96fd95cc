#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "fbmadt/io.hpp"

using namespace fbmadt;

namespace {

AdtDataset parse(const std::string& text, StressSettings s = {}) {
    std::istringstream in(text);
    return read_dataset_csv(in, s);
}

std::string parse_error(const std::string& text) {
    try {
        parse(text);
    } catch (const ParseError& e) {
        return e.what();
    }
    return "no error";
}

}  // namespace

TEST(FormatDouble, RoundTrips) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-10.0, 10.0);
    for (int k = 0; k < 2000; ++k) {
        const double v = std::pow(10.0, u(rng)) * (k % 2 ? -1.0 : 1.0);
        EXPECT_EQ(std::strtod(format_double(v).c_str(), nullptr), v);
    }
    EXPECT_EQ(format_double(0.1), "0.1");
    EXPECT_EQ(format_double(100.0), "100");
}

TEST(DatasetCsv, RoundTripEqualsInMemory) {
    const auto data = generate_dataset(SimDesign::reference(3, 7, 11));
    std::ostringstream out;
    write_dataset_csv(out, data, "seed 11");
    StressSettings s;
    s.normal_stress = 40.0;
    const auto back = parse(out.str(), s);
    EXPECT_EQ(back, data);

    std::ostringstream again;
    write_dataset_csv(again, back, "seed 11");
    EXPECT_EQ(again.str(), out.str());
}

TEST(DatasetCsv, ColumnOrderCommentsAndGrouping) {
    const auto d = parse(
        "# heading\n"
        "\n"
        "value,time,unit,stress\n"
        "0.5,10,b,100\n"
        "0.1,10,a,80\n"
        "# interleaved comment\n"
        "0.7,20,b,100\n"
        "0.2,20,a,80\n"
        "0.3,10,c,80\n");
    ASSERT_EQ(d.levels.size(), 2u);
    EXPECT_EQ(d.levels[0].stress, 100.0);
    EXPECT_EQ(d.levels[1].stress, 80.0);
    ASSERT_EQ(d.levels[1].units.size(), 2u);
    EXPECT_EQ(d.levels[1].units[0].id, "a");
    EXPECT_EQ(d.levels[1].units[0].values, (std::vector<double>{0.1, 0.2}));
    EXPECT_EQ(d.levels[1].units[1].times.size(), 1u);
    // Highest stress defaults to the largest level.
    EXPECT_EQ(d.stress_spec.s_high, 100.0);
    EXPECT_EQ(d.stress_spec.s0, 40.0);
}

TEST(DatasetCsv, Errors) {
    EXPECT_NE(parse_error("").find("empty file"), std::string::npos);
    EXPECT_NE(parse_error("# only a comment\n").find("empty file"), std::string::npos);
    EXPECT_NE(parse_error("stress,unit,time,value\n").find("no data rows"), std::string::npos);
    EXPECT_NE(parse_error("stress,unit,value\n80,a,1\n").find("missing column 'time'"), std::string::npos);

    const auto dec = parse_error("stress,unit,time,value\n80,a,20,1\n80,a,10,2\n");
    EXPECT_NE(dec.find("decreasing time"), std::string::npos) << dec;
    EXPECT_NE(dec.find("unit 'a'"), std::string::npos) << dec;
    EXPECT_NE(dec.find("line 3"), std::string::npos) << dec;

    EXPECT_NE(parse_error("stress,unit,time,value\n80,a,10,1\n80,a,10,2\n").find("duplicate time"), std::string::npos);
    EXPECT_NE(parse_error("stress,unit,time,value\n80,a,ten,1\n").find("line 2"), std::string::npos);
    EXPECT_NE(parse_error("stress,unit,time,value\n80,,10,1\n").find("empty unit"), std::string::npos);
    EXPECT_NE(parse_error("stress,unit,time,value\n80,a,10\n").find("expected at least 4"), std::string::npos);
    EXPECT_THROW(parse("stress,unit,time,value\n80,a,0,1\n"), Error);
    EXPECT_THROW(ingest_csv("/nonexistent/file.csv", {}), ParseError);
}

TEST(ThetaJson, RoundTripAndScales) {
    const auto th = Theta::from_sd(9.144e-6, 9.559e-7, 2.286, 1.534, 0.104, 0.073);
    const auto back = theta_from_json(json::parse(to_json(th).dump()));
    EXPECT_EQ(back, th);

    const auto sd = theta_from_json(json{{"mu_a", 1e-5}, {"sigma_a", 2e-6}, {"alpha1", 2.5}, {"beta", 1.5},
                                         {"sigma", 0.1}, {"H", 0.1}});
    EXPECT_EQ(sd, SimDesign::reference_theta());

    const auto m3 = theta_from_json(json{{"variant", "M3"}, {"mu_a", 1.0}, {"sigma_a2", 4.0}, {"alpha1", 0.0},
                                         {"beta", 1.0}, {"sigma2", 1.0}, {"H", 0.2}});
    EXPECT_EQ(m3.sigma_a2, 0.0);
    EXPECT_EQ(m3.h.value(), 0.5);

    EXPECT_THROW(theta_from_json(json{{"mu_a", 1.0}}), ParseError);
    EXPECT_THROW(theta_from_json(json{{"mu_a", 1.0}, {"alpha1", 0.0}, {"beta", -1.0}, {"sigma", 1.0}}), DomainError);
}

TEST(ThetaJson, LoadFromReportShapes) {
    FitResult r;
    r.theta_hat = SimDesign::reference_theta();
    const json entry = to_json(r);
    EXPECT_EQ(load_theta(json{{"fits", json::array({entry})}}), r.theta_hat);
    EXPECT_EQ(load_theta(entry), r.theta_hat);
    EXPECT_EQ(load_theta(to_json(r.theta_hat)), r.theta_hat);
    EXPECT_THROW(load_theta(json{{"fits", json::array()}}), ParseError);
    EXPECT_EQ(entry["n_params"], 6);
    EXPECT_EQ(entry["method"], "em");
}

TEST(RunConfig, JsonRoundTrip) {
    RunConfig c;
    c.master_seed = 123456789012345ULL;
    c.output_dir = "results";
    c.stress.highest_stress = 125.0;
    c.variants = {Variant::M0, Variant::M3};
    c.method = FitMethod::TwoStep;
    c.bounds.alpha1_lo = -5.0;
    c.design.n_units = 12;
    c.design.theta = Theta::from_sd(2e-5, 1e-6, 2.0, 1.2, 0.2, 0.3);
    c.mc.theta = SimDesign::reference_theta(Variant::M2);
    c.mc.stress = 45.0;
    c.mc.workers = 4;
    c.held_out = HeldOut::HighestStress;
    const auto back = config_from_json(json::parse(to_json(c).dump()));
    EXPECT_EQ(back, c);
}

TEST(RunConfig, PartialConfigKeepsDefaults) {
    const auto c = config_from_json(json::parse(R"({"master_seed": 7, "fit": {"variants": ["M2"]}})"));
    EXPECT_EQ(c.master_seed, 7u);
    EXPECT_EQ(c.variants, std::vector<Variant>{Variant::M2});
    EXPECT_EQ(c.mc.n_paths, 10000u);
    EXPECT_EQ(c.er_paths, 1000u);
    EXPECT_EQ(c.stress.normal_stress, 40.0);
}

TEST(RunConfig, RejectsUnknownKeysAndBadValues) {
    EXPECT_THROW(config_from_json(json::parse(R"({"seed": 1})")), ParseError);
    EXPECT_THROW(config_from_json(json::parse(R"({"fit": {"epsilon": 0.01, "tolerance": 1}})")), ParseError);
    EXPECT_THROW(config_from_json(json::parse(R"({"fit": {"epsilon": -1}})")), Error);
    EXPECT_THROW(config_from_json(json::parse(R"({"fit": {"bounds": {"beta": [1]}}})")), ParseError);
    EXPECT_THROW(config_from_json(json::parse(R"({"fit": {"method": "bayes"}})")), Error);
    EXPECT_THROW(load_config("/nonexistent/config.json"), ParseError);
}

TEST(RunConfig, HashIgnoresExecutionSettingsOnly) {
    RunConfig a;
    const auto h = config_hash(a);
    EXPECT_EQ(h.size(), 16u);
    EXPECT_EQ(config_hash(a), h);
    RunConfig b = a;
    b.output_dir = "elsewhere";
    b.mc.workers = 8;
    EXPECT_EQ(config_hash(b), h);
    b.master_seed = 1;
    EXPECT_NE(config_hash(b), h);
    RunConfig c = a;
    c.mc.n_paths = 9999;
    EXPECT_NE(config_hash(c), h);
}

TEST(Reports, CurveCsvAndJson) {
    ReliabilityCurve c;
    c.times = TimeGrid({0.0, 10.0, 20.0});
    c.r_values = {1.0, 0.75, 0.5};
    c.n_paths = 4;
    c.censored_fraction = 0.5;
    std::ostringstream out;
    write_curve_csv(out, c);
    const std::string body = "time_hours,reliability,n_paths,censored_fraction\n0,1,4,0.5\n10,0.75,4,0.5\n20,0.5,4,0.5\n";
    ASSERT_GE(out.str().size(), body.size());
    EXPECT_EQ(out.str().substr(out.str().size() - body.size()), body);
    EXPECT_EQ(out.str().front(), '#');
    const json j = to_json(c);
    EXPECT_EQ(j["reliability"].size(), 3u);
    EXPECT_EQ(j["n_paths"], 4);
}
