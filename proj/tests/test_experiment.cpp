#include "nodal/experiment.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <sstream>

using namespace nodal;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("nodalstat_test_" + name);
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

ExperimentConfig census_config(const fs::path& out, std::vector<int> degrees, int samples) {
    ExperimentConfig c;
    c.kind = ExperimentKind::Census;
    c.degrees = std::move(degrees);
    c.samples = samples;
    c.out = out.string();
    return c;
}

}  // namespace

TEST(Config, RoundTripsThroughJson) {
    ExperimentConfig c;
    c.kind = ExperimentKind::Caricature;
    c.ensemble = {{"kind", "gaussian_band"}, {"sigma", 3.0}};
    c.degrees = {10, 12};
    c.alpha = 1e-7;
    c.seed = 0xfedcba9876543210ULL;
    const nlohmann::json j = c.to_json();
    const ExperimentConfig d = ExperimentConfig::from_json(nlohmann::json::parse(j.dump()));
    EXPECT_EQ(d.to_json(), j);
    EXPECT_EQ(d.hash(), c.hash());
    EXPECT_EQ(d.seed, c.seed);
    EXPECT_EQ(d.spec_for(10), EnsembleSpec::gaussian_band(10, 3.0));

    ExperimentConfig e = c;
    e.out = "elsewhere";
    e.jobs = 7;
    EXPECT_EQ(e.hash(), c.hash());
    e.seed = 1;
    EXPECT_NE(e.hash(), c.hash());
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
    EXPECT_THROW(ExperimentConfig::from_json({{"degres", {10}}}), InvalidSpec);
    EXPECT_THROW(ExperimentConfig::from_json({{"samples", 0}}), InvalidSpec);
    EXPECT_THROW(ExperimentConfig::from_json({{"samples", "many"}}), InvalidSpec);
    EXPECT_THROW(ExperimentConfig::from_json({{"kind", "caricature"}, {"mode", "projective"}}), InvalidSpec);
    EXPECT_THROW(ExperimentConfig::from_json({{"ensemble", "white"}}), InvalidSpec);
    EXPECT_THROW(experiment_kind("plot"), InvalidSpec);
}

TEST(Config, OverridesParseJsonValues) {
    nlohmann::json j = nlohmann::json::object();
    apply_override(j, "degrees=[5,10]");
    apply_override(j, "ensemble.kind=gaussian_band");
    apply_override(j, "ensemble.sigma=2.5");
    apply_override(j, "mode=projective");
    EXPECT_EQ(j["degrees"], nlohmann::json({5, 10}));
    EXPECT_EQ(j["ensemble"]["kind"], "gaussian_band");
    EXPECT_EQ(j["ensemble"]["sigma"], 2.5);
    EXPECT_EQ(j["mode"], "projective");
    EXPECT_NO_THROW(ExperimentConfig::from_json(j));
    EXPECT_THROW(apply_override(j, "novalue"), InvalidSpec);
}

TEST(Statistics, JackknifeMatchesDeleteOneByHand) {
    const std::vector<double> x{3, 1, 4, 1, 5, 9, 2, 6, 5, 3};
    const JackknifeStat s = jackknife(x);
    const double n = x.size();
    auto var = [](const std::vector<double>& v) {
        double m = 0;
        for (double a : v) m += a;
        m /= v.size();
        double s2 = 0;
        for (double a : v) s2 += (a - m) * (a - m);
        return s2 / (v.size() - 1);
    };
    std::vector<double> loo;
    for (std::size_t i = 0; i < x.size(); ++i) {
        std::vector<double> y = x;
        y.erase(y.begin() + i);
        loo.push_back(var(y));
    }
    double m = 0, m2 = 0;
    for (double v : loo) m += v / n;
    for (double v : loo) m2 += (v - m) * (v - m);
    EXPECT_NEAR(s.variance, var(x), 1e-12);
    EXPECT_NEAR(s.variance_se, std::sqrt((n - 1) / n * m2), 1e-12);
    EXPECT_NEAR(s.mean, 3.9, 1e-12);
}

TEST(Statistics, ScalingReportOnSyntheticRecords) {
    // two-point values +-a with sample variance exactly n^2
    auto make = [](double var, int N) {
        const double a = std::sqrt(var * (N - 1.0) / N);
        std::vector<double> v;
        for (int i = 0; i < N; ++i) v.push_back(i % 2 ? a : -a);
        return v;
    };
    std::map<int, std::vector<double>> sq, flat;
    for (int n : {10, 20, 30, 40}) {
        sq[n] = make(double(n) * n, 200);
        flat[n] = make(5.0, 200);
    }
    const ScalingReport r = variance_scan_report(sq);
    EXPECT_NEAR(r.slope, 2.0, 1e-12);
    EXPECT_TRUE(r.positive_power);
    EXPECT_NEAR(r.to_json()["distance_from_reference"].get<double>(), 0.0, 1e-12);
    const ScalingReport f = variance_scan_report(flat);
    EXPECT_NEAR(f.slope, 0.0, 1e-12);
    EXPECT_FALSE(f.positive_power);

    sq.erase(40);
    sq.erase(30);
    EXPECT_THROW(variance_scan_report(sq), DomainError);
    flat[10].resize(50);
    EXPECT_THROW(variance_scan_report(flat), DomainError);
}

TEST(Run, DegreeOneCensusHasTwoDomains) {
    const auto out = scratch("deg1");
    const RunRecord r = run(census_config(out, {1}, 10));
    ASSERT_TRUE(r.complete);
    ASSERT_EQ(r.rows.size(), 10u);
    for (const auto& row : r.rows) {
        ASSERT_TRUE(row.ok) << row.error;
        EXPECT_EQ(row.fields[0], "2");
        EXPECT_EQ(row.fields[1], "1");
    }
    for (const char* f : {"manifest.json", "samples.csv", "summary.json", "timings.csv"}) EXPECT_TRUE(fs::exists(out / f)) << f;
    EXPECT_FALSE(fs::exists(out / "samples.partial.jsonl"));
    const auto manifest = nlohmann::json::parse(slurp(out / "manifest.json"));
    EXPECT_EQ(manifest["config_hash"], r.config_hash);
    EXPECT_EQ(ExperimentConfig::from_json(manifest["config"]).hash(), r.config_hash);
}

TEST(Run, RerunsAreByteIdentical) {
    const auto a = scratch("det_a"), b = scratch("det_b");
    ExperimentConfig c = census_config(a, {3, 6}, 6);
    run(c);
    run(c);  // same directory again
    const std::string first = slurp(a / "samples.csv");
    c.out = b.string();
    c.jobs = 3;
    run(c);
    EXPECT_EQ(first, slurp(b / "samples.csv"));
    EXPECT_EQ(first, slurp(a / "samples.csv"));
}

TEST(Run, InterruptedRunResumesToTheSameRecord) {
    const auto whole = scratch("resume_whole"), cut = scratch("resume_cut");
    ExperimentConfig c = census_config(whole, {4, 5}, 5);
    c.kind = ExperimentKind::Sample;
    run(c);
    c.out = cut.string();
    RunOptions ro;
    ro.max_new_samples = 3;
    const RunRecord partial = run(c, ro);
    EXPECT_FALSE(partial.complete);
    EXPECT_EQ(partial.rows.size(), 3u);
    EXPECT_FALSE(fs::exists(cut / "samples.csv"));
    {
        std::ofstream os(cut / "samples.partial.jsonl", std::ios::app);
        os << "{\"degree\": 5, \"index\": 1, \"ok\": tr";  // torn write
    }
    const RunRecord resumed = run(c);
    EXPECT_TRUE(resumed.complete);
    EXPECT_EQ(resumed.resumed, 3);
    EXPECT_EQ(slurp(whole / "samples.csv"), slurp(cut / "samples.csv"));
    auto strip = [](nlohmann::json j) {
        j.erase("wall_time_s");
        return j;
    };
    EXPECT_EQ(strip(nlohmann::json::parse(slurp(whole / "summary.json"))),
              strip(nlohmann::json::parse(slurp(cut / "summary.json"))));
}

TEST(Run, DirectoryOfAnotherConfigIsRefused) {
    const auto out = scratch("clash");
    ExperimentConfig c = census_config(out, {1}, 2);
    run(c);
    c.samples = 3;
    EXPECT_THROW(run(c), Error);
}

TEST(Run, FailingSamplesAreSkippedAndRecorded) {
    const auto out = scratch("skip");
    ExperimentConfig c = census_config(out, {1, 400}, 2);
    c.oversample = 64;  // degree 400 needs a grid beyond the budget
    const RunRecord r = run(c);
    ASSERT_TRUE(r.complete);
    EXPECT_EQ(r.skipped, 2);
    const auto s = nlohmann::json::parse(slurp(out / "summary.json"));
    ASSERT_EQ(s["skipped"].size(), 2u);
    EXPECT_NE(s["skipped"][0]["error"].get<std::string>().find("subdivision level"), std::string::npos);
    std::vector<std::string> cols;
    const auto rows = parse_samples_csv(slurp(out / "samples.csv"), &cols);
    ASSERT_EQ(rows.size(), 4u);
    EXPECT_TRUE(rows[0].ok);
    EXPECT_FALSE(rows[3].ok);
    EXPECT_EQ(cols, sample_columns(ExperimentKind::Census));
}

TEST(Run, CsvParserRoundTrip) {
    const auto out = scratch("csv");
    const RunRecord r = run(census_config(out, {2}, 4));
    const auto rows = parse_samples_csv(r.samples_csv());
    ASSERT_EQ(rows.size(), r.rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) EXPECT_EQ(rows[i].fields, r.rows[i].fields);
    EXPECT_THROW(parse_samples_csv("degree,index\n"), Error);
    EXPECT_THROW(parse_samples_csv("# nodalstat samples v999 kind=census\n"), Error);
}

TEST(Run, VarianceScanSummaryCarriesTheFit) {
    const auto out = scratch("scan");
    ExperimentConfig c = census_config(out, {4, 5, 6}, 100);
    c.kind = ExperimentKind::VarianceScan;
    const RunRecord r = run(c);
    ASSERT_TRUE(r.complete);
    ASSERT_TRUE(r.scaling.has_value()) << r.scaling_error;
    const auto s = nlohmann::json::parse(slurp(out / "summary.json"));
    EXPECT_TRUE(s["scaling"].contains("ci95"));
    EXPECT_EQ(s["scaling"]["reference_slope"], 2.0);
    EXPECT_TRUE(std::isfinite(r.scaling->slope));

    const auto o2 = scratch("scan_small");
    const RunRecord small = run(census_config(o2, {2, 3}, 5));
    EXPECT_FALSE(small.scaling.has_value());
}

TEST(Lemmas, RandomInstancesPass) {
    for (const auto& id : lemma_ids()) {
        for (std::uint64_t s = 0; s < 8; ++s) {
            const auto v = lemma_instance(id, s);
            EXPECT_TRUE(v["pass"].get<bool>()) << id << " seed " << s << ": " << v.dump();
            EXPECT_EQ(v["lemma"], id);
        }
    }
    EXPECT_THROW(lemma_instance("riemann", 0), InvalidSpec);
}

TEST(Lemmas, CorpusRunCountsViolations) {
    const auto out = scratch("lemmas");
    ExperimentConfig c;
    c.kind = ExperimentKind::Lemmas;
    c.degrees = {1};
    c.samples = 10;
    c.out = out.string();
    const RunRecord r = run(c);
    const auto d = r.summary_json()["derived"];
    for (const auto& id : lemma_ids()) {
        EXPECT_EQ(d[id]["instances"], 2) << id;
        EXPECT_EQ(d[id]["violations"], 0) << id;
    }
}

TEST(Run, LoopModelAndCaricatureRows) {
    const auto o1 = scratch("loops");
    ExperimentConfig c;
    c.kind = ExperimentKind::LoopModel;
    c.degrees = {6};
    c.samples = 2;
    c.trials = 2000;
    c.out = o1.string();
    const RunRecord r = run(c);
    ASSERT_TRUE(r.rows[0].ok) << r.rows[0].error;
    EXPECT_EQ(r.rows[0].fields[0], "6");
    EXPECT_FALSE(r.rows[0].fields[5].empty());  // exact variance at |V| <= 12

    const auto o2 = scratch("caricature");
    ExperimentConfig k;
    k.kind = ExperimentKind::Caricature;
    k.degrees = {10};
    k.samples = 2;
    k.alpha_prime = 0.0;
    k.out = o2.string();
    const RunRecord q = run(k);
    for (const auto& row : q.rows) {
        ASSERT_TRUE(row.ok) << row.error;
        EXPECT_EQ(row.fields[6], "1");  // identity perturbation always matches
    }
}
