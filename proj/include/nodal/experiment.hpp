#pragma once

#include "nodal/sphere_field.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace nodal {

inline constexpr const char* kSoftwareVersion = "nodalstat 1.0";
inline constexpr int kCsvSchemaVersion = 1;

enum class ExperimentKind { Sample, Census, Critical, Caricature, LoopModel, Lemmas, VarianceScan };

const char* to_string(ExperimentKind k);
ExperimentKind experiment_kind(const std::string& name);

struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::Census;
    /// "harmonic", or {"kind": "gaussian_band", "sigma": s} (band centred on each degree, L = degree).
    nlohmann::json ensemble = "harmonic";
    std::vector<int> degrees{10};
    int samples = 10;
    double oversample = 4.0;
    std::string mode = "sphere";  // or "projective"
    /// Caricature: alpha <= 0 picks 0.5 / (1000 A^5); alpha_prime < 0 picks fraction * alpha / (10 A).
    double alpha = 0.0;
    double alpha_prime = -1.0;
    double alpha_prime_fraction = 0.5;
    /// Loop model: degrees are map sizes |V|; p0 and Monte Carlo trials per map.
    double p0 = 0.25;
    long long trials = 100000;
    std::uint64_t seed = 1;
    std::string out = "run";
    int jobs = 1;

    void validate() const;
    EnsembleSpec spec_for(int degree) const;

    nlohmann::json to_json() const;
    /// Unknown keys are rejected.
    static ExperimentConfig from_json(const nlohmann::json& j);
    /// FNV-1a of the canonical JSON without the output-only keys (out, jobs).
    std::string hash() const;
};

/// "a.b=value": value parsed as JSON when possible, otherwise taken as a string.
void apply_override(nlohmann::json& config, const std::string& assignment);

struct SampleRow {
    int degree = 0;
    int index = 0;
    bool ok = true;
    std::string error;
    std::vector<std::string> fields;
    double wall_ms = 0.0;

    nlohmann::json to_json() const;
    static SampleRow from_json(const nlohmann::json& j);
};

std::vector<std::string> sample_columns(ExperimentKind k);
/// One sample; module errors are caught and returned as a skipped row. Streams keyed by (seed, degree, index).
SampleRow run_sample(const ExperimentConfig& c, int degree, int index);

struct JackknifeStat {
    int n = 0;
    double mean = 0.0, mean_se = 0.0;
    double variance = 0.0, variance_se = 0.0;
};

/// Sample mean and unbiased variance with delete-one jackknife standard errors.
JackknifeStat jackknife(const std::vector<double>& x);

struct ScalingReport {
    std::vector<int> degrees;
    std::vector<double> variance, variance_se;
    double slope = 0.0, slope_se = 0.0, ci_lo = 0.0, ci_hi = 0.0;
    bool positive_power = false;  // ci_lo > 0
    double reference_slope = 2.0;

    nlohmann::json to_json() const;
};

/// Weighted fit of log Var[N] against log n (weights from the jackknife errors of log Var),
/// with a 95% interval. Needs >= 3 degrees and >= 100 values each, otherwise DomainError.
ScalingReport variance_scan_report(const std::map<int, std::vector<double>>& values_by_degree);

struct RunRecord {
    ExperimentConfig config;
    std::string config_hash;
    std::vector<std::string> columns;
    std::vector<SampleRow> rows;  // sorted by (degree, index)
    bool complete = false;
    int skipped = 0;
    int resumed = 0;  // rows taken over from an earlier interrupted run
    /// per degree, per numeric column
    std::map<int, std::map<std::string, JackknifeStat>> stats;
    std::optional<ScalingReport> scaling;
    std::string scaling_error;
    double wall_time_s = 0.0;

    nlohmann::json summary_json() const;
    std::string samples_csv() const;
};

struct RunOptions {
    /// Stop after this many new samples (simulates an interrupted run); negative: no limit.
    long max_new_samples = -1;
    std::ostream* log = nullptr;
};

/// Writes manifest.json, samples.csv, summary.json and timings.csv under config.out.
/// Completed samples of an interrupted run with the same config hash are kept and skipped.
RunRecord run(const ExperimentConfig& config, const RunOptions& opts = {});

/// Rows of a samples.csv (header comment and column line checked).
std::vector<SampleRow> parse_samples_csv(const std::string& text, std::vector<std::string>* columns = nullptr);

/// One randomized lemma instance: {"lemma", "parameters", "measured", "pass"}.
/// Lemma ids: langer, bernoulli, large_sections, exp_sum, coupling.
nlohmann::json lemma_instance(const std::string& lemma, std::uint64_t seed);
const std::vector<std::string>& lemma_ids();

}  // namespace nodal
