#include "nodal/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace nodal {

namespace {

const std::vector<std::pair<ExperimentKind, const char*>> kKinds = {
    {ExperimentKind::Sample, "sample"},         {ExperimentKind::Census, "census"},
    {ExperimentKind::Critical, "critical"},     {ExperimentKind::Caricature, "caricature"},
    {ExperimentKind::LoopModel, "loopmodel"},   {ExperimentKind::Lemmas, "lemmas"},
    {ExperimentKind::VarianceScan, "variance-scan"}};

const std::vector<std::string> kKeys = {"kind",  "ensemble", "degrees", "samples", "oversample",
                                        "mode",  "alpha",    "alpha_prime", "alpha_prime_fraction",
                                        "p0",    "trials",   "seed",    "out",     "jobs"};

}  // namespace

const char* to_string(ExperimentKind k) {
    for (const auto& [kind, name] : kKinds)
        if (kind == k) return name;
    return "?";
}

ExperimentKind experiment_kind(const std::string& name) {
    for (const auto& [kind, n] : kKinds)
        if (name == n) return kind;
    throw InvalidSpec("unknown experiment kind '" + name + "'");
}

void ExperimentConfig::validate() const {
    if (degrees.empty()) throw InvalidSpec("degree list is empty");
    for (int d : degrees)
        if (d < 1) throw InvalidSpec("degrees must be positive");
    if (samples < 1) throw InvalidSpec("samples must be positive");
    if (!(oversample >= 2.0 && oversample <= 64.0)) throw InvalidSpec("oversample must lie in [2, 64]");
    if (mode != "sphere" && mode != "projective") throw InvalidSpec("mode must be 'sphere' or 'projective'");
    if (kind == ExperimentKind::Caricature && mode != "sphere") throw InvalidSpec("caricature runs on the sphere");
    if (!(p0 > 0 && p0 <= 0.5)) throw InvalidSpec("p0 must lie in (0, 1/2]");
    if (trials < 1) throw InvalidSpec("trials must be positive");
    if (jobs < 1) throw InvalidSpec("jobs must be positive");
    if (!(alpha_prime_fraction > 0)) throw InvalidSpec("alpha_prime_fraction must be positive");
    if (out.empty()) throw InvalidSpec("output directory is empty");
    spec_for(degrees.front());
}

EnsembleSpec ExperimentConfig::spec_for(int degree) const {
    if (ensemble.is_string() && ensemble.get<std::string>() == "harmonic") return EnsembleSpec::spherical_harmonic(degree);
    if (ensemble.is_object() && ensemble.value("kind", "") == "gaussian_band") {
        const double sigma = ensemble.value("sigma", 0.0);
        if (!(sigma > 0)) throw InvalidSpec("gaussian_band needs sigma > 0");
        return EnsembleSpec::gaussian_band(degree, sigma);
    }
    throw InvalidSpec("ensemble must be \"harmonic\" or {\"kind\": \"gaussian_band\", \"sigma\": s}");
}

nlohmann::json ExperimentConfig::to_json() const {
    return {{"kind", to_string(kind)},
            {"ensemble", ensemble},
            {"degrees", degrees},
            {"samples", samples},
            {"oversample", oversample},
            {"mode", mode},
            {"alpha", alpha},
            {"alpha_prime", alpha_prime},
            {"alpha_prime_fraction", alpha_prime_fraction},
            {"p0", p0},
            {"trials", trials},
            {"seed", seed},
            {"out", out},
            {"jobs", jobs}};
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw InvalidSpec("config must be a JSON object");
    for (const auto& [k, v] : j.items())
        if (std::find(kKeys.begin(), kKeys.end(), k) == kKeys.end()) throw InvalidSpec("unknown config key '" + k + "'");
    ExperimentConfig c;
    try {
        if (j.contains("kind")) c.kind = experiment_kind(j["kind"].get<std::string>());
        if (j.contains("ensemble")) c.ensemble = j["ensemble"];
        if (j.contains("degrees")) c.degrees = j["degrees"].get<std::vector<int>>();
        c.samples = j.value("samples", c.samples);
        c.oversample = j.value("oversample", c.oversample);
        c.mode = j.value("mode", c.mode);
        c.alpha = j.value("alpha", c.alpha);
        c.alpha_prime = j.value("alpha_prime", c.alpha_prime);
        c.alpha_prime_fraction = j.value("alpha_prime_fraction", c.alpha_prime_fraction);
        c.p0 = j.value("p0", c.p0);
        c.trials = j.value("trials", c.trials);
        c.seed = j.value("seed", c.seed);
        c.out = j.value("out", c.out);
        c.jobs = j.value("jobs", c.jobs);
    } catch (const nlohmann::json::exception& e) {
        throw InvalidSpec(std::string("bad config value: ") + e.what());
    }
    c.validate();
    return c;
}

std::string ExperimentConfig::hash() const {
    nlohmann::json j = to_json();
    j.erase("out");
    j.erase("jobs");
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : j.dump()) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void apply_override(nlohmann::json& config, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw InvalidSpec("override must look like key=value: " + assignment);
    const std::string key = assignment.substr(0, eq), text = assignment.substr(eq + 1);
    nlohmann::json value = nlohmann::json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;
    nlohmann::json* node = &config;
    std::size_t start = 0;
    for (;;) {
        const auto dot = key.find('.', start);
        const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (part.empty()) throw InvalidSpec("empty key component in " + key);
        if (!node->is_object()) *node = nlohmann::json::object();
        if (dot == std::string::npos) {
            (*node)[part] = value;
            return;
        }
        node = &(*node)[part];
        start = dot + 1;
    }
}

// ---------------------------------------------------------------- statistics

JackknifeStat jackknife(const std::vector<double>& x) {
    JackknifeStat s;
    s.n = static_cast<int>(x.size());
    const double n = s.n;
    if (s.n == 0) return s;
    for (double v : x) s.mean += v;
    s.mean /= n;
    if (s.n < 2) return s;
    double S = 0.0;
    for (double v : x) S += (v - s.mean) * (v - s.mean);
    s.variance = S / (n - 1);
    s.mean_se = std::sqrt(s.variance / n);
    if (s.n < 3) return s;
    // delete-one variances: S_i = S - (x_i - mean)^2 n / (n - 1)
    double m = 0.0, m2 = 0.0;
    for (double v : x) {
        const double vi = (S - (v - s.mean) * (v - s.mean) * n / (n - 1)) / (n - 2);
        m += vi;
        m2 += vi * vi;
    }
    m /= n;
    s.variance_se = std::sqrt(std::max(0.0, (n - 1) * (m2 / n - m * m)));
    return s;
}

ScalingReport variance_scan_report(const std::map<int, std::vector<double>>& values_by_degree) {
    if (values_by_degree.size() < 3) throw DomainError("variance scan needs at least 3 degrees");
    ScalingReport r;
    std::vector<double> x, y, w;
    for (const auto& [n, v] : values_by_degree) {
        if (v.size() < 100) throw DomainError("variance scan needs at least 100 samples at degree " + std::to_string(n));
        const JackknifeStat s = jackknife(v);
        if (!(s.variance > 0)) throw DomainError("zero variance at degree " + std::to_string(n));
        r.degrees.push_back(n);
        r.variance.push_back(s.variance);
        r.variance_se.push_back(s.variance_se);
        x.push_back(std::log(double(n)));
        y.push_back(std::log(s.variance));
        const double se_log = s.variance_se / s.variance;
        w.push_back(se_log > 0 ? 1.0 / (se_log * se_log) : 0.0);
    }
    const bool weighted = std::all_of(w.begin(), w.end(), [](double v) { return v > 0; });
    if (!weighted) std::fill(w.begin(), w.end(), 1.0);
    double sw = 0, mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sw += w[i];
        mx += w[i] * x[i];
        my += w[i] * y[i];
    }
    mx /= sw;
    my /= sw;
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += w[i] * (x[i] - mx) * (x[i] - mx);
        sxy += w[i] * (x[i] - mx) * (y[i] - my);
    }
    if (!(sxx > 0)) throw DomainError("degrees must be distinct");
    r.slope = sxy / sxx;
    double chi2 = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double e = y[i] - my - r.slope * (x[i] - mx);
        chi2 += w[i] * e * e;
    }
    const double dof = double(x.size()) - 2.0;
    // model error, inflated by the scatter when the points disagree with it
    r.slope_se = weighted ? std::sqrt(std::max(1.0, chi2 / dof) / sxx) : std::sqrt(chi2 / dof / sxx);
    r.ci_lo = r.slope - 1.96 * r.slope_se;
    r.ci_hi = r.slope + 1.96 * r.slope_se;
    r.positive_power = r.ci_lo > 0;
    return r;
}

nlohmann::json ScalingReport::to_json() const {
    return {{"degrees", degrees},
            {"variance", variance},
            {"variance_se", variance_se},
            {"slope", slope},
            {"slope_se", slope_se},
            {"ci95", {ci_lo, ci_hi}},
            {"verdict", positive_power ? "positive-power growth" : "no positive power established"},
            {"reference_slope", reference_slope},
            {"distance_from_reference", slope - reference_slope}};
}

}  // namespace nodal
