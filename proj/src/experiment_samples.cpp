#include "nodal/census.hpp"
#include "nodal/critical.hpp"
#include "nodal/experiment.hpp"
#include "nodal/lemmas.hpp"
#include "nodal/loop_model.hpp"
#include "nodal/morse.hpp"
#include "nodal/rng.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <tuple>

namespace nodal {

namespace {

std::string num(double x) {
    if (!std::isfinite(x)) return "";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}
std::string num(int x) { return std::to_string(x); }
std::string num(bool x) { return x ? "1" : "0"; }

const SphereGrid& cached_grid(int degree, double oversample, GridMode mode) {
    static std::mutex mu;
    static std::map<std::tuple<int, double, int>, SphereGrid> cache;
    std::lock_guard lock(mu);
    const auto key = std::make_tuple(degree, oversample, static_cast<int>(mode));
    auto it = cache.find(key);
    if (it == cache.end()) it = cache.emplace(key, build_grid(degree, oversample, mode)).first;
    return it->second;
}

GridMode grid_mode(const ExperimentConfig& c) { return c.mode == "projective" ? GridMode::Projective : GridMode::Sphere; }

std::vector<std::string> census_fields(const ExperimentConfig& c, int degree, const FieldSample& f) {
    const NodalCensus r = census(f, cached_grid(degree, c.oversample, grid_mode(c)));
    return {num(r.n_domains),     num(r.n_loops),   num(r.positive_domains), num(r.negative_domains),
            num(r.flagged_cells), num(r.uncertain()), num(r.n_loops_min),    num(r.n_loops_max)};
}

std::vector<std::string> critical_fields(const ExperimentConfig& c, int degree, const FieldSample& f) {
    const CritExtraction r = find_critical_points(f, cached_grid(degree, c.oversample, grid_mode(c)));
    return {num(r.n_min),      num(r.n_max),    num(r.n_saddle), num(r.n_degenerate),
            num(r.complete),   num(r.morse_ok), num(r.A),        num(r.grid_level)};
}

std::vector<std::string> caricature_fields(const ExperimentConfig& c, int degree, int index) {
    const EnsembleSpec spec = c.spec_for(degree);
    const FieldSample f = sample_field(spec, stream_key(c.seed, {std::uint64_t(degree), std::uint64_t(index), 0}));
    const FieldSample g = sample_field(spec, stream_key(c.seed, {std::uint64_t(degree), std::uint64_t(index), 1}));
    const double A = c3_norm(f);
    CaricatureParams p;
    p.alpha = c.alpha > 0 ? c.alpha : 0.5 / (1000.0 * std::pow(A, 5));
    p.alpha_prime = c.alpha_prime >= 0 ? c.alpha_prime : c.alpha_prime_fraction * p.alpha / (10.0 * A);
    const CaricatureResult r = caricature_decomposition(f, g, p);
    return {num(p.alpha), num(p.alpha_prime), num(r.N_I),      num(r.N_II),      num(r.N_III),
            num(r.N_direct), num(r.match),   num(r.regime_ok), num(r.n_joints), num(r.n_disks)};
}

std::vector<std::string> loop_fields(const ExperimentConfig& c, int size, int index) {
    const std::uint64_t key = stream_key(c.seed, {std::uint64_t(size), std::uint64_t(index)});
    const FourRegularMap m = random_planar_map(size, key);
    Rng rng = make_rng(key, {1});
    LoopEnsembleParams params;
    params.p0 = c.p0;
    for (int v = 0; v < m.n_vertices(); ++v) params.p.push_back(c.p0 + (1.0 - 2.0 * c.p0) * uniform01(rng));
    const bool exact = m.n_vertices() <= 12;
    const VarianceResult r = variance_experiment(m, params, c.trials, stream_key(key, {2}), exact);
    const int nr = params.n_in_range();
    return {num(m.n_vertices()), num(nr), num(r.monte_carlo.mean), num(r.monte_carlo.variance),
            num(nr > 0 ? r.monte_carlo.variance / nr : std::nan("")),
            r.exact ? num(r.exact->variance) : std::string()};
}

}  // namespace

std::vector<std::string> sample_columns(ExperimentKind k) {
    switch (k) {
        case ExperimentKind::Sample: return {"sample_seed", "value_north", "grad_north", "coefficient_sq_sum"};
        case ExperimentKind::Census:
        case ExperimentKind::VarianceScan:
            return {"n_domains",     "n_loops",  "positive_domains", "negative_domains",
                    "flagged_cells", "uncertain", "n_loops_min",     "n_loops_max"};
        case ExperimentKind::Critical:
            return {"n_min", "n_max", "n_saddle", "n_degenerate", "complete", "morse_ok", "A", "grid_level"};
        case ExperimentKind::Caricature:
            return {"alpha", "alpha_prime", "N_I", "N_II", "N_III", "N_direct", "match", "regime_ok", "n_joints", "n_disks"};
        case ExperimentKind::LoopModel:
            return {"n_vertices", "n_in_range", "mean", "variance", "variance_over_n", "exact_variance"};
        case ExperimentKind::Lemmas: return {"lemma", "pass", "value"};
    }
    return {};
}

SampleRow run_sample(const ExperimentConfig& c, int degree, int index) {
    SampleRow row;
    row.degree = degree;
    row.index = index;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        const std::uint64_t key = stream_key(c.seed, {std::uint64_t(degree), std::uint64_t(index)});
        switch (c.kind) {
            case ExperimentKind::Sample: {
                const FieldSample f = sample_field(c.spec_for(degree), key);
                const auto [v, g] = f.value_and_gradient(Vec3::UnitZ());
                double s = 0.0;
                for (const auto& l : f.coefficients())
                    for (double a : l) s += a * a;
                row.fields = {std::to_string(key), num(v), num(g.norm()), num(s)};
                break;
            }
            case ExperimentKind::Census:
            case ExperimentKind::VarianceScan:
                row.fields = census_fields(c, degree, sample_field(c.spec_for(degree), key));
                break;
            case ExperimentKind::Critical:
                row.fields = critical_fields(c, degree, sample_field(c.spec_for(degree), key));
                break;
            case ExperimentKind::Caricature: row.fields = caricature_fields(c, degree, index); break;
            case ExperimentKind::LoopModel: row.fields = loop_fields(c, degree, index); break;
            case ExperimentKind::Lemmas: {
                const std::string& id = lemma_ids()[index % lemma_ids().size()];
                const auto v = lemma_instance(id, key);
                row.fields = {id, num(v["pass"].get<bool>()), num(v["measured"]["value"].get<double>())};
                break;
            }
        }
    } catch (const std::exception& e) {
        row.ok = false;
        row.error = e.what();
        row.fields.clear();
    }
    row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return row;
}

// ---------------------------------------------------------------- lemma corpus

const std::vector<std::string>& lemma_ids() {
    static const std::vector<std::string> ids = {"langer", "bernoulli", "large_sections", "exp_sum", "coupling"};
    return ids;
}

namespace {

cplx gauss_c(Rng& rng) { return {standard_normal(rng), standard_normal(rng)}; }

nlohmann::json langer_instance(Rng& rng) {
    const double delta = std::pow(10.0, uniform01(rng) - 1.0);
    const ExpSum p{gauss_c(rng), gauss_c(rng), gauss_c(rng), gauss_c(rng), delta};
    const double lo = -10.0 / delta, hi = 10.0 / delta;
    double top = 0.0;
    for (int i = 0; i <= 200; ++i) top = std::max(top, std::norm(p(lo + (hi - lo) * i / 200)));
    const GeneralExpSum re{{0.0, delta, -delta},
                           {{2.0 * p.a1.real(), 2.0 * p.a2.real()}, {p.b1, p.b2}, {std::conj(p.b1), std::conj(p.b2)}}};
    const double t = uniform01(rng) * top;
    bool ok = true;
    double worst = 0.0;
    nlohmann::json counts = nlohmann::json::array();
    for (const GeneralExpSum& S : {GeneralExpSum::from(p), re, GeneralExpSum::abs_squared(p, t)}) {
        const ZeroCount z = langer_zero_count(S, lo, hi);
        ok = ok && z.ok;
        worst = std::max(worst, z.zeros / z.bound);
        counts.push_back({{"degree", S.degree()}, {"zeros", z.zeros}, {"bound", z.bound}});
    }
    return verdict("langer", {{"delta", delta}, {"interval", {lo, hi}}}, {{"value", worst}, {"counts", counts}}, ok);
}

nlohmann::json bernoulli_instance(Rng& rng) {
    const double p0 = 0.25;
    const int N = 4 + static_cast<int>(rng() % 17);
    std::vector<double> p(N);
    for (double& x : p) x = p0 + (1.0 - 2.0 * p0) * uniform01(rng);
    std::vector<double> grid;
    for (int i = 0; i <= 4 * N; ++i) grid.push_back(0.25 * i);
    const auto r = bernoulli_anticoncentration(p, adversarial_weight(p, 0.5 * bernoulli_epsilon(p0)), grid);
    const bool ok = r.ratio > 0 && r.grid_min >= r.value - 1e-12;
    return verdict("bernoulli", {{"N", N}, {"p0", p0}}, {{"value", r.ratio}, {"result", r.to_json()}}, ok);
}

nlohmann::json large_sections_instance(Rng& rng) {
    auto dist = [&] {
        std::vector<double> P(8);
        double s = 0.0;
        for (double& x : P) s += (x = 0.05 + uniform01(rng));
        for (double& x : P) x /= s;
        return P;
    };
    const auto P1 = dist(), P2 = dist();
    std::vector<bool> X(8);
    double PX = 0.0;
    for (int i = 0; i < 8; ++i) {
        X[i] = i == 0 || uniform01(rng) < 0.6;
        if (X[i]) PX += P1[i];
    }
    const double p = PX * (0.5 + 0.5 * uniform01(rng));
    const double eps = 0.5 * p * (0.05 + 0.95 * uniform01(rng));
    Eigen::MatrixXd D = Eigen::MatrixXd::Zero(8, 8);
    for (int k = 0; k < 6; ++k) D(rng() % 8, rng() % 8) += uniform01(rng);
    const Eigen::Map<const Eigen::VectorXd> w1(P1.data(), 8), w2(P2.data(), 8);
    const double ED = w1.dot(D * w2);
    if (ED > 0) D *= std::min(eps * uniform01(rng) / ED, 1.0 / D.maxCoeff());
    const auto v = large_sections_check(P1, P2, Eigen::MatrixXd::Ones(8, 8) - D, X, p, eps);
    return verdict("large_sections", {{"p", p}, {"eps", eps}}, {{"value", v.P_good / (0.5 * p)}, {"result", v.to_json()}},
                   v.holds);
}

nlohmann::json exp_sum_instance(Rng& rng) {
    const int n = 5 + static_cast<int>(rng() % 26);
    const auto rho = circle_spectral_measure(EnsembleSpec::spherical_harmonic(n));
    const auto coeffs = exp_sum_samples(64, rng);
    const std::vector<double> deltas{0.05 + 0.95 * uniform01(rng), 0.05 + 0.95 * uniform01(rng)};
    const auto r = exp_sum_lower_bound(rho, deltas, coeffs);
    return verdict("exp_sum", {{"degree", n}, {"deltas", deltas}}, {{"value", r.min_ratio}, {"result", r.to_json()}},
                   r.min_ratio > 0);
}

nlohmann::json coupling_instance(Rng& rng) {
    const int k = 2 + static_cast<int>(rng() % 11);
    const double tau = 0.02 + 0.18 * uniform01(rng);
    Eigen::MatrixXd cov = Eigen::MatrixXd::Identity(k, k);
    // off-diagonal row sums below tau^2
    const double cap = tau * tau * uniform01(rng) / (k - 1);
    for (int i = 0; i < k; ++i)
        for (int j = i + 1; j < k; ++j) cov(i, j) = cov(j, i) = cap * (2.0 * uniform01(rng) - 1.0);
    const auto c = couple_independent(cov, tau);
    const Eigen::MatrixXd J = c.joint_covariance();
    const double xi_block = (J.bottomRightCorner(k, k) - Eigen::MatrixXd::Identity(k, k)).cwiseAbs().maxCoeff();
    const int M = 100000;
    Eigen::VectorXd f, xi, sq = Eigen::VectorXd::Zero(k);
    for (int s = 0; s < M; ++s) {
        c.sample(rng, f, xi);
        sq += (f - xi).cwiseAbs2();
    }
    const double worst = sq.maxCoeff() / M / (4.0 * tau * tau);
    return verdict("coupling", {{"points", k}, {"tau", tau}, {"draws", M}},
                   {{"value", worst}, {"xi_covariance_error", xi_block}}, worst <= 1.0 && xi_block < 1e-12);
}

}  // namespace

nlohmann::json lemma_instance(const std::string& lemma, std::uint64_t seed) {
    Rng rng = make_rng(seed, {7});
    if (lemma == "langer") return langer_instance(rng);
    if (lemma == "bernoulli") return bernoulli_instance(rng);
    if (lemma == "large_sections") return large_sections_instance(rng);
    if (lemma == "exp_sum") return exp_sum_instance(rng);
    if (lemma == "coupling") return coupling_instance(rng);
    throw InvalidSpec("unknown lemma '" + lemma + "'");
}

}  // namespace nodal
