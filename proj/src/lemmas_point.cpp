#include "nodal/lemmas.hpp"

#include <Eigen/Cholesky>

#include <climits>
#include <cmath>

namespace nodal {

namespace {

constexpr double kPi = 3.14159265358979323846;

/// Accumulates importance weights (vol * density at a uniform point of the event).
struct Weights {
    double sum = 0.0, sum2 = 0.0;
    long n = 0;

    void add(double w) {
        sum += w;
        sum2 += w * w;
        ++n;
    }
    DensityEstimate estimate() const {
        DensityEstimate e;
        e.samples = n;
        if (n == 0) return e;
        const double mean = sum / n;
        const double var = std::max(0.0, sum2 / n - mean * mean);
        e.p = mean;
        e.se = std::sqrt(var / n);
        e.ess = sum2 > 0 ? sum * sum / sum2 : 0.0;
        return e;
    }
};

/// Uniform point of {|v| <= alpha} x {|g| <= beta} written into out[0..2].
void uniform_cell(Rng& rng, double alpha, double beta, double* out) {
    out[0] = alpha * (2.0 * uniform01(rng) - 1.0);
    const double r = beta * std::sqrt(uniform01(rng)), t = 2.0 * kPi * uniform01(rng);
    out[1] = r * std::cos(t);
    out[2] = r * std::sin(t);
}

double gradient_variance(const EnsembleSpec& spec) { return jet_covariance(spec)(1, 1); }

void check_ab(double alpha, double beta, long M) {
    if (!(alpha > 0 && beta > 0)) throw InvalidSpec("alpha and beta must be positive");
    if (M <= 0) throw InvalidSpec("sample count must be positive");
}

double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    if (n < 2) return std::numeric_limits<double>::quiet_NaN();
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    return sxx > 0 ? sxy / sxx : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

double one_point_exact(const EnsembleSpec& spec, double alpha, double beta) {
    check_ab(alpha, beta, 1);
    const double lam = gradient_variance(spec);
    return std::erf(alpha / std::sqrt(2.0)) * -std::expm1(-beta * beta / (2.0 * lam));
}

DensityEstimate one_point_density(const EnsembleSpec& spec, double alpha, double beta, long M, Rng& rng) {
    check_ab(alpha, beta, M);
    const double lam = gradient_variance(spec);
    const double vol = 2.0 * alpha * kPi * beta * beta;
    const double norm = 1.0 / (std::pow(2.0 * kPi, 1.5) * lam);
    Weights w;
    double x[3];
    for (long i = 0; i < M; ++i) {
        uniform_cell(rng, alpha, beta, x);
        const double q = x[0] * x[0] + (x[1] * x[1] + x[2] * x[2]) / lam;
        w.add(vol * norm * std::exp(-0.5 * q));
    }
    return w.estimate();
}

DensityEstimate two_point_density(const EnsembleSpec& spec, const TangentFrame& fx, const TangentFrame& fy,
                                  double alpha, double beta, long M, Rng& rng) {
    check_ab(alpha, beta, M);
    const Mat6 G = pair_covariance_matrix(spec, fx, fy);
    Eigen::LLT<Mat6> llt(G);
    if (llt.info() != Eigen::Success)
        throw DomainError("pair covariance is not positive definite at distance " +
                          std::to_string(distance(fx.base, fy.base)));
    const Mat6 Lm = llt.matrixL();
    double logdet = 0.0;
    for (int i = 0; i < 6; ++i) logdet += 2.0 * std::log(Lm(i, i));
    const double vol = std::pow(2.0 * alpha * kPi * beta * beta, 2);
    const double lognorm = std::log(vol) - 3.0 * std::log(2.0 * kPi) - 0.5 * logdet;
    Weights w;
    Eigen::Matrix<double, 6, 1> xi;
    for (long i = 0; i < M; ++i) {
        uniform_cell(rng, alpha, beta, xi.data());
        uniform_cell(rng, alpha, beta, xi.data() + 3);
        const Eigen::Matrix<double, 6, 1> z = llt.matrixL().solve(xi);
        w.add(std::exp(lognorm - 0.5 * z.squaredNorm()));
    }
    return w.estimate();
}

TwoPointEstimate estimate_two_point(const EnsembleSpec& spec, double alpha, double beta,
                                    const std::vector<double>& distances, long M, std::uint64_t seed) {
    check_ab(alpha, beta, M);
    const double L = spec.radius();
    TwoPointEstimate t;
    t.alpha = alpha;
    t.beta = beta;
    t.distances = distances;

    std::vector<std::pair<TangentFrame, TangentFrame>> frames;
    const SpherePoint x(Vec3::UnitZ(), L);
    for (double d : distances) {
        if (!(d > 0 && d < kPi * L)) throw InvalidSpec("distances must lie in (0, pi L)");
        const double th = d / L;
        frames.emplace_back(TangentFrame::at(x),
                            TangentFrame::at(SpherePoint(Vec3(std::sin(th), 0.0, std::cos(th)), L)));
    }

    // Pilot: ESS per sample in each bin, against the 100 required.
    const long pilot = std::min<long>(M, 2000);
    long required = 0;
    for (std::size_t b = 0; b < frames.size(); ++b) {
        Rng rng = make_rng(seed, {1, b});
        const auto e = two_point_density(spec, frames[b].first, frames[b].second, alpha, beta, pilot, rng);
        const double rate = e.ess / pilot;
        required = std::max(required, rate > 0 ? static_cast<long>(std::ceil(100.0 / rate)) : LONG_MAX / 2);
    }
    if (required > M)
        throw ResourceError("two-point estimate needs M >= " + std::to_string(required) + " for 100 effective samples per bin",
                            static_cast<int>(std::min<long>(required, INT_MAX)));

    {
        Rng rng = make_rng(seed, {0});
        const auto e = one_point_density(spec, alpha, beta, M, rng);
        t.p_hat = e.p;
        t.p_stderr = e.se;
    }
    t.p_exact = one_point_exact(spec, alpha, beta);
    t.p_over_alpha_beta2 = t.p_hat / (alpha * beta * beta);

    const double wl = spec.unit_wavelength() * L;
    std::vector<double> sx, sy, lx, ly;
    for (std::size_t b = 0; b < frames.size(); ++b) {
        Rng rng = make_rng(seed, {2, b});
        const auto e = two_point_density(spec, frames[b].first, frames[b].second, alpha, beta, M, rng);
        t.p_hat_xy.push_back(e.p);
        t.p_xy_stderr.push_back(e.se);
        t.ess.push_back(e.ess);
        const double W = e.p / (t.p_hat * t.p_hat);
        // delta method, independent streams
        const double rel = std::hypot(e.se / e.p, 2.0 * t.p_stderr / t.p_hat);
        t.W_hat.push_back(W);
        t.W_stderr.push_back(W * rel);
        const double d = distances[b];
        if (d >= 0.1 * wl && d <= wl && W > 0) {
            sx.push_back(std::log(d));
            sy.push_back(std::log(W));
        }
        if (d > wl && std::abs(W - 1.0) > 2.0 * W * rel) {
            lx.push_back(std::log(d));
            ly.push_back(std::log(std::abs(W - 1.0)));
        }
    }
    t.short_slope = fit_slope(sx, sy);
    t.theta = -t.short_slope;
    t.gamma_fit = -fit_slope(lx, ly);
    return t;
}

nlohmann::json TwoPointEstimate::to_json() const {
    return {{"alpha", alpha},          {"beta", beta},
            {"distances", distances},  {"p_hat", p_hat},
            {"p_stderr", p_stderr},    {"p_exact", p_exact},
            {"p_over_alpha_beta2", p_over_alpha_beta2},
            {"p_hat_xy", p_hat_xy},    {"p_xy_stderr", p_xy_stderr},
            {"ess", ess},              {"W_hat", W_hat},
            {"W_stderr", W_stderr},    {"short_slope", short_slope},
            {"theta", theta},          {"gamma_fit", gamma_fit}};
}

}  // namespace nodal
