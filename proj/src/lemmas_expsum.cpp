#include "nodal/lemmas.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace nodal {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

// ---------------------------------------------------------------- spectral measures

void SpectralMeasure::validate() const {
    if (atoms.empty()) throw InvalidSpec("spectral measure has no atoms");
    double total = 0.0;
    for (const auto& [x, m] : atoms) {
        if (!(m >= 0) || !std::isfinite(x)) throw InvalidSpec("spectral atoms need finite locations and non-negative mass");
        total += m;
    }
    if (std::abs(total - 1.0) > 1e-12) throw InvalidSpec("spectral measure must have unit mass");
    if (period_L && !(*period_L > 0)) throw InvalidSpec("period length must be positive");
}

double SpectralMeasure::second_moment() const {
    double s = 0.0;
    for (const auto& [x, m] : atoms) s += m * x * x;
    return s;
}

cplx SpectralMeasure::fourier(double s) const {
    if (period_L) {
        const double P = 2.0 * kPi * *period_L;
        s -= P * std::floor(s / P + 0.5);
    }
    cplx r = 0.0;
    for (const auto& [x, m] : atoms) r += m * std::polar(1.0, -s * x);
    return r;
}

SpectralMeasure circle_spectral_measure(const EnsembleSpec& spec) {
    // P_l(cos t) = sum_k c_k c_{l-k} e^{i (l - 2k) t}, c_k = binom(2k, k) / 4^k
    const int n = spec.max_degree();
    std::vector<double> c(n + 1);
    c[0] = 1.0;
    for (int k = 1; k <= n; ++k) c[k] = c[k - 1] * (2.0 * k - 1.0) / (2.0 * k);
    std::map<int, double> mass;
    for (int l = spec.min_degree(); l <= n; ++l)
        for (int k = 0; k <= l; ++k) mass[l - 2 * k] += spec.weight(l) * c[k] * c[l - k];
    SpectralMeasure rho;
    const double L = spec.radius();
    double total = 0.0;
    for (const auto& [k, m] : mass) total += m;
    for (const auto& [k, m] : mass) rho.atoms.emplace_back(k / L, m / total);
    rho.period_L = L;
    return rho;
}

// ---------------------------------------------------------------- degree-4 sums

cplx ExpSum::operator()(double xi) const {
    return (a1 + a2 * xi) + (b1 + b2 * xi) * std::polar(1.0, delta * xi);
}

double integral_sq(const ExpSum& p, const SpectralMeasure& rho) {
    double s = 0.0;
    for (const auto& [x, m] : rho.atoms) s += m * std::norm(p(x));
    return s;
}

ExpSumBound exp_sum_lower_bound(const SpectralMeasure& rho, const std::vector<double>& delta_grid,
                                const std::vector<std::array<cplx, 4>>& coeff_samples) {
    rho.validate();
    ExpSumBound r;
    for (double delta : delta_grid) {
        if (!(delta > 0)) throw InvalidSpec("delta must be positive");
        double best = std::numeric_limits<double>::infinity();
        for (const auto& q : coeff_samples) {
            ExpSum p{q[0], q[1], q[2], q[3], delta};
            const double w = p.w_norm();
            if (w == 0.0) {
                ++r.skipped;
                continue;
            }
            ++r.evaluated;
            const double ratio = integral_sq(p, rho) / (std::pow(delta, 6) * w * w);
            best = std::min(best, ratio);
            if (ratio < r.min_ratio) {
                r.min_ratio = ratio;
                r.argmin = p;
            }
        }
        r.min_ratio_per_delta.push_back(best);
    }
    return r;
}

std::vector<std::array<cplx, 4>> exp_sum_samples(int count, Rng& rng) {
    auto z = [&] { return cplx(standard_normal(rng), standard_normal(rng)); };
    auto small = [&] { return std::pow(10.0, -6.0 * uniform01(rng)) * z(); };
    std::vector<std::array<cplx, 4>> out;
    out.reserve(count);
    for (int i = 0; i < count; ++i) {
        switch (i % 4) {
            case 0: out.push_back({z(), z(), z(), z()}); break;
            case 1: {  // 1 - e^{i delta xi}, perturbed
                const cplx u = z();
                out.push_back({u, small(), -u + small(), small()});
                break;
            }
            case 2: {  // xi (1 - e^{i delta xi}), perturbed
                const cplx v = z();
                out.push_back({small(), v, small(), -v + small()});
                break;
            }
            default: {  // (u + v xi)(1 - e^{i delta xi})
                const cplx u = z(), v = z();
                out.push_back({u, v, -u, -v});
                break;
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------- general sums

cplx GeneralExpSum::operator()(double xi) const {
    cplx s = 0.0;
    for (std::size_t j = 0; j < exponents.size(); ++j) {
        cplx q = 0.0;
        for (auto it = polys[j].rbegin(); it != polys[j].rend(); ++it) q = q * xi + *it;
        s += q * std::polar(1.0, exponents[j] * xi);
    }
    return s;
}

namespace {
int poly_degree(const std::vector<cplx>& q) {
    for (int k = static_cast<int>(q.size()) - 1; k >= 0; --k)
        if (q[k] != cplx(0.0)) return k;
    return -1;
}
}  // namespace

int GeneralExpSum::degree() const {
    int N = 0;
    for (const auto& q : polys) N += poly_degree(q) + 1;
    return N;
}

double GeneralExpSum::spread() const {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (std::size_t j = 0; j < exponents.size(); ++j) {
        if (poly_degree(polys[j]) < 0) continue;
        lo = std::min(lo, exponents[j]);
        hi = std::max(hi, exponents[j]);
    }
    return hi >= lo ? hi - lo : 0.0;
}

bool GeneralExpSum::is_real() const {
    std::map<double, std::vector<cplx>> terms;
    double scale = 0.0;
    for (std::size_t j = 0; j < exponents.size(); ++j) {
        auto& t = terms[exponents[j]];
        if (t.size() < polys[j].size()) t.resize(polys[j].size());
        for (std::size_t k = 0; k < polys[j].size(); ++k) {
            t[k] += polys[j][k];
            scale = std::max(scale, std::abs(polys[j][k]));
        }
    }
    for (const auto& [lam, q] : terms) {
        auto it = terms.find(-lam);
        std::vector<cplx> r = it == terms.end() ? std::vector<cplx>{} : it->second;
        r.resize(std::max(r.size(), q.size()));
        for (std::size_t k = 0; k < r.size(); ++k) {
            const cplx a = k < q.size() ? q[k] : cplx(0.0);
            if (std::abs(a - std::conj(r[k])) > 1e-14 * (1.0 + scale)) return false;
        }
    }
    return true;
}

GeneralExpSum GeneralExpSum::from(const ExpSum& p) {
    return {{0.0, p.delta}, {{p.a1, p.a2}, {p.b1, p.b2}}};
}

GeneralExpSum GeneralExpSum::abs_squared(const ExpSum& p, double t) {
    const cplx c0 = std::norm(p.a1) + std::norm(p.b1) - t;
    const cplx c1 = 2.0 * (std::real(p.a1 * std::conj(p.a2)) + std::real(p.b1 * std::conj(p.b2)));
    const cplx c2 = std::norm(p.a2) + std::norm(p.b2);
    const cplx m0 = p.a1 * std::conj(p.b1), m1 = p.a1 * std::conj(p.b2) + p.a2 * std::conj(p.b1),
               m2 = p.a2 * std::conj(p.b2);
    return {{-p.delta, 0.0, p.delta},
            {{m0, m1, m2}, {c0, c1, c2}, {std::conj(m0), std::conj(m1), std::conj(m2)}}};
}

}  // namespace nodal
