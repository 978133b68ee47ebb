#include "nodal/lemmas.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>

namespace nodal {

namespace {

constexpr int kMaxExactN = 20;

std::vector<double> outcome_probabilities(const std::vector<double>& p) {
    const int N = static_cast<int>(p.size());
    if (N > kMaxExactN)
        throw ResourceError("exact enumeration is limited to N <= " + std::to_string(kMaxExactN), kMaxExactN);
    for (double q : p)
        if (!(q > 0 && q < 1)) throw InvalidSpec("Bernoulli probabilities must lie in (0, 1)");
    std::vector<double> P(std::size_t(1) << N);
    P[0] = 1.0;
    for (int j = 0; j < N; ++j) {
        const std::size_t half = std::size_t(1) << j;
        for (std::size_t w = 0; w < half; ++w) {
            P[w | half] = P[w] * p[j];
            P[w] *= 1.0 - p[j];
        }
    }
    return P;
}

void check_distribution(const std::vector<double>& P, const char* name) {
    double s = 0.0;
    for (double x : P) {
        if (!(x >= 0)) throw DomainError(std::string(name) + " has a negative mass");
        s += x;
    }
    if (std::abs(s - 1.0) > 1e-12) throw DomainError(std::string(name) + " must have unit mass");
}

}  // namespace

double bernoulli_epsilon(double p0) { return p0 * p0 / 4.0; }

AnticoncentrationResult bernoulli_anticoncentration(const std::vector<double>& p, const std::vector<double>& Q,
                                                    const std::vector<double>& m_grid) {
    const std::vector<double> P = outcome_probabilities(p);
    if (Q.size() != P.size()) throw InvalidSpec("Q must have one entry per outcome (2^N)");
    AnticoncentrationResult r;
    r.N = static_cast<int>(p.size());
    double ES = 0.0;
    for (std::size_t w = 0; w < P.size(); ++w) {
        if (!(Q[w] >= 0 && Q[w] <= 1)) throw InvalidSpec("Q must take values in [0, 1]");
        r.EQ += P[w] * Q[w];
        ES += P[w] * Q[w] * std::popcount(w);
    }
    const double p0 = std::min(*std::min_element(p.begin(), p.end()), 1.0 - *std::max_element(p.begin(), p.end()));
    if (r.EQ < 1.0 - bernoulli_epsilon(p0) - 1e-12)
        throw DomainError("E[Q] = " + std::to_string(r.EQ) + " is below 1 - epsilon(p0)");
    auto objective = [&](double m) {
        double v = 0.0;
        for (std::size_t w = 0; w < P.size(); ++w) {
            const double d = std::popcount(w) - m;
            v += P[w] * Q[w] * d * d;
        }
        return v;
    };
    r.m_star = ES / r.EQ;
    r.value = objective(r.m_star);
    for (double m : m_grid) r.grid_min = std::min(r.grid_min, objective(m));
    r.ratio = r.N > 0 ? r.value / r.N : 0.0;
    return r;
}

std::vector<double> adversarial_weight(const std::vector<double>& p, double removed_mass) {
    const std::vector<double> P = outcome_probabilities(p);
    if (!(removed_mass >= 0 && removed_mass < 1)) throw InvalidSpec("removed mass must lie in [0, 1)");
    const double mean = std::accumulate(p.begin(), p.end(), 0.0);
    std::vector<std::size_t> order(P.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return std::abs(std::popcount(a) - mean) > std::abs(std::popcount(b) - mean);
    });
    std::vector<double> Q(P.size(), 1.0);
    double left = removed_mass;
    for (std::size_t w : order) {
        if (left <= 0) break;
        const double take = std::min(left, P[w]);
        Q[w] = 1.0 - take / P[w];
        left -= take;
    }
    return Q;
}

LargeSectionsVerdict large_sections_check(const std::vector<double>& P1, const std::vector<double>& P2,
                                          const Eigen::MatrixXd& Q, const std::vector<bool>& X, double p,
                                          double eps) {
    check_distribution(P1, "P1");
    check_distribution(P2, "P2");
    if (Q.rows() != static_cast<Eigen::Index>(P1.size()) || Q.cols() != static_cast<Eigen::Index>(P2.size()) ||
        X.size() != P1.size())
        throw InvalidSpec("Q must be |Omega1| x |Omega2| and X a subset of Omega1");
    if (Q.size() > 0 && (Q.minCoeff() < 0 || Q.maxCoeff() > 1)) throw DomainError("Q must take values in [0, 1]");
    if (!(p > 0 && p <= 1)) throw DomainError("p must lie in (0, 1]");
    if (!(eps > 0 && eps <= 0.5 * p)) throw DomainError("eps must lie in (0, p/2]");

    const Eigen::Map<const Eigen::VectorXd> w2(P2.data(), P2.size());
    const Eigen::VectorXd section = Q * w2;
    LargeSectionsVerdict v;
    v.threshold = 1.0 - 2.0 * eps / p;
    for (std::size_t i = 0; i < P1.size(); ++i) {
        v.EQ += P1[i] * section(i);
        if (X[i]) {
            v.PX += P1[i];
            if (section(i) >= v.threshold) v.P_good += P1[i];
        }
    }
    if (v.EQ < 1.0 - eps - 1e-12) throw DomainError("E[Q] is below 1 - eps");
    if (v.PX < p - 1e-12) throw DomainError("P1(X) is below p");
    v.holds = v.P_good >= 0.5 * p - 1e-12;
    return v;
}

nlohmann::json AnticoncentrationResult::to_json() const {
    return {{"N", N}, {"EQ", EQ}, {"m_star", m_star}, {"value", value}, {"ratio", ratio}};
}

nlohmann::json LargeSectionsVerdict::to_json() const {
    return {{"EQ", EQ}, {"PX", PX}, {"threshold", threshold}, {"P_good", P_good}, {"holds", holds}};
}

nlohmann::json ExpSumBound::to_json() const {
    auto c = [](cplx z) { return nlohmann::json::array({z.real(), z.imag()}); };
    return {{"min_ratio", min_ratio},
            {"evaluated", evaluated},
            {"skipped", skipped},
            {"min_ratio_per_delta", min_ratio_per_delta},
            {"argmin", {{"a1", c(argmin.a1)}, {"a2", c(argmin.a2)}, {"b1", c(argmin.b1)}, {"b2", c(argmin.b2)},
                        {"delta", argmin.delta}}}};
}

nlohmann::json verdict(const std::string& lemma, const nlohmann::json& parameters, const nlohmann::json& measured,
                       bool pass) {
    return {{"lemma", lemma}, {"parameters", parameters}, {"measured", measured}, {"pass", pass}};
}

}  // namespace nodal
