#include "nodal/lemmas.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

using namespace nodal;

namespace {

constexpr double kPi = 3.14159265358979323846;

double wavelength(const EnsembleSpec& s) { return s.unit_wavelength() * s.radius(); }

TangentFrame frame_at_angle(double th, double L) {
    return TangentFrame::at(SpherePoint(Vec3(std::sin(th), 0.0, std::cos(th)), L));
}

// Kolmogorov-Smirnov distance of a sample against N(0, 1)
double ks_normal(std::vector<double> x) {
    std::sort(x.begin(), x.end());
    const double n = x.size();
    double d = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double F = 0.5 * std::erfc(-x[i] / std::sqrt(2.0));
        d = std::max({d, F - i / n, (i + 1) / n - F});
    }
    return d;
}

}  // namespace

// ---------------------------------------------------------------- one/two-point

TEST(TwoPoint, OnePointMatchesClosedFormAndAlphaBetaSquared) {
    const auto spec = EnsembleSpec::spherical_harmonic(20);
    Rng rng = make_rng(1);
    const auto e = one_point_density(spec, 0.1, 0.1, 100000, rng);
    const double exact = one_point_exact(spec, 0.1, 0.1);
    EXPECT_NEAR(e.p, exact, 4.0 * e.se);
    // small alpha, beta: p / (alpha beta^2) -> sqrt(2 / pi) / (2 lambda), lambda = (n + 1) / (2n)
    const double lam = 21.0 / 40.0;
    const double c0 = std::sqrt(2.0 / kPi) / (2.0 * lam);
    EXPECT_NEAR(one_point_exact(spec, 0.01, 0.01) / 1e-6, c0, 1e-3 * c0);
    const auto t = estimate_two_point(spec, 0.03, 0.03, {wavelength(spec)}, 20000, 2);
    EXPECT_NEAR(t.p_over_alpha_beta2, c0, 0.02 * c0);
}

TEST(TwoPoint, FarApartBandLimitedPointsAreIndependent) {
    const auto spec = EnsembleSpec::gaussian_band(20, 5);
    const double wl = wavelength(spec);
    const auto t = estimate_two_point(spec, 0.1, 0.1, {5 * wl, 8 * wl}, 200000, 3);
    for (std::size_t i = 0; i < t.W_hat.size(); ++i) {
        EXPECT_NEAR(t.W_hat[i], 1.0, 3.0 * t.W_stderr[i]) << "bin " << i;
        EXPECT_GE(t.ess[i], 100.0);
    }
}

TEST(TwoPoint, HalvingAlphaHalvesTheProbability) {
    const auto spec = EnsembleSpec::spherical_harmonic(20);
    const double a = 1e-3, b = 0.1;
    Rng r1 = make_rng(4, {1}), r2 = make_rng(4, {2});
    const auto p1 = one_point_density(spec, a, b, 200000, r1);
    const auto p2 = one_point_density(spec, a / 2, b, 200000, r2);
    EXPECT_NEAR(p2.p / p1.p, 0.5, 3.0 * 0.5 * std::hypot(p1.se / p1.p, p2.se / p2.p));

    const TangentFrame fx = frame_at_angle(0.0, 20.0), fy = frame_at_angle(0.5 * wavelength(spec) / 20.0, 20.0);
    Rng r3 = make_rng(4, {3}), r4 = make_rng(4, {4});
    const auto q1 = two_point_density(spec, fx, fy, a, b, 200000, r3);
    const auto q2 = two_point_density(spec, fx, fy, a / 2, b, 200000, r4);
    // both values are restricted, so p(x, y) scales by 1/4
    EXPECT_NEAR(q2.p / q1.p, 0.25, 3.0 * 0.25 * std::hypot(q1.se / q1.p, q2.se / q2.p));
}

TEST(TwoPoint, ShortDistanceClusteringIsBoundedByAPowerLaw) {
    const auto spec = EnsembleSpec::spherical_harmonic(20);
    const double wl = wavelength(spec);
    std::vector<double> d;
    for (double t : {0.1, 0.15, 0.2, 0.3, 0.5, 0.7, 1.0}) d.push_back(t * wl);
    const auto t = estimate_two_point(spec, 0.05, 0.05, d, 100000, 5);
    EXPECT_LE(t.short_slope, 0.0);
    EXPECT_TRUE(std::isfinite(t.theta));
    RecordProperty("theta", std::to_string(t.theta));
    for (double w : t.W_hat) EXPECT_GT(w, 0.0);
}

TEST(TwoPoint, SwappingThePointsLeavesTheEstimate) {
    const auto spec = EnsembleSpec::spherical_harmonic(15);
    const TangentFrame fx = frame_at_angle(0.2, 15.0), fy = frame_at_angle(0.2 + 0.3 * wavelength(spec) / 15.0, 15.0);
    Rng r1 = make_rng(6, {1}), r2 = make_rng(6, {2});
    const auto a = two_point_density(spec, fx, fy, 0.1, 0.1, 100000, r1);
    const auto b = two_point_density(spec, fy, fx, 0.1, 0.1, 100000, r2);
    EXPECT_NEAR(a.p, b.p, 3.0 * std::hypot(a.se, b.se));
}

TEST(TwoPoint, PilotReportsTheRequiredSampleCount) {
    const auto spec = EnsembleSpec::spherical_harmonic(20);
    try {
        estimate_two_point(spec, 0.1, 0.1, {0.005 * wavelength(spec)}, 150, 7);
        FAIL() << "expected ResourceError";
    } catch (const ResourceError& e) {
        EXPECT_GT(e.required_level, 150);
    }
    EXPECT_THROW(estimate_two_point(spec, 0.0, 0.1, {1.0}, 1000, 1), InvalidSpec);
}

// ---------------------------------------------------------------- coupling

TEST(Coupling, IndependentValuesNeedNoCorrection) {
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(5, 5);
    Rng rng = make_rng(10);
    Eigen::VectorXd f, xi;
    const auto exact = couple_independent(I, 0.0);
    for (int s = 0; s < 100; ++s) {
        exact.sample(rng, f, xi);
        EXPECT_EQ((f - xi).norm(), 0.0);
    }

    const double tau = 0.05;
    const auto c = couple_independent(I, tau);
    EXPECT_LE(std::sqrt(c.exact_mse(0)), c.max_deviation_bound());
    const int M = 20000;
    const double sigma = std::sqrt(c.exact_mse(0));
    // P(max |f - xi| > t) <= 2 M k exp(-t^2 / (2 sigma^2)) = 1e-6
    const double t = sigma * std::sqrt(2.0 * std::log(2.0 * M * 5 / 1e-6));
    double worst = 0.0;
    for (int s = 0; s < M; ++s) {
        c.sample(rng, f, xi);
        worst = std::max(worst, (f - xi).cwiseAbs().maxCoeff());
    }
    EXPECT_LE(worst, t);
}

TEST(Coupling, SmallCorrelationsCoupleWithinTheBudget) {
    const int k = 10;
    Eigen::MatrixXd cov = Eigen::MatrixXd::Constant(k, k, 1e-4);
    cov.diagonal().setOnes();
    const double tau = 0.05;
    const auto c = couple_independent(cov, tau);
    EXPECT_NEAR(c.gershgorin_margin(), tau * tau - 9e-4, 1e-15);

    // exact: xi block of the joint covariance is the identity
    const Eigen::MatrixXd J = c.joint_covariance();
    EXPECT_LE((J.bottomRightCorner(k, k) - Eigen::MatrixXd::Identity(k, k)).cwiseAbs().maxCoeff(), 1e-14);
    for (int i = 0; i < k; ++i) {
        const double mse = J(i, i) + J(k + i, k + i) - 2.0 * J(i, k + i);
        EXPECT_NEAR(mse, c.exact_mse(i), 1e-14);
        EXPECT_LE(mse, 4.0 * tau * tau);
    }

    const int M = 100000;
    Rng rng = make_rng(11);
    Eigen::VectorXd f, xi;
    Eigen::VectorXd sq = Eigen::VectorXd::Zero(k);
    Eigen::MatrixXd xx = Eigen::MatrixXd::Zero(k, k);
    std::vector<std::vector<double>> cols(k);
    for (int s = 0; s < M; ++s) {
        c.sample(rng, f, xi);
        sq += (f - xi).cwiseAbs2();
        xx += xi * xi.transpose();
        for (int i = 0; i < k; ++i) cols[i].push_back(xi(i));
    }
    sq /= M;
    xx /= M;
    for (int i = 0; i < k; ++i) {
        EXPECT_LE(sq(i), 4.0 * tau * tau);
        EXPECT_LE(ks_normal(cols[i]), 1.628 / std::sqrt(double(M))) << "coordinate " << i;
        for (int j = i + 1; j < k; ++j)
            EXPECT_LE(std::abs(xx(i, j)) / std::sqrt(xx(i, i) * xx(j, j)), 3.0 / std::sqrt(double(M)))
                << i << "," << j;
    }
}

TEST(Coupling, GershgorinFailureNamesTheRow) {
    Eigen::MatrixXd cov = Eigen::MatrixXd::Identity(4, 4);
    cov(2, 3) = cov(3, 2) = 0.9;
    try {
        couple_independent(cov, 0.05);
        FAIL() << "expected DomainError";
    } catch (const DomainError& e) {
        EXPECT_NE(std::string(e.what()).find("row 2"), std::string::npos) << e.what();
    }
    cov(2, 3) = cov(3, 2) = 0.0;
    cov(0, 1) = 0.1;
    EXPECT_THROW(couple_independent(cov, 0.05), InvalidSpec);  // not symmetric
}

// ---------------------------------------------------------------- exponential sums

TEST(ExpSum, CircleMeasureHasTheFieldMoments) {
    const auto spec = EnsembleSpec::spherical_harmonic(20);
    const auto rho = circle_spectral_measure(spec);
    rho.validate();
    EXPECT_NEAR(rho.second_moment(), 21.0 / 40.0, 1e-12);  // n(n+1) / (2 L^2)
    for (double s : {0.0, 0.3, 1.7, 5.0, 20.0}) {
        EXPECT_NEAR(rho.fourier(s).real(), covariance(spec, s), 1e-12) << s;
        EXPECT_NEAR(std::abs(rho.fourier(s) - rho.fourier(s + 2.0 * kPi * 20.0)), 0.0, 1e-10);
    }
}

TEST(ExpSum, ConstantSumHasRatioDeltaToTheMinusSix) {
    const auto rho = circle_spectral_measure(EnsembleSpec::spherical_harmonic(10));
    const auto r = exp_sum_lower_bound(rho, {0.5, 1.0}, {{cplx(2.0, 1.0), 0.0, 0.0, 0.0}});
    ASSERT_EQ(r.min_ratio_per_delta.size(), 2u);
    EXPECT_NEAR(r.min_ratio_per_delta[0], std::pow(0.5, -6), 1e-9);
    EXPECT_NEAR(r.min_ratio_per_delta[1], 1.0, 1e-12);
    const auto z = exp_sum_lower_bound(rho, {1.0}, {{0.0, 0.0, 0.0, 0.0}});
    EXPECT_EQ(z.skipped, 1);
    EXPECT_EQ(z.evaluated, 0);
}

TEST(ExpSum, OneMinusExponentialMatchesTheCovariance) {
    const auto spec = EnsembleSpec::spherical_harmonic(20);
    const auto rho = circle_spectral_measure(spec);
    for (double delta : {0.05, 0.3, 1.0, 2.5}) {
        const ExpSum p{1.0, 0.0, -1.0, 0.0, delta};
        const double closed = 2.0 * (1.0 - covariance(spec, delta));
        EXPECT_NEAR(integral_sq(p, rho), closed, 1e-12);
        EXPECT_GT(integral_sq(p, rho), 0.0);
    }
}

TEST(ExpSum, PointMassAtTheOriginIsDegenerate) {
    SpectralMeasure rho;
    rho.atoms = {{0.0, 1.0}};
    const auto r = exp_sum_lower_bound(rho, {0.5}, {{1.0, 0.0, -1.0, 0.0}});
    EXPECT_EQ(r.min_ratio, 0.0);
}

TEST(ExpSum, HarmonicMeasureKeepsAPositiveBound) {
    const auto rho = circle_spectral_measure(EnsembleSpec::spherical_harmonic(20));
    Rng rng = make_rng(20);
    const auto samples = exp_sum_samples(4000, rng);
    const auto r = exp_sum_lower_bound(rho, {0.05, 0.1, 0.25, 0.5, 1.0}, samples);
    EXPECT_GT(r.min_ratio, 0.0);
    EXPECT_EQ(r.evaluated, 5 * 4000);
    RecordProperty("min_ratio", std::to_string(r.min_ratio));
    EXPECT_TRUE(r.to_json().contains("argmin"));
}

// ---------------------------------------------------------------- Langer, Turan

TEST(Langer, SineHasThreeZerosOnAPeriod) {
    const double delta = 0.7;
    const cplx h(0.0, 0.5);  // sin t = (e^{it} - e^{-it}) / 2i
    const GeneralExpSum S{{delta, -delta}, {{-h}, {h}}};
    ASSERT_TRUE(S.is_real());
    EXPECT_EQ(S.degree(), 2);
    const auto z = langer_zero_count(S, 0.0, 2.0 * kPi / delta);
    EXPECT_EQ(z.zeros, 3);
    EXPECT_NEAR(z.bound, 3.0, 1e-12);
    EXPECT_TRUE(z.ok);
}

TEST(Langer, LinearPolynomialHasAtMostOneZero) {
    const GeneralExpSum S{{0.0}, {{1.0, 1.0}}};
    EXPECT_EQ(S.degree(), 2);
    EXPECT_EQ(S.spread(), 0.0);
    const auto z = langer_zero_count(S, -5.0, 5.0);
    EXPECT_EQ(z.zeros, 1);
    EXPECT_NEAR(z.locations[0], -1.0, 1e-12);
    EXPECT_EQ(langer_zero_count(S, 0.0, 5.0).zeros, 0);
}

TEST(Langer, RandomDegreeFourSumsNeverExceedTheBound) {
    Rng rng = make_rng(21);
    auto z = [&] { return cplx(standard_normal(rng), standard_normal(rng)); };
    int violations = 0, exhausted = 0, nonzero = 0;
    for (int s = 0; s < 1000; ++s) {
        const double delta = std::pow(10.0, uniform01(rng) - 1.0);
        const ExpSum p{z(), z(), z(), z(), delta};
        const double lo = -10.0 / delta, hi = 10.0 / delta;
        // twice the real part: degree 6
        const GeneralExpSum re{{0.0, delta, -delta},
                               {{2.0 * p.a1.real(), 2.0 * p.a2.real()}, {p.b1, p.b2}, {std::conj(p.b1), std::conj(p.b2)}}};
        double top = 0.0;
        for (int i = 0; i <= 200; ++i) top = std::max(top, std::norm(p(lo + (hi - lo) * i / 200)));
        const GeneralExpSum sq = GeneralExpSum::abs_squared(p, uniform01(rng) * top);
        for (const GeneralExpSum* S : {&re, &sq}) {
            const auto c = langer_zero_count(*S, lo, hi);
            violations += !c.ok;
            exhausted += c.resolution_exhausted;
            nonzero += c.zeros > 0;
        }
        const auto c = langer_zero_count(GeneralExpSum::from(p), lo, hi);
        violations += !c.ok;
    }
    EXPECT_EQ(violations, 0);
    EXPECT_GT(nonzero, 1000);
    RecordProperty("resolution_exhausted", exhausted);
}

TEST(Langer, AbsSquaredAgreesWithTheSum) {
    const ExpSum p{cplx(0.3, -1), cplx(0.2, 0.1), cplx(-0.7, 0.4), cplx(0.05, -0.3), 0.9};
    const auto S = GeneralExpSum::abs_squared(p, 0.25);
    EXPECT_TRUE(S.is_real());
    EXPECT_EQ(S.degree(), 9);
    EXPECT_NEAR(S.spread(), 1.8, 1e-15);
    for (double x : {-3.0, 0.0, 1.1, 7.5}) {
        EXPECT_NEAR(S(x).real(), std::norm(p(x)) - 0.25, 1e-12);
        EXPECT_NEAR(S(x).imag(), 0.0, 1e-12);
    }
}

TEST(Turan, EmpiricalConstantIsFinite) {
    Rng rng = make_rng(22);
    auto z = [&] { return cplx(standard_normal(rng), standard_normal(rng)); };
    for (double ratio : {2.0, 4.0, 8.0}) {
        std::vector<double> C;
        for (int s = 0; s < 200; ++s) {
            const double delta = std::pow(10.0, uniform01(rng) - 1.0);
            const GeneralExpSum S = GeneralExpSum::from({z(), z(), z(), z(), delta});
            const double J = 20.0 / delta, I = J / ratio;
            const double lo = -10.0 / delta + uniform01(rng) * (J - I);
            const double c = turan_constant(S, lo, lo + I, -10.0 / delta, 10.0 / delta, 4000);
            ASSERT_TRUE(std::isfinite(c));
            EXPECT_GE(c, 1.0 / ratio - 1e-12);
            C.push_back(c);
        }
        std::sort(C.begin(), C.end());
        RecordProperty("C_median_ratio_" + std::to_string(int(ratio)), std::to_string(C[C.size() / 2]));
        RecordProperty("C_max_ratio_" + std::to_string(int(ratio)), std::to_string(C.back()));
    }
}

// ---------------------------------------------------------------- Bernoulli

TEST(Bernoulli, FairCoinsGiveVarianceOverN) {
    for (int N = 1; N <= 12; ++N) {
        const std::vector<double> p(N, 0.5);
        const auto r = bernoulli_anticoncentration(p, std::vector<double>(std::size_t(1) << N, 1.0));
        EXPECT_NEAR(r.ratio, 0.25, 1e-12);
        EXPECT_NEAR(r.m_star, N / 2.0, 1e-12);
        EXPECT_NEAR(r.EQ, 1.0, 1e-12);
    }
    const auto r = bernoulli_anticoncentration(std::vector<double>(10, 0.3), std::vector<double>(1024, 1.0));
    EXPECT_NEAR(r.ratio, 0.3 * 0.7, 1e-12);
}

TEST(Bernoulli, ClosedFormMinimizerBeatsTheGrid) {
    Rng rng = make_rng(30);
    std::vector<double> p(9);
    for (double& x : p) x = 0.25 + 0.5 * uniform01(rng);
    std::vector<double> Q = adversarial_weight(p, 0.5 * bernoulli_epsilon(0.25));
    std::vector<double> grid;
    for (int i = -200; i <= 1100; ++i) grid.push_back(0.01 * i);
    const auto r = bernoulli_anticoncentration(p, Q, grid);
    EXPECT_GE(r.grid_min, r.value - 1e-12);
    EXPECT_NEAR(r.EQ, 1.0 - 0.5 * bernoulli_epsilon(0.25), 1e-12);
}

TEST(Bernoulli, AdversarialWeightsStayBoundedBelow) {
    const double p0 = 0.25, eps = bernoulli_epsilon(p0);
    Rng rng = make_rng(31);
    double worst = std::numeric_limits<double>::infinity();
    for (int s = 0; s < 1000; ++s) {
        std::vector<double> p(12);
        for (double& x : p) x = p0 + (1.0 - 2.0 * p0) * uniform01(rng);
        const auto r = bernoulli_anticoncentration(p, adversarial_weight(p, 0.5 * eps));
        worst = std::min(worst, r.ratio);
    }
    EXPECT_GT(worst, 0.0);
    RecordProperty("c_p0", std::to_string(worst));
}

TEST(Bernoulli, BoundIsUniformInN) {
    const double p0 = 0.25, eps = bernoulli_epsilon(p0);
    Rng rng = make_rng(32);
    std::vector<double> p(20);
    for (double& x : p) x = p0 + (1.0 - 2.0 * p0) * uniform01(rng);
    double prev = 0.0, lowest = std::numeric_limits<double>::infinity();
    for (int N = 4; N <= 20; ++N) {
        const std::vector<double> q(p.begin(), p.begin() + N);
        const auto r = bernoulli_anticoncentration(q, adversarial_weight(q, 0.5 * eps));
        EXPECT_GE(r.value, prev - 1e-12) << "N = " << N;
        prev = r.value;
        lowest = std::min(lowest, r.ratio);
    }
    EXPECT_GT(lowest, 0.0);
    RecordProperty("min_ratio", std::to_string(lowest));
}

TEST(Bernoulli, RejectsOutOfRangeInput) {
    EXPECT_THROW(bernoulli_anticoncentration(std::vector<double>(21, 0.5), {}), ResourceError);
    EXPECT_THROW(bernoulli_anticoncentration({0.5, 0.5}, {1.0, 1.0, 1.0}), InvalidSpec);
    EXPECT_THROW(bernoulli_anticoncentration({0.5, 0.5}, {0.0, 1.0, 1.0, 1.0}), DomainError);  // E[Q] = 3/4
    EXPECT_THROW(bernoulli_anticoncentration({0.5, 1.0}, {1.0, 1.0, 1.0, 1.0}), InvalidSpec);
}

// ---------------------------------------------------------------- large sections

TEST(LargeSections, QIdenticallyOneHasFullMeasure) {
    const std::vector<double> P(4, 0.25);
    const auto v = large_sections_check(P, P, Eigen::MatrixXd::Ones(4, 4), std::vector<bool>(4, true), 1.0, 0.5);
    EXPECT_TRUE(v.holds);
    EXPECT_DOUBLE_EQ(v.P_good, 1.0);
}

TEST(LargeSections, SingleMissingAtom) {
    const std::vector<double> P1{0.1, 0.2, 0.3, 0.4}, P2{0.5, 0.5};
    Eigen::MatrixXd Q = Eigen::MatrixXd::Ones(4, 2);
    Q(3, 0) = 0.0;  // atom of mass 0.2
    // X = {2, 3}, p = 0.7, eps = 0.2: threshold 1 - 0.4 / 0.7 = 0.43, section 3 averages 0.5
    const std::vector<bool> X{false, false, true, true};
    const auto v = large_sections_check(P1, P2, Q, X, 0.7, 0.2);
    EXPECT_NEAR(v.threshold, 1.0 - 0.4 / 0.7, 1e-15);
    EXPECT_NEAR(v.P_good, 0.7, 1e-15);
    EXPECT_TRUE(v.holds);
    // X = everything, p = 1: threshold 0.6 drops section 3
    const auto u = large_sections_check(P1, P2, Q, {true, true, true, true}, 1.0, 0.2);
    EXPECT_NEAR(u.threshold, 0.6, 1e-15);
    EXPECT_NEAR(u.P_good, 0.6, 1e-15);  // section 3 averages 0.5
    EXPECT_TRUE(u.holds);
}

TEST(LargeSections, RandomTablesNeverViolate) {
    Rng rng = make_rng(40);
    auto dist = [&](int n) {
        std::vector<double> P(n);
        double s = 0.0;
        for (double& x : P) s += (x = 0.05 + uniform01(rng));
        for (double& x : P) x /= s;
        return P;
    };
    int violations = 0, checked = 0;
    for (int t = 0; t < 1000; ++t) {
        const auto P1 = dist(8), P2 = dist(8);
        std::vector<bool> X(8);
        double PX = 0.0;
        for (int i = 0; i < 8; ++i) {
            X[i] = uniform01(rng) < 0.6;
            if (X[i]) PX += P1[i];
        }
        if (PX == 0.0) continue;
        const double p = PX * (0.5 + 0.5 * uniform01(rng));
        const double eps = 0.5 * p * (0.05 + 0.95 * uniform01(rng));
        // deficit D = 1 - Q with E[D] <= eps, concentrated on a few random cells
        Eigen::MatrixXd D = Eigen::MatrixXd::Zero(8, 8);
        for (int k = 0; k < 6; ++k) D(rng() % 8, rng() % 8) += uniform01(rng);
        const Eigen::Map<const Eigen::VectorXd> w1(P1.data(), 8), w2(P2.data(), 8);
        const double ED = w1.dot(D * w2);
        if (ED > 0) D *= std::min(eps * uniform01(rng) / ED, 1.0 / D.maxCoeff());
        const auto v = large_sections_check(P1, P2, Eigen::MatrixXd::Ones(8, 8) - D, X, p, eps);
        violations += !v.holds;
        ++checked;
    }
    EXPECT_EQ(violations, 0);
    EXPECT_GT(checked, 900);
}

TEST(LargeSections, PreconditionsAreEnforced) {
    const std::vector<double> P(2, 0.5);
    const Eigen::MatrixXd Q = Eigen::MatrixXd::Ones(2, 2);
    EXPECT_THROW(large_sections_check(P, P, Q, {true, false}, 0.8, 0.1), DomainError);   // P(X) < p
    EXPECT_THROW(large_sections_check(P, P, Q, {true, true}, 0.5, 0.3), DomainError);    // eps > p/2
    EXPECT_THROW(large_sections_check(P, P, Eigen::MatrixXd::Zero(2, 2), {true, true}, 1.0, 0.5), DomainError);
    EXPECT_THROW(large_sections_check({0.5, 0.6}, P, Q, {true, true}, 1.0, 0.5), DomainError);
}

TEST(Verdict, ReportShape) {
    const auto j = verdict("bernoulli", {{"N", 12}}, {{"ratio", 0.1}}, true);
    EXPECT_EQ(j["lemma"], "bernoulli");
    EXPECT_EQ(j["parameters"]["N"], 12);
    EXPECT_TRUE(j["pass"].get<bool>());
}
