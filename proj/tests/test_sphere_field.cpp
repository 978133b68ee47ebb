#include "nodal/rng.hpp"
#include "nodal/sphere_field.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

using namespace nodal;

namespace {

constexpr double kPi = std::numbers::pi;

Vec3 random_unit(Rng& rng) {
    Vec3 v(standard_normal(rng), standard_normal(rng), standard_normal(rng));
    return v.normalized();
}

// Independent evaluation through the special-function library (spherical angles).
double oracle_value(const FieldSample& f, const Vec3& u) {
    const double theta = std::acos(std::clamp(u.z(), -1.0, 1.0));
    const double phi = std::atan2(u.y(), u.x());
    double acc = 0.0;
    for (int l = f.spec().min_degree(); l <= f.spec().max_degree(); ++l) {
        const double c = std::sqrt(f.spec().weight(l) * 4 * kPi / (2 * l + 1));
        acc += c * f.coefficient(l, 0) * std::sph_legendre(l, 0, theta);
        for (int m = 1; m <= l; ++m) {
            const double y = std::numbers::sqrt2 * ((m % 2) ? -1.0 : 1.0) * std::sph_legendre(l, m, theta);
            acc += c * y * (f.coefficient(l, m) * std::cos(m * phi) + f.coefficient(l, -m) * std::sin(m * phi));
        }
    }
    return acc;
}

double ks_statistic(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        const double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= x) ++i;
        while (j < b.size() && b[j] <= x) ++j;
        d = std::max(d, std::abs(double(i) / a.size() - double(j) / b.size()));
    }
    return d;
}

FieldSample unit_basis(const EnsembleSpec& spec, int l, int m) {
    std::vector<std::vector<double>> raw(spec.max_degree() + 1);
    for (int k = 0; k <= spec.max_degree(); ++k) raw[k].assign(2 * k + 1, 0.0);
    raw[l][l + m] = 1.0;
    return field_from_coefficients(spec, raw);
}

Eigen::Matrix<double, 6, 1> jet_vector(const FieldSample& f, const TangentFrame& fp, const TangentFrame& fq) {
    const Jet2 a = f.jet(fp), b = f.jet(fq);
    Eigen::Matrix<double, 6, 1> v;
    v << a.value, a.grad, b.value, b.grad;
    return v;
}

}  // namespace

TEST(Ensemble, RejectsInvalid) {
    EXPECT_THROW(EnsembleSpec::spherical_harmonic(0), InvalidSpec);
    EXPECT_THROW(EnsembleSpec::spherical_harmonic(10001), InvalidSpec);
    EXPECT_THROW(EnsembleSpec::band_limited(3, {0.0, 0.0}, 3.0), InvalidSpec);
    EXPECT_THROW(EnsembleSpec::band_limited(3, {1.0, -1.0}, 3.0), InvalidSpec);
}

TEST(Ensemble, JsonRoundTrip) {
    auto s = EnsembleSpec::gaussian_band(20, 2.0);
    s.set_declared_gamma(1.5);
    EXPECT_EQ(EnsembleSpec::from_json(s.to_json()), s);
    auto h = EnsembleSpec::spherical_harmonic(7);
    EXPECT_EQ(EnsembleSpec::from_json(h.to_json()), h);
    EXPECT_DOUBLE_EQ(h.radius(), 7.0);
}

TEST(Geometry, FrameAndChart) {
    Rng rng = make_rng(1);
    for (int t = 0; t < 100; ++t) {
        const SpherePoint p(random_unit(rng), 9.0);
        const auto fr = TangentFrame::at(p);
        EXPECT_NEAR(p.unit.norm(), 1.0, 1e-12);
        EXPECT_NEAR(fr.e1.dot(fr.e2), 0.0, 1e-12);
        EXPECT_NEAR(fr.e1.dot(p.unit), 0.0, 1e-12);
        EXPECT_NEAR(fr.e2.dot(p.unit), 0.0, 1e-12);
        EXPECT_NEAR(fr.e1.cross(fr.e2).dot(p.unit), 1.0, 1e-12);
        auto rnd = [&] {
            Vec2 X(standard_normal(rng), standard_normal(rng));
            return Vec2(X * (0.5 * 9.0 * uniform01(rng) / X.norm()));
        };
        const Vec2 X = rnd(), Y = rnd();
        const double d = distance(fr.chart(X), fr.chart(Y));
        EXPECT_LE((X - Y).norm(), d + 1e-12);
        EXPECT_LE(d, 2 * (X - Y).norm() + 1e-12);
        EXPECT_NEAR((fr.inverse_chart(fr.chart(X)) - X).norm(), 0.0, 1e-12);
    }
    const auto fr = TangentFrame::at(SpherePoint(Vec3::UnitZ(), 4.0));
    EXPECT_THROW(fr.chart(Vec2(2.5, 0.0)), DomainError);
}

TEST(FieldSample, MatchesSpecialFunctionOracle) {
    Rng rng = make_rng(2);
    for (auto spec : {EnsembleSpec::spherical_harmonic(11), EnsembleSpec::gaussian_band(15, 2.0)}) {
        const auto f = sample_field(spec, 42);
        for (int t = 0; t < 20; ++t) {
            const Vec3 u = random_unit(rng);
            EXPECT_NEAR(f.value(u), oracle_value(f, u), 1e-11);
        }
    }
}

TEST(FieldSample, DegreeOneIsLinearForm) {
    const auto spec = EnsembleSpec::spherical_harmonic(1);
    const auto f = sample_field(spec, 5);
    // Y_{1,0} = c z, Y_{1,1} = c x, Y_{1,-1} = c y with c = sqrt(3 / 4 pi); times sqrt(4 pi / 3)
    const Vec3 a(f.coefficient(1, 1), f.coefficient(1, -1), f.coefficient(1, 0));
    Rng rng = make_rng(3);
    for (int t = 0; t < 10; ++t) {
        const SpherePoint p(random_unit(rng), 1.0);
        EXPECT_NEAR(f.value(p), a.dot(p.unit), 1e-13);
        const auto fr = TangentFrame::at(p);
        const Jet2 j = f.jet(fr);
        EXPECT_NEAR(j.grad.x(), a.dot(fr.e1), 1e-13);
        EXPECT_NEAR(j.grad.y(), a.dot(fr.e2), 1e-13);
    }
}

TEST(FieldSample, Determinism) {
    const auto spec = EnsembleSpec::gaussian_band(12, 1.5);
    const auto f = sample_field(spec, 77), g = sample_field(spec, 77);
    EXPECT_EQ(f.coefficients(), g.coefficients());
    const auto fr = TangentFrame::at(SpherePoint(Vec3(1, 2, 3), spec.radius()));
    EXPECT_EQ(f.jet(fr).hess, g.jet(fr).hess);
}

TEST(FieldSample, ParityExact) {
    Rng rng = make_rng(4);
    for (int n : {1, 2, 7, 30}) {
        const auto f = sample_field(EnsembleSpec::spherical_harmonic(n), n);
        const double s = (n % 2) ? -1.0 : 1.0;
        for (int t = 0; t < 20; ++t) {
            const Vec3 u = random_unit(rng);
            EXPECT_EQ(f.value(Vec3(-u)), s * f.value(u));
        }
    }
}

TEST(FieldSample, JetMatchesFiniteDifferences) {
    Rng rng = make_rng(6);
    const double h = 1e-4;
    for (auto spec : {EnsembleSpec::spherical_harmonic(8), EnsembleSpec::gaussian_band(10, 1.5)}) {
        const auto f = sample_field(spec, 9);
        for (int t = 0; t < 10; ++t) {
            const auto fr = TangentFrame::at(SpherePoint(random_unit(rng), spec.radius()));
            const Jet2 j = f.jet(fr);
            auto F = [&](double a, double b) { return f.value(fr.chart(Vec2(a, b))); };
            const Vec2 g((F(h, 0) - F(-h, 0)) / (2 * h), (F(0, h) - F(0, -h)) / (2 * h));
            Mat2 H;
            H(0, 0) = (F(h, 0) - 2 * F(0, 0) + F(-h, 0)) / (h * h);
            H(1, 1) = (F(0, h) - 2 * F(0, 0) + F(0, -h)) / (h * h);
            H(0, 1) = H(1, 0) = (F(h, h) - F(h, -h) - F(-h, h) + F(-h, -h)) / (4 * h * h);
            const double gs = std::max(1.0, j.grad.norm()), hs = std::max(1.0, j.hess.norm());
            EXPECT_LT((g - j.grad).norm() / gs, 1e-5);
            EXPECT_LT((H - j.hess).norm() / hs, 1e-5);
            EXPECT_NEAR(j.value, F(0, 0), 1e-12);
            EXPECT_NEAR(j.hess(0, 1), j.hess(1, 0), 1e-10 * hs);

            // gradient from the ambient evaluator agrees with the chart jet
            const auto [v, ga] = f.value_and_gradient(fr.base.unit);
            EXPECT_NEAR(v, j.value, 1e-12);
            EXPECT_LT((fr.from_ambient(ga) - j.grad).norm() / gs, 1e-10);

            // third derivatives against differences of the analytic Hessian
            const Jet3 j3 = f.jet3(fr);
            const Mat2 hx = (f.chart_jet(fr, Vec2(h, 0)).hess - f.chart_jet(fr, Vec2(-h, 0)).hess) / (2 * h);
            const Mat2 hy = (f.chart_jet(fr, Vec2(0, h)).hess - f.chart_jet(fr, Vec2(0, -h)).hess) / (2 * h);
            const double ts = std::max(1.0, std::abs(j3.third[0]) + std::abs(j3.third[3]));
            EXPECT_LT(std::abs(hx(0, 0) - j3.third[0]) / ts, 1e-5);
            EXPECT_LT(std::abs(hx(0, 1) - j3.third[1]) / ts, 1e-5);
            EXPECT_LT(std::abs(hy(0, 0) - j3.third[1]) / ts, 1e-5);
            EXPECT_LT(std::abs(hx(1, 1) - j3.third[2]) / ts, 1e-5);
            EXPECT_LT(std::abs(hy(1, 1) - j3.third[3]) / ts, 1e-5);
            EXPECT_LT((j3.hess - j.hess).norm() / hs, 1e-12);
        }
    }
}

TEST(FieldSample, UnitVarianceMonteCarlo) {
    const auto spec = EnsembleSpec::spherical_harmonic(4);
    const int M = 10000;
    Rng rng = make_rng(7);
    std::vector<Vec3> pts;
    for (int i = 0; i < 10; ++i) pts.push_back(random_unit(rng));
    std::vector<double> s(pts.size(), 0.0);
    for (int k = 0; k < M; ++k) {
        const auto f = sample_field(spec, stream_key(100, {std::uint64_t(k)}));
        for (std::size_t i = 0; i < pts.size(); ++i) s[i] += std::pow(f.value(pts[i]), 2);
    }
    // second moment of chi^2(1) has standard deviation sqrt(2)
    for (double v : s) EXPECT_NEAR(v / M, 1.0, 3 * std::sqrt(2.0) / std::sqrt(M));
}

TEST(FieldSample, ValueGradientUncorrelated) {
    const auto spec = EnsembleSpec::spherical_harmonic(6);
    const int M = 10000;
    const auto fr = TangentFrame::at(SpherePoint(Vec3(0.3, -0.2, 0.9), spec.radius()));
    double sxy = 0, sxx = 0, syy = 0;
    for (int k = 0; k < M; ++k) {
        const Jet2 j = sample_field(spec, stream_key(200, {std::uint64_t(k)})).jet(fr);
        sxy += j.value * j.grad.x();
        sxx += j.value * j.value;
        syy += j.grad.x() * j.grad.x();
    }
    EXPECT_NEAR(sxy / std::sqrt(sxx * syy), 0.0, 3 / std::sqrt(M));
}

TEST(FieldSample, RotationInvariance) {
    const auto spec = EnsembleSpec::spherical_harmonic(9);
    const int M = 10000;
    Rng rng = make_rng(8);
    const Vec3 x = random_unit(rng);
    const Eigen::Matrix3d R =
        Eigen::AngleAxisd(1.1, Vec3(1, 2, -1).normalized()).toRotationMatrix();
    std::vector<double> a, b;
    for (int k = 0; k < M; ++k) {
        a.push_back(sample_field(spec, stream_key(300, {std::uint64_t(k)})).value(x));
        b.push_back(sample_field(spec, stream_key(301, {std::uint64_t(k)})).value(Vec3(R * x)));
    }
    EXPECT_LT(ks_statistic(a, b), 1.628 * std::sqrt(2.0 / M));
}

TEST(Covariance, BasicProperties) {
    for (auto spec : {EnsembleSpec::spherical_harmonic(13), EnsembleSpec::gaussian_band(30, 3.0)}) {
        EXPECT_NEAR(covariance(spec, 0.0), 1.0, 1e-14);
        for (int i = 0; i <= 200; ++i) {
            const double d = kPi * spec.radius() * i / 200;
            EXPECT_LE(std::abs(covariance(spec, d)), 1.0 + 1e-12);
        }
        EXPECT_THROW(covariance(spec, -1.0), DomainError);
        EXPECT_THROW(covariance(spec, 4 * spec.radius()), DomainError);
    }
    // addition theorem: degree n is P_n itself
    const auto h = EnsembleSpec::spherical_harmonic(5);
    for (double d : {0.3, 1.7, 4.0, 11.0})
        EXPECT_NEAR(covariance(h, d), std::legendre(5, std::cos(d / 5.0)), 1e-13);
}

TEST(Covariance, MonteCarlo) {
    const auto spec = EnsembleSpec::spherical_harmonic(6);
    const int M = 100000;
    const SpherePoint p(Vec3::UnitZ(), spec.radius());
    std::vector<Vec3> q;
    for (int i = 0; i < 20; ++i) {
        const double a = kPi * (i + 0.5) / 20;
        q.emplace_back(std::sin(a) * std::cos(2.0 * i), std::sin(a) * std::sin(2.0 * i), std::cos(a));
    }
    std::vector<double> s(q.size(), 0.0);
    for (int k = 0; k < M; ++k) {
        const auto f = sample_field(spec, stream_key(400, {std::uint64_t(k)}));
        const double fp = f.value(p);
        for (std::size_t i = 0; i < q.size(); ++i) s[i] += fp * f.value(q[i]);
    }
    for (std::size_t i = 0; i < q.size(); ++i) {
        const double d = distance(p, SpherePoint(q[i], spec.radius()));
        EXPECT_NEAR(s[i] / M, covariance(spec, d), 3 / std::sqrt(double(M)));
    }
}

TEST(Covariance, DecayForGaussianBand) {
    auto spec = EnsembleSpec::gaussian_band(40, 4.0);
    spec.set_declared_gamma(1.0);
    const double k10 = std::abs(covariance(spec, 10)), k20 = std::abs(covariance(spec, 20)),
                 k40 = std::abs(covariance(spec, 40));
    EXPECT_GT(k10, k20);
    EXPECT_GT(k20, k40);
    const double slope = std::log(k40 / k10) / std::log(4.0);
    RecordProperty("decay_slope", std::to_string(slope));
    EXPECT_LE(slope, -spec.declared_gamma() / 2);
}

TEST(PairCovariance, MatchesBasisSum) {
    Rng rng = make_rng(9);
    for (auto spec : {EnsembleSpec::spherical_harmonic(5), EnsembleSpec::gaussian_band(8, 1.0)}) {
        const auto fp = TangentFrame::at(SpherePoint(random_unit(rng), spec.radius()));
        const auto fq = TangentFrame::at(SpherePoint(random_unit(rng), spec.radius())).rotated(0.4);
        Mat6 oracle = Mat6::Zero();
        for (int l = spec.min_degree(); l <= spec.max_degree(); ++l)
            for (int m = -l; m <= l; ++m) {
                const auto v = jet_vector(unit_basis(spec, l, m), fp, fq);
                oracle += v * v.transpose();
            }
        const Mat6 g = pair_covariance_matrix(spec, fp, fq);
        EXPECT_LT((g - oracle).cwiseAbs().maxCoeff(), 1e-11);
    }
}

TEST(PairCovariance, SelfBlockAndAntipode) {
    for (int n : {3, 4}) {
        const auto spec = EnsembleSpec::spherical_harmonic(n);
        const auto fp = TangentFrame::at(SpherePoint(Vec3(1, 1, 0.2), spec.radius()));
        const Mat6 g = pair_covariance_matrix(spec, fp, fp);
        for (int i : {1, 2}) {
            EXPECT_NEAR(g(0, i), 0.0, 1e-10);
            EXPECT_NEAR(g(3, 3 + i), 0.0, 1e-10);
        }
        // per-direction gradient variance n(n+1) / (2 L^2)
        EXPECT_NEAR(g(1, 1), n * (n + 1) / (2.0 * n * n), 1e-12);
        auto anti = fp;
        anti.base = fp.base.antipode();
        anti.e2 = -fp.e2;
        const Mat6 ga = pair_covariance_matrix(spec, fp, anti);
        EXPECT_EQ(ga(0, 3), (n % 2) ? -1.0 : 1.0);
    }
}

TEST(PairCovariance, PositiveSemidefinite) {
    Rng rng = make_rng(10);
    const auto spec = EnsembleSpec::gaussian_band(12, 2.0);
    for (int t = 0; t < 100; ++t) {
        const auto fp = TangentFrame::at(SpherePoint(random_unit(rng), spec.radius()));
        const auto fq = TangentFrame::at(SpherePoint(random_unit(rng), spec.radius()));
        Eigen::SelfAdjointEigenSolver<Mat6> es(pair_covariance_matrix(spec, fp, fq));
        EXPECT_GE(es.eigenvalues().minCoeff(), -1e-9);
    }
}

TEST(PairCovariance, MonteCarloJets) {
    const auto spec = EnsembleSpec::spherical_harmonic(3);
    const int M = 1000000;
    const auto fp = TangentFrame::at(SpherePoint(Vec3(0.2, 0.5, 0.8), spec.radius()));
    const auto fq = TangentFrame::at(SpherePoint(Vec3(-0.4, 0.7, 0.1), spec.radius()));
    Mat6 s = Mat6::Zero();
    for (int k = 0; k < M; ++k) {
        const auto v = jet_vector(sample_field(spec, stream_key(500, {std::uint64_t(k)})), fp, fq);
        s += v * v.transpose();
    }
    s /= M;
    const Mat6 g = pair_covariance_matrix(spec, fp, fq);
    EXPECT_LT((s - g).cwiseAbs().maxCoeff(), 5 / std::sqrt(double(M)));
}

TEST(JetCovariance, MatchesBasisSum) {
    const auto spec = EnsembleSpec::gaussian_band(9, 1.0);
    const auto fr = TangentFrame::at(SpherePoint(Vec3::UnitZ(), spec.radius()));
    Mat6 oracle = Mat6::Zero();
    for (int l = spec.min_degree(); l <= spec.max_degree(); ++l)
        for (int m = -l; m <= l; ++m) {
            const Jet2 j = unit_basis(spec, l, m).jet(fr);
            Eigen::Matrix<double, 6, 1> v;
            v << j.value, j.grad, j.hess(0, 0), j.hess(0, 1), j.hess(1, 1);
            oracle += v * v.transpose();
        }
    EXPECT_LT((jet_covariance(spec) - oracle).cwiseAbs().maxCoeff(), 1e-11);
}
