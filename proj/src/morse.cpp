#include "nodal/morse.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace nodal {

// ---------------------------------------------------------------- surfaces

SphereSurface::SphereSurface(const FieldSample& f) : f_(&f), L_(f.radius()) {
    const double n = f.degree();
    const double wavelength = 2.0 * M_PI * L_ / std::sqrt(n * (n + 1.0));
    step_ = 0.1 * wavelength;
    max_len_ = 10.0 * L_ * n;
}

std::pair<double, Vec3> SphereSurface::value_and_gradient(const Vec3& x) const {
    return f_->value_and_gradient(x.normalized());
}

Vec3 SphereSurface::from_chart(const ChartFrame& c, const Vec2& X) const {
    TangentFrame tf;
    tf.base = SpherePoint(c.center, L_);
    tf.e1 = c.e1;
    tf.e2 = c.e2;
    return tf.chart(X).unit * L_;
}

Vec2 SphereSurface::to_chart(const ChartFrame& c, const Vec3& x) const { return {c.e1.dot(x), c.e2.dot(x)}; }

ChartFrame SphereSurface::frame_at(const SpherePoint& p) const {
    const TangentFrame tf = TangentFrame::at(p);
    return {p.unit * L_, tf.e1, tf.e2};
}

PatchSurface::PatchSurface(Function F, double period1, double period2, double step, double max_length)
    : F_(std::move(F)), P1_(period1), P2_(period2), step_(step), max_len_(max_length) {
    if (!(P1_ > 0 && P2_ > 0 && step_ > 0 && max_len_ > 0)) throw InvalidSpec("patch periods and steps must be positive");
}

Vec3 PatchSurface::wrap(Vec3 x) const {
    x.x() -= P1_ * std::floor(x.x() / P1_);
    x.y() -= P2_ * std::floor(x.y() / P2_);
    x.z() = 0.0;
    return x;
}

std::pair<double, Vec3> PatchSurface::value_and_gradient(const Vec3& x) const {
    auto [v, g] = F_(Vec2(x.x(), x.y()));
    return {v, Vec3(g.x(), g.y(), 0.0)};
}

Vec3 PatchSurface::move(const Vec3& x, const Vec3& v) const { return wrap(x + v); }

Vec3 PatchSurface::displacement(const Vec3& x, const Vec3& y) const {
    Vec3 d = x - y;
    d.x() -= P1_ * std::round(d.x() / P1_);
    d.y() -= P2_ * std::round(d.y() / P2_);
    d.z() = 0.0;
    return d;
}

Vec3 PatchSurface::from_chart(const ChartFrame& c, const Vec2& X) const {
    return wrap(c.center + X.x() * c.e1 + X.y() * c.e2);
}

Vec2 PatchSurface::to_chart(const ChartFrame& c, const Vec3& x) const {
    const Vec3 d = displacement(x, c.center);
    return {c.e1.dot(d), c.e2.dot(d)};
}

// ---------------------------------------------------------------- joints

bool Joint::contains(const Vec2& X) const {
    return std::abs(X.x()) <= 3.0 * delta && std::abs(a * X.x() * X.x() - b * X.y() * X.y()) <= a * delta * delta;
}

int Joint::terminal_of(const Vec2& X) const {
    if (!contains(X) || std::abs(X.x()) < 2.0 * delta) return -1;
    if (X.x() > 0) return X.y() >= 0 ? 0 : 3;
    return X.y() >= 0 ? 1 : 2;
}

double Joint::extent() const { return delta * std::sqrt(9.0 + 10.0 * a / b); }

std::vector<Vec2> joint_boundary_points(const Joint& j, int per_branch) {
    std::vector<Vec2> out;
    out.reserve(4 * per_branch);
    const double d = j.delta, r = j.b / j.a;
    const double x2max = std::sqrt(8.0 / r) * d;
    auto t_at = [&](int i) { return -1.0 + (2.0 * i + 1.0) / per_branch; };
    for (int i = 0; i < per_branch; ++i) {  // east, X2 increasing
        const double x2 = t_at(i) * x2max;
        out.emplace_back(std::sqrt(d * d + r * x2 * x2), x2);
    }
    for (int i = 0; i < per_branch; ++i) {  // north, X1 decreasing
        const double x1 = -t_at(i) * 3.0 * d;
        out.emplace_back(x1, std::sqrt((x1 * x1 + d * d) / r));
    }
    for (int i = 0; i < per_branch; ++i) {  // west, X2 decreasing
        const double x2 = -t_at(i) * x2max;
        out.emplace_back(-std::sqrt(d * d + r * x2 * x2), x2);
    }
    for (int i = 0; i < per_branch; ++i) {  // south, X1 increasing
        const double x1 = t_at(i) * 3.0 * d;
        out.emplace_back(x1, -std::sqrt((x1 * x1 + d * d) / r));
    }
    return out;
}

namespace {

int sgn(double x) { return x > 0 ? 1 : (x < 0 ? -1 : 0); }

Joint make_joint(const Surface& s, const LocalCritical& c, double A, double c_joint) {
    Eigen::SelfAdjointEigenSolver<Mat2> es(c.hess);
    const Vec2 mu = es.eigenvalues();
    if (!(mu(0) < 0 && mu(1) > 0)) throw InvalidSpec("joint requested at a point that is not a saddle");
    const int k = std::abs(mu(0)) < std::abs(mu(1)) ? 0 : 1;
    Vec2 v = es.eigenvectors().col(k);
    if (v(0) < 0 || (v(0) == 0 && v(1) < 0)) v = -v;
    Joint j;
    j.frame.center = c.frame.center;
    j.frame.e1 = (v(0) * c.frame.e1 + v(1) * c.frame.e2).normalized();
    j.frame.e2 = s.normal(c.frame.center).cross(j.frame.e1).normalized();
    j.a = std::abs(mu(k));
    j.b = std::abs(mu(1 - k));
    j.h_sign = sgn(mu(k));
    j.delta = c_joint * j.a / A;  // c / (A Delta_p), Delta_p = 1 / a
    j.value = c.value;
    j.source = c.source;
    const auto pts = joint_boundary_points(j, 16);
    for (int i = 0; i < 64; ++i) {
        const int branch = i / 16;
        const int expected = (branch % 2 == 0) ? j.h_sign : -j.h_sign;
        if (sgn(s.value(s.from_chart(j.frame, pts[i]))) != expected) ++j.boundary_violations;
    }
    return j;
}

ExtremumDisk make_disk(const Surface& s, const LocalCritical& c, double A, double c_joint) {
    Eigen::SelfAdjointEigenSolver<Mat2> es(c.hess);
    const Vec2 mu = es.eigenvalues();
    if (!(mu(0) * mu(1) > 0)) throw InvalidSpec("disk requested at a point that is not an extremum");
    ExtremumDisk d;
    d.frame = c.frame;
    d.eigen_sign = sgn(mu(0));
    d.mu_min = std::min(std::abs(mu(0)), std::abs(mu(1)));
    d.delta = c_joint * d.mu_min / A;
    d.value = c.value;
    d.source = c.source;
    for (int i = 0; i < 64; ++i) {
        const double t = 2.0 * M_PI * i / 64.0;
        const Vec3 x = s.from_chart(d.frame, Vec2(d.delta * std::cos(t), d.delta * std::sin(t)));
        if (sgn(s.value(x)) != d.eigen_sign) ++d.boundary_violations;
    }
    return d;
}

}  // namespace

JointSet build_joints(const Surface& s, const std::vector<LocalCritical>& saddles,
                      const std::vector<LocalCritical>& extrema, double A, double c_joint,
                      const std::vector<Vec3>& others) {
    if (!(c_joint > 0 && c_joint < 1)) throw InvalidSpec("c_joint must lie in (0, 1)");
    if (!(A > 0)) throw InvalidSpec("A must be positive");
    std::string last;
    for (int attempt = 0; attempt <= 3; ++attempt) {
        JointSet js;
        js.c_joint = c_joint / double(1 << attempt);
        js.shrinks = attempt;
        for (const auto& c : saddles) js.joints.push_back(make_joint(s, c, A, js.c_joint));
        for (const auto& c : extrema) js.disks.push_back(make_disk(s, c, A, js.c_joint));
        std::vector<std::pair<Vec3, double>> balls;
        for (const auto& j : js.joints) balls.emplace_back(j.frame.center, j.extent());
        for (const auto& d : js.disks) balls.emplace_back(d.frame.center, d.delta);
        std::ostringstream clash;
        for (std::size_t i = 0; i < balls.size() && clash.str().empty(); ++i) {
            for (std::size_t k = i + 1; k < balls.size(); ++k) {
                const double dist = s.distance(balls[i].first, balls[k].first);
                if (dist <= balls[i].second + balls[k].second) {
                    clash << "regions " << i << " and " << k << " overlap (distance " << dist << ")";
                    break;
                }
            }
            for (const auto& o : others) {
                const double dist = s.distance(o, balls[i].first);
                if (dist > 1e-9 * (1.0 + balls[i].second) && dist <= balls[i].second) {
                    clash << "region " << i << " contains a second critical point";
                    break;
                }
            }
        }
        if (clash.str().empty()) {
            if (attempt > 0) js.log.push_back("c_joint halved " + std::to_string(attempt) + " time(s)");
            return js;
        }
        last = clash.str();
    }
    throw DomainError("saddles too close for the regime: " + last + " after three halvings of c_joint");
}

LocalCritical local_critical(const SphereSurface& s, const CriticalPoint& p) {
    LocalCritical c;
    const TangentFrame tf = TangentFrame::at(p.location);
    c.frame = {p.location.unit * s.radius(), tf.e1, tf.e2};
    const Jet2 j = s.field().jet(tf);
    c.value = j.value;
    c.hess = j.hess;
    return c;
}

JointSet build_joints(const SphereSurface& s, const CrSet& points, double A, double c_joint,
                      const std::vector<CriticalPoint>& all_points) {
    std::vector<LocalCritical> saddles, extrema;
    for (std::size_t i = 0; i < points.members.size(); ++i) {
        const auto& p = points.members[i];
        if (p.kind == CritClass::Degenerate) throw InvalidSpec("degenerate critical point in joint set");
        LocalCritical c = local_critical(s, p);
        c.source = static_cast<int>(i);
        (p.kind == CritClass::Saddle ? saddles : extrema).push_back(c);
    }
    std::vector<Vec3> others;
    for (const auto& p : all_points) others.push_back(s.point(p.location));
    return build_joints(s, saddles, extrema, A, c_joint, others);
}

}  // namespace nodal
