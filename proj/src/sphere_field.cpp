#include "nodal/sphere_field.hpp"

#include "nodal/rng.hpp"
#include "nodal/taylor.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>

namespace nodal {

namespace {

constexpr int kMaxDegree = 10000;
constexpr double kPi = std::numbers::pi;

/// Multiplication of a partial sum by one Cartesian coordinate.
struct ValueOps {
    Vec3 u0;
    double mul(double t, int var) const { return t * u0[var]; }
};

template <int K>
struct TaylorOps {
    Vec3 u0;
    Taylor<3, K> mul(const Taylor<3, K>& t, int var) const { return t.times_linear(var, u0[var]); }
};

inline void add_scaled(double& acc, double s, double t) { acc += s * t; }
template <int NV, int K>
inline void add_scaled(Taylor<NV, K>& acc, double s, const Taylor<NV, K>& t) {
    acc.axpy(s, t);
}

using RecTable = std::vector<std::vector<std::pair<double, double>>>;

std::shared_ptr<const RecTable> recurrence_for(int lmax) {
    static std::mutex mu;
    static std::map<int, std::shared_ptr<const RecTable>> cache;
    std::lock_guard lock(mu);
    auto it = cache.find(lmax);
    if (it != cache.end()) return it->second;
    auto table = std::make_shared<RecTable>(lmax + 1);
    for (int m = 0; m <= lmax; ++m) {
        auto& row = (*table)[m];
        row.assign(lmax - m + 1, {0.0, 0.0});
        for (int l = m + 2; l <= lmax; ++l) {
            const double ll = l, mm = m;
            const double a = std::sqrt((4 * ll * ll - 1) / (ll * ll - mm * mm));
            const double b = std::sqrt(((ll - 1) * (ll - 1) - mm * mm) / (4 * (ll - 1) * (ll - 1) - 1));
            row[l - m] = {a, b};
        }
    }
    cache.emplace(lmax, table);
    return table;
}

/// Taylor series (in chart coordinates around X0) of the unit vector Psi(X)/L.
template <int NV, int K>
std::array<Taylor<NV, K>, 3> chart_series(const TangentFrame& f, const Vec2& X0, int first_var) {
    using T = Taylor<NV, K>;
    const double L = f.base.radius;
    const T x1 = T::variable(first_var, X0.x());
    const T x2 = T::variable(first_var + 1, X0.y());
    const T s = sqrt(T(L * L) - x1 * x1 - x2 * x2);
    std::array<T, 3> u;
    for (int c = 0; c < 3; ++c) {
        u[c] = (x1 * f.e1[c] + x2 * f.e2[c] + s * f.base.unit[c]) * (1.0 / L);
    }
    return u;
}

template <int K>
Taylor<2, K> compose_chart(const Taylor<3, K>& E, const std::array<Taylor<2, K>, 3>& u) {
    using T2 = Taylor<2, K>;
    std::array<std::array<T2, K + 1>, 3> pw;
    for (int v = 0; v < 3; ++v) {
        T2 d = u[v];
        d[0] = 0.0;
        pw[v][0] = T2(1.0);
        for (int k = 1; k <= K; ++k) pw[v][k] = pw[v][k - 1] * d;
    }
    T2 out;
    const auto& idx = Taylor<3, K>::indices();
    for (int i = 0; i < Taylor<3, K>::kSize; ++i) {
        if (E[i] == 0.0) continue;
        const auto& a = idx[i];
        T2 term = pw[0][a[0]] * pw[1][a[1]];
        term = term * pw[2][a[2]];
        out.axpy(E[i], term);
    }
    return out;
}

/// Kernel K(X, Y) = sum_l w_l P_l(<u_p(X), u_q(Y)>) as a series in (X1, X2, Y1, Y2).
template <int K>
Taylor<4, K> kernel_series(const EnsembleSpec& spec, const TangentFrame& fp, const TangentFrame& fq) {
    using T = Taylor<4, K>;
    const auto up = chart_series<4, K>(fp, Vec2::Zero(), 0);
    const auto uq = chart_series<4, K>(fq, Vec2::Zero(), 2);
    T t = up[0] * uq[0] + up[1] * uq[1] + up[2] * uq[2];
    T p0(1.0), p1 = t;
    T acc;
    acc.axpy(spec.weight(0), p0);
    if (spec.max_degree() >= 1) acc.axpy(spec.weight(1), p1);
    for (int l = 2; l <= spec.max_degree(); ++l) {
        T p2 = (t * p1) * ((2.0 * l - 1) / l) - p0 * ((l - 1.0) / l);
        acc.axpy(spec.weight(l), p2);
        p0 = std::move(p1);
        p1 = std::move(p2);
    }
    return acc;
}

}  // namespace

// ---------------------------------------------------------------- geometry

SpherePoint::SpherePoint(const Vec3& direction, double radius_L) : unit(direction.normalized()), radius(radius_L) {
    if (!(radius_L > 0)) throw DomainError("sphere radius must be positive");
}

double angle_between(const Vec3& a, const Vec3& b) { return std::atan2(a.cross(b).norm(), a.dot(b)); }

double distance(const SpherePoint& x, const SpherePoint& y) { return x.radius * angle_between(x.unit, y.unit); }

TangentFrame TangentFrame::at(const SpherePoint& p) {
    const Vec3& n = p.unit;
    // pick the coordinate axis least aligned with n
    Vec3 ref = std::abs(n.x()) < 0.6 ? Vec3::UnitX() : (std::abs(n.y()) < 0.6 ? Vec3::UnitY() : Vec3::UnitZ());
    return aligned(p, ref);
}

TangentFrame TangentFrame::aligned(const SpherePoint& p, const Vec3& direction) {
    TangentFrame f;
    f.base = p;
    Vec3 t = direction - direction.dot(p.unit) * p.unit;
    if (t.norm() < 1e-12) return at(p);
    f.e1 = t.normalized();
    f.e2 = p.unit.cross(f.e1).normalized();
    // re-orthogonalize e1 against rounding
    f.e1 = f.e2.cross(p.unit).normalized();
    return f;
}

TangentFrame TangentFrame::rotated(double angle) const {
    TangentFrame f = *this;
    const double c = std::cos(angle), s = std::sin(angle);
    f.e1 = c * e1 + s * e2;
    f.e2 = -s * e1 + c * e2;
    return f;
}

SpherePoint TangentFrame::chart(const Vec2& X) const {
    const double L = base.radius;
    if (X.norm() > 0.5 * L * (1 + 1e-12)) throw DomainError("chart evaluated beyond |X| <= L/2");
    const double s = std::sqrt(L * L - X.squaredNorm());
    SpherePoint q;
    q.unit = ((X.x() * e1 + X.y() * e2 + s * base.unit) / L).normalized();
    q.radius = L;
    return q;
}

Vec2 TangentFrame::inverse_chart(const SpherePoint& q) const {
    return {base.radius * q.unit.dot(e1), base.radius * q.unit.dot(e2)};
}

// ---------------------------------------------------------------- ensembles

EnsembleSpec EnsembleSpec::spherical_harmonic(int degree) {
    EnsembleSpec s;
    s.kind_ = EnsembleKind::SphericalHarmonic;
    s.min_degree_ = s.max_degree_ = degree;
    s.weights_ = {1.0};
    s.radius_ = degree;
    s.validate();
    return s;
}

EnsembleSpec EnsembleSpec::band_limited(int min_degree, std::vector<double> weights, double radius_L) {
    EnsembleSpec s;
    s.kind_ = EnsembleKind::BandLimited;
    // trim zero weights at both ends
    while (!weights.empty() && weights.back() == 0.0) weights.pop_back();
    std::size_t lead = 0;
    while (lead < weights.size() && weights[lead] == 0.0) ++lead;
    weights.erase(weights.begin(), weights.begin() + static_cast<std::ptrdiff_t>(lead));
    min_degree += static_cast<int>(lead);
    if (weights.empty()) throw InvalidSpec("band-limited spec has empty weight support");
    double total = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0) || !std::isfinite(w)) throw InvalidSpec("weights must be finite and non-negative");
        total += w;
    }
    for (double& w : weights) w /= total;
    s.min_degree_ = min_degree;
    s.max_degree_ = min_degree + static_cast<int>(weights.size()) - 1;
    s.weights_ = std::move(weights);
    s.radius_ = radius_L;
    s.validate();
    return s;
}

EnsembleSpec EnsembleSpec::gaussian_band(int center_degree, double sigma_degrees, double radius_L) {
    if (!(sigma_degrees > 0)) throw InvalidSpec("band width must be positive");
    const int lo = std::max(1, static_cast<int>(std::ceil(center_degree - 3 * sigma_degrees)));
    const int hi = static_cast<int>(std::floor(center_degree + 3 * sigma_degrees));
    if (hi < lo) throw InvalidSpec("empty band");
    std::vector<double> w;
    for (int l = lo; l <= hi; ++l) {
        const double z = (l - center_degree) / sigma_degrees;
        w.push_back(std::exp(-0.5 * z * z));
    }
    return band_limited(lo, std::move(w), radius_L > 0 ? radius_L : static_cast<double>(center_degree));
}

void EnsembleSpec::validate() const {
    if (min_degree_ < 1 || max_degree_ < min_degree_) throw InvalidSpec("degree must be >= 1");
    if (max_degree_ > kMaxDegree) throw InvalidSpec("degree exceeds supported maximum 10^4");
    if (!(radius_ > 0) || !std::isfinite(radius_)) throw InvalidSpec("radius must be positive");
}

double EnsembleSpec::weight(int l) const {
    if (l < min_degree_ || l > max_degree_) return 0.0;
    return weights_[l - min_degree_];
}

double EnsembleSpec::unit_wavelength() const {
    const double n = max_degree_;
    return 2 * kPi / std::sqrt(n * (n + 1));
}

bool EnsembleSpec::operator==(const EnsembleSpec& o) const {
    return kind_ == o.kind_ && min_degree_ == o.min_degree_ && max_degree_ == o.max_degree_ &&
           weights_ == o.weights_ && radius_ == o.radius_ && gamma_ == o.gamma_;
}

nlohmann::json EnsembleSpec::to_json() const {
    nlohmann::json j;
    if (kind_ == EnsembleKind::SphericalHarmonic) {
        j["kind"] = "spherical_harmonic";
        j["degree"] = max_degree_;
    } else {
        j["kind"] = "band_limited";
        j["degree"] = min_degree_;
        j["weights"] = weights_;
        j["radius"] = radius_;
        j["gamma"] = gamma_;
    }
    return j;
}

EnsembleSpec EnsembleSpec::from_json(const nlohmann::json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "spherical_harmonic") return spherical_harmonic(j.at("degree").get<int>());
    if (kind == "band_limited") {
        auto s = band_limited(j.at("degree").get<int>(), j.at("weights").get<std::vector<double>>(),
                              j.at("radius").get<double>());
        // weights already normalized on write; renormalizing is exact up to rounding,
        // so keep the stored values verbatim
        s.weights_ = j.at("weights").get<std::vector<double>>();
        double total = 0.0;
        for (double w : s.weights_) total += w;
        if (std::abs(total - 1.0) > 1e-12)
            for (double& w : s.weights_) w /= total;
        s.gamma_ = j.value("gamma", 0.0);
        return s;
    }
    if (kind == "gaussian_band")
        return gaussian_band(j.at("degree").get<int>(), j.at("sigma").get<double>(), j.value("radius", 0.0));
    throw InvalidSpec("unknown ensemble kind: " + kind);
}

// ---------------------------------------------------------------- jets

Vec2 Jet2::eigenvalues() const {
    const double a = hess(0, 0), b = hess(0, 1), d = hess(1, 1);
    const double mean = 0.5 * (a + d);
    const double r = std::hypot(0.5 * (a - d), b);
    return {mean - r, mean + r};
}

double Jet2::inv_hess_norm() const {
    const Vec2 mu = eigenvalues();
    const double m = std::min(std::abs(mu[0]), std::abs(mu[1]));
    return m > 0 ? 1.0 / m : std::numeric_limits<double>::infinity();
}

std::array<double, 4> Jet3::form_norms() const {
    std::array<double, 4> n{};
    n[0] = std::abs(value);
    n[1] = grad.norm();
    const Vec2 mu = eigenvalues();
    n[2] = std::max(std::abs(mu[0]), std::abs(mu[1]));
    double best = 0.0;
    constexpr int kDirections = 180;
    for (int k = 0; k < kDirections; ++k) {
        const double t = kPi * k / kDirections;
        const double c = std::cos(t), s = std::sin(t);
        const double v =
            third[0] * c * c * c + 3 * third[1] * c * c * s + 3 * third[2] * c * s * s + third[3] * s * s * s;
        best = std::max(best, std::abs(v));
    }
    n[3] = best;
    return n;
}

// ---------------------------------------------------------------- samples

FieldSample::FieldSample(EnsembleSpec spec, std::vector<std::vector<double>> raw, std::uint64_t seed)
    : spec_(std::move(spec)), raw_(std::move(raw)), seed_(seed) {
    const int lmax = spec_.max_degree();
    if (static_cast<int>(raw_.size()) != lmax + 1) throw InvalidSpec("coefficient table has wrong size");
    for (int l = 0; l <= lmax; ++l)
        if (static_cast<int>(raw_[l].size()) != 2 * l + 1) throw InvalidSpec("coefficient row has wrong size");
    recurrence_ = recurrence_for(lmax);
    eff_.resize(lmax + 1);
    for (int m = 0; m <= lmax; ++m) {
        eff_[m].assign(lmax - m + 1, {0.0, 0.0});
        for (int l = std::max(m, spec_.min_degree()); l <= lmax; ++l) {
            const double c = std::sqrt(spec_.weight(l) * 4 * kPi / (2 * l + 1));
            if (m == 0) {
                eff_[m][l - m] = {c * raw_[l][l], 0.0};
            } else {
                const double r2 = std::numbers::sqrt2 * c;
                eff_[m][l - m] = {r2 * raw_[l][l + m], r2 * raw_[l][l - m]};
            }
        }
    }
}

namespace {

/// Sum of the real harmonic expansion as a polynomial in (x, y, z), evaluated
/// with arithmetic type T. Each recurrence step multiplies by one coordinate.
template <class T, class Ops>
T evaluate_expansion(const std::vector<std::vector<std::pair<double, double>>>& eff, const RecTable& rec,
                     int lmin, const Ops& ops) {
    const int lmax = static_cast<int>(eff.size()) - 1;
    T acc{};
    T C(1.0 / std::sqrt(4 * kPi));
    T S(0.0);
    for (int m = 0; m <= lmax; ++m) {
        if (m > 0) {
            const double am = std::sqrt((2.0 * m + 1) / (2.0 * m));
            T Cx = ops.mul(C, 0), Sy = ops.mul(S, 1), Cy = ops.mul(C, 1), Sx = ops.mul(S, 0);
            C = Cx;
            C -= Sy;  // works for both double and Taylor
            C *= am;
            S = Cy;
            S += Sx;
            S *= am;
        }
        const auto& row = eff[m];
        const auto& rrow = rec[m];
        // T_{m,m}
        T c0 = C, s0 = S;
        if (m >= lmin) {
            add_scaled(acc, row[0].first, c0);
            if (m > 0) add_scaled(acc, row[0].second, s0);
        }
        if (m == lmax) break;
        const double g = std::sqrt(2.0 * m + 3);
        T c1 = ops.mul(c0, 2), s1 = ops.mul(s0, 2);
        c1 *= g;
        s1 *= g;
        if (m + 1 >= lmin) {
            add_scaled(acc, row[1].first, c1);
            if (m > 0) add_scaled(acc, row[1].second, s1);
        }
        for (int l = m + 2; l <= lmax; ++l) {
            const auto [a, b] = rrow[l - m];
            T c2 = ops.mul(c1, 2);
            add_scaled(c2, -b, c0);
            c2 *= a;
            c0 = std::move(c1);
            c1 = std::move(c2);
            if (m > 0) {
                T s2 = ops.mul(s1, 2);
                add_scaled(s2, -b, s0);
                s2 *= a;
                s0 = std::move(s1);
                s1 = std::move(s2);
            }
            if (l >= lmin) {
                add_scaled(acc, row[l - m].first, c1);
                if (m > 0) add_scaled(acc, row[l - m].second, s1);
            }
        }
    }
    return acc;
}

}  // namespace

double FieldSample::value(const Vec3& unit) const {
    return offset_ + evaluate_expansion<double>(eff_, *recurrence_, spec_.min_degree(), ValueOps{unit});
}

std::pair<double, Vec3> FieldSample::value_and_gradient(const Vec3& unit) const {
    // hand-unrolled first-order version of evaluate_expansion: (value, d/dx, d/dy, d/dz)
    struct D {
        double v, x, y, z;
    };
    const double ux = unit.x(), uy = unit.y(), uz = unit.z();
    const int lmax = spec_.max_degree(), lmin = spec_.min_degree();
    const auto& rec = *recurrence_;
    D acc{0, 0, 0, 0};
    D C{1.0 / std::sqrt(4 * kPi), 0, 0, 0}, S{0, 0, 0, 0};
    auto add = [&](double w, const D& t) {
        acc.v += w * t.v;
        acc.x += w * t.x;
        acc.y += w * t.y;
        acc.z += w * t.z;
    };
    for (int m = 0; m <= lmax; ++m) {
        if (m > 0) {
            const double am = std::sqrt((2.0 * m + 1) / (2.0 * m));
            // (C + iS) <- am (C + iS)(x + iy)
            const D Cn{am * (C.v * ux - S.v * uy), am * (C.x * ux + C.v - S.x * uy), am * (C.y * ux - S.y * uy - S.v),
                       am * (C.z * ux - S.z * uy)};
            const D Sn{am * (C.v * uy + S.v * ux), am * (C.x * uy + S.x * ux + S.v), am * (C.y * uy + C.v + S.y * ux),
                       am * (C.z * uy + S.z * ux)};
            C = Cn;
            S = Sn;
        }
        const auto& row = eff_[m];
        const auto& rrow = rec[m];
        D c0 = C, s0 = S;
        if (m >= lmin) {
            add(row[0].first, c0);
            if (m > 0) add(row[0].second, s0);
        }
        if (m == lmax) break;
        const double g = std::sqrt(2.0 * m + 3);
        D c1{g * c0.v * uz, g * c0.x * uz, g * c0.y * uz, g * (c0.z * uz + c0.v)};
        D s1{g * s0.v * uz, g * s0.x * uz, g * s0.y * uz, g * (s0.z * uz + s0.v)};
        if (m + 1 >= lmin) {
            add(row[1].first, c1);
            if (m > 0) add(row[1].second, s1);
        }
        for (int l = m + 2; l <= lmax; ++l) {
            const auto [a, b] = rrow[l - m];
            const D c2{a * (uz * c1.v - b * c0.v), a * (uz * c1.x - b * c0.x), a * (uz * c1.y - b * c0.y),
                       a * (uz * c1.z + c1.v - b * c0.z)};
            c0 = c1;
            c1 = c2;
            if (m > 0) {
                const D s2{a * (uz * s1.v - b * s0.v), a * (uz * s1.x - b * s0.x), a * (uz * s1.y - b * s0.y),
                           a * (uz * s1.z + s1.v - b * s0.z)};
                s0 = s1;
                s1 = s2;
            }
            if (l >= lmin) {
                add(row[l - m].first, c1);
                if (m > 0) add(row[l - m].second, s1);
            }
        }
    }
    const Vec3 g(acc.x, acc.y, acc.z);
    const Vec3 tangential = g - g.dot(unit) * unit;
    return {acc.v + offset_, tangential / spec_.radius()};
}

namespace {

// Second-order jet of the ambient extension: value, gradient, Hessian (xx, xy, xz, yy, yz, zz).
struct Q {
    double v = 0;
    std::array<double, 3> g{};
    std::array<double, 6> h{};
};

constexpr int kSym[3][3] = {{0, 1, 2}, {1, 3, 4}, {2, 4, 5}};

// a * t + b * s
inline Q lin(double a, const Q& t, double b, const Q& s) {
    Q r;
    r.v = a * t.v + b * s.v;
    for (int k = 0; k < 3; ++k) r.g[k] = a * t.g[k] + b * s.g[k];
    for (int k = 0; k < 6; ++k) r.h[k] = a * t.h[k] + b * s.h[k];
    return r;
}

// t * x_axis, with x_axis = c at the base point
inline Q times(const Q& t, int axis, double c) {
    Q r;
    r.v = t.v * c;
    for (int k = 0; k < 3; ++k) r.g[k] = t.g[k] * c;
    r.g[axis] += t.v;
    for (int k = 0; k < 3; ++k)
        for (int l = k; l < 3; ++l) {
            double h = t.h[kSym[k][l]] * c;
            if (l == axis) h += t.g[k];
            if (k == axis) h += t.g[l];
            r.h[kSym[k][l]] = h;
        }
    return r;
}

inline void accumulate(Q& acc, double w, const Q& t) {
    acc.v += w * t.v;
    for (int k = 0; k < 3; ++k) acc.g[k] += w * t.g[k];
    for (int k = 0; k < 6; ++k) acc.h[k] += w * t.h[k];
}

}  // namespace

Jet2 FieldSample::chart_jet(const TangentFrame& frame, const Vec2& X) const {
    const double L = spec_.radius();
    const Vec3 p = frame.base.unit;
    const double s = std::sqrt(L * L - X.squaredNorm());
    const Vec3 u = (X.x() * frame.e1 + X.y() * frame.e2 + s * p) / L;
    const double uv[3] = {u.x(), u.y(), u.z()};

    // same recurrence as value_and_gradient, carried to second order
    const int lmax = spec_.max_degree(), lmin = spec_.min_degree();
    const auto& rec = *recurrence_;
    Q acc, C, S;
    C.v = 1.0 / std::sqrt(4 * kPi);
    for (int m = 0; m <= lmax; ++m) {
        if (m > 0) {
            const double am = std::sqrt((2.0 * m + 1) / (2.0 * m));
            const Q Cn = lin(am, times(C, 0, uv[0]), -am, times(S, 1, uv[1]));
            const Q Sn = lin(am, times(C, 1, uv[1]), am, times(S, 0, uv[0]));
            C = Cn;
            S = Sn;
        }
        const auto& row = eff_[m];
        const auto& rrow = rec[m];
        Q c0 = C, s0 = S;
        if (m >= lmin) {
            accumulate(acc, row[0].first, c0);
            if (m > 0) accumulate(acc, row[0].second, s0);
        }
        if (m == lmax) break;
        const double g = std::sqrt(2.0 * m + 3);
        Q c1 = lin(g, times(c0, 2, uv[2]), 0, c0), s1 = lin(g, times(s0, 2, uv[2]), 0, s0);
        if (m + 1 >= lmin) {
            accumulate(acc, row[1].first, c1);
            if (m > 0) accumulate(acc, row[1].second, s1);
        }
        for (int l = m + 2; l <= lmax; ++l) {
            const auto [a, b] = rrow[l - m];
            const Q c2 = lin(a, times(c1, 2, uv[2]), -a * b, c0);
            c0 = c1;
            c1 = c2;
            if (m > 0) {
                const Q s2 = lin(a, times(s1, 2, uv[2]), -a * b, s0);
                s0 = s1;
                s1 = s2;
            }
            if (l >= lmin) {
                accumulate(acc, row[l - m].first, c1);
                if (m > 0) accumulate(acc, row[l - m].second, s1);
            }
        }
    }

    // compose with the chart: du/dX_i = (e_i - X_i p / s) / L, d2u/dX_i dX_j = -(d_ij / s + X_i X_j / s^3) p / L
    const Vec3 G(acc.g[0], acc.g[1], acc.g[2]);
    Eigen::Matrix3d H;
    for (int k = 0; k < 3; ++k)
        for (int l = 0; l < 3; ++l) H(k, l) = acc.h[kSym[k][l]];
    Eigen::Matrix<double, 3, 2> J;
    J.col(0) = (frame.e1 - X.x() / s * p) / L;
    J.col(1) = (frame.e2 - X.y() / s * p) / L;
    const double Gp = G.dot(p) / L;
    Jet2 j;
    j.value = acc.v + offset_;
    j.grad = J.transpose() * G;
    j.hess = J.transpose() * H * J;
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
            j.hess(a, b) -= Gp * ((a == b ? 1 / s : 0.0) + X[a] * X[b] / (s * s * s));
    return j;
}

Jet3 FieldSample::jet3(const TangentFrame& frame) const {
    const auto u = chart_series<2, 3>(frame, Vec2::Zero(), 0);
    const Vec3 u0(u[0][0], u[1][0], u[2][0]);
    const auto E = evaluate_expansion<Taylor<3, 3>>(eff_, *recurrence_, spec_.min_degree(), TaylorOps<3>{u0});
    const auto F = compose_chart<3>(E, u);
    Jet3 j;
    j.value = F[0] + offset_;
    j.grad = {F[1], F[2]};
    j.hess << 2 * F[3], F[4], F[4], 2 * F[5];
    // order-3 graded: (3,0), (2,1), (1,2), (0,3)
    j.third = {6 * F[6], 2 * F[7], 2 * F[8], 6 * F[9]};
    return j;
}

FieldSample sample_field(const EnsembleSpec& spec, std::uint64_t seed) {
    Rng rng = make_rng(seed, {0x5a3c1e});
    const int lmax = spec.max_degree();
    std::vector<std::vector<double>> raw(lmax + 1);
    for (int l = 0; l <= lmax; ++l) {
        raw[l].assign(2 * l + 1, 0.0);
        if (l < spec.min_degree()) continue;
        for (auto& a : raw[l]) a = standard_normal(rng);
    }
    return FieldSample(spec, std::move(raw), seed);
}

FieldSample field_from_coefficients(const EnsembleSpec& spec, std::vector<std::vector<double>> raw) {
    return FieldSample(spec, std::move(raw), 0);
}

// ---------------------------------------------------------------- covariance

double covariance(const EnsembleSpec& spec, double d) {
    const double L = spec.radius();
    if (!(d >= 0.0) || d > kPi * L * (1 + 1e-12)) throw DomainError("distance outside [0, pi L]");
    const double t = std::cos(std::min(d / L, kPi));
    double p0 = 1.0, p1 = t, acc = spec.weight(0) + spec.weight(1) * t;
    for (int l = 2; l <= spec.max_degree(); ++l) {
        const double p2 = ((2.0 * l - 1) * t * p1 - (l - 1.0) * p0) / l;
        acc += spec.weight(l) * p2;
        p0 = p1;
        p1 = p2;
    }
    return acc;
}

Mat6 pair_covariance_matrix(const EnsembleSpec& spec, const TangentFrame& fp, const TangentFrame& fq) {
    using T = Taylor<4, 2>;
    auto block = [&](const TangentFrame& a, const TangentFrame& b) {
        const T k = kernel_series<2>(spec, a, b);
        Eigen::Matrix3d m;
        // row: (F, dX1 F, dX2 F) at a; column: (G, dY1 G, dY2 G) at b
        m(0, 0) = k[0];
        m(1, 0) = k.derivative({1, 0, 0, 0});
        m(2, 0) = k.derivative({0, 1, 0, 0});
        m(0, 1) = k.derivative({0, 0, 1, 0});
        m(0, 2) = k.derivative({0, 0, 0, 1});
        m(1, 1) = k.derivative({1, 0, 1, 0});
        m(1, 2) = k.derivative({1, 0, 0, 1});
        m(2, 1) = k.derivative({0, 1, 1, 0});
        m(2, 2) = k.derivative({0, 1, 0, 1});
        return m;
    };
    Mat6 g;
    const Eigen::Matrix3d pp = block(fp, fp), pq = block(fp, fq), qq = block(fq, fq);
    g.block<3, 3>(0, 0) = 0.5 * (pp + pp.transpose());
    g.block<3, 3>(0, 3) = pq;
    g.block<3, 3>(3, 0) = pq.transpose();
    g.block<3, 3>(3, 3) = 0.5 * (qq + qq.transpose());
    return g;
}

Mat6 jet_covariance(const EnsembleSpec& spec) {
    const TangentFrame f = TangentFrame::at(SpherePoint(Vec3::UnitZ(), spec.radius()));
    const auto k = kernel_series<4>(spec, f, f);
    const std::array<std::array<int, 2>, 6> alpha = {{{0, 0}, {1, 0}, {0, 1}, {2, 0}, {1, 1}, {0, 2}}};
    Mat6 c;
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j)
            c(i, j) = k.derivative({alpha[i][0], alpha[i][1], alpha[j][0], alpha[j][1]});
    return 0.5 * (c + c.transpose());
}

}  // namespace nodal
