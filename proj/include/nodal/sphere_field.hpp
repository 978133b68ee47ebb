#pragma once

#include "nodal/errors.hpp"

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace nodal {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2d;
using Mat6 = Eigen::Matrix<double, 6, 6>;

/// Point of the sphere of radius L, stored as a unit vector plus L.
struct SpherePoint {
    Vec3 unit = Vec3::UnitZ();
    double radius = 1.0;

    SpherePoint() = default;
    SpherePoint(const Vec3& direction, double radius_L);

    /// Exact negation (no renormalization).
    SpherePoint antipode() const {
        SpherePoint q = *this;
        q.unit = -unit;
        return q;
    }
};

/// Geodesic distance on S^2(L).
double distance(const SpherePoint& x, const SpherePoint& y);
/// Angle between two unit vectors, accurate for nearly (anti)parallel inputs.
double angle_between(const Vec3& a, const Vec3& b);

/// Orthonormal frame of the tangent plane at `base`, with e1 x e2 = outward normal.
/// The chart Psi maps X in the tangent plane (in units of length on S^2(L)) to
/// the point of the hemisphere whose orthogonal projection is X.
struct TangentFrame {
    SpherePoint base;
    Vec3 e1 = Vec3::UnitX();
    Vec3 e2 = Vec3::UnitY();

    /// Deterministic frame at p.
    static TangentFrame at(const SpherePoint& p);
    /// Frame at p whose first axis is the tangential part of `direction`.
    static TangentFrame aligned(const SpherePoint& p, const Vec3& direction);

    TangentFrame rotated(double angle) const;

    SpherePoint chart(const Vec2& X) const;
    /// Orthogonal projection of q onto the tangent plane (q on the same hemisphere).
    Vec2 inverse_chart(const SpherePoint& q) const;
    Vec3 to_ambient(const Vec2& v) const { return v.x() * e1 + v.y() * e2; }
    Vec2 from_ambient(const Vec3& v) const { return {v.dot(e1), v.dot(e2)}; }
};

enum class EnsembleKind { SphericalHarmonic, BandLimited };

/// Rotation-invariant Gaussian ensemble on S^2(L), with unit pointwise variance.
/// For the harmonic kind the radius is the degree n.
class EnsembleSpec {
  public:
    static EnsembleSpec spherical_harmonic(int degree);
    /// weights[i] is the weight of degree (min_degree + i).
    static EnsembleSpec band_limited(int min_degree, std::vector<double> weights, double radius_L);
    /// Degrees weighted by exp(-(l-n0)^2 / (2 sigma^2)) over [n0-3sigma, n0+3sigma].
    static EnsembleSpec gaussian_band(int center_degree, double sigma_degrees, double radius_L = 0.0);

    EnsembleKind kind() const { return kind_; }
    int degree() const { return max_degree_; }
    int min_degree() const { return min_degree_; }
    int max_degree() const { return max_degree_; }
    double radius() const { return radius_; }
    /// Normalized weight of degree l (sums to one over the support).
    double weight(int l) const;
    const std::vector<double>& weights() const { return weights_; }

    /// Declared correlation decay exponent (metadata; measured, never asserted).
    double declared_gamma() const { return gamma_; }
    void set_declared_gamma(double g) { gamma_ = g; }

    /// 2*pi / sqrt(n(n+1)) on the unit sphere for the top degree n.
    double unit_wavelength() const;

    bool operator==(const EnsembleSpec& o) const;

    nlohmann::json to_json() const;
    static EnsembleSpec from_json(const nlohmann::json& j);

  private:
    void validate() const;

    EnsembleKind kind_ = EnsembleKind::SphericalHarmonic;
    int min_degree_ = 1;
    int max_degree_ = 1;
    std::vector<double> weights_;  // normalized, indexed from min_degree_
    double radius_ = 1.0;
    double gamma_ = 0.0;
};

/// Value, gradient and Hessian of f o Psi_p at a chart point, gradient and
/// Hessian per unit length on S^2(L).
struct Jet2 {
    double value = 0.0;
    Vec2 grad = Vec2::Zero();
    Mat2 hess = Mat2::Zero();

    /// Eigenvalues in ascending order.
    Vec2 eigenvalues() const;
    double inv_hess_norm() const;
};

/// Jet2 plus the third derivative tensor components (111, 112, 122, 222).
struct Jet3 : Jet2 {
    std::array<double, 4> third{};

    /// Operator norms of d^0..d^3 (symmetric forms, maximized over directions).
    std::array<double, 4> form_norms() const;
};

/// Realized field: Gaussian coefficients in the real orthonormal harmonic basis.
class FieldSample {
  public:
    /// raw[l][m + l] are the standard normal coefficients a_{l,m}.
    FieldSample(EnsembleSpec spec, std::vector<std::vector<double>> raw, std::uint64_t seed);

    const EnsembleSpec& spec() const { return spec_; }
    std::uint64_t seed() const { return seed_; }
    int degree() const { return spec_.max_degree(); }
    double radius() const { return spec_.radius(); }
    /// a_{l,m}, m = -l..l.
    double coefficient(int l, int m) const { return raw_[l][m + l]; }
    const std::vector<std::vector<double>>& coefficients() const { return raw_; }
    /// Constant added to every value (test hook: moves a chosen critical value near zero).
    double offset() const { return offset_; }
    FieldSample with_offset(double c) const {
        FieldSample g = *this;
        g.offset_ = c;
        return g;
    }

    double value(const Vec3& unit) const;
    double value(const SpherePoint& p) const { return value(p.unit); }
    /// Value and tangential gradient (per unit length on S^2(L)), as an ambient vector.
    std::pair<double, Vec3> value_and_gradient(const Vec3& unit) const;

    Jet2 jet(const TangentFrame& frame) const { return chart_jet(frame, Vec2::Zero()); }
    /// Jet of f o Psi_p at chart point X.
    Jet2 chart_jet(const TangentFrame& frame, const Vec2& X) const;
    Jet3 jet3(const TangentFrame& frame) const;

  private:
    EnsembleSpec spec_;
    std::vector<std::vector<double>> raw_;
    std::uint64_t seed_;
    double offset_ = 0.0;
    // Per-order effective coefficients: eff_[m] holds (cos, sin) weights for l = m..lmax.
    std::vector<std::vector<std::pair<double, double>>> eff_;
    // Three-term recurrence constants shared between samples of equal top degree.
    std::shared_ptr<const std::vector<std::vector<std::pair<double, double>>>> recurrence_;
};

FieldSample sample_field(const EnsembleSpec& spec, std::uint64_t seed);
/// Sample with explicit coefficients (tests and constructed fields).
FieldSample field_from_coefficients(const EnsembleSpec& spec, std::vector<std::vector<double>> raw);

/// k_L(d) = sum_l w_l P_l(cos(d / L)).
double covariance(const EnsembleSpec& spec, double d);

/// Covariance of (f(p), grad f(p), f(q), grad f(q)) in the given frames,
/// obtained by differentiating the kernel through both charts.
Mat6 pair_covariance_matrix(const EnsembleSpec& spec, const TangentFrame& fp, const TangentFrame& fq);

/// One-point covariance of (f, d1 f, d2 f, d11 f, d12 f, d22 f) at any point.
Mat6 jet_covariance(const EnsembleSpec& spec);

}  // namespace nodal
