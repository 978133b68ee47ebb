#include "nodal/critical.hpp"

#include "nodal/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

namespace nodal {

const char* to_string(CritClass c) {
    switch (c) {
        case CritClass::Min: return "min";
        case CritClass::Max: return "max";
        case CritClass::Saddle: return "saddle";
        default: return "degenerate";
    }
}

CriticalPoint make_critical_point(const SpherePoint& p, const Jet2& jet, double degenerate_tol) {
    CriticalPoint c;
    c.location = p;
    c.value = jet.value;
    c.grad_residual = jet.grad.norm();
    const Vec2 mu = jet.eigenvalues();
    c.mu1 = mu[0];
    c.mu2 = mu[1];
    c.inv_hess_norm = jet.inv_hess_norm();
    if (std::min(std::abs(mu[0]), std::abs(mu[1])) < degenerate_tol)
        c.kind = CritClass::Degenerate;
    else if (mu[0] > 0)
        c.kind = CritClass::Min;
    else if (mu[1] < 0)
        c.kind = CritClass::Max;
    else
        c.kind = CritClass::Saddle;
    return c;
}

namespace {

/// Solve H s = -g; falls back to steepest descent of |g|^2 / 2 when H is numerically singular.
Vec2 newton_step(const Mat2& H, const Vec2& g) {
    const double det = H.determinant();
    if (std::abs(det) <= 1e-14 * std::max(1.0, H.squaredNorm())) {
        const Vec2 d = H * g;
        return d.squaredNorm() > 0 ? Vec2(-d) : Vec2(-g);
    }
    return -(H.inverse() * g);
}

Vec2 clamp_step(Vec2 s, double max_len) {
    const double n = s.norm();
    return n > max_len ? Vec2(s * (max_len / n)) : s;
}

}  // namespace

NewtonResult newton_refine(const FieldSample& f, const SpherePoint& start, const NewtonOptions& opts) {
    NewtonResult r;
    const double L = f.radius();
    const double max_step = std::min(opts.max_step, 0.45 * L);
    if (opts.frozen_hessian) {
        const TangentFrame fr = TangentFrame::at(start);
        const Mat2 H0 = f.jet(fr).hess;
        Vec2 X = Vec2::Zero();
        for (int k = 0; k < opts.max_steps; ++k) {
            const Jet2 j = f.chart_jet(fr, X);
            r.steps = k;
            if (j.grad.norm() <= opts.tolerance) {
                r.converged = true;
                break;
            }
            const Vec2 s = clamp_step(newton_step(H0, j.grad), max_step);
            const Vec2 Xn = X + s;
            if (Xn.norm() > 0.5 * L) break;
            r.step_lengths.push_back(s.norm());
            X = Xn;
        }
        r.point = fr.chart(X);
        r.residual = f.jet(TangentFrame::at(r.point)).grad.norm();
        r.converged = r.converged || r.residual <= opts.tolerance;
        return r;
    }
    SpherePoint P = start;
    Jet2 j = f.jet(TangentFrame::at(P));
    bool polished = false;
    for (int k = 0; k < opts.max_steps; ++k) {
        r.steps = k;
        const double res = j.grad.norm();
        if (res <= opts.tolerance) {
            if (polished || res == 0.0) {
                r.converged = true;
                break;
            }
            polished = true;  // one extra step drives the residual to roundoff
        }
        const TangentFrame fr = TangentFrame::at(P);
        Vec2 s = clamp_step(newton_step(j.hess, j.grad), max_step);
        // Armijo backtracking on |grad f|^2, for which the Newton direction is a descent direction
        SpherePoint Pn;
        Jet2 jn;
        double t = 1.0;
        bool accepted = false;
        for (int h = 0; h < 30; ++h) {
            Pn = fr.chart(s * t);
            jn = f.jet(TangentFrame::at(Pn));
            if (polished || jn.grad.squaredNorm() <= (1 - 1e-4 * t) * res * res) {
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if (!accepted) break;  // stalled at a non-critical minimum of |grad f|
        r.step_lengths.push_back(t * s.norm());
        P = Pn;
        j = jn;
    }
    if (!r.converged && j.grad.norm() <= opts.tolerance) r.converged = true;
    r.point = P;
    r.residual = j.grad.norm();
    return r;
}

ChartNewtonResult newton_chart(const ChartFunction& F, const Vec2& X0, const NewtonOptions& opts) {
    ChartNewtonResult r;
    Vec2 X = X0;
    const Mat2 H0 = F(X0).hess;
    for (int k = 0; k < opts.max_steps; ++k) {
        const Jet2 j = F(X);
        if (j.grad.norm() <= opts.tolerance) {
            r.converged = true;
            break;
        }
        const Vec2 s = clamp_step(newton_step(opts.frozen_hessian ? H0 : j.hess, j.grad), opts.max_step);
        r.step_lengths.push_back(s.norm());
        X += s;
    }
    if (!r.converged) r.converged = F(X).grad.norm() <= opts.tolerance;
    r.X = X;
    return r;
}

double c3_norm(const FieldSample& f, double oversample) {
    const SphereGrid g = build_grid(f.degree(), oversample);
    double A = 0.0;
    for (const Vec3& v : g.mesh().vertices) {
        const auto n = f.jet3(TangentFrame::at(SpherePoint(v, f.radius()))).form_norms();
        A = std::max(A, n[0] + n[1] + n[2] + n[3]);
    }
    return A;
}

namespace {

struct Seed {
    Vec3 start;
    bool strict;
    Vec3 centroid;
    int index;  // sign of the Jacobian of the linear gradient interpolant
};

std::vector<Seed> gradient_seeds(const Mesh& m, const std::vector<Vec3>& grad) {
    std::vector<Seed> seeds;
    for (const auto& t : m.triangles) {
        const Vec3 c = (m.vertices[t[0]] + m.vertices[t[1]] + m.vertices[t[2]]).normalized();
        const TangentFrame fr = TangentFrame::at(SpherePoint(c, 1.0));
        std::array<Vec2, 3> g;
        for (int k = 0; k < 3; ++k) g[k] = fr.from_ambient(grad[t[k]]);
        auto changes = [&](int comp) {
            const bool p0 = g[0][comp] > 0, p1 = g[1][comp] > 0, p2 = g[2][comp] > 0;
            return !(p0 == p1 && p1 == p2);
        };
        if (!changes(0) || !changes(1)) continue;
        Eigen::Matrix3d A;
        A << g[0].x(), g[1].x(), g[2].x(), g[0].y(), g[1].y(), g[2].y(), 1, 1, 1;
        Seed s{c, false, c, 0};
        Mat2 dx, dg;
        dx << fr.from_ambient(m.vertices[t[1]] - m.vertices[t[0]]), fr.from_ambient(m.vertices[t[2]] - m.vertices[t[0]]);
        dg << g[1] - g[0], g[2] - g[0];
        const double jac = dg.determinant() * dx.determinant();
        s.index = jac > 0 ? 1 : (jac < 0 ? -1 : 0);
        if (std::abs(A.determinant()) > 0) {
            Vec3 lam = A.partialPivLu().solve(Vec3(0, 0, 1));
            s.strict = lam.minCoeff() > 0;
            for (auto& l : lam) l = std::clamp(l, 0.0, 1.0);
            lam /= lam.sum();
            s.start = (lam[0] * m.vertices[t[0]] + lam[1] * m.vertices[t[1]] + lam[2] * m.vertices[t[2]]).normalized();
        }
        seeds.push_back(s);
    }
    return seeds;
}

void dedup(std::vector<CriticalPoint>& pts, double A, double c, double L) {
    std::sort(pts.begin(), pts.end(), [](const CriticalPoint& a, const CriticalPoint& b) {
        return a.location.unit.x() < b.location.unit.x();
    });
    const double floor_len = 1e-7 * L;
    std::vector<char> dead(pts.size(), 0);
    auto radius = [&](const CriticalPoint& p) {
        return std::max(floor_len, std::isfinite(p.inv_hess_norm) ? c / (A * p.inv_hess_norm) : 0.0);
    };
    double rmax = floor_len;
    for (const auto& p : pts) rmax = std::max(rmax, radius(p));
    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (dead[i]) continue;
        for (std::size_t j = i + 1; j < pts.size(); ++j) {
            if ((pts[j].location.unit.x() - pts[i].location.unit.x()) * L > rmax) break;
            if (dead[j]) continue;
            const double r = std::min(radius(pts[i]), radius(pts[j]));
            if (distance(pts[i].location, pts[j].location) > r) continue;
            // keep the better-converged point
            if (pts[j].grad_residual < pts[i].grad_residual) {
                dead[i] = 1;
                break;
            }
            dead[j] = 1;
        }
    }
    std::vector<CriticalPoint> out;
    for (std::size_t i = 0; i < pts.size(); ++i)
        if (!dead[i]) out.push_back(pts[i]);
    pts = std::move(out);
}

/// Replace the point set by exact antipodal pairs (values related by the parity sign).
void symmetrize(std::vector<CriticalPoint>& pts, const FieldSample& f, double tol) {
    const double sign = (f.degree() % 2) ? -1.0 : 1.0;
    auto mirror = [&](const CriticalPoint& p) {
        CriticalPoint m = p;
        m.location = p.location.antipode();
        m.value = sign * p.value;
        if (sign < 0) {
            // f(-x) = -f(x): the Hessian eigenvalues flip sign
            m.mu1 = -p.mu2;
            m.mu2 = -p.mu1;
            if (m.kind == CritClass::Min)
                m.kind = CritClass::Max;
            else if (m.kind == CritClass::Max)
                m.kind = CritClass::Min;
        }
        return m;
    };
    auto upper = [](const Vec3& u) {
        if (u.z() != 0) return u.z() > 0;
        if (u.y() != 0) return u.y() > 0;
        return u.x() > 0;
    };
    std::vector<CriticalPoint> out;
    std::vector<char> used(pts.size(), 0);
    // upper-hemisphere representatives first, then any unmatched lower ones
    for (int pass = 0; pass < 2; ++pass)
        for (std::size_t i = 0; i < pts.size(); ++i) {
            if (used[i] || (pass == 0 && !upper(pts[i].location.unit))) continue;
            used[i] = 1;
            for (std::size_t j = 0; j < pts.size(); ++j)
                if (!used[j] && distance(pts[j].location, pts[i].location.antipode()) < tol) {
                    used[j] = 1;
                    break;
                }
            out.push_back(pts[i]);
            out.push_back(mirror(pts[i]));
        }
    pts = std::move(out);
}

}  // namespace

CritExtraction find_critical_points(const FieldSample& f, const SphereGrid& grid, const CritOptions& opts) {
    CritExtraction ex;
    const double L = f.radius();
    ex.A = opts.A > 0 ? opts.A : c3_norm(f);
    NewtonOptions nopt = opts.newton;
    nopt.tolerance = opts.newton.tolerance * f.degree();
    nopt.max_step = std::min(nopt.max_step, 0.25 * f.spec().unit_wavelength() * L);
    for (int level = grid.level(); level <= grid.level() + opts.retry_levels; ++level) {
        const SphereGrid g = SphereGrid::icosphere(level, grid.mode());
        const Mesh& m = g.mesh();
        std::vector<Vec3> grad(m.vertices.size());
        for (std::size_t v = 0; v < m.vertices.size(); ++v) grad[v] = f.value_and_gradient(m.vertices[v]).second;
        const auto seeds = gradient_seeds(m, grad);

        CritExtraction cur;
        cur.A = ex.A;
        cur.grid_level = level;
        cur.seeds = static_cast<int>(seeds.size());
        for (const auto& s : seeds) {
            const auto r = newton_refine(f, SpherePoint(s.start, L), nopt);
            if (!r.converged) {
                ++cur.discarded;
                continue;
            }
            cur.points.push_back(make_critical_point(r.point, f.jet(TangentFrame::at(r.point)), opts.degenerate_tol));
        }
        if (cur.discarded > 0)
            cur.log.push_back("level " + std::to_string(level) + ": " + std::to_string(cur.discarded) +
                              " seeds discarded after Newton failure");
        dedup(cur.points, ex.A, opts.merge_constant, L);
        if (g.mode() == GridMode::Projective) symmetrize(cur.points, f, 1e-6 * L);

        // A strict zero of the linear gradient interpolant without a refined point nearby is
        // either a missed critical point or a ghost: a positive local minimum of |grad f| where
        // the interpolant shows a pair of zeros of opposite index. Unpaired indices mean a miss.
        const double reach = 2.0 * g.resolution() * L;
        int unexplained = 0, index_sum = 0;
        for (const auto& s : seeds) {
            if (!s.strict) continue;
            const SpherePoint c(s.centroid, L);
            bool found = false;
            for (const auto& p : cur.points)
                if (distance(p.location, c) <= reach) {
                    found = true;
                    break;
                }
            if (found) continue;
            ++unexplained;
            index_sum += s.index;
        }
        cur.missed = index_sum == 0 ? 0 : unexplained;
        if (unexplained > 0 && index_sum == 0)
            cur.log.push_back("level " + std::to_string(level) + ": " + std::to_string(unexplained) +
                              " index-cancelling discrete zeros without a critical point");
        for (const auto& p : cur.points) {
            cur.n_min += p.kind == CritClass::Min;
            cur.n_max += p.kind == CritClass::Max;
            cur.n_saddle += p.kind == CritClass::Saddle;
            cur.n_degenerate += p.kind == CritClass::Degenerate;
        }
        cur.complete = cur.missed == 0 && cur.n_degenerate == 0;
        cur.morse_ok = cur.n_min + cur.n_max - cur.n_saddle == 2;
        cur.log.insert(cur.log.begin(), ex.log.begin(), ex.log.end());
        ex = std::move(cur);
        if (ex.complete && ex.morse_ok) break;
        ex.log.push_back("level " + std::to_string(level) + ": incomplete extraction (missed " +
                         std::to_string(ex.missed) + ", degenerate " + std::to_string(ex.n_degenerate) +
                         ", morse " + (ex.morse_ok ? "ok" : "violated") + ")");
    }
    return ex;
}

CrSet cr_filter(const std::vector<CriticalPoint>& points, double alpha, double beta, double delta_cap,
                GridMode mode) {
    CrSet s;
    s.alpha = alpha;
    s.beta = beta;
    s.delta_cap = delta_cap;
    for (const auto& p : points) {
        if (!(std::abs(p.value) <= alpha)) continue;
        if (beta > 0 && p.grad_residual > beta) continue;
        if (std::isfinite(delta_cap) && (p.kind == CritClass::Degenerate || p.inv_hess_norm > delta_cap)) continue;
        s.members.push_back(p);
    }
    for (std::size_t i = 0; i < s.members.size(); ++i)
        for (std::size_t j = i + 1; j < s.members.size(); ++j) {
            const auto& a = s.members[i].location;
            const auto& b = s.members[j].location;
            double d = distance(a, b);
            if (mode == GridMode::Projective) {
                const double da = distance(a, b.antipode());
                // members i and j forming one antipodal pair are a single projective point
                if (da < 1e-9 * a.radius) continue;
                d = std::min(d, da);
            }
            s.min_separation = std::min(s.min_separation, d);
        }
    return s;
}

std::vector<CriticalPoint> almost_singular_points(const FieldSample& f, const SphereGrid& grid, double alpha,
                                                  double beta) {
    std::vector<CriticalPoint> out;
    for (const Vec3& v : grid.mesh().vertices) {
        const auto [val, g] = f.value_and_gradient(v);
        if (std::abs(val) > alpha || g.norm() > beta) continue;
        const SpherePoint p(v, f.radius());
        out.push_back(make_critical_point(p, f.jet(TangentFrame::at(p))));
    }
    return out;
}

ProbeResult almost_singular_probe(const FieldSample& f, const SpherePoint& p, double alpha, double beta,
                                  double delta_cap, double A, double c) {
    ProbeResult r;
    const TangentFrame fr = TangentFrame::at(p);
    const Jet2 j = f.jet(fr);
    r.precondition = std::abs(j.value) <= alpha && j.grad.norm() <= beta && j.inv_hess_norm() <= delta_cap;
    const double D = delta_cap;
    r.regime = A * D * D * beta <= 0.1 && A * D * D * beta * beta <= alpha / 10;
    NewtonOptions frozen;
    frozen.frozen_hessian = true;
    frozen.tolerance = 1e-12 * f.degree();
    const double disk = c / (A * D);
    frozen.max_step = disk;
    const auto nr = newton_refine(f, p, frozen);
    r.converged = nr.converged;
    r.z = nr.point;
    r.distance = distance(p, nr.point);
    r.value_at_z = f.value(nr.point);
    r.distance_ok = r.distance <= 2 * D * beta;
    r.value_ok = std::abs(r.value_at_z) <= 2 * alpha;
    for (std::size_t k = 1; k < nr.step_lengths.size(); ++k)
        if (nr.step_lengths[k - 1] > 1e-13)
            r.max_contraction = std::max(r.max_contraction, nr.step_lengths[k] / nr.step_lengths[k - 1]);
    // part (B): restarts inside the disk find only z
    r.unique = r.converged;
    NewtonOptions full;
    full.tolerance = 1e-12 * f.degree();
    full.max_step = 0.25 * disk;
    for (int k = 0; k < 8 && r.unique; ++k) {
        const double t = 2 * std::numbers::pi * k / 8;
        const SpherePoint s = fr.chart(Vec2(std::cos(t), std::sin(t)) * (0.5 * disk));
        const auto o = newton_refine(f, s, full);
        if (o.converged && distance(o.point, p) <= disk && distance(o.point, r.z) > 1e-8 * p.radius)
            r.unique = false;
    }
    return r;
}

HessianTail hessian_conditional_stats(const EnsembleSpec& spec, double alpha, double beta,
                                      const std::vector<double>& delta_grid, int M, std::uint64_t seed) {
    HessianTail out;
    out.delta = delta_grid;
    const double accept = std::erf(alpha / std::numbers::sqrt2);
    if (accept < 1e-6) throw DomainError("conditioning event |f| <= alpha has acceptance rate below 1e-6");
    const Mat6 S = jet_covariance(spec);
    // per-direction gradient variance; the gradient is independent of (f, Hessian)
    const double gvar = S(1, 1);
    out.event_probability = accept * (1 - std::exp(-beta * beta / (2 * gvar)));
    // Hessian (11, 12, 22) given f = v
    const Eigen::Vector3d cross(S(3, 0), S(4, 0), S(5, 0));
    Eigen::Matrix3d cond = S.block<3, 3>(3, 3) - cross * cross.transpose() / S(0, 0);
    const Eigen::Matrix3d chol = Eigen::LLT<Eigen::Matrix3d>(cond).matrixL();
    Rng rng = make_rng(seed, {0x4e55});
    std::vector<int> above(delta_grid.size(), 0);
    int n = 0;
    while (n < M) {
        const double v = standard_normal(rng);
        if (std::abs(v) > alpha) continue;
        const Eigen::Vector3d z(standard_normal(rng), standard_normal(rng), standard_normal(rng));
        const Eigen::Vector3d h = cross * (v / S(0, 0)) + chol * z;
        Jet2 j;
        j.hess << h[0], h[1], h[1], h[2];
        const double inv = j.inv_hess_norm();
        for (std::size_t k = 0; k < delta_grid.size(); ++k) above[k] += inv > delta_grid[k];
        ++n;
    }
    out.samples = n;
    for (int a : above) out.tail.push_back(double(a) / n);
    return out;
}

std::string critical_csv_header() { return "x,y,z,value,mu1,mu2,class,residual"; }

std::string critical_csv_row(const CriticalPoint& p) {
    char buf[256];
    const Vec3& u = p.location.unit;
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%s,%.3e", u.x(), u.y(), u.z(), p.value, p.mu1,
                  p.mu2, to_string(p.kind), p.grad_residual);
    return buf;
}

}  // namespace nodal
