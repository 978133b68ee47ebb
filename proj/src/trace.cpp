#include "nodal/morse.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace nodal {

namespace {

int sgn(double x) { return x > 0 ? 1 : (x < 0 ? -1 : 0); }

std::string where(const Vec3& x) {
    std::ostringstream os;
    os << "(" << x.x() << ", " << x.y() << ", " << x.z() << ")";
    return os.str();
}

struct Hit {
    int joint = -1;
    int terminal = -1;
    bool off_terminal = false;
};

struct TraceOutcome {
    enum Kind { Joint, Closed } kind = Closed;
    Hit hit;
    double length = 0.0;
    int steps = 0;
    std::vector<Vec3> points;
};

class Tracer {
  public:
    Tracer(const Surface& s, const JointSet& js, const TraceOptions& o, double& min_grad)
        : s_(s), js_(js), o_(o), min_grad_(min_grad) {
        h_coarse_ = o.step > 0 ? o.step : s.coarse_step();
        max_len_ = o.max_length > 0 ? o.max_length : s.max_length();
    }

    /// Newton along the gradient onto the zero set.
    bool correct(Vec3& x) const {
        for (int it = 0; it < 12; ++it) {
            auto [v, g] = s_.value_and_gradient(x);
            const double g2 = g.squaredNorm();
            if (std::abs(v) <= 1e-13 * (1.0 + std::sqrt(g2)) && it > 0) return true;
            if (g2 == 0.0) return false;
            const Vec3 dx = -v / g2 * g;
            x = s_.move(x, dx);
            if (dx.norm() < 1e-14 * (1.0 + x.norm())) return std::abs(s_.value(x)) < 1e-9;
        }
        return std::abs(s_.value(x)) < 1e-10;
    }

    Vec3 tangent(const Vec3& x, int sigma) const {
        const Vec3 g = s_.value_and_gradient(x).second;
        return sigma * s_.normal(x).cross(g).normalized();
    }

    double step_limit(const Vec3& x) const {
        double h = h_coarse_;
        for (const auto& j : js_.joints)
            if (s_.distance(x, j.frame.center) <= j.extent() + o_.near_factor * j.delta + h_coarse_)
                h = std::min(h, j.delta / 4.0);
        for (const auto& d : js_.disks)
            if (s_.distance(x, d.frame.center) <= (1.0 + o_.near_factor) * d.delta + h_coarse_)
                h = std::min(h, d.delta / 4.0);
        return h;
    }

    bool near_joint(const Vec3& x) const {
        for (const auto& j : js_.joints)
            if (s_.distance(x, j.frame.center) <= j.extent()) return true;
        return false;
    }

    Hit joint_hit(const Vec3& x, int skip) const {
        for (int i = 0; i < static_cast<int>(js_.joints.size()); ++i) {
            if (i == skip) continue;
            const Joint& j = js_.joints[i];
            if (s_.distance(x, j.frame.center) > 1.01 * j.extent()) continue;
            const Vec2 X = s_.to_chart(j.frame, x);
            if (!j.contains(X)) continue;
            Hit h;
            h.joint = i;
            h.terminal = j.terminal_of(X);
            if (h.terminal < 0) {
                h.off_terminal = true;
                h.terminal = X.x() >= 0 ? (X.y() >= 0 ? 0 : 3) : (X.y() >= 0 ? 1 : 2);
            }
            return h;
        }
        return {};
    }

    /// Follows Z from x0 (on Z) in direction sigma. With start_joint >= 0 the curve leaves that
    /// joint first; with closable the walk may end by returning to x0.
    TraceOutcome run(const Vec3& x0, int sigma, int start_joint, bool closable) const {
        TraceOutcome out;
        out.points.push_back(x0);
        Vec3 x = x0;
        Vec3 T = tangent(x, sigma);
        const Vec3 T0 = T;
        double h = step_limit(x);
        const double h0 = h;
        int skip = start_joint;
        bool away = false;
        while (out.length < max_len_) {
            Vec3 xn;
            Vec3 Tn;
            double d = 0.0;
            int halvings = 0;
            for (;;) {
                xn = s_.move(x, h * T);
                bool ok = correct(xn);
                if (ok) {
                    Tn = tangent(xn, sigma);
                    d = s_.distance(xn, x);
                    ok = Tn.dot(T) >= std::cos(0.35) && d >= 0.5 * h && d <= 1.5 * h;
                }
                if (ok) break;
                h *= 0.5;
                if (++halvings > o_.max_halvings)
                    throw TraceError("tracer step failure near " + where(x), x);
            }
            const Vec3 xp = x;
            x = xn;
            T = Tn;
            out.length += d;
            ++out.steps;
            out.points.push_back(x);
            if (!near_joint(x)) min_grad_ = std::min(min_grad_, s_.value_and_gradient(x).second.norm());

            if (skip >= 0) {
                const Joint& j = js_.joints[skip];
                if (!j.contains(s_.to_chart(j.frame, x))) skip = -1;
            }
            Hit hit = joint_hit(x, skip);
            if (hit.joint >= 0) {
                out.kind = TraceOutcome::Joint;
                out.hit = hit;
                return out;
            }
            if (closable) {
                if (!away && s_.distance(x, x0) > 2.0 * h0) away = true;
                if (away && closes(xp, x, x0, T0)) {
                    out.kind = TraceOutcome::Closed;
                    return out;
                }
            }
            h = std::min(1.5 * h, step_limit(x));
        }
        throw TraceError("runaway arc longer than " + std::to_string(max_len_) + " from " + where(x0), x0);
    }

    /// x (on Z) lies on the traced curve through the chord a-b: its foot on the chord
    /// corrects back onto x.
    bool on_chord(const Vec3& a, const Vec3& b, const Vec3& x) const {
        const Vec3 u = s_.displacement(b, a), w = s_.displacement(x, a);
        const double uu = u.squaredNorm();
        if (uu == 0.0) return false;
        const double t = w.dot(u) / uu;
        if (t < 0.0 || t > 1.0) return false;
        if ((w - t * u).norm() > 0.25 * std::sqrt(uu)) return false;
        Vec3 foot = s_.move(a, t * u);
        if (!correct(foot)) return false;
        return s_.distance(foot, x) <= 0.01 * std::sqrt(uu) + 1e-9;
    }

    bool on_polyline(const std::vector<Vec3>& pts, const Vec3& x) const {
        for (std::size_t i = 0; i + 1 < pts.size(); ++i)
            if (on_chord(pts[i], pts[i + 1], x)) return true;
        return false;
    }

  private:
    bool closes(const Vec3& a, const Vec3& b, const Vec3& x0, const Vec3& T0) const {
        return s_.displacement(b, a).dot(T0) > 0.0 && on_chord(a, b, x0);
    }

    const Surface& s_;
    const JointSet& js_;
    TraceOptions o_;
    double& min_grad_;
    double h_coarse_ = 0.0, max_len_ = 0.0;
};

/// Zero of f on the outer vertical side of a terminal.
Vec3 terminal_start(const Surface& s, const Joint& j, int k) {
    const double sx = (k == 0 || k == 3) ? 1.0 : -1.0;
    const double sy = (k == 0 || k == 1) ? 1.0 : -1.0;
    const double r = j.a / j.b;
    double lo = std::sqrt(8.0 * r) * j.delta, hi = std::sqrt(10.0 * r) * j.delta;
    auto at = [&](double y) { return s.from_chart(j.frame, Vec2(sx * 3.0 * j.delta, sy * y)); };
    double flo = s.value(at(lo)), fhi = s.value(at(hi));
    if (sgn(flo) == sgn(fhi))
        throw TraceError("no sign change on the side of terminal " + std::to_string(k), j.frame.center);
    for (int it = 0; it < 100 && hi - lo > 1e-15 * j.delta; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fm = s.value(at(mid));
        if (sgn(fm) == sgn(flo)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    return at(0.5 * (lo + hi));
}

}  // namespace

NodalGraph trace_edges(const Surface& s, const JointSet& js, const std::vector<Vec3>& seeds,
                       const TraceOptions& opts) {
    NodalGraph g;
    g.joints = js.joints;
    g.pairing.assign(4 * js.joints.size(), -1);
    Tracer tr(s, js, opts, g.min_grad);

    for (int j = 0; j < static_cast<int>(js.joints.size()); ++j) {
        const Joint& J = js.joints[j];
        for (int k = 0; k < 4; ++k) {
            const int he = 4 * j + k;
            if (g.pairing[he] >= 0) continue;
            const Vec3 x0 = terminal_start(s, J, k);
            const Vec3 out_dir = ((k == 0 || k == 3) ? 1.0 : -1.0) * J.frame.e1;
            const int sigma = tr.tangent(x0, 1).dot(out_dir) >= 0 ? 1 : -1;
            const TraceOutcome r = tr.run(x0, sigma, j, false);
            const int to = 4 * r.hit.joint + r.hit.terminal;
            if (r.hit.off_terminal) {
                ++g.off_terminal_entries;
                g.log.push_back("arc from half-edge " + std::to_string(he) + " entered joint " +
                                std::to_string(r.hit.joint) + " outside its terminals");
            }
            if (to == he || g.pairing[to] >= 0)
                throw TraceError("terminal " + std::to_string(to) + " crossed by more than one arc", x0);
            g.pairing[he] = to;
            g.pairing[to] = he;
            g.arcs.push_back({he, to, r.length, r.steps});
        }
    }

    std::vector<std::vector<Vec3>> loops;
    for (const Vec3& seed : seeds) {
        Vec3 x = seed;
        if (!tr.correct(x)) {
            ++g.failed_seeds;
            g.log.push_back("seed did not converge onto the zero set at " + where(seed));
            continue;
        }
        bool inside = false;
        for (const auto& J : js.joints) inside = inside || J.contains(s.to_chart(J.frame, x));
        if (inside) {
            ++g.graph_seeds;
            continue;
        }
        bool dup = false;
        for (const auto& l : loops) dup = dup || tr.on_polyline(l, x);
        if (dup) {
            ++g.duplicate_seeds;
            continue;
        }
        TraceOutcome r = tr.run(x, 1, -1, true);
        if (r.kind == TraceOutcome::Joint) {
            ++g.graph_seeds;
            continue;
        }
        bool blinking = false;
        for (const auto& d : js.disks) {
            bool all_in = true;
            for (const auto& p : r.points) all_in = all_in && s.distance(p, d.frame.center) <= d.delta;
            blinking = blinking || all_in;
        }
        (blinking ? g.blinking_loops : g.free_loops) += 1;
        loops.push_back(std::move(r.points));
    }
    return g;
}

NodalGraph trace_edges(const SphereSurface& s, const JointSet& js, const NodalCensus& c, const TraceOptions& opts) {
    std::vector<Vec3> seeds;
    seeds.reserve(c.loop_seeds.size());
    for (const auto& u : c.loop_seeds) seeds.push_back(u.normalized() * s.radius());
    return trace_edges(s, js, seeds, opts);
}

}  // namespace nodal
