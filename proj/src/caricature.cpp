#include "nodal/morse.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace nodal {

namespace {

int sgn(double x) { return x > 0 ? 1 : (x < 0 ? -1 : 0); }

void check_signs(const NodalGraph& g, const std::vector<int>& signs) {
    std::string missing;
    for (std::size_t j = 0; j < g.joints.size(); ++j)
        if (j >= signs.size() || (signs[j] != 1 && signs[j] != -1)) missing += " " + std::to_string(j);
    if (!missing.empty()) throw InvalidSpec("no sign for joint(s):" + missing);
}

}  // namespace

// ---------------------------------------------------------------- graph resolution

FourRegularMap NodalGraph::to_map() const {
    std::vector<std::array<int, 4>> rot(joints.size());
    for (std::size_t j = 0; j < joints.size(); ++j) {
        const int b = 4 * static_cast<int>(j);
        // positive type joins the sectors of sign +1; put that pairing on slots (0,1),(2,3)
        rot[j] = joints[j].east_sign() > 0 ? std::array<int, 4>{b, b + 1, b + 2, b + 3}
                                           : std::array<int, 4>{b + 1, b + 2, b + 3, b};
    }
    return FourRegularMap::from_rotation(std::move(rot), pairing, free_loops);
}

StateAssignment NodalGraph::states(const std::vector<int>& signs) const {
    check_signs(*this, signs);
    StateAssignment s(joints.size());
    for (std::size_t j = 0; j < joints.size(); ++j) s[j] = signs[j] > 0 ? VertexState::A : VertexState::B;
    return s;
}

int resolve_graph(const NodalGraph& g, const std::vector<int>& signs) {
    check_signs(g, signs);
    const int H = g.n_half_edges();
    for (int h = 0; h < H; ++h)
        if (g.pairing[h] < 0 || g.pairing[h] == h || g.pairing[g.pairing[h]] != h)
            throw StructureError("graph pairing is not a fixed-point-free involution");
    // inside joint j terminals are joined along the sectors of the opposite sign to the connected one
    auto inner = [&](int h) {
        const int j = h / 4, k = h % 4;
        const bool east_west = g.joints[j].east_sign() * signs[j] > 0;
        return 4 * j + (east_west ? (k ^ 1) : (3 - k));
    };
    std::vector<char> seen(H, 0);
    int loops = 0;
    for (int h0 = 0; h0 < H; ++h0) {
        if (seen[h0]) continue;
        ++loops;
        int h = h0;
        do {
            seen[h] = 1;
            const int o = g.pairing[h];
            seen[o] = 1;
            h = inner(o);
        } while (h != h0);
    }
    return loops;
}

// ---------------------------------------------------------------- perturbation

FieldSample perturb(const FieldSample& f, const FieldSample& g, double alpha_prime) {
    if (!(f.spec() == g.spec())) throw InvalidSpec("perturbation needs two samples of the same ensemble");
    if (!(alpha_prime >= 0.0 && alpha_prime <= 1.0)) throw InvalidSpec("alpha' must lie in [0, 1]");
    const double cf = std::sqrt(1.0 - alpha_prime * alpha_prime), cg = alpha_prime;
    auto raw = f.coefficients();
    const auto& rg = g.coefficients();
    for (std::size_t l = 0; l < raw.size(); ++l)
        for (std::size_t m = 0; m < raw[l].size(); ++m) raw[l][m] = cf * raw[l][m] + cg * rg[l][m];
    return FieldSample(f.spec(), std::move(raw), f.seed()).with_offset(cf * f.offset() + cg * g.offset());
}

// ---------------------------------------------------------------- blinking circles

int disk_loop_count(const Surface& s, const ExtremumDisk& d, int resolution) {
    const int bsign = d.eigen_sign;
    const double v0 = s.value(d.frame.center);
    const double r_exp = std::sqrt(2.0 * std::abs(v0) / d.mu_min);
    double R = std::min(d.delta, std::max(4.0 * r_exp, d.delta / 64.0));
    if (R < d.delta) {
        // the annulus between R and delta must carry the boundary sign
        for (int i = 1; i <= 8 && R < d.delta; ++i) {
            const double r = R + (d.delta - R) * i / 8.0;
            for (int k = 0; k < 64; ++k) {
                const double t = 2.0 * M_PI * k / 64.0;
                if (sgn(s.value(s.from_chart(d.frame, Vec2(r * std::cos(t), r * std::sin(t))))) != bsign) {
                    R = d.delta;
                    break;
                }
            }
        }
    }
    const int n = resolution;
    std::vector<int> cell(n * n, 0);  // 0 outside, 1 boundary sign, 2 opposite sign
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < n; ++k) {
            const Vec2 X(R * (2.0 * i / (n - 1) - 1.0), R * (2.0 * k / (n - 1) - 1.0));
            if (X.norm() > R) continue;
            cell[i * n + k] = sgn(s.value(s.from_chart(d.frame, X))) == bsign ? 1 : 2;
        }
    int comps = 0;
    bool rim = false;
    std::vector<int> stack;
    auto on_rim = [&](int i, int k) {
        const Vec2 X(R * (2.0 * i / (n - 1) - 1.0), R * (2.0 * k / (n - 1) - 1.0));
        return X.norm() > R * (1.0 - 2.5 / (n - 1));
    };
    for (int c0 = 0; c0 < n * n; ++c0) {
        if (cell[c0] != 2) continue;
        ++comps;
        stack.assign(1, c0);
        cell[c0] = 3;
        while (!stack.empty()) {
            const int c = stack.back();
            stack.pop_back();
            const int i = c / n, k = c % n;
            rim = rim || on_rim(i, k);
            const int nb[4][2] = {{i - 1, k}, {i + 1, k}, {i, k - 1}, {i, k + 1}};
            for (const auto& q : nb) {
                if (q[0] < 0 || q[0] >= n || q[1] < 0 || q[1] >= n) continue;
                const int cq = q[0] * n + q[1];
                if (cell[cq] == 2) {
                    cell[cq] = 3;
                    stack.push_back(cq);
                }
            }
        }
    }
    return rim ? -1 : comps;
}

BlinkingResult blinking_count(const Surface& perturbed, const JointSet& js, int check_every) {
    BlinkingResult r;
    for (int i = 0; i < static_cast<int>(js.disks.size()); ++i) {
        const ExtremumDisk& d = js.disks[i];
        const bool counted = sgn(perturbed.value(d.frame.center)) == -d.eigen_sign;
        if (check_every > 0 && i % check_every == 0) {
            ++r.checked;
            const int loops = disk_loop_count(perturbed, d);
            if (loops != (counted ? 1 : 0)) {
                ++r.disagreements;
                r.log.push_back("disk " + std::to_string(i) + ": sign rule " + (counted ? "1" : "0") +
                                ", local census " + std::to_string(loops) + " (excluded)");
                continue;
            }
        }
        if (counted) {
            ++r.count;
            r.counted.push_back(i);
        }
    }
    return r;
}

// ---------------------------------------------------------------- decomposition

namespace {

std::string regression_record(const FieldSample& f, const FieldSample& g, const CaricatureParams& p,
                              const CaricatureResult& r) {
    nlohmann::json j;
    j["spec"] = f.spec().to_json();
    j["seed_f"] = f.seed();
    j["seed_g"] = g.seed();
    j["coefficients_f"] = f.coefficients();
    j["coefficients_g"] = g.coefficients();
    j["alpha"] = p.alpha;
    j["alpha_prime"] = p.alpha_prime;
    j["beta"] = r.beta;
    j["c_joint"] = p.c_joint;
    j["counts"] = {{"N_I", r.N_I}, {"N_II", r.N_II}, {"N_III", r.N_III}, {"N_direct", r.N_direct}};
    return j.dump();
}

}  // namespace

CaricatureResult caricature_decomposition(const FieldSample& f, const FieldSample& g, const CaricatureParams& p) {
    if (!(p.alpha > 0)) throw InvalidSpec("alpha must be positive");
    if (!(p.margin >= 1)) throw InvalidSpec("margin must be at least 1");
    CaricatureResult r;
    const FieldSample ft = perturb(f, g, p.alpha_prime);
    const SphereSurface sf(f), st(ft);
    const SphereGrid grid = build_grid(f.degree(), p.grid_oversample);

    const CritExtraction crit = find_critical_points(f, grid);
    r.A = crit.A;
    const CrSet cr = cr_filter(crit.points, p.alpha);
    for (const auto& c : cr.members) r.Delta = std::max(r.Delta, c.inv_hess_norm);
    const double A = r.A, D = r.Delta, m = p.margin, a = p.alpha;
    const double beta_lo = m * a * (A * D) * (A * D), beta_hi = std::sqrt(a / (m * A * D * D));
    r.beta = p.beta > 0 ? p.beta : std::sqrt(beta_lo * beta_hi);
    for (const auto& c : cr.members) r.min_abs_perturbed = std::min(r.min_abs_perturbed, std::abs(ft.value(c.location)));

    double grid_delta = 0.0;
    for (const auto& q : almost_singular_points(f, grid, a, r.beta)) grid_delta = std::max(grid_delta, q.inv_hess_norm);
    r.regime = {
        {"A alpha' << alpha", m * A * p.alpha_prime, a},
        {"A Delta^2 beta^2 << alpha", m * A * D * D * r.beta * r.beta, a},
        {"alpha << beta (A Delta)^-2", m * a, r.beta / ((A * D) * (A * D))},
        {"A^2 Delta^3 alpha << 1", m * A * A * D * D * D * a, 1.0},
        {"min |f~| over Cr(alpha) >~ A Delta^2 alpha^2", m * A * D * D * a * a, r.min_abs_perturbed},
        {"grid Cr(alpha, beta) inside Cr(alpha, beta, Delta)", grid_delta, D},
        {"critical extraction complete", crit.complete ? 0.0 : 1.0, 0.0},
    };
    r.regime_ok = std::all_of(r.regime.begin(), r.regime.end(), [](const RegimeCheck& c) { return c.ok(); });
    for (const auto& c : r.regime)
        if (!c.ok()) r.log.push_back("regime: " + c.name + " fails (" + std::to_string(c.lhs) + " > " +
                                     std::to_string(c.rhs) + ")");

    JointSet js;
    try {
        js = build_joints(sf, cr, A, p.c_joint, crit.points);
    } catch (const DomainError& e) {
        r.regime_ok = false;
        r.log.push_back(std::string("joints: ") + e.what());
        return r;
    }
    r.n_joints = static_cast<int>(js.joints.size());
    r.n_disks = static_cast<int>(js.disks.size());
    for (const auto& l : js.log) r.log.push_back("joints: " + l);
    for (std::size_t i = 0; i < js.joints.size(); ++i)
        if (js.joints[i].boundary_violations > 0)
            r.log.push_back("joint " + std::to_string(i) + ": f vanishes or has the wrong sign on the boundary");

    CensusOptions copts;
    copts.max_extra_levels = p.census_extra_levels;
    const NodalCensus ct = census(ft, grid, copts);
    r.N_direct = ct.n_loops;
    if (ct.n_loops_min != ct.n_loops_max) r.log.push_back("census of f~ is ambiguous");
    try {
        const NodalCensus cf = census(f, grid, copts);
        const NodalGraph graph = trace_edges(sf, js, cf);
        r.census_f = cf.n_loops;
        r.N_I = graph.free_loops;
        std::vector<int> signs_f, signs_t;
        for (const auto& j : js.joints) {
            signs_f.push_back(sgn(j.value) != 0 ? sgn(j.value) : 1);
            signs_t.push_back(sgn(st.value(j.frame.center)));
        }
        r.graph_loops_f = resolve_graph(graph, signs_f);
        r.census_consistent = r.census_f == r.N_I + graph.blinking_loops + r.graph_loops_f;
        if (!r.census_consistent)
            r.log.push_back("census of f (" + std::to_string(r.census_f) + ") differs from the traced decomposition");
        r.N_III = resolve_graph(graph, signs_t);

        const BlinkingResult blink = blinking_count(st, js);
        r.N_II = blink.count;
        r.blinking_disagreements = blink.disagreements;
        for (const auto& l : blink.log) r.log.push_back("blinking: " + l);

        r.match = r.N_I + r.N_II + r.N_III == r.N_direct;

        if (p.check_homotopy) {
            try {
                const NodalGraph gt = trace_edges(st, js, ct);
                r.free_loops_perturbed = gt.free_loops;
                r.homotopy_ok = gt.free_loops == r.N_I;
            } catch (const TraceError& e) {
                r.homotopy_ok = false;
                r.log.push_back(std::string("homotopy trace: ") + e.what());
            }
        }
    } catch (const TraceError& e) {
        r.match = false;
        r.log.push_back(std::string("trace: ") + e.what());
    } catch (const InvalidSpec& e) {
        r.match = false;
        r.log.push_back(std::string("resolution: ") + e.what());
    }
    if (r.regime_ok && !r.match) r.regression = regression_record(f, g, p, r);
    return r;
}

}  // namespace nodal
