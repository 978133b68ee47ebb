#include "nodal/census.hpp"

#include "nodal/union_find.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <unordered_map>

namespace nodal {

namespace {

std::uint64_t edge_key(int a, int b) {
    if (a > b) std::swap(a, b);
    return (std::uint64_t(std::uint32_t(a)) << 32) | std::uint32_t(b);
}

struct Evaluated {
    double value;
    Vec3 gradient;  // per radian
};

Evaluated evaluate(const FieldSample& f, const Vec3& u) {
    auto [v, g] = f.value_and_gradient(u);
    return {v, g * f.radius()};
}

/// Critical-value screening of one triangle (unit-sphere units).
bool suspect_triangle(const Mesh& m, const std::vector<double>& val, const std::vector<Vec3>& grad,
                      const std::array<int, 3>& t, double flag_factor) {
    const Vec3 c = (m.vertices[t[0]] + m.vertices[t[1]] + m.vertices[t[2]]).normalized();
    const TangentFrame fr = TangentFrame::at(SpherePoint(c, 1.0));
    std::array<Vec2, 3> x, g;
    for (int k = 0; k < 3; ++k) {
        x[k] = fr.from_ambient(m.vertices[t[k]] - c);
        g[k] = fr.from_ambient(grad[t[k]]);
    }
    // barycentric zero of the linearly interpolated gradient
    Eigen::Matrix3d A;
    A << g[0].x(), g[1].x(), g[2].x(), g[0].y(), g[1].y(), g[2].y(), 1, 1, 1;
    const double scale = std::max({g[0].norm(), g[1].norm(), g[2].norm()});
    const double det = A.determinant();
    if (!(std::abs(det) > 1e-14 * scale * scale)) return false;
    const Vec3 lambda = A.partialPivLu().solve(Vec3(0, 0, 1));
    if (lambda.minCoeff() < -0.25) return false;
    const Vec2 xc = lambda[0] * x[0] + lambda[1] * x[1] + lambda[2] * x[2];
    double fc = 0.0;
    for (int k = 0; k < 3; ++k) fc += val[t[k]] + 0.5 * g[k].dot(xc - x[k]);
    fc /= 3;
    Mat2 dx, dg;
    dx << x[1] - x[0], x[2] - x[0];
    dg << g[1] - g[0], g[2] - g[0];
    const double hess = (dg * dx.inverse()).norm();
    double h = 0.0;
    for (int k = 0; k < 3; ++k) h = std::max(h, (x[k] - x[(k + 1) % 3]).norm());
    return std::abs(fc) < flag_factor * hess * h * h;
}

void screen(const Mesh& m, const std::vector<double>& val, const std::vector<Vec3>& grad, std::vector<char>& flags,
            std::size_t first, const CensusOptions& opts) {
    flags.resize(m.triangles.size(), 0);
    if (!opts.screen_critical) return;
    for (std::size_t i = first; i < m.triangles.size(); ++i)
        flags[i] = suspect_triangle(m, val, grad, m.triangles[i], opts.flag_factor) ? 1 : 0;
}

/// Make a vertex-indexed set of triangle flags closed under the antipodal map.
void symmetrize_flags(const Mesh& m, std::vector<char>& flags) {
    if (m.antipode.empty()) return;
    std::map<std::array<int, 3>, int> index;
    for (int i = 0; i < static_cast<int>(m.triangles.size()); ++i) {
        auto t = m.triangles[i];
        std::sort(t.begin(), t.end());
        index.emplace(t, i);
    }
    const auto copy = flags;
    for (int i = 0; i < static_cast<int>(m.triangles.size()); ++i) {
        if (!copy[i]) continue;
        std::array<int, 3> t;
        for (int k = 0; k < 3; ++k) t[k] = m.antipode[m.triangles[i][k]];
        std::sort(t.begin(), t.end());
        auto it = index.find(t);
        if (it != index.end()) flags[it->second] = 1;
    }
}

/// Counting on a fixed mesh with known vertex data.
void analyze(const FieldSample& f, NodalCensus& c, const CensusOptions& opts) {
    const Mesh& m = *c.mesh;
    const int nv = static_cast<int>(m.vertices.size());
    const double h = m.resolution();

    // vertex signs
    std::vector<signed char> sign(nv, 0);
    std::vector<int> first_triangle;
    c.ambiguous_vertices = 0;
    for (int v = 0; v < nv; ++v) {
        const double tol = opts.sign_tolerance * c.gradients[v].norm() * h;
        if (std::abs(c.values[v]) > tol) {
            sign[v] = c.values[v] > 0 ? 1 : -1;
            continue;
        }
        ++c.ambiguous_vertices;
        if (first_triangle.empty()) {
            first_triangle.assign(nv, -1);
            for (int i = 0; i < static_cast<int>(m.triangles.size()); ++i)
                for (int k : m.triangles[i])
                    if (first_triangle[k] < 0) first_triangle[k] = i;
        }
        const auto& t = m.triangles[first_triangle[v]];
        const double vc = f.value((m.vertices[t[0]] + m.vertices[t[1]] + m.vertices[t[2]]).normalized());
        sign[v] = vc < 0 ? -1 : 1;
        for (int i = 0; i < static_cast<int>(m.triangles.size()); ++i)
            for (int k : m.triangles[i])
                if (k == v) c.flags[i] = 1;
    }

    // domains
    const auto edges = m.edges();
    UnionFind dom(nv);
    for (const auto& e : edges)
        if (sign[e[0]] == sign[e[1]]) dom.unite(e[0], e[1]);
    c.sphere_domains = dom.labels(c.labels);
    std::vector<signed char> dom_sign(c.sphere_domains, 0);
    for (int v = 0; v < nv; ++v) dom_sign[c.labels[v]] = sign[v];
    c.positive_domains = static_cast<int>(std::count(dom_sign.begin(), dom_sign.end(), 1));
    c.negative_domains = c.sphere_domains - c.positive_domains;

    // loops: sign-change edges joined across each triangle they bound
    std::unordered_map<std::uint64_t, int> crossing;
    std::vector<std::array<int, 2>> cross_edges;
    for (const auto& e : edges)
        if (sign[e[0]] != sign[e[1]]) {
            crossing.emplace(edge_key(e[0], e[1]), static_cast<int>(cross_edges.size()));
            cross_edges.push_back(e);
        }
    UnionFind loop(static_cast<int>(cross_edges.size()));
    for (const auto& t : m.triangles) {
        int found[2], k = 0;
        for (int j = 0; j < 3; ++j) {
            const int a = t[j], b = t[(j + 1) % 3];
            if (sign[a] != sign[b]) found[k++] = crossing.at(edge_key(a, b));
        }
        if (k == 2) loop.unite(found[0], found[1]);
    }
    std::vector<int> loop_label;
    c.sphere_loops = loop.labels(loop_label);
    c.loop_seeds.assign(c.sphere_loops, Vec3::Zero());
    std::vector<char> seeded(c.sphere_loops, 0);
    for (int i = 0; i < static_cast<int>(cross_edges.size()); ++i) {
        const int l = loop_label[i];
        if (seeded[l]) continue;
        seeded[l] = 1;
        const auto [a, b] = cross_edges[i];
        const double t = c.values[a] / (c.values[a] - c.values[b]);
        c.loop_seeds[l] = (m.vertices[a] + t * (m.vertices[b] - m.vertices[a])).normalized();
    }

    c.n_domains = c.sphere_domains;
    c.n_loops = c.sphere_loops;
    if (c.mode == GridMode::Projective) {
        if (m.antipode.empty()) throw DomainError("projective census needs an antipodally closed mesh");
        std::vector<int> dom_anti(c.sphere_domains, -1), loop_anti(c.sphere_loops, -1);
        for (int v = 0; v < nv; ++v) dom_anti[c.labels[v]] = c.labels[m.antipode[v]];
        for (int i = 0; i < static_cast<int>(cross_edges.size()); ++i) {
            const auto [a, b] = cross_edges[i];
            loop_anti[loop_label[i]] = loop_label[crossing.at(edge_key(m.antipode[a], m.antipode[b]))];
        }
        c.n_domains = 0;
        for (int d = 0; d < c.sphere_domains; ++d) c.n_domains += dom_anti[d] >= d;
        c.n_loops = 0;
        for (int l = 0; l < c.sphere_loops; ++l) c.n_loops += loop_anti[l] >= l;
    }

    // suspect sites: flagged triangles grouped through shared vertices
    c.flagged_triangles = static_cast<int>(std::count(c.flags.begin(), c.flags.end(), 1));
    UnionFind sites(nv);
    std::vector<char> touched(nv, 0);
    for (std::size_t i = 0; i < m.triangles.size(); ++i) {
        if (!c.flags[i]) continue;
        const auto& t = m.triangles[i];
        sites.unite(t[0], t[1]);
        sites.unite(t[0], t[2]);
        for (int k : t) touched[k] = 1;
    }
    std::vector<char> root_seen(nv, 0);
    c.flagged_cells = 0;
    for (int v = 0; v < nv; ++v) {
        if (!touched[v]) continue;
        const int r = sites.find(v);
        if (!root_seen[r]) root_seen[r] = 1, ++c.flagged_cells;
    }
    int k = c.flagged_cells;
    if (c.mode == GridMode::Projective) k = (k + 1) / 2;
    c.n_domains_min = std::max(1, c.n_domains - k);
    c.n_domains_max = c.n_domains + k;
    c.n_loops_min = std::max(0, c.n_loops - k);
    c.n_loops_max = c.n_loops + k;
}

/// One level of red-green refinement of the flagged triangles.
void refine_once(const FieldSample& f, NodalCensus& c, const CensusOptions& opts) {
    const Mesh& old = *c.mesh;
    Mesh m;
    m.vertices = old.vertices;
    std::unordered_map<std::uint64_t, int> mid;
    for (std::size_t i = 0; i < old.triangles.size(); ++i) {
        if (!c.flags[i]) continue;
        for (int j = 0; j < 3; ++j) mid.emplace(edge_key(old.triangles[i][j], old.triangles[i][(j + 1) % 3]), -1);
    }
    // new vertices in a deterministic order
    std::vector<std::uint64_t> keys;
    keys.reserve(mid.size());
    for (auto& kv : mid) keys.push_back(kv.first);
    std::sort(keys.begin(), keys.end());
    for (auto key : keys) {
        const int a = static_cast<int>(key >> 32), b = static_cast<int>(key & 0xffffffffu);
        mid[key] = static_cast<int>(m.vertices.size());
        m.vertices.push_back((old.vertices[a] + old.vertices[b]).normalized());
        const Evaluated e = evaluate(f, m.vertices.back());
        c.values.push_back(e.value);
        c.gradients.push_back(e.gradient);
    }
    std::vector<char> flags;
    auto split = [&](int a, int b) {
        auto it = mid.find(edge_key(a, b));
        return it == mid.end() ? -1 : it->second;
    };
    std::vector<std::array<int, 3>> fresh;
    for (std::size_t i = 0; i < old.triangles.size(); ++i) {
        auto t = old.triangles[i];
        std::array<int, 3> s{split(t[0], t[1]), split(t[1], t[2]), split(t[2], t[0])};
        const int marks = (s[0] >= 0) + (s[1] >= 0) + (s[2] >= 0);
        if (marks == 0) {
            m.triangles.push_back(t);
            flags.push_back(c.flags[i]);
            continue;
        }
        if (marks == 3) {
            fresh.push_back({t[0], s[0], s[2]});
            fresh.push_back({s[0], t[1], s[1]});
            fresh.push_back({s[2], s[1], t[2]});
            fresh.push_back({s[0], s[1], s[2]});
            continue;
        }
        // rotate so that edge 0 is split and, with two marks, edge 2 is the unsplit one
        for (int r = 0; r < 3; ++r) {
            const bool ok = marks == 1 ? s[0] >= 0 : (s[0] >= 0 && s[1] >= 0);
            if (ok) break;
            std::rotate(t.begin(), t.begin() + 1, t.end());
            std::rotate(s.begin(), s.begin() + 1, s.end());
        }
        if (marks == 1) {
            fresh.push_back({t[0], s[0], t[2]});
            fresh.push_back({s[0], t[1], t[2]});
        } else {
            fresh.push_back({s[0], t[1], s[1]});
            const double d1 = (m.vertices[t[0]] - m.vertices[s[1]]).squaredNorm();
            const double d2 = (m.vertices[s[0]] - m.vertices[t[2]]).squaredNorm();
            if (d1 <= d2) {
                fresh.push_back({t[0], s[0], s[1]});
                fresh.push_back({t[0], s[1], t[2]});
            } else {
                fresh.push_back({t[0], s[0], t[2]});
                fresh.push_back({s[0], s[1], t[2]});
            }
        }
    }
    const std::size_t first = m.triangles.size();
    m.triangles.insert(m.triangles.end(), fresh.begin(), fresh.end());
    if (!old.antipode.empty()) m.link_antipodes();
    screen(m, c.values, c.gradients, flags, first, opts);
    if (c.mode == GridMode::Projective) symmetrize_flags(m, flags);
    c.flags = std::move(flags);
    c.mesh = std::make_shared<const Mesh>(std::move(m));
}

}  // namespace

NodalCensus count_domains(const FieldSample& sample, const SphereGrid& grid, const CensusOptions& opts) {
    NodalCensus c;
    c.mode = grid.mode();
    c.mesh = grid.shared_mesh();
    const Mesh& m = *c.mesh;
    c.values.resize(m.vertices.size());
    c.gradients.resize(m.vertices.size());
    for (std::size_t v = 0; v < m.vertices.size(); ++v) {
        const Evaluated e = evaluate(sample, m.vertices[v]);
        c.values[v] = e.value;
        c.gradients[v] = e.gradient;
    }
    screen(m, c.values, c.gradients, c.flags, 0, opts);
    if (c.mode == GridMode::Projective) symmetrize_flags(m, c.flags);
    analyze(sample, c, opts);
    return c;
}

NodalCensus refine_ambiguous(const FieldSample& sample, const SphereGrid& /*grid*/, const NodalCensus& census,
                             const CensusOptions& opts) {
    NodalCensus c = census;
    while (c.flagged_triangles > 0 && c.extra_levels < opts.max_extra_levels) {
        refine_once(sample, c, opts);
        ++c.extra_levels;
        analyze(sample, c, opts);
    }
    return c;
}

NodalCensus census(const FieldSample& sample, const SphereGrid& grid, const CensusOptions& opts) {
    return refine_ambiguous(sample, grid, count_domains(sample, grid, opts), opts);
}

std::string census_csv_header() { return "seed,degree,n_domains,n_loops,flagged_cells,wall_time_ms"; }

std::string census_csv_row(std::uint64_t seed, int degree, const NodalCensus& c, double wall_time_ms) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%llu,%d,%d,%d,%d,%.3f", static_cast<unsigned long long>(seed), degree,
                  c.n_domains, c.n_loops, c.flagged_cells, wall_time_ms);
    return buf;
}

}  // namespace nodal
