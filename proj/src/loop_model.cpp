#include "nodal/loop_model.hpp"

#include "nodal/rng.hpp"
#include "nodal/union_find.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <queue>
#include <sstream>

namespace nodal {

void FourRegularMap::validate() {
    const int nh = static_cast<int>(pairing.size());
    if (nh != 4 * n_vertices()) throw StructureError("pairing size must be 4|V|");
    vertex_.assign(nh, -1);
    slot_.assign(nh, -1);
    for (int v = 0; v < n_vertices(); ++v)
        for (int s = 0; s < 4; ++s) {
            const int h = rotation[v][s];
            if (h < 0 || h >= nh || vertex_[h] >= 0) throw StructureError("rotation must list every half-edge once");
            vertex_[h] = v;
            slot_[h] = s;
        }
    for (int h = 0; h < nh; ++h) {
        const int g = pairing[h];
        if (g < 0 || g >= nh || g == h || pairing[g] != h)
            throw StructureError("pairing must be a fixed-point-free involution (half-edge " + std::to_string(h) + ")");
    }
    if (free_loops < 0) throw StructureError("negative free loop count");
    if (antipode.empty() && antipode_half.empty()) return;
    if (static_cast<int>(antipode.size()) != n_vertices() || static_cast<int>(antipode_half.size()) != nh)
        throw StructureError("antipodal involution has the wrong size");
    for (int v = 0; v < n_vertices(); ++v)
        if (antipode[v] == v || antipode[antipode[v]] != v) throw StructureError("vertex antipode is not an involution");
    for (int h = 0; h < nh; ++h) {
        const int t = antipode_half[h];
        if (antipode_half[t] != h || vertex_[t] != antipode[vertex_[h]])
            throw StructureError("half-edge antipode is inconsistent with the vertex antipode");
        if (antipode_half[pairing[h]] != pairing[t]) throw StructureError("antipode does not commute with the pairing");
        // orientation reversing
        if (next(t) != antipode_half[prev(h)]) throw StructureError("antipode must reverse the rotation");
    }
}

FourRegularMap FourRegularMap::from_rotation(std::vector<std::array<int, 4>> rotation, std::vector<int> pairing,
                                             int free_loops) {
    FourRegularMap m;
    m.rotation = std::move(rotation);
    m.pairing = std::move(pairing);
    m.free_loops = free_loops;
    m.validate();
    return m;
}

int state_partner(const FourRegularMap& m, const StateAssignment& s, int h) {
    const int v = m.vertex_of(h), slot = m.slot_of(h);
    // A: 0-1, 2-3; B: 1-2, 3-0
    const bool up = s[v] == VertexState::A ? (slot % 2 == 0) : (slot % 2 == 1);
    return m.rotation[v][(slot + (up ? 1 : 3)) & 3];
}

namespace {

void check_states(const FourRegularMap& m, const StateAssignment& s) {
    if (static_cast<int>(s.size()) != m.n_vertices())
        throw InvalidSpec("state assignment covers " + std::to_string(s.size()) + " of " +
                          std::to_string(m.n_vertices()) + " vertices");
}

VertexState state_pairing(int slot_a, int slot_b) {
    // adjacent slots {s, s+1}: A when the lower one (mod 4) is even
    const int lo = ((slot_b - slot_a + 4) % 4 == 1) ? slot_a : slot_b;
    return lo % 2 == 0 ? VertexState::A : VertexState::B;
}

}  // namespace

int count_loops(const FourRegularMap& m, const StateAssignment& s) {
    check_states(m, s);
    const int nh = m.n_half_edges();
    std::vector<char> seen(nh, 0);
    int loops = m.free_loops;
    for (int h = 0; h < nh; ++h) {
        if (seen[h]) continue;
        ++loops;
        int x = h;
        do {
            seen[x] = 1;
            const int y = m.pairing[x];
            seen[y] = 1;
            x = state_partner(m, s, y);
        } while (x != h);
    }
    return loops;
}

int count_loops_naive(const FourRegularMap& m, const StateAssignment& s) {
    check_states(m, s);
    const int nh = m.n_half_edges();
    std::vector<std::vector<int>> adj(nh);
    for (int h = 0; h < nh; ++h) adj[h].push_back(m.pairing[h]);
    for (int v = 0; v < m.n_vertices(); ++v) {
        const auto& r = m.rotation[v];
        const int o = s[v] == VertexState::A ? 0 : 1;
        for (int k : {0, 2}) {
            const int a = r[(k + o) % 4], b = r[(k + o + 1) % 4];
            adj[a].push_back(b);
            adj[b].push_back(a);
        }
    }
    std::vector<char> seen(nh, 0);
    int comps = 0;
    for (int h = 0; h < nh; ++h) {
        if (seen[h]) continue;
        ++comps;
        std::queue<int> q;
        q.push(h);
        seen[h] = 1;
        while (!q.empty()) {
            const int x = q.front();
            q.pop();
            for (int y : adj[x])
                if (!seen[y]) seen[y] = 1, q.push(y);
        }
    }
    return comps + m.free_loops;
}

StateAssignment tie_antipodal(const FourRegularMap& m, const StateAssignment& s) {
    check_states(m, s);
    if (m.antipode.empty()) return s;
    StateAssignment t = s;
    for (int v = 0; v < m.n_vertices(); ++v) {
        const int w = m.antipode[v];
        if (w < v) continue;
        const int h0 = m.rotation[v][0], h1 = state_partner(m, s, h0);
        const int t0 = m.antipode_half[h0], t1 = m.antipode_half[h1];
        t[w] = state_pairing(m.slot_of(t0), m.slot_of(t1));
    }
    return t;
}

FaceStructure faces_any_genus(const FourRegularMap& m) {
    FaceStructure fs;
    const int nh = m.n_half_edges(), nv = m.n_vertices();
    std::vector<char> seen(nh, 0);
    std::vector<int> mark(nv, -1);
    for (int h = 0; h < nh; ++h) {
        if (seen[h]) continue;
        Face f;
        const int id = static_cast<int>(fs.faces.size());
        int x = h;
        do {
            seen[x] = 1;
            f.half_edges.push_back(x);
            const int v = m.vertex_of(x);
            if (mark[v] != id) {
                mark[v] = id;
                f.vertices.push_back(v);
            }
            x = m.next(m.pairing[x]);
        } while (x != h);
        fs.faces.push_back(std::move(f));
    }
    UnionFind uf(nv);
    for (int h = 0; h < nh; ++h) uf.unite(m.vertex_of(h), m.vertex_of(m.pairing[h]));
    std::vector<int> labels;
    fs.components = nv > 0 ? uf.labels(labels) : 0;
    // V - E + F = 2 * components - 2 * genus
    const int chi = nv - nh / 2 + static_cast<int>(fs.faces.size());
    fs.genus = (2 * fs.components - chi) / 2;
    return fs;
}

FaceStructure faces(const FourRegularMap& m) {
    auto fs = faces_any_genus(m);
    if (fs.genus != 0) throw NonPlanarError("rotation system has genus " + std::to_string(fs.genus), fs.genus);
    return fs;
}

VertexState good_state(const FourRegularMap& m, const MarkedCycle& c, int vertex) {
    for (std::size_t k = 1; k < c.half_edges.size(); ++k) {
        const int out = c.half_edges[k];
        if (m.vertex_of(out) != vertex) continue;
        const int in = m.pairing[c.half_edges[k - 1]];
        return state_pairing(m.slot_of(in), m.slot_of(out));
    }
    throw InvalidSpec("vertex " + std::to_string(vertex) + " is not interior to the cycle");
}

bool is_good(const FourRegularMap& m, const MarkedCycle& c, const StateAssignment& s) {
    check_states(m, s);
    for (std::size_t k = 1; k < c.half_edges.size(); ++k) {
        const int out = c.half_edges[k];
        if (state_partner(m, s, m.pairing[c.half_edges[k - 1]]) != out) return false;
    }
    return true;
}

MarkedCycleSet mark_cycles(const FourRegularMap& m) { return mark_cycles(m, faces(m)); }

MarkedCycleSet mark_cycles(const FourRegularMap& m, const FaceStructure& fs) {
    MarkedCycleSet out;
    const int nv = m.n_vertices();
    const int nf = static_cast<int>(fs.faces.size());
    for (int f = 0; f < nf; ++f)
        if (fs.faces[f].vertices.size() <= 4) out.small_faces.push_back(f);
    if (nv > 0 && !(5 * static_cast<long long>(out.small_faces.size()) > nv))
        throw StructureError("only " + std::to_string(out.small_faces.size()) + " faces with <= 4 vertices for |V| = " +
                             std::to_string(nv));

    // deterministic greedy order: boundary size, then id
    std::vector<int> order = out.small_faces;
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return fs.faces[a].vertices.size() < fs.faces[b].vertices.size(); });
    std::vector<char> used(nv, 0);
    for (int f : order) {
        bool clash = false;
        for (int v : fs.faces[f].vertices) clash |= used[v] != 0;
        if (clash) continue;
        for (int v : fs.faces[f].vertices) used[v] = 1;
        out.separated.push_back(f);
    }
    if (13 * out.separated.size() < out.small_faces.size())
        throw StructureError("separated family smaller than |F*| / 13");

    const bool projective = !m.antipode.empty();
    if (projective) {
        std::vector<int> mark(nv, -1);
        for (int f = 0; f < nf; ++f) {
            for (int v : fs.faces[f].vertices) mark[v] = f;
            bool shared = false;
            for (int v : fs.faces[f].vertices) shared |= mark[m.antipode[v]] == f;
            out.bad_faces += shared;
        }
        if (out.bad_faces > 8)
            throw StructureError(std::to_string(out.bad_faces) + " faces meet their antipodal image (at most 8)");
    }

    const int limit = 2 * m.n_half_edges();  // 4 |E|
    std::vector<int> at(nv, -1);
    for (int f : out.separated) {
        MarkedCycle c;
        c.face = f;
        std::vector<int> walk, verts;
        int h = fs.faces[f].half_edges.front();
        for (int step = 0;; ++step) {
            if (step > limit) throw StructureError("face walk exceeds 4|E| steps: corrupted map");
            const int v = m.vertex_of(h);
            if (at[v] >= 0) {
                const int j = at[v];
                c.marked_vertex = v;
                c.exit_half_edge = walk[j];
                c.return_half_edge = m.pairing[walk.back()];
                c.half_edges.assign(walk.begin() + j, walk.end());
                c.interior_vertices.assign(verts.begin() + j + 1, verts.end());
                break;
            }
            at[v] = static_cast<int>(walk.size());
            walk.push_back(h);
            verts.push_back(v);
            h = m.next(m.pairing[h]);
        }
        for (int v : verts) at[v] = -1;
        if (c.return_half_edge != m.next(c.exit_half_edge) && c.return_half_edge != m.prev(c.exit_half_edge))
            throw StructureError("marked cycle at vertex " + std::to_string(c.marked_vertex) +
                                 " does not return next to its exit edge");
        if (projective) {
            std::vector<char> in(nv, 0);
            in[c.marked_vertex] = 1;
            for (int v : c.interior_vertices) in[v] = 1;
            bool meets = in[m.antipode[c.marked_vertex]] != 0;
            for (int v : c.interior_vertices) meets |= in[m.antipode[v]] != 0;
            if (meets) {
                ++out.rejected_antipodal;
                continue;
            }
        }
        out.cycles.push_back(std::move(c));
    }
    return out;
}

int LoopEnsembleParams::n_in_range() const {
    int n = 0;
    for (double q : p) n += q >= p0 && q <= 1 - p0;
    return n;
}

namespace {

void check_params(const FourRegularMap& m, const LoopEnsembleParams& params) {
    if (static_cast<int>(params.p.size()) != m.n_vertices()) throw InvalidSpec("one probability per vertex required");
    for (double q : params.p)
        if (!(q >= 0 && q <= 1)) throw InvalidSpec("vertex probabilities must lie in [0, 1]");
    if (!(params.p0 > 0 && params.p0 <= 0.5)) throw InvalidSpec("p0 must lie in (0, 1/2]");
}

/// Vertices whose states are drawn; in projective mode one per antipodal pair.
std::vector<int> free_vertices(const FourRegularMap& m) {
    std::vector<int> v;
    for (int i = 0; i < m.n_vertices(); ++i)
        if (m.antipode.empty() || m.antipode[i] > i) v.push_back(i);
    return v;
}

LoopMoments moments_from_histogram(const std::map<int, double>& hist, double total, bool unbiased) {
    LoopMoments r;
    for (auto [n, w] : hist) r.mean += n * w;
    r.mean /= total;
    double m2 = 0, m4 = 0;
    for (auto [n, w] : hist) {
        const double d = n - r.mean;
        m2 += w * d * d;
        m4 += w * d * d * d * d;
    }
    r.variance = unbiased && total > 1 ? m2 / (total - 1) : m2 / total;
    r.fourth = m4 / total;
    return r;
}

double uniform_from(std::uint64_t key, std::uint64_t k) {
    return static_cast<double>(splitmix64(key + k) >> 11) * 0x1.0p-53;
}

}  // namespace

LoopMoments exact_moments(const FourRegularMap& m, const LoopEnsembleParams& params) {
    check_params(m, params);
    const auto fv = free_vertices(m);
    if (fv.size() > 25) throw ResourceError("exact enumeration over " + std::to_string(fv.size()) + " vertices", 25);
    std::map<int, double> hist;
    StateAssignment s(m.n_vertices(), VertexState::A);
    const std::uint64_t count = std::uint64_t(1) << fv.size();
    for (std::uint64_t mask = 0; mask < count; ++mask) {
        double prob = 1;
        for (std::size_t k = 0; k < fv.size(); ++k) {
            const bool b = (mask >> k) & 1;
            s[fv[k]] = b ? VertexState::B : VertexState::A;
            prob *= b ? 1 - params.p[fv[k]] : params.p[fv[k]];
        }
        if (prob == 0) continue;
        hist[count_loops(m, tie_antipodal(m, s))] += prob;
    }
    auto r = moments_from_histogram(hist, 1.0, false);
    r.trials = static_cast<long long>(count);
    return r;
}

VarianceResult variance_experiment(const FourRegularMap& m, const LoopEnsembleParams& params, long long trials,
                                   std::uint64_t seed, bool exact) {
    check_params(m, params);
    if (trials < 1) throw InvalidSpec("trials must be positive");
    VarianceResult r;
    if (exact) r.exact = exact_moments(m, params);
    const auto fv = free_vertices(m);
    std::map<int, double> hist;
    StateAssignment s(m.n_vertices(), VertexState::A);
    for (long long t = 0; t < trials; ++t) {
        const std::uint64_t key = stream_key(seed, {static_cast<std::uint64_t>(t)});
        for (std::size_t k = 0; k < fv.size(); ++k)
            s[fv[k]] = uniform_from(key, k) < params.p[fv[k]] ? VertexState::A : VertexState::B;
        hist[count_loops(m, m.antipode.empty() ? s : tie_antipodal(m, s))] += 1;
    }
    r.monte_carlo = moments_from_histogram(hist, static_cast<double>(trials), true);
    r.monte_carlo.trials = trials;
    return r;
}

namespace {

/// Medial graph of a planar map given by its dart rotation (dart 2e and its twin 2e+1 form edge e).
/// Slots at the medial vertex of e, counterclockwise: before d', after d, before d, after d', with d = 2e,
/// rotated by shift[e]. `dart_antipode` (optional) is an orientation-reversing dart involution.
FourRegularMap medial_from_darts(const std::vector<int>& rot, const std::vector<int>& shift,
                                 const std::vector<int>& dart_antipode) {
    const int n = static_cast<int>(rot.size()) / 2;
    std::vector<std::array<int, 4>> rotation(n);
    std::vector<int> pairing(4 * n, -1);
    auto slot_id = [&](int e, int s) { return 4 * e + (s + shift[e]) % 4; };
    for (int e = 0; e < n; ++e)
        for (int s = 0; s < 4; ++s) rotation[e][s] = slot_id(e, s);
    auto after = [&](int x) { return slot_id(x / 2, x % 2 == 0 ? 1 : 3); };
    auto before = [&](int x) { return slot_id(x / 2, x % 2 == 0 ? 2 : 0); };
    for (int x = 0; x < 2 * n; ++x) {
        const int a = after(x), b = before(rot[x]);
        pairing[a] = b;
        pairing[b] = a;
    }
    FourRegularMap m;
    m.rotation = std::move(rotation);
    m.pairing = std::move(pairing);
    if (!dart_antipode.empty()) {
        m.antipode.resize(n);
        m.antipode_half.assign(4 * n, -1);
        for (int x = 0; x < 2 * n; ++x) {
            const int t = dart_antipode[x];
            m.antipode[x / 2] = t / 2;
            // reversal sends the corner after x to the corner before its image
            m.antipode_half[after(x)] = before(t);
            m.antipode_half[before(x)] = after(t);
        }
    }
    m.validate();
    faces(m);  // planarity guard
    return m;
}

}  // namespace

FourRegularMap medial_map(const std::vector<std::array<int, 3>>& triangles, int n_vertices,
                          const std::vector<int>& vertex_antipode) {
    std::map<std::pair<int, int>, int> dart;
    for (const auto& t : triangles)
        for (int k = 0; k < 3; ++k) {
            const int a = t[k], b = t[(k + 1) % 3];
            if (a < 0 || a >= n_vertices || b < 0 || b >= n_vertices) throw InvalidSpec("triangle vertex out of range");
            if (dart.count({a, b})) continue;
            const int e = static_cast<int>(dart.size()) / 2;
            dart[{a, b}] = 2 * e;
            dart[{b, a}] = 2 * e + 1;
        }
    std::vector<int> rot(dart.size(), -1);
    for (const auto& t : triangles)
        for (int k = 0; k < 3; ++k) {
            // counterclockwise at t[k]: the edge to the next corner, then the edge to the one after
            const int a = t[k], b = t[(k + 1) % 3], c = t[(k + 2) % 3];
            rot[dart.at({a, b})] = dart.at({a, c});
        }
    for (int r : rot)
        if (r < 0) throw InvalidSpec("triangulation is not closed");
    std::vector<int> anti;
    if (!vertex_antipode.empty()) {
        anti.resize(rot.size());
        for (const auto& [k, d] : dart) anti[d] = dart.at({vertex_antipode[k.first], vertex_antipode[k.second]});
    }
    return medial_from_darts(rot, std::vector<int>(rot.size() / 2, 0), anti);
}

FourRegularMap random_planar_map(int n, std::uint64_t seed) {
    if (n < 0) throw InvalidSpec("negative vertex count");
    if (n == 0) return FourRegularMap::from_rotation({}, {});
    Rng rng = make_rng(seed, {0x4d4150});
    auto pick = [&](int k) { return static_cast<int>(std::uniform_int_distribution<int>(0, k - 1)(rng)); };

    // planar map with n edges; dart 2e leaves org[2e], dart 2e+1 is its twin
    std::vector<int> org, rot, rinv;
    auto new_edge = [&](int u, int w) {
        const int d = static_cast<int>(org.size());
        org.push_back(u), org.push_back(w);
        rot.push_back(d), rot.push_back(d + 1);
        rinv.push_back(d), rinv.push_back(d + 1);
        return d;
    };
    auto insert_after = [&](int x, int d) {
        rot[d] = rot[x];
        rinv[rot[x]] = d;
        rot[x] = d;
        rinv[d] = x;
    };
    const int tree_vertices = 2 + pick(n);  // n - tree_vertices + 1 chords
    new_edge(0, 1);
    for (int v = 2; v < tree_vertices; ++v) {
        const int x = pick(static_cast<int>(org.size()));
        const int d = new_edge(org[x], v);
        insert_after(x, d);
    }
    while (static_cast<int>(org.size()) < 2 * n) {
        // a chord between two corners of one face keeps the map planar
        const int start = pick(static_cast<int>(org.size()));
        std::vector<int> walk;
        int y = start;
        do {
            walk.push_back(y);
            y = rot[y ^ 1];
        } while (y != start);
        const int L = static_cast<int>(walk.size());
        const int i = pick(L);
        const int j = (i + 1 + pick(L - 1)) % L;
        const int a1 = walk[i] ^ 1, a2 = walk[j] ^ 1;  // corners after twin(y)
        const int d = new_edge(org[a1], org[a2]);
        insert_after(a1, d);
        insert_after(a2, d + 1);
    }

    std::vector<int> shift(n);
    for (int e = 0; e < n; ++e) shift[e] = pick(4);
    return medial_from_darts(rot, shift, {});
}

void write_map(std::ostream& os, const FourRegularMap& m) {
    os << m.n_vertices() << ' ' << m.n_half_edges() / 2;
    if (m.free_loops) os << ' ' << m.free_loops;
    os << '\n';
    for (const auto& r : m.rotation) os << r[0] << ' ' << r[1] << ' ' << r[2] << ' ' << r[3] << '\n';
    for (int h = 0; h < m.n_half_edges(); ++h)
        if (h < m.pairing[h]) os << h << ' ' << m.pairing[h] << '\n';
}

FourRegularMap read_map(std::istream& is) {
    std::string header;
    if (!std::getline(is, header)) throw InvalidSpec("empty map file");
    std::istringstream hs(header);
    int V = -1, E = -1, free = 0;
    hs >> V >> E;
    if (!hs || V < 0 || E != 2 * V) throw InvalidSpec("map header must be 'V E [free]' with E = 2V");
    if (!(hs >> free)) free = 0;
    std::vector<std::array<int, 4>> rotation(V);
    for (auto& r : rotation)
        if (!(is >> r[0] >> r[1] >> r[2] >> r[3])) throw InvalidSpec("truncated rotation list");
    std::vector<int> pairing(4 * V, -1);
    for (int k = 0; k < E; ++k) {
        int a, b;
        if (!(is >> a >> b) || a < 0 || b < 0 || a >= 4 * V || b >= 4 * V) throw InvalidSpec("bad pairing line");
        pairing[a] = b;
        pairing[b] = a;
    }
    return FourRegularMap::from_rotation(std::move(rotation), std::move(pairing), free);
}

void write_states(std::ostream& os, const StateAssignment& s) {
    for (std::size_t v = 0; v < s.size(); ++v) os << v << ' ' << (s[v] == VertexState::A ? "+1" : "-1") << '\n';
}

StateAssignment read_states(std::istream& is, int n_vertices) {
    StateAssignment s(n_vertices, VertexState::A);
    std::vector<char> seen(n_vertices, 0);
    int v, sign;
    while (is >> v >> sign) {
        if (v < 0 || v >= n_vertices || (sign != 1 && sign != -1)) throw InvalidSpec("bad state line");
        s[v] = sign > 0 ? VertexState::A : VertexState::B;
        seen[v] = 1;
    }
    std::string missing;
    for (int k = 0; k < n_vertices; ++k)
        if (!seen[k]) missing += (missing.empty() ? "" : ",") + std::to_string(k);
    if (!missing.empty()) throw InvalidSpec("missing states for vertices " + missing);
    return s;
}

std::string variance_csv_header() { return "map_id,n_vertices,n_in_range,mean,variance,exact_variance"; }

std::string variance_csv_row(int map_id, const FourRegularMap& m, const LoopEnsembleParams& params,
                             const VarianceResult& r) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%d,%d,%d,%.10g,%.10g,", map_id, m.n_vertices(), params.n_in_range(),
                  r.monte_carlo.mean, r.monte_carlo.variance);
    std::string row = buf;
    if (r.exact) {
        std::snprintf(buf, sizeof buf, "%.10g", r.exact->variance);
        row += buf;
    }
    return row;
}

}  // namespace nodal
