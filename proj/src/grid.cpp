#include "nodal/census.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <mutex>
#include <numbers>
#include <unordered_map>

namespace nodal {

namespace {

struct CoordHash {
    std::size_t operator()(const std::array<std::uint64_t, 3>& k) const {
        std::size_t h = 0;
        for (auto v : k) h = h * 0x9e3779b97f4a7c15ULL ^ (v + (h >> 7));
        return h;
    }
};

std::array<std::uint64_t, 3> coord_key(const Vec3& v) {
    std::array<std::uint64_t, 3> k;
    for (int i = 0; i < 3; ++i) {
        // +0.0 and -0.0 compare equal but differ in bits
        const double x = v[i] == 0.0 ? 0.0 : v[i];
        std::memcpy(&k[i], &x, sizeof(double));
    }
    return k;
}

Mesh icosahedron() {
    Mesh m;
    const double phi = 0.5 * (1 + std::sqrt(5.0));
    for (double s1 : {-1.0, 1.0})
        for (double s2 : {-1.0, 1.0}) {
            m.vertices.push_back(Vec3(0, s1, s2 * phi).normalized());
            m.vertices.push_back(Vec3(s1, s2 * phi, 0).normalized());
            m.vertices.push_back(Vec3(s2 * phi, 0, s1).normalized());
        }
    // faces are the triples of mutually nearest vertices
    const int n = static_cast<int>(m.vertices.size());
    double edge = 10.0;
    for (int i = 1; i < n; ++i) edge = std::min(edge, (m.vertices[i] - m.vertices[0]).norm());
    auto adjacent = [&](int a, int b) { return (m.vertices[a] - m.vertices[b]).norm() < edge * 1.01; };
    for (int a = 0; a < n; ++a)
        for (int b = a + 1; b < n; ++b)
            for (int c = b + 1; c < n; ++c) {
                if (!adjacent(a, b) || !adjacent(b, c) || !adjacent(a, c)) continue;
                const Vec3& A = m.vertices[a];
                const double orient = (m.vertices[b] - A).cross(m.vertices[c] - A).dot(A);
                m.triangles.push_back(orient > 0 ? std::array{a, b, c} : std::array{a, c, b});
            }
    return m;
}

Mesh subdivide(const Mesh& in) {
    Mesh out;
    out.vertices = in.vertices;
    std::unordered_map<std::uint64_t, int> mid;
    const std::uint64_t n = in.vertices.size();
    auto midpoint = [&](int a, int b) {
        const std::uint64_t key = std::uint64_t(std::min(a, b)) * n + std::uint64_t(std::max(a, b));
        auto it = mid.find(key);
        if (it != mid.end()) return it->second;
        const int id = static_cast<int>(out.vertices.size());
        out.vertices.push_back((in.vertices[a] + in.vertices[b]).normalized());
        mid.emplace(key, id);
        return id;
    };
    out.triangles.reserve(in.triangles.size() * 4);
    for (const auto& t : in.triangles) {
        const int ab = midpoint(t[0], t[1]), bc = midpoint(t[1], t[2]), ca = midpoint(t[2], t[0]);
        out.triangles.push_back({t[0], ab, ca});
        out.triangles.push_back({ab, t[1], bc});
        out.triangles.push_back({ca, bc, t[2]});
        out.triangles.push_back({ab, bc, ca});
    }
    return out;
}

std::shared_ptr<const Mesh> icosphere_mesh(int level) {
    static std::mutex mu;
    static std::map<int, std::shared_ptr<const Mesh>> cache;
    std::lock_guard lock(mu);
    auto it = cache.find(level);
    if (it != cache.end()) return it->second;
    // build from the finest cached coarser level
    int from = -1;
    for (auto& [k, v] : cache)
        if (k < level) from = k;
    Mesh m = from < 0 ? icosahedron() : *cache[from];
    for (int k = std::max(from, 0) + (from < 0 ? 0 : 1); k <= level; ++k) {
        if (k > 0) m = subdivide(m);
    }
    m.link_antipodes();
    auto ptr = std::make_shared<const Mesh>(std::move(m));
    cache.emplace(level, ptr);
    return ptr;
}

}  // namespace

std::vector<std::array<int, 2>> Mesh::edges() const {
    std::vector<std::array<int, 2>> e;
    e.reserve(triangles.size() * 3);
    for (const auto& t : triangles)
        for (int k = 0; k < 3; ++k) {
            const int a = t[k], b = t[(k + 1) % 3];
            e.push_back({std::min(a, b), std::max(a, b)});
        }
    std::sort(e.begin(), e.end());
    e.erase(std::unique(e.begin(), e.end()), e.end());
    return e;
}

double Mesh::resolution() const {
    double h = 0.0;
    for (const auto& t : triangles)
        for (int k = 0; k < 3; ++k) h = std::max(h, angle_between(vertices[t[k]], vertices[t[(k + 1) % 3]]));
    return h;
}

void Mesh::link_antipodes() {
    std::unordered_map<std::array<std::uint64_t, 3>, int, CoordHash> index;
    index.reserve(vertices.size());
    for (int i = 0; i < static_cast<int>(vertices.size()); ++i) index.emplace(coord_key(vertices[i]), i);
    antipode.assign(vertices.size(), -1);
    for (int i = 0; i < static_cast<int>(vertices.size()); ++i) {
        auto it = index.find(coord_key(-vertices[i]));
        if (it == index.end()) {
            antipode.clear();
            return;
        }
        antipode[i] = it->second;
    }
}

SphereGrid SphereGrid::icosphere(int level, GridMode mode) {
    if (level < 0) throw InvalidSpec("negative subdivision level");
    SphereGrid g;
    g.level_ = level;
    g.mode_ = mode;
    g.mesh_ = icosphere_mesh(level);
    if (mode == GridMode::Projective && g.mesh_->antipode.empty())
        throw DomainError("grid is not antipodally symmetric");
    g.h_ = g.mesh_->resolution();
    const auto edges = g.mesh_->edges();
    const int nv = static_cast<int>(g.mesh_->vertices.size());
    std::vector<int> deg(nv, 0);
    for (const auto& e : edges) ++deg[e[0]], ++deg[e[1]];
    g.nbr_off_.assign(nv + 1, 0);
    for (int v = 0; v < nv; ++v) g.nbr_off_[v + 1] = g.nbr_off_[v] + deg[v];
    g.nbr_.assign(g.nbr_off_.back(), -1);
    std::vector<int> fill(g.nbr_off_.begin(), g.nbr_off_.end() - 1);
    for (const auto& e : edges) {
        g.nbr_[fill[e[0]]++] = e[1];
        g.nbr_[fill[e[1]]++] = e[0];
    }
    return g;
}

SphereGrid build_grid(int degree, double oversample, GridMode mode, int max_level) {
    if (degree < 1) throw InvalidSpec("degree must be >= 1");
    if (!(oversample >= 2)) throw InvalidSpec("oversample must be >= 2");
    const double n = degree;
    const double target = 2 * std::numbers::pi / std::sqrt(n * (n + 1)) / oversample;
    // the longest edge shrinks by a factor close to 2 per level; predict before building
    double h = SphereGrid::icosphere(0, GridMode::Sphere).resolution();
    int level = 0;
    while (h > target) {
        const int predicted = level + static_cast<int>(std::ceil(std::log2(h / target)));
        if (predicted > max_level)
            throw ResourceError("grid needs subdivision level " + std::to_string(predicted) + " (budget " +
                                    std::to_string(max_level) + ")",
                                predicted);
        ++level;
        h = SphereGrid::icosphere(level, GridMode::Sphere).resolution();
    }
    return SphereGrid::icosphere(level, mode);
}

}  // namespace nodal
