#include "nodal/census.hpp"
#include "nodal/loop_model.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

using namespace nodal;

namespace {

FourRegularMap two_circular_edges() { return FourRegularMap::from_rotation({{0, 1, 2, 3}}, {1, 0, 3, 2}); }

StateAssignment states_from_mask(int n, std::uint64_t mask) {
    StateAssignment s(n);
    for (int v = 0; v < n; ++v) s[v] = (mask >> v) & 1 ? VertexState::B : VertexState::A;
    return s;
}

// 2x2 grid with periodic boundary: vertex (i, j) has slots east, north, west, south
FourRegularMap torus_2x2() {
    std::vector<std::array<int, 4>> rot(4);
    std::vector<int> pairing(16);
    auto id = [](int i, int j) { return ((i + 2) % 2) * 2 + (j + 2) % 2; };
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
            const int v = id(i, j);
            rot[v] = {4 * v, 4 * v + 1, 4 * v + 2, 4 * v + 3};
            pairing[4 * v + 0] = 4 * id(i + 1, j) + 2;
            pairing[4 * v + 2] = 4 * id(i - 1, j) + 0;
            pairing[4 * v + 1] = 4 * id(i, j + 1) + 3;
            pairing[4 * v + 3] = 4 * id(i, j - 1) + 1;
        }
    return FourRegularMap::from_rotation(rot, pairing);
}

FourRegularMap icosahedron_medial(int level) {
    const auto g = SphereGrid::icosphere(level, GridMode::Projective);
    return medial_map(g.mesh().triangles, static_cast<int>(g.mesh().vertices.size()), g.mesh().antipode);
}

}  // namespace

TEST(LoopModel, FreeLoopsOnly) {
    auto m = FourRegularMap::from_rotation({}, {}, 3);
    EXPECT_EQ(count_loops(m, {}), 3);
    EXPECT_EQ(count_loops_naive(m, {}), 3);
}

TEST(LoopModel, SingleVertexTwoCircularEdges) {
    const auto m = two_circular_edges();
    EXPECT_EQ(count_loops(m, {VertexState::A}), 2);
    EXPECT_EQ(count_loops(m, {VertexState::B}), 1);
    const auto fs = faces(m);
    EXPECT_EQ(fs.components, 1);
    EXPECT_EQ(m.n_vertices() - m.n_half_edges() / 2 + fs.plane_faces(), 1 + fs.components);
    EXPECT_THROW(count_loops(m, {}), InvalidSpec);
}

TEST(LoopModel, NonPlanarRejected) {
    try {
        faces(torus_2x2());
        FAIL() << "expected non-planar error";
    } catch (const NonPlanarError& e) {
        EXPECT_EQ(e.genus, 1);
    }
    const auto figure_eight = FourRegularMap::from_rotation({{0, 1, 2, 3}}, {2, 3, 0, 1});
    EXPECT_EQ(faces_any_genus(figure_eight).genus, 1);
    EXPECT_THROW(FourRegularMap::from_rotation({{0, 1, 2, 3}}, {0, 3, 2, 1}), StructureError);
    EXPECT_THROW(FourRegularMap::from_rotation({{0, 1, 2, 2}}, {1, 0, 3, 2}), StructureError);
}

TEST(LoopModel, CountMatchesNaiveOnAllStates) {
    for (int k = 0; k < 30; ++k) {
        const int n = 1 + k % 10;
        const auto m = random_planar_map(n, 100 + k);
        ASSERT_EQ(m.n_vertices(), n);
        for (std::uint64_t mask = 0; mask < (1u << n); ++mask) {
            const auto s = states_from_mask(n, mask);
            ASSERT_EQ(count_loops(m, s), count_loops_naive(m, s)) << "map " << k << " mask " << mask;
        }
    }
}

TEST(LoopModel, GeneratorIsPlanarAndEulerHolds) {
    for (int k = 0; k < 60; ++k) {
        const int n = 1 + (k * 7) % 50;
        const auto m = random_planar_map(n, 7 + k);
        const auto fs = faces(m);
        EXPECT_EQ(fs.genus, 0);
        EXPECT_EQ(fs.components, 1);
        EXPECT_EQ(m.n_vertices() - m.n_half_edges() / 2 + fs.plane_faces(), 1 + fs.components);
        EXPECT_GE(fs.plane_faces(), m.n_vertices() + 2);
    }
    // same seed, same map
    const auto a = random_planar_map(20, 5), b = random_planar_map(20, 5);
    EXPECT_EQ(a.rotation, b.rotation);
    EXPECT_EQ(a.pairing, b.pairing);
}

TEST(LoopModel, SingleFlipChangesCountByOne) {
    std::mt19937_64 rng(3);
    for (int k = 0; k < 20; ++k) {
        const auto m = random_planar_map(5 + k, 300 + k);
        for (int t = 0; t < 50; ++t) {
            auto s = states_from_mask(m.n_vertices(), rng());
            const int before = count_loops(m, s);
            const int v = static_cast<int>(rng() % m.n_vertices());
            s[v] = s[v] == VertexState::A ? VertexState::B : VertexState::A;
            EXPECT_EQ(std::abs(count_loops(m, s) - before), 1);
        }
    }
}

TEST(LoopModel, RelabelingInvariance) {
    std::mt19937_64 rng(11);
    for (int k = 0; k < 20; ++k) {
        const auto m = random_planar_map(3 + k, 900 + k);
        const int nv = m.n_vertices(), nh = m.n_half_edges();
        std::vector<int> hp(nh), vp(nv), shift(nv);
        std::iota(hp.begin(), hp.end(), 0);
        std::iota(vp.begin(), vp.end(), 0);
        std::shuffle(hp.begin(), hp.end(), rng);
        std::shuffle(vp.begin(), vp.end(), rng);
        for (auto& r : shift) r = static_cast<int>(rng() % 4);
        std::vector<std::array<int, 4>> rot(nv);
        std::vector<int> pairing(nh);
        for (int v = 0; v < nv; ++v)
            for (int s = 0; s < 4; ++s) rot[vp[v]][s] = hp[m.rotation[v][(s + shift[v]) % 4]];
        for (int h = 0; h < nh; ++h) pairing[hp[h]] = hp[m.pairing[h]];
        const auto c = FourRegularMap::from_rotation(rot, pairing);
        EXPECT_EQ(faces(c).faces.size(), faces(m).faces.size());
        for (int t = 0; t < 20; ++t) {
            const auto s = states_from_mask(nv, rng());
            StateAssignment sc(nv);
            // an odd rotation of the slot labels swaps the meaning of A and B
            for (int v = 0; v < nv; ++v)
                sc[vp[v]] = shift[v] % 2 ? (s[v] == VertexState::A ? VertexState::B : VertexState::A) : s[v];
            EXPECT_EQ(count_loops(c, sc), count_loops(m, s));
        }
    }
}

TEST(MarkedCycles, CircularEdgeFace) {
    const auto m = two_circular_edges();
    const auto mc = mark_cycles(m);
    EXPECT_EQ(mc.small_faces.size(), 3u);
    EXPECT_EQ(mc.separated.size(), 1u);
    ASSERT_EQ(mc.cycles.size(), 1u);
    const auto& c = mc.cycles[0];
    EXPECT_EQ(c.marked_vertex, 0);
    ASSERT_EQ(c.half_edges.size(), 1u);
    EXPECT_EQ(m.pairing[c.exit_half_edge], c.return_half_edge);
    EXPECT_TRUE(c.interior_vertices.empty());
}

TEST(MarkedCycles, StructuralBoundsOnGeneratedMaps) {
    for (int k = 0; k < 50; ++k) {
        const int n = 1 + k;
        const auto m = random_planar_map(n, 4000 + k);
        const auto fs = faces(m);
        const auto mc = mark_cycles(m, fs);
        EXPECT_GT(5 * static_cast<int>(mc.small_faces.size()), n);
        EXPECT_GE(13 * mc.separated.size(), mc.small_faces.size());
        EXPECT_EQ(mc.cycles.size(), mc.separated.size());
        std::vector<int> owner(n, -1);
        for (int f : mc.separated)
            for (int v : fs.faces[f].vertices) {
                EXPECT_EQ(owner[v], -1) << "faces share a vertex";
                owner[v] = f;
            }
        for (const auto& c : mc.cycles) {
            EXPECT_LE(c.interior_vertices.size(), 3u);
            EXPECT_TRUE(c.return_half_edge == m.next(c.exit_half_edge) || c.return_half_edge == m.prev(c.exit_half_edge));
            // with the good interior states and the separating state at the marked vertex,
            // the cycle closes up into a loop of its own
            StateAssignment s(n, VertexState::A);
            for (int v : c.interior_vertices) s[v] = good_state(m, c, v);
            EXPECT_TRUE(is_good(m, c, s));
            for (VertexState sv : {VertexState::A, VertexState::B}) {
                s[c.marked_vertex] = sv;
                if (state_partner(m, s, c.return_half_edge) != c.exit_half_edge) continue;
                const int with = count_loops(m, s);
                s[c.marked_vertex] = sv == VertexState::A ? VertexState::B : VertexState::A;
                EXPECT_EQ(with, count_loops(m, s) + 1);
            }
        }
    }
}

TEST(LoopModel, MapFileRoundTrip) {
    const auto m = random_planar_map(12, 77);
    std::stringstream ss;
    write_map(ss, m);
    const auto r = read_map(ss);
    EXPECT_EQ(r.rotation, m.rotation);
    EXPECT_EQ(r.pairing, m.pairing);
    StateAssignment s = states_from_mask(12, 0xa5f);
    std::stringstream st;
    write_states(st, s);
    EXPECT_EQ(read_states(st, 12), s);
    std::stringstream partial("0 +1\n2 -1\n");
    EXPECT_THROW(read_states(partial, 3), InvalidSpec);
    std::stringstream bad("2 3\n");
    EXPECT_THROW(read_map(bad), InvalidSpec);
}

TEST(Variance, DeterministicStatesHaveZeroVariance) {
    const auto m = random_planar_map(9, 1);
    LoopEnsembleParams p;
    for (int v = 0; v < 9; ++v) p.p.push_back(v % 2 ? 1.0 : 0.0);
    const auto r = variance_experiment(m, p, 1000, 4, true);
    EXPECT_EQ(r.monte_carlo.variance, 0.0);
    EXPECT_EQ(r.exact->variance, 0.0);
    EXPECT_EQ(p.n_in_range(), 0);
}

TEST(Variance, SingleVertexHalf) {
    const auto m = two_circular_edges();
    LoopEnsembleParams p{{0.5}, 0.25};
    const auto r = variance_experiment(m, p, 100000, 8, true);
    EXPECT_DOUBLE_EQ(r.exact->mean, 1.5);
    EXPECT_DOUBLE_EQ(r.exact->variance, 0.25);
    EXPECT_NEAR(r.monte_carlo.mean, 1.5, 5 * 0.5 / std::sqrt(1e5));
    EXPECT_NEAR(r.monte_carlo.variance, 0.25, 0.01);
    // deterministic under the seed
    EXPECT_EQ(variance_experiment(m, p, 1000, 8).monte_carlo.mean, variance_experiment(m, p, 1000, 8).monte_carlo.mean);
}

TEST(Variance, MonteCarloMatchesExact) {
    for (int k = 0; k < 8; ++k) {
        const auto m = random_planar_map(4 + k, 50 + k);
        LoopEnsembleParams p;
        std::mt19937_64 rng(k);
        for (int v = 0; v < m.n_vertices(); ++v) p.p.push_back(std::uniform_real_distribution<double>(0, 1)(rng));
        const long long M = 200000;
        const auto r = variance_experiment(m, p, M, 99 + k, true);
        const auto& e = *r.exact;
        EXPECT_NEAR(r.monte_carlo.mean, e.mean, 5 * std::sqrt(e.variance / M) + 1e-12);
        const double se_var = std::sqrt(std::max(e.fourth - e.variance * e.variance, 0.0) / M);
        EXPECT_NEAR(r.monte_carlo.variance, e.variance, 5 * se_var + 1e-12);
    }
}

TEST(Variance, ExactModeGuard) {
    const auto m = random_planar_map(26, 2);
    LoopEnsembleParams p{std::vector<double>(26, 0.5), 0.25};
    EXPECT_THROW(exact_moments(m, p), ResourceError);
}

TEST(Projective, MedialOfSymmetricTriangulation) {
    const auto m = icosahedron_medial(0);
    EXPECT_EQ(m.n_vertices(), 30);
    ASSERT_EQ(m.antipode.size(), 30u);
    const auto fs = faces(m);
    EXPECT_EQ(fs.plane_faces(), 32);  // 12 vertex faces and 20 triangle faces
    const auto mc = mark_cycles(m, fs);
    EXPECT_LE(mc.bad_faces, 8);
    // tied flips change the loop count by 0 or 2
    std::mt19937_64 rng(5);
    for (int t = 0; t < 200; ++t) {
        auto s = tie_antipodal(m, states_from_mask(30, rng()));
        const int before = count_loops(m, s);
        int v = static_cast<int>(rng() % 30);
        if (m.antipode[v] < v) v = m.antipode[v];
        s[v] = s[v] == VertexState::A ? VertexState::B : VertexState::A;
        s = tie_antipodal(m, s);
        const int d = std::abs(count_loops(m, s) - before);
        EXPECT_TRUE(d == 0 || d == 2) << d;
        // the tied state is a symmetric loop configuration: loops map to loops
        EXPECT_EQ(tie_antipodal(m, s), s);
    }
    LoopEnsembleParams p{std::vector<double>(30, 0.5), 0.25};
    const auto r = variance_experiment(m, p, 20000, 3, true);
    EXPECT_EQ(r.exact->trials, 1 << 15);
    EXPECT_NEAR(r.monte_carlo.mean, r.exact->mean, 5 * std::sqrt(r.exact->variance / 20000));
}

TEST(Variance, CsvRow) {
    const auto m = two_circular_edges();
    LoopEnsembleParams p{{0.5}, 0.25};
    VarianceResult r;
    r.monte_carlo.mean = 1.5;
    r.monte_carlo.variance = 0.25;
    EXPECT_EQ(variance_csv_header(), "map_id,n_vertices,n_in_range,mean,variance,exact_variance");
    EXPECT_EQ(variance_csv_row(3, m, p, r), "3,1,1,1.5,0.25,");
    r.exact = r.monte_carlo;
    EXPECT_EQ(variance_csv_row(3, m, p, r), "3,1,1,1.5,0.25,0.25");
}
