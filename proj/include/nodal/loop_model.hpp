#pragma once

#include "nodal/errors.hpp"

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace nodal {

/// 4-regular map: half-edges 0..4V-1, each vertex lists its four half-edges in
/// counterclockwise rotation order, `pairing` joins half-edges into edges.
/// Multiple and circular edges are allowed; `free_loops` counts closed curves with no vertex.
struct FourRegularMap {
    std::vector<std::array<int, 4>> rotation;
    std::vector<int> pairing;
    int free_loops = 0;
    /// Projective mode: vertex involution and the matching half-edge involution.
    std::vector<int> antipode;
    std::vector<int> antipode_half;

    int n_vertices() const { return static_cast<int>(rotation.size()); }
    int n_half_edges() const { return static_cast<int>(pairing.size()); }

    int vertex_of(int h) const { return vertex_[h]; }
    int slot_of(int h) const { return slot_[h]; }
    /// Next half-edge counterclockwise at the same vertex.
    int next(int h) const { return rotation[vertex_[h]][(slot_[h] + 1) & 3]; }
    int prev(int h) const { return rotation[vertex_[h]][(slot_[h] + 3) & 3]; }

    /// Checks the structural invariants and builds the half-edge lookup tables.
    void validate();

    static FourRegularMap from_rotation(std::vector<std::array<int, 4>> rotation, std::vector<int> pairing,
                                        int free_loops = 0);

  private:
    std::vector<int> vertex_, slot_;
};

/// Vertex state: A pairs slots (0,1),(2,3); B pairs (1,2),(3,0).
enum class VertexState : std::uint8_t { A = 0, B = 1 };
using StateAssignment = std::vector<VertexState>;

/// Partner of half-edge h under the state at its vertex.
int state_partner(const FourRegularMap& m, const StateAssignment& s, int h);

int count_loops(const FourRegularMap& m, const StateAssignment& s);
/// Reference implementation: explicit strand graph and breadth-first components.
int count_loops_naive(const FourRegularMap& m, const StateAssignment& s);

/// States of antipodal vertices follow their partners (projective mode).
StateAssignment tie_antipodal(const FourRegularMap& m, const StateAssignment& s);

struct Face {
    std::vector<int> half_edges;  // left-turn walk
    std::vector<int> vertices;    // distinct boundary vertices, in walk order
};

struct FaceStructure {
    std::vector<Face> faces;  // left-turn walks, one set per connected component
    int components = 0;
    int genus = 0;
    /// Faces of the plane embedding: components share the outer face.
    int plane_faces() const { return static_cast<int>(faces.size()) - components + 1; }
};

/// Left-turn walks face(h) = next(pairing[h]). Throws NonPlanarError when the genus is not zero.
FaceStructure faces(const FourRegularMap& m);
/// Same walks without the planarity check.
FaceStructure faces_any_genus(const FourRegularMap& m);

struct NonPlanarError : Error {
    int genus;
    NonPlanarError(const std::string& what, int g) : Error(what), genus(g) {}
};

struct MarkedCycle {
    int face = -1;
    int marked_vertex = -1;
    int exit_half_edge = -1;    // leaves the marked vertex
    int return_half_edge = -1;  // arrives back at it
    std::vector<int> half_edges;          // walk from exit to return (outgoing half-edges)
    std::vector<int> interior_vertices;   // cycle vertices other than the marked one
};

struct MarkedCycleSet {
    std::vector<int> small_faces;  // F*: at most 4 boundary vertices
    std::vector<int> separated;    // greedy maximal separated family
    std::vector<MarkedCycle> cycles;
    int rejected_antipodal = 0;    // projective mode: cycles meeting their images
    int bad_faces = 0;             // projective mode: faces sharing a vertex with their image
};

/// Throws StructureError when a structural bound fails.
MarkedCycleSet mark_cycles(const FourRegularMap& m, const FaceStructure& fs);
MarkedCycleSet mark_cycles(const FourRegularMap& m);

/// The cycle merges into one circular edge at its marked vertex under the given states.
bool is_good(const FourRegularMap& m, const MarkedCycle& c, const StateAssignment& s);
/// State of an interior vertex for which the cycle passes straight through it.
VertexState good_state(const FourRegularMap& m, const MarkedCycle& c, int vertex);

struct StructureError : Error {
    using Error::Error;
};

struct LoopEnsembleParams {
    std::vector<double> p;  // probability of state A per vertex
    double p0 = 0.25;
    int n_in_range() const;
};

struct LoopMoments {
    double mean = 0.0;
    double variance = 0.0;
    double fourth = 0.0;  // central
    long long trials = 0;
};

struct VarianceResult {
    LoopMoments monte_carlo;
    std::optional<LoopMoments> exact;
};

/// Monte Carlo over independent states (trials from per-trial streams); exact enumeration
/// when |V| <= 25 and `exact` is set. In projective mode the vertex with the larger index
/// of each antipodal pair copies its partner.
VarianceResult variance_experiment(const FourRegularMap& m, const LoopEnsembleParams& params, long long trials,
                                   std::uint64_t seed, bool exact = false);
LoopMoments exact_moments(const FourRegularMap& m, const LoopEnsembleParams& params);

/// Random connected planar 4-regular map with n vertices: the medial graph of a random
/// planar map (random tree plus face-splitting chords).
FourRegularMap random_planar_map(int n_vertices, std::uint64_t seed);

/// Medial graph of a closed oriented triangulation (counterclockwise triangles). With a vertex
/// antipode the result carries the induced antipodal involution.
FourRegularMap medial_map(const std::vector<std::array<int, 3>>& triangles, int n_vertices,
                          const std::vector<int>& vertex_antipode = {});

/// Text form: "V E [free]", V rotation lines, E pairing lines.
void write_map(std::ostream& os, const FourRegularMap& m);
FourRegularMap read_map(std::istream& is);
void write_states(std::ostream& os, const StateAssignment& s);
StateAssignment read_states(std::istream& is, int n_vertices);

std::string variance_csv_header();
std::string variance_csv_row(int map_id, const FourRegularMap& m, const LoopEnsembleParams& params,
                             const VarianceResult& r);

}  // namespace nodal
