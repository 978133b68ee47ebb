#pragma once

#include "nodal/sphere_field.hpp"

#include <array>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace nodal {

enum class GridMode { Sphere, Projective };

/// Triangulated unit sphere. `antipode[v]` is filled when the vertex set is
/// closed under x -> -x (exact coordinates), otherwise empty.
struct Mesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> triangles;
    std::vector<int> antipode;

    /// Undirected edges (i < j), sorted.
    std::vector<std::array<int, 2>> edges() const;
    /// Longest edge, in radians.
    double resolution() const;
    /// Match vertices with their negatives by exact coordinates.
    void link_antipodes();
};

/// Geodesic icosphere at a fixed subdivision level.
class SphereGrid {
  public:
    static SphereGrid icosphere(int level, GridMode mode = GridMode::Sphere);

    int level() const { return level_; }
    GridMode mode() const { return mode_; }
    double resolution() const { return h_; }
    const Mesh& mesh() const { return *mesh_; }
    std::shared_ptr<const Mesh> shared_mesh() const { return mesh_; }
    /// Vertex neighbours in compressed rows.
    const std::vector<int>& neighbor_offsets() const { return nbr_off_; }
    const std::vector<int>& neighbors() const { return nbr_; }
    /// Vertex count of a hypothetical icosphere at `level`.
    static long long triangle_count(int level) { return 20LL << (2 * level); }

  private:
    int level_ = 0;
    GridMode mode_ = GridMode::Sphere;
    double h_ = 0.0;
    std::shared_ptr<const Mesh> mesh_;
    std::vector<int> nbr_off_, nbr_;
};

/// Finest subdivision level build_grid will construct (20 * 4^9 triangles).
inline constexpr int kMaxGridLevel = 9;

/// Smallest icosphere with resolution <= wavelength / oversample, where the
/// wavelength is 2 pi / sqrt(n (n + 1)) on the unit sphere.
SphereGrid build_grid(int degree, double oversample, GridMode mode = GridMode::Sphere,
                      int max_level = kMaxGridLevel);

struct CensusOptions {
    /// |f| below this multiple of (gradient * h) counts as a zero vertex.
    double sign_tolerance = 1e-9;
    /// A triangle near a critical point is flagged when the estimated
    /// critical value is below flag_factor * (Hessian scale) * h^2.
    double flag_factor = 0.125;
    /// Extra local subdivision levels for refine_ambiguous.
    int max_extra_levels = 3;
    /// Skip the critical-value screening (flags then only come from zero vertices).
    bool screen_critical = true;
};

struct NodalCensus {
    GridMode mode = GridMode::Sphere;
    /// Counts in the census mode (projective counts are orbits under x -> -x).
    int n_domains = 0;
    int n_loops = 0;
    /// Counts on the sphere cover.
    int sphere_domains = 0;
    int sphere_loops = 0;
    int positive_domains = 0;
    int negative_domains = 0;
    /// Domain label per mesh vertex (dense, 0..n_domains_sphere-1 on the sphere cover).
    std::vector<int> labels;
    /// One zero-crossing point (unit vector) per sphere loop.
    std::vector<Vec3> loop_seeds;
    /// Connected groups of flagged triangles (each group is one suspect site).
    int flagged_cells = 0;
    int flagged_triangles = 0;
    int ambiguous_vertices = 0;
    int extra_levels = 0;
    int n_domains_min = 0, n_domains_max = 0;
    int n_loops_min = 0, n_loops_max = 0;

    // Discretization state, kept so that refinement can resume without re-evaluating.
    std::shared_ptr<const Mesh> mesh;
    std::vector<double> values;
    std::vector<Vec3> gradients;  // tangential, per radian, ambient
    std::vector<char> flags;      // per triangle

    bool uncertain() const { return n_domains_min != n_domains_max || n_loops_min != n_loops_max; }
};

/// Census on the grid: union-find over same-sign vertex edges for domains,
/// explicit tracing of the piecewise-linear zero set for loops.
NodalCensus count_domains(const FieldSample& sample, const SphereGrid& grid, const CensusOptions& opts = {});

/// Local red-green subdivision of flagged triangles, then recount.
NodalCensus refine_ambiguous(const FieldSample& sample, const SphereGrid& grid, const NodalCensus& census,
                             const CensusOptions& opts = {});

/// count_domains followed by refine_ambiguous.
NodalCensus census(const FieldSample& sample, const SphereGrid& grid, const CensusOptions& opts = {});

/// "seed,degree,n_domains,n_loops,flagged_cells,wall_time_ms"
std::string census_csv_header();
std::string census_csv_row(std::uint64_t seed, int degree, const NodalCensus& c, double wall_time_ms);

}  // namespace nodal
