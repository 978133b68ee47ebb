#pragma once

#include "nodal/census.hpp"
#include "nodal/sphere_field.hpp"

#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace nodal {

enum class CritClass { Min, Max, Saddle, Degenerate };

const char* to_string(CritClass c);

struct CriticalPoint {
    SpherePoint location;
    double value = 0.0;
    double grad_residual = 0.0;
    double mu1 = 0.0, mu2 = 0.0;  // ascending
    double inv_hess_norm = 0.0;
    CritClass kind = CritClass::Degenerate;
};

/// Classify from the Hessian eigenvalues; |mu| below `degenerate_tol` is degenerate.
CriticalPoint make_critical_point(const SpherePoint& p, const Jet2& jet, double degenerate_tol = 1e-8);

struct NewtonOptions {
    /// Use H(X0)^-1 in a fixed chart (the contraction map) instead of the full Newton step.
    bool frozen_hessian = false;
    int max_steps = 50;
    /// Gradient norm (per unit length) accepted as converged.
    double tolerance = 1e-10;
    /// Longest single step, in units of length on S^2(L).
    double max_step = 1.0;
};

struct NewtonResult {
    bool converged = false;
    int steps = 0;
    SpherePoint point;
    double residual = std::numeric_limits<double>::infinity();
    /// |X_{k+1} - X_k| per iteration.
    std::vector<double> step_lengths;
};

/// Newton iteration for grad f = 0 started at `start`.
NewtonResult newton_refine(const FieldSample& f, const SpherePoint& start, const NewtonOptions& opts = {});

/// The same iteration on a planar chart function (test hook). Returns the chart point in `point.unit.head<2>()`.
using ChartFunction = std::function<Jet2(const Vec2&)>;
struct ChartNewtonResult {
    bool converged = false;
    Vec2 X = Vec2::Zero();
    std::vector<double> step_lengths;
};
ChartNewtonResult newton_chart(const ChartFunction& F, const Vec2& X0, const NewtonOptions& opts = {});

/// Sum over j <= 3 of the operator norms of d^j f, maximized over the vertices of a coarse grid.
double c3_norm(const FieldSample& f, double oversample = 3.0);

struct CritOptions {
    NewtonOptions newton;
    /// Merge radius constant c in c / (A Delta).
    double merge_constant = 0.01;
    double degenerate_tol = 1e-8;
    /// Extra grid levels tried when the extraction is incomplete or violates the Morse identity.
    int retry_levels = 2;
    /// Precomputed C^3 norm (measured when <= 0).
    double A = 0.0;
};

struct CritExtraction {
    std::vector<CriticalPoint> points;
    int n_min = 0, n_max = 0, n_saddle = 0, n_degenerate = 0;
    int seeds = 0;
    int discarded = 0;  // Newton failures
    int missed = 0;     // triangles with a strict discrete critical point but no refined point nearby
    int grid_level = 0;
    double A = 0.0;
    /// No missed triangles and no degenerate points.
    bool complete = false;
    /// #min + #max - #saddle == 2 (sphere) or the same over antipodal orbits times two.
    bool morse_ok = false;
    std::vector<std::string> log;
};

/// Seeds at triangles where both frame components of the gradient change sign,
/// Newton refinement, and deduplication. Projective grids return exact antipodal pairs.
CritExtraction find_critical_points(const FieldSample& f, const SphereGrid& grid, const CritOptions& opts = {});

struct CrSet {
    double alpha = std::numeric_limits<double>::infinity();
    double beta = 0.0;
    double delta_cap = std::numeric_limits<double>::infinity();
    std::vector<CriticalPoint> members;
    double min_separation = std::numeric_limits<double>::infinity();
};

/// Filter by |f| <= alpha, |grad f| <= beta (if beta > 0) and inv_hess_norm <= delta_cap.
/// In projective mode the separation is taken between antipodal orbits.
CrSet cr_filter(const std::vector<CriticalPoint>& points, double alpha, double beta = 0.0,
                double delta_cap = std::numeric_limits<double>::infinity(), GridMode mode = GridMode::Sphere);

/// Grid vertices in Cr(alpha, beta), as point records with grad_residual = |grad f|.
std::vector<CriticalPoint> almost_singular_points(const FieldSample& f, const SphereGrid& grid, double alpha,
                                                  double beta);

struct ProbeResult {
    bool precondition = false;  // p in Cr(alpha, beta, Delta)
    bool regime = false;        // A Delta^2 beta <= 0.1 and A Delta^2 beta^2 <= alpha / 10
    bool converged = false;
    SpherePoint z;
    double distance = 0.0;
    double value_at_z = 0.0;
    bool distance_ok = false;  // d(p, z) <= 2 Delta beta
    bool value_ok = false;     // |f(z)| <= 2 alpha
    bool unique = false;       // restarts inside D(p, c/(A Delta)) find no other critical point
    double max_contraction = 0.0;  // largest ratio of successive frozen steps
};

ProbeResult almost_singular_probe(const FieldSample& f, const SpherePoint& p, double alpha, double beta,
                                  double delta_cap, double A, double c = 0.1);

struct HessianTail {
    std::vector<double> delta;
    std::vector<double> tail;  // P{inv_hess_norm > Delta | point in Cr(alpha, beta)}
    double event_probability = 0.0;
    int samples = 0;
};

/// Samples (f, Hessian) at a point conditioned on |f| <= alpha by the normal
/// correlation theorem; the gradient is independent of both and drops out.
HessianTail hessian_conditional_stats(const EnsembleSpec& spec, double alpha, double beta,
                                      const std::vector<double>& delta_grid, int M, std::uint64_t seed);

std::string critical_csv_header();
std::string critical_csv_row(const CriticalPoint& p);

}  // namespace nodal
