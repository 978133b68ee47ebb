#pragma once

#include "nodal/census.hpp"
#include "nodal/critical.hpp"
#include "nodal/loop_model.hpp"
#include "nodal/sphere_field.hpp"

#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace nodal {

/// Origin and orthonormal tangent axes of a local chart.
struct ChartFrame {
    Vec3 center = Vec3::Zero();
    Vec3 e1 = Vec3::UnitX();
    Vec3 e2 = Vec3::UnitY();
};

/// Oriented surface with a smooth function on it, as seen by the joint builder and the tracer.
/// Points are ambient 3-vectors; lengths are surface lengths.
class Surface {
  public:
    virtual ~Surface() = default;
    /// Value and tangential gradient (ambient).
    virtual std::pair<double, Vec3> value_and_gradient(const Vec3& x) const = 0;
    virtual Vec3 normal(const Vec3& x) const = 0;
    /// Point reached from x along the tangent vector v.
    virtual Vec3 move(const Vec3& x, const Vec3& v) const = 0;
    /// Short displacement from y to x.
    virtual Vec3 displacement(const Vec3& x, const Vec3& y) const = 0;
    virtual Vec3 from_chart(const ChartFrame& c, const Vec2& X) const = 0;
    virtual Vec2 to_chart(const ChartFrame& c, const Vec3& x) const = 0;
    /// Tracer step away from joints and the runaway bound on arc length.
    virtual double coarse_step() const = 0;
    virtual double max_length() const = 0;

    double value(const Vec3& x) const { return value_and_gradient(x).first; }
    double distance(const Vec3& x, const Vec3& y) const { return displacement(x, y).norm(); }
};

/// A field sample on S^2(L); points are L * unit.
class SphereSurface : public Surface {
  public:
    explicit SphereSurface(const FieldSample& f);
    std::pair<double, Vec3> value_and_gradient(const Vec3& x) const override;
    Vec3 normal(const Vec3& x) const override { return x.normalized(); }
    Vec3 move(const Vec3& x, const Vec3& v) const override { return (x + v).normalized() * L_; }
    Vec3 displacement(const Vec3& x, const Vec3& y) const override { return x - y; }
    Vec3 from_chart(const ChartFrame& c, const Vec2& X) const override;
    Vec2 to_chart(const ChartFrame& c, const Vec3& x) const override;
    double coarse_step() const override { return step_; }
    double max_length() const override { return max_len_; }

    const FieldSample& field() const { return *f_; }
    double radius() const { return L_; }
    Vec3 point(const SpherePoint& p) const { return p.unit * L_; }
    /// Chart frame at a point from the deterministic tangent frame.
    ChartFrame frame_at(const SpherePoint& p) const;

  private:
    const FieldSample* f_;
    double L_, step_, max_len_;
};

/// Doubly periodic planar patch [0, P1) x [0, P2) with a function given by value and gradient (test hook).
class PatchSurface : public Surface {
  public:
    using Function = std::function<std::pair<double, Vec2>(const Vec2&)>;
    PatchSurface(Function F, double period1, double period2, double step, double max_length);
    std::pair<double, Vec3> value_and_gradient(const Vec3& x) const override;
    Vec3 normal(const Vec3&) const override { return Vec3::UnitZ(); }
    Vec3 move(const Vec3& x, const Vec3& v) const override;
    Vec3 displacement(const Vec3& x, const Vec3& y) const override;
    Vec3 from_chart(const ChartFrame& c, const Vec2& X) const override;
    Vec2 to_chart(const ChartFrame& c, const Vec3& x) const override;
    double coarse_step() const override { return step_; }
    double max_length() const override { return max_len_; }

  private:
    Vec3 wrap(Vec3 x) const;
    Function F_;
    double P1_, P2_, step_, max_len_;
};

/// Non-degenerate critical point in a chart: value and Hessian in the (e1, e2) axes.
struct LocalCritical {
    ChartFrame frame;
    double value = 0.0;
    Mat2 hess = Mat2::Zero();
    int source = -1;  // index into the caller's list
};

/// Joint at a saddle. In the aligned frame e1 follows the eigenvalue of smaller modulus and
/// the Hessian form is h_sign * (a X1^2 - b X2^2), a <= b. Terminals 0..3 are the quadrants
/// (+,+), (-,+), (-,-), (+,-) of {|a X1^2 - b X2^2| <= a delta^2, 2 delta <= |X1| <= 3 delta},
/// counterclockwise.
struct Joint {
    ChartFrame frame;
    double a = 0.0, b = 0.0;
    int h_sign = 1;
    double delta = 0.0;
    double value = 0.0;
    int source = -1;
    /// 64-point check of sign(f) = sign(H) on the curved boundary.
    int boundary_violations = 0;

    bool contains(const Vec2& X) const;
    /// Terminal quadrant of a chart point in the joint, -1 outside the terminals.
    int terminal_of(const Vec2& X) const;
    /// Radius of a disk around the saddle containing the joint.
    double extent() const;
    /// Sign of H on the east and west sectors (|X1| large).
    int east_sign() const { return h_sign; }
};

/// Disk D(p, delta) at an extremum; eigen_sign is the common sign of the Hessian eigenvalues.
struct ExtremumDisk {
    ChartFrame frame;
    double delta = 0.0;
    int eigen_sign = 1;
    double value = 0.0;
    double mu_min = 0.0;  // smaller eigenvalue modulus
    int source = -1;
    int boundary_violations = 0;
};

/// Points of the curved boundary {|a X1^2 - b X2^2| = a delta^2, |X1| <= 3 delta}, counterclockwise
/// by branch: east, north, west, south. The expected sign of f is east_sign() on east and west.
std::vector<Vec2> joint_boundary_points(const Joint& j, int per_branch = 16);

struct JointSet {
    std::vector<Joint> joints;
    std::vector<ExtremumDisk> disks;
    double c_joint = 0.0;
    int shrinks = 0;
    std::vector<std::string> log;
};

/// Joints at the saddles and disks at the extrema with delta = c / (A Delta_p), Delta_p the
/// local inverse Hessian norm. Overlaps (including with `others`, further critical points)
/// halve c up to three times; a persisting overlap throws DomainError.
JointSet build_joints(const Surface& s, const std::vector<LocalCritical>& saddles,
                      const std::vector<LocalCritical>& extrema, double A, double c_joint,
                      const std::vector<Vec3>& others = {});
/// Sphere form: classified points (saddles and extrema are split by kind).
JointSet build_joints(const SphereSurface& s, const CrSet& points, double A, double c_joint = 0.1,
                      const std::vector<CriticalPoint>& all_points = {});
LocalCritical local_critical(const SphereSurface& s, const CriticalPoint& p);

struct Arc {
    int from = -1, to = -1;  // half-edges 4 * joint + terminal
    double length = 0.0;
    int steps = 0;
};

struct TraceOptions {
    double step = 0.0;        // <= 0: the surface's coarse step
    double max_length = 0.0;  // <= 0: the surface's bound
    int max_halvings = 30;
    /// Steps within this many deltas of a joint or disk use delta / 4.
    double near_factor = 6.0;
};

struct NodalGraph {
    std::vector<Joint> joints;
    std::vector<int> pairing;  // half-edge -> partner
    std::vector<Arc> arcs;
    int free_loops = 0;
    int blinking_loops = 0;  // closed curves inside extremum disks
    int graph_seeds = 0;     // seeds landing on curves through joints
    int duplicate_seeds = 0;
    int failed_seeds = 0;
    int off_terminal_entries = 0;
    double min_grad = std::numeric_limits<double>::infinity();
    std::vector<std::string> log;

    int n_half_edges() const { return static_cast<int>(pairing.size()); }
    /// Export with the rotation at each joint shifted so that state A is the sign +1 resolution.
    FourRegularMap to_map() const;
    /// States of the exported map for joint signs (+1 or -1).
    StateAssignment states(const std::vector<int>& signs) const;
};

struct TraceError : Error {
    Vec3 location;
    TraceError(const std::string& what, const Vec3& at) : Error(what), location(at) {}
};

/// Traces Z from every terminal until it enters a terminal, then traces the seeds (one point
/// per component, e.g. census loop seeds) to find the components that touch no joint.
NodalGraph trace_edges(const Surface& s, const JointSet& js, const std::vector<Vec3>& seeds,
                       const TraceOptions& opts = {});
NodalGraph trace_edges(const SphereSurface& s, const JointSet& js, const NodalCensus& c,
                       const TraceOptions& opts = {});

/// Loops after resolving every joint by its sign: +1 (positive type) joins the positive
/// set through the joint. Throws InvalidSpec naming joints without a sign.
int resolve_graph(const NodalGraph& g, const std::vector<int>& signs);

/// sqrt(1 - a'^2) f + a' g as a sample of the same ensemble.
FieldSample perturb(const FieldSample& f, const FieldSample& g, double alpha_prime);

struct BlinkingResult {
    int count = 0;
    std::vector<int> counted;  // disk indices
    int checked = 0;
    int disagreements = 0;
    std::vector<std::string> log;
};

/// Loops of the surface function inside an extremum disk, by a sign-component count on a
/// local grid (radius shrunk towards the expected circle size); -1 when a component of the
/// opposite sign reaches the rim.
int disk_loop_count(const Surface& s, const ExtremumDisk& d, int resolution = 41);
/// Disks where the sign at the centre is opposite to the eigenvalue sign. Every check_every-th
/// disk is verified by disk_loop_count; disagreements are excluded and logged.
BlinkingResult blinking_count(const Surface& perturbed, const JointSet& js, int check_every = 1);

struct RegimeCheck {
    std::string name;
    double lhs = 0.0, rhs = 0.0;
    bool ok() const { return lhs <= rhs; }
};

struct CaricatureParams {
    double alpha = 1e-3;
    double alpha_prime = 0.0;
    double beta = 0.0;  // <= 0: geometric middle of the admissible window
    double c_joint = 0.1;
    double margin = 10.0;
    double grid_oversample = 6.0;
    /// Local refinement depth of both censuses (near-crossings at joints need deep levels).
    int census_extra_levels = 9;
    bool check_homotopy = true;
};

struct CaricatureResult {
    int N_I = 0, N_II = 0, N_III = 0, N_direct = 0;
    bool match = false;
    bool regime_ok = false;
    double A = 0.0, Delta = 1.0, beta = 0.0;
    double min_abs_perturbed = std::numeric_limits<double>::infinity();
    std::vector<RegimeCheck> regime;
    int n_joints = 0, n_disks = 0;
    /// Census of f against free loops + blinking circles + graph loops with the signs of f.
    int census_f = 0, graph_loops_f = 0;
    bool census_consistent = false;
    int free_loops_perturbed = -1;
    bool homotopy_ok = true;
    int blinking_disagreements = 0;
    /// Filled when the decomposition fails inside the regime.
    std::string regression;
    std::vector<std::string> log;
};

CaricatureResult caricature_decomposition(const FieldSample& f, const FieldSample& g, const CaricatureParams& p);

}  // namespace nodal
