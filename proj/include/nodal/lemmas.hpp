#pragma once

#include "nodal/rng.hpp"
#include "nodal/sphere_field.hpp"

#include <array>
#include <complex>
#include <limits>
#include <optional>
#include <vector>

#include <json.hpp>

namespace nodal {

// ---------------------------------------------------------------- one/two-point functions

/// Importance-sampled probability of the event Omega for one or two points.
struct DensityEstimate {
    double p = 0.0;
    double se = 0.0;  // standard error
    double ess = 0.0;  // effective sample size (sum w)^2 / sum w^2
    long samples = 0;
};

/// P{|f(x)| <= alpha, |grad f(x)| <= beta}, exact.
double one_point_exact(const EnsembleSpec& spec, double alpha, double beta);
/// Monte Carlo version of the one-point probability (uniform on the 3-d event, Gaussian weights).
DensityEstimate one_point_density(const EnsembleSpec& spec, double alpha, double beta, long M, Rng& rng);
/// p(x, y) for the points and frames given: uniform sampling of the 6-d event Omega,
/// weighted by the Gaussian density of (f, grad f, f, grad f).
DensityEstimate two_point_density(const EnsembleSpec& spec, const TangentFrame& fx, const TangentFrame& fy,
                                  double alpha, double beta, long M, Rng& rng);

struct TwoPointEstimate {
    double alpha = 0.0, beta = 0.0;
    std::vector<double> distances;  // length units on S^2(L)
    double p_hat = 0.0, p_stderr = 0.0;
    double p_exact = 0.0;
    double p_over_alpha_beta2 = 0.0;  // p_hat / (alpha beta^2)
    std::vector<double> p_hat_xy, p_xy_stderr, ess;
    std::vector<double> W_hat, W_stderr;
    /// Least-squares slope of log W against log d over bins in [0.1, 1] wavelengths; theta = -slope.
    double short_slope = std::numeric_limits<double>::quiet_NaN();
    double theta = std::numeric_limits<double>::quiet_NaN();
    /// Slope of log|W - 1| against log d over bins beyond one wavelength with |W - 1| > 2 stderr.
    double gamma_fit = std::numeric_limits<double>::quiet_NaN();

    nlohmann::json to_json() const;
};

/// Pairs (north pole, point at geodesic distance d along a meridian), one bin per distance.
/// A pilot run checks that each bin reaches an effective sample size of 100; otherwise
/// ResourceError carries the M that would be required.
TwoPointEstimate estimate_two_point(const EnsembleSpec& spec, double alpha, double beta,
                                    const std::vector<double>& distances, long M, std::uint64_t seed);

// ---------------------------------------------------------------- independence coupling

/// Joint Gaussian (f, xi): f ~ N(0, cov), xi = (f + eta) / sqrt(1 + tau^2) with eta ~ N(0, Gamma)
/// independent of f and Gamma = tau^2 I - offdiag(cov). xi is exactly i.i.d. standard normal.
class CoupledSampler {
  public:
    int size() const { return static_cast<int>(cov_.rows()); }
    double tau() const { return tau_; }
    /// sqrt(E[(f - xi)^2]) bound: 2 tau.
    double max_deviation_bound() const { return 2.0 * tau_; }
    /// Exact E[(f_i - xi_i)^2] for coordinate i.
    double exact_mse(int i) const;
    /// Joint covariance of (f, xi), 2k x 2k.
    Eigen::MatrixXd joint_covariance() const;
    const Eigen::MatrixXd& gram() const { return gamma_; }
    /// Smallest Gershgorin margin tau^2 - sum_j |cov_ij| over rows.
    double gershgorin_margin() const { return margin_; }

    void sample(Rng& rng, Eigen::VectorXd& f, Eigen::VectorXd& xi) const;

  private:
    friend CoupledSampler couple_independent(const Eigen::MatrixXd& cov, double tau);
    Eigen::MatrixXd cov_, gamma_, Lf_, Lg_;
    double tau_ = 0.0, margin_ = 0.0;
};

/// cov must be symmetric with unit diagonal. Throws DomainError naming the first row whose
/// off-diagonal absolute sum reaches tau^2.
CoupledSampler couple_independent(const Eigen::MatrixXd& cov, double tau);

// ---------------------------------------------------------------- exponential sums

using cplx = std::complex<double>;

/// Finite atomic probability measure on R.
struct SpectralMeasure {
    std::vector<std::pair<double, double>> atoms;  // (location, mass)
    std::optional<double> period_L;                // rho-hat is 2 pi L periodic when set

    void validate() const;
    double second_moment() const;
    /// rho-hat(s) = sum mass e^{-i s xi}, with s wrapped into [-pi L, pi L) when periodic.
    cplx fourier(double s) const;
};

/// Normalized spectral measure of the harmonic ensemble along a great circle:
/// atoms at k / L, k = -n..n, from the Fourier expansion of the covariance along the circle.
SpectralMeasure circle_spectral_measure(const EnsembleSpec& spec);

/// p(xi) = (a1 + a2 xi) + (b1 + b2 xi) e^{i delta xi}.
struct ExpSum {
    cplx a1, a2, b1, b2;
    double delta = 1.0;

    cplx operator()(double xi) const;
    double w_norm() const { return std::abs(a1) + std::abs(a2) + std::abs(b1) + std::abs(b2); }
    int degree() const { return 4; }
};

/// int |p|^2 d rho, exactly over the atoms.
double integral_sq(const ExpSum& p, const SpectralMeasure& rho);

struct ExpSumBound {
    double min_ratio = std::numeric_limits<double>::infinity();
    ExpSum argmin{};
    int evaluated = 0, skipped = 0;
    std::vector<double> min_ratio_per_delta;

    nlohmann::json to_json() const;
};

/// Minimum of int |p|^2 d rho / (delta^6 ||p||_W^2) over delta_grid x coefficient quadruples.
/// Each quadruple (a1, a2, b1, b2) is used at every delta. Quadruples with ||p||_W = 0 are skipped.
ExpSumBound exp_sum_lower_bound(const SpectralMeasure& rho, const std::vector<double>& delta_grid,
                                const std::vector<std::array<cplx, 4>>& coeff_samples);

/// Random quadruples: generic complex Gaussian plus near-cancellation families
/// (a1 = -b1 with small perturbations, a2 = -b2, and mixtures).
std::vector<std::array<cplx, 4>> exp_sum_samples(int count, Rng& rng);

/// General exponential sum sum_j q_j(xi) e^{i lambda_j xi} with polynomial q_j.
struct GeneralExpSum {
    std::vector<double> exponents;
    std::vector<std::vector<cplx>> polys;  // polys[j][k] is the xi^k coefficient of q_j

    cplx operator()(double xi) const;
    /// sum (deg q_j + 1); trailing zero coefficients do not count.
    int degree() const;
    /// max distance between exponents of nonzero terms.
    double spread() const;
    bool is_real() const;

    static GeneralExpSum from(const ExpSum& p);
    /// |p|^2 - t as a real sum of degree 9 with exponents -delta, 0, delta.
    static GeneralExpSum abs_squared(const ExpSum& p, double t = 0.0);
};

struct ZeroCount {
    int zeros = 0;
    double bound = 0.0;
    bool ok = true;
    bool resolution_exhausted = false;
    std::vector<double> locations;
};

/// Zeros of S on [lo, hi] against (N - 1) + spread |J| / 2 pi. Real sums are bisected directly;
/// complex sums bisect Re S and keep roots where |Im S| also vanishes.
ZeroCount langer_zero_count(const GeneralExpSum& S, double lo, double hi, int subdivisions = 10000,
                            int refinement_rounds = 3);

/// (max_J |S| / max_I |S|)^{1/(N-1)} |I| / |J| for I subset J, by dense sampling.
double turan_constant(const GeneralExpSum& S, double I_lo, double I_hi, double J_lo, double J_hi,
                      int samples = 20000);

// ---------------------------------------------------------------- Bernoulli, large sections

struct AnticoncentrationResult {
    int N = 0;
    double EQ = 0.0;
    double m_star = 0.0;
    double value = 0.0;  // inf over m of E[(S_N - m)^2 Q]
    double ratio = 0.0;  // value / N
    double grid_min = std::numeric_limits<double>::infinity();

    nlohmann::json to_json() const;
};

/// Exact over the 2^N outcomes; Q[omega] with bit j of omega the value of eta_j. N <= 20.
/// m_grid values are evaluated as well and must not beat the closed form m* = E[S Q] / E[Q].
AnticoncentrationResult bernoulli_anticoncentration(const std::vector<double>& p, const std::vector<double>& Q,
                                                    const std::vector<double>& m_grid = {});

/// Q that removes `removed_mass` of probability from the outcomes farthest from E[S_N]
/// (fractionally at the cut), the worst case for the anticoncentration bound.
std::vector<double> adversarial_weight(const std::vector<double>& p, double removed_mass);

/// epsilon(p0) used for the Q budget: p0^2 / 4.
double bernoulli_epsilon(double p0);

struct LargeSectionsVerdict {
    double EQ = 0.0, PX = 0.0;
    double threshold = 0.0;  // 1 - 2 eps / p
    double P_good = 0.0;     // P1 of X'
    bool holds = false;

    nlohmann::json to_json() const;
};

/// Q is n1 x n2 (row = omega1). Throws DomainError on violated preconditions.
LargeSectionsVerdict large_sections_check(const std::vector<double>& P1, const std::vector<double>& P2,
                                          const Eigen::MatrixXd& Q, const std::vector<bool>& X, double p,
                                          double eps);

/// Report: {"lemma": id, "parameters": ..., "measured": ..., "pass": ...}.
nlohmann::json verdict(const std::string& lemma, const nlohmann::json& parameters, const nlohmann::json& measured,
                       bool pass);

}  // namespace nodal
