#include "nodal/lemmas.hpp"

#include <Eigen/Cholesky>

#include <cmath>

namespace nodal {

CoupledSampler couple_independent(const Eigen::MatrixXd& cov, double tau) {
    const Eigen::Index k = cov.rows();
    if (k == 0 || cov.cols() != k) throw InvalidSpec("covariance must be a non-empty square matrix");
    if (!(tau >= 0)) throw InvalidSpec("tau must be non-negative");
    if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-12) throw InvalidSpec("covariance must be symmetric");
    for (Eigen::Index i = 0; i < k; ++i)
        if (std::abs(cov(i, i) - 1.0) > 1e-12) throw InvalidSpec("covariance must have unit diagonal");

    CoupledSampler s;
    s.cov_ = cov;
    s.tau_ = tau;
    s.margin_ = std::numeric_limits<double>::infinity();
    bool independent = true;
    for (Eigen::Index i = 0; i < k; ++i) {
        double off = 0.0;
        for (Eigen::Index j = 0; j < k; ++j)
            if (j != i) off += std::abs(cov(i, j));
        independent = independent && off == 0.0;
        s.margin_ = std::min(s.margin_, tau * tau - off);
        if (off > 0.0 && off >= tau * tau)
            throw DomainError("infeasible coupling: row " + std::to_string(i) + " has off-diagonal sum " +
                              std::to_string(off) + " >= tau^2 = " + std::to_string(tau * tau));
    }
    if (tau == 0.0 && !independent) throw DomainError("infeasible coupling: tau = 0 with correlated values");

    s.gamma_ = -cov;
    s.gamma_.diagonal().setConstant(tau * tau);
    Eigen::LLT<Eigen::MatrixXd> lf(cov);
    if (lf.info() != Eigen::Success) throw DomainError("covariance is not positive definite");
    s.Lf_ = lf.matrixL();
    if (tau > 0.0) {
        Eigen::LLT<Eigen::MatrixXd> lg(s.gamma_);
        if (lg.info() != Eigen::Success) throw DomainError("correction Gram matrix failed to factor");
        s.Lg_ = lg.matrixL();
    } else {
        s.Lg_ = Eigen::MatrixXd::Zero(k, k);
    }
    return s;
}

double CoupledSampler::exact_mse(int i) const {
    (void)i;  // every coordinate has unit variance and the same Gram diagonal
    const double c = 1.0 / std::sqrt(1.0 + tau_ * tau_);
    return (1.0 - c) * (1.0 - c) + c * c * tau_ * tau_;
}

Eigen::MatrixXd CoupledSampler::joint_covariance() const {
    const Eigen::Index k = cov_.rows();
    const double c = 1.0 / std::sqrt(1.0 + tau_ * tau_);
    Eigen::MatrixXd J(2 * k, 2 * k);
    J.topLeftCorner(k, k) = cov_;
    J.topRightCorner(k, k) = c * cov_;
    J.bottomLeftCorner(k, k) = c * cov_;
    J.bottomRightCorner(k, k) = c * c * (cov_ + gamma_);
    return J;
}

void CoupledSampler::sample(Rng& rng, Eigen::VectorXd& f, Eigen::VectorXd& xi) const {
    const Eigen::Index k = cov_.rows();
    Eigen::VectorXd z(k), w(k);
    for (Eigen::Index i = 0; i < k; ++i) z(i) = standard_normal(rng);
    for (Eigen::Index i = 0; i < k; ++i) w(i) = standard_normal(rng);
    f = Lf_ * z;
    xi = (f + Lg_ * w) / std::sqrt(1.0 + tau_ * tau_);
}

}  // namespace nodal
