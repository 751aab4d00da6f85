#pragma once

// Dense reference implementations used as independent oracles. These
// deliberately avoid the sparse code paths under test.

#include <Eigen/Dense>
#include <utility>

#include "stmap/lgm_model.hpp"
#include "stmap/structures.hpp"

namespace testutil {

// Moore-Penrose pseudoinverse via eigendecomposition.
inline Eigen::MatrixXd dense_pinv(const Eigen::MatrixXd& m, double tol = 1e-9) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    Eigen::VectorXd inv = es.eigenvalues();
    double emax = inv.cwiseAbs().maxCoeff();
    for (int i = 0; i < inv.size(); ++i)
        inv[i] = std::abs(inv[i]) > tol * std::max(emax, 1.0) ? 1.0 / inv[i] : 0.0;
    return es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
}

inline int numerical_rank(const Eigen::MatrixXd& m, double tol = 1e-8) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    double emax = es.eigenvalues().cwiseAbs().maxCoeff();
    int rank = 0;
    for (int i = 0; i < es.eigenvalues().size(); ++i)
        if (std::abs(es.eigenvalues()[i]) > tol * std::max(emax, 1.0)) ++rank;
    return rank;
}

struct GaussianPosterior {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
};

// Exact posterior of x ~ N(0, P^{-1}) | y = Ax + N(0, s2 I), Cx = 0,
// via the Hessian inverse corrected by the constraint projection.
inline GaussianPosterior constrained_gaussian_posterior(const Eigen::MatrixXd& P,
                                                        const Eigen::MatrixXd& A,
                                                        const Eigen::VectorXd& y, double s2,
                                                        const Eigen::MatrixXd& C) {
    Eigen::MatrixXd H = P + A.transpose() * A / s2;
    Eigen::MatrixXd Hinv = H.ldlt().solve(Eigen::MatrixXd::Identity(H.rows(), H.cols()));
    Eigen::VectorXd mean = Hinv * (A.transpose() * y / s2);
    Eigen::MatrixXd cov = Hinv;
    if (C.rows() > 0) {
        Eigen::MatrixXd W = Hinv * C.transpose();
        Eigen::MatrixXd M = C * W;
        Eigen::MatrixXd Minv = M.ldlt().solve(Eigen::MatrixXd::Identity(M.rows(), M.cols()));
        mean -= W * Minv * (C * mean);
        cov -= W * Minv * W.transpose();
    }
    return {mean, cov};
}

}  // namespace testutil
