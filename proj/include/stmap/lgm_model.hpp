#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "stmap/errors.hpp"
#include "stmap/structures.hpp"

namespace stmap {

enum class Likelihood { Poisson, Gaussian };
enum class MixRole { None, Structured, Unstructured };

struct HyperPriorConfig {
    double gamma_shape = 1.0;       // Gamma prior on each block precision
    double gamma_rate = 5e-5;
    double intercept_precision = 1e-5;
    double jitter = 1e-6;           // added to rank-deficient prior diagonals
};

struct LatentBlock {
    std::string name;
    PrecisionStructure prior;  // unit-scale structure
    int theta_prec = -1;       // theta index of the log-precision; -1 fixed
    int theta_mix = -1;        // theta index of logit-lambda (BYM2 pair)
    MixRole role = MixRole::None;
    int offset = 0;            // filled by finalize()
};

// Poisson (or Gaussian, for exactness checks) latent Gaussian model over an
// S x T panel of cells. Cell index = t*S + i, space fastest. Missing cells
// contribute no likelihood but their linear predictor is still defined.
struct LatentModel {
    int S = 0;
    int T = 0;
    Eigen::ArrayXXd expected;   // S x T offsets, > 0
    Eigen::ArrayXXd counts;     // S x T observations (ignored where missing)
    Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> observed;
    Likelihood likelihood = Likelihood::Poisson;
    double gaussian_noise_var = 1.0;
    std::vector<LatentBlock> blocks;  // blocks[0] is the intercept
    HyperPriorConfig hyper;
    bool degraded_from_st = false;

    // block indices by role; -1 when absent
    int ib_spatial = -1, ib_spatial_aux = -1, ib_temporal = -1, ib_interaction = -1;

    int dim = 0;
    int n_theta = 0;
    SparseMat constraint_matrix;  // n_constraints x dim

    int n_cells() const { return S * T; }
    int cell(int i, int t) const { return t * S + i; }
    int n_constraints() const { return static_cast<int>(constraint_matrix.rows()); }

    void finalize() {
        dim = 0;
        n_theta = 0;
        for (auto& b : blocks) {
            b.offset = dim;
            dim += b.prior.size();
            n_theta = std::max({n_theta, b.theta_prec + 1, b.theta_mix + 1});
        }
        std::vector<Triplet> trips;
        int row = 0;
        for (const auto& b : blocks) {
            const SparseMat& c = b.prior.constraints;
            for (int k = 0; k < c.outerSize(); ++k)
                for (SparseMat::InnerIterator it(c, k); it; ++it)
                    trips.emplace_back(row + static_cast<int>(it.row()),
                                       b.offset + static_cast<int>(it.col()), it.value());
            row += b.prior.n_constraints();
        }
        constraint_matrix.resize(row, dim);
        constraint_matrix.setFromTriplets(trips.begin(), trips.end());
    }

    static double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

    double mix_coef(const LatentBlock& b, const Eigen::VectorXd& theta) const {
        switch (b.role) {
            case MixRole::Structured: return std::sqrt(logistic(theta[b.theta_mix]));
            case MixRole::Unstructured: return std::sqrt(1.0 - logistic(theta[b.theta_mix]));
            default: return 1.0;
        }
    }

    // nonzero (latent index, coefficient) pairs of one design row
    using RowEntries = std::vector<std::pair<int, double>>;

    RowEntries cell_row(int i, int t, const Eigen::VectorXd& theta) const {
        RowEntries row;
        row.reserve(blocks.size());
        for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
            const auto& b = blocks[bi];
            int local;
            if (static_cast<int>(bi) == 0) local = 0;  // intercept
            else if (static_cast<int>(bi) == ib_spatial || static_cast<int>(bi) == ib_spatial_aux)
                local = i;
            else if (static_cast<int>(bi) == ib_temporal) local = t;
            else local = cell(i, t);
            row.emplace_back(b.offset + local, mix_coef(b, theta));
        }
        return row;
    }

    SparseMat design(const Eigen::VectorXd& theta) const {
        std::vector<Triplet> trips;
        trips.reserve(static_cast<std::size_t>(n_cells()) * blocks.size());
        for (int t = 0; t < T; ++t)
            for (int i = 0; i < S; ++i)
                for (const auto& [j, v] : cell_row(i, t, theta))
                    trips.emplace_back(cell(i, t), j, v);
        SparseMat a(n_cells(), dim);
        a.setFromTriplets(trips.begin(), trips.end());
        return a;
    }

    // Block-diagonal prior precision, jitter-regularized to full rank.
    SparseMat prior_precision(const Eigen::VectorXd& theta) const {
        std::vector<Triplet> trips;
        for (const auto& b : blocks) {
            double tau = (b.theta_prec >= 0) ? std::exp(theta[b.theta_prec]) : 1.0;
            for (int k = 0; k < b.prior.matrix.outerSize(); ++k)
                for (SparseMat::InnerIterator it(b.prior.matrix, k); it; ++it)
                    trips.emplace_back(b.offset + static_cast<int>(it.row()),
                                       b.offset + static_cast<int>(it.col()), tau * it.value());
            if (b.prior.rank_deficiency > 0) {
                for (int j = 0; j < b.prior.size(); ++j)
                    trips.emplace_back(b.offset + j, b.offset + j, tau * hyper.jitter);
            }
        }
        SparseMat p(dim, dim);
        p.setFromTriplets(trips.begin(), trips.end());
        return p;
    }

    // log prior of theta, internal scale (log-precisions, logit-lambda),
    // Jacobians included.
    double log_hyperprior(const Eigen::VectorXd& theta) const {
        double lp = 0.0;
        std::vector<bool> seen(static_cast<std::size_t>(n_theta), false);
        for (const auto& b : blocks) {
            if (b.theta_prec >= 0 && !seen[b.theta_prec]) {
                seen[b.theta_prec] = true;
                double th = theta[b.theta_prec];
                lp += hyper.gamma_shape * std::log(hyper.gamma_rate) -
                      std::lgamma(hyper.gamma_shape) + hyper.gamma_shape * th -
                      hyper.gamma_rate * std::exp(th);
            }
            if (b.theta_mix >= 0 && !seen[b.theta_mix]) {
                seen[b.theta_mix] = true;
                double lam = logistic(theta[b.theta_mix]);
                lp += std::log(lam) + std::log1p(-lam);  // uniform + Jacobian
            }
        }
        return lp;
    }

    double cell_loglik(int i, int t, double eta) const {
        if (!observed(i, t)) return 0.0;
        double y = counts(i, t);
        if (likelihood == Likelihood::Poisson) {
            double loge = std::log(expected(i, t));
            return y * (loge + eta) - expected(i, t) * std::exp(eta) - std::lgamma(y + 1.0);
        }
        double r = y - eta;
        return -0.5 * r * r / gaussian_noise_var -
               0.5 * std::log(2.0 * M_PI * gaussian_noise_var);
    }

    // gradient and curvature of the cell log-likelihood in eta
    void cell_grad_curv(int i, int t, double eta, double& grad, double& curv) const {
        if (!observed(i, t)) {
            grad = 0.0;
            curv = 0.0;
            return;
        }
        if (likelihood == Likelihood::Poisson) {
            double mu = expected(i, t) * std::exp(eta);
            grad = counts(i, t) - mu;
            curv = mu;
        } else {
            grad = (counts(i, t) - eta) / gaussian_noise_var;
            curv = 1.0 / gaussian_noise_var;
        }
    }

    double loglik(const Eigen::VectorXd& eta) const {
        double ll = 0.0;
        for (int t = 0; t < T; ++t)
            for (int i = 0; i < S; ++i) ll += cell_loglik(i, t, eta[cell(i, t)]);
        return ll;
    }
};

}  // namespace stmap
