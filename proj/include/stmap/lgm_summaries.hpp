#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>
#include <vector>

#include "stmap/lgm_inference.hpp"
#include "stmap/mixture.hpp"

namespace stmap {

struct HyperSummary {
    std::string name;
    double mean = 0.0, sd = 0.0, q025 = 0.0, q50 = 0.0, q975 = 0.0;
};

// Posterior summaries of one fitted latent Gaussian model. Marginals are
// mixtures of normals over the hyperparameter grid; the mixture components
// are retained for exceedance probabilities downstream.
struct FitResult {
    int S = 0, T = 0;
    Eigen::ArrayXXd risk_q025, risk_q50, risk_q975;  // S x T, exp(eta) scale
    Eigen::MatrixXd effect_quantiles;                // dim x levels
    std::vector<HyperSummary> hyper_summary;
    Eigen::MatrixXd pointwise_loglik;  // draws x cells, 0 at missing cells
    Eigen::VectorXd cell_deviance_at_mean;  // per-cell plug-in deviance, 0 at missing
    double deviance_at_mean = 0.0;
    double runtime_seconds = 0.0;
    bool hessian_fallback = false;
    bool degraded_from_st = false;
    std::uint64_t seed = 0;
    int n_evaluations = 0;

    // eta-scale mixture per cell
    Eigen::VectorXd mix_weights;   // G
    Eigen::MatrixXd cell_mean;     // G x cells
    Eigen::MatrixXd cell_sd;       // G x cells
    Eigen::VectorXd eta_mean;      // weighted mixture mean per cell

    double risk_median(int i, int t) const { return risk_q50(i, t); }

    // P(r_it > threshold) from the eta mixture
    double exceedance_probability(int i, int t, double threshold) const {
        int c = t * S + i;
        return 1.0 - mixture_cdf(mix_weights, cell_mean.col(c), cell_sd.col(c),
                                 std::log(threshold));
    }
};

namespace detail {

inline void weighted_discrete_summary(const std::vector<double>& values,
                                      const Eigen::VectorXd& weights, HyperSummary& out) {
    double mean = 0.0, m2 = 0.0;
    for (std::size_t g = 0; g < values.size(); ++g) mean += weights[g] * values[g];
    for (std::size_t g = 0; g < values.size(); ++g)
        m2 += weights[g] * (values[g] - mean) * (values[g] - mean);
    out.mean = mean;
    out.sd = std::sqrt(std::max(m2, 0.0));
    std::vector<std::size_t> idx(values.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    auto quantile = [&](double p) {
        double cum = 0.0;
        for (std::size_t i : idx) {
            cum += weights[i];
            if (cum >= p) return values[i];
        }
        return values[idx.back()];
    };
    out.q025 = quantile(0.025);
    out.q50 = quantile(0.5);
    out.q975 = quantile(0.975);
}

}  // namespace detail

// Mixture-of-normals latent marginals, risk quantiles, hyperparameter
// summaries, and seeded pointwise log-likelihood draws.
inline FitResult latent_marginals(const ThetaGrid& grid, const LatentModel& model,
                                  const FitOptions& opts = {}) {
    if (grid.points.empty()) throw FitError("latent_marginals: empty hyperparameter grid");
    const int G = static_cast<int>(grid.points.size());
    const int dim = model.dim;
    const int cells = model.n_cells();
    const int nl = static_cast<int>(opts.quantile_levels.size());

    FitResult fr;
    fr.S = model.S;
    fr.T = model.T;
    fr.seed = opts.seed;
    fr.hessian_fallback = grid.hessian_fallback;
    fr.degraded_from_st = model.degraded_from_st;
    fr.n_evaluations = grid.n_evaluations;
    fr.mix_weights.resize(G);
    fr.cell_mean.resize(G, cells);
    fr.cell_sd.resize(G, cells);
    Eigen::MatrixXd latent_mean(G, dim), latent_sd(G, dim);

    for (int g = 0; g < G; ++g) {
        const ThetaPoint& p = grid.points[g];
        fr.mix_weights[g] = p.weight;
        const GaussianApprox& ga = *p.approx;
        PartialInverse z(ga.factor);
        const int c = model.n_constraints();
        Eigen::MatrixXd v;  // L_M^{-1} W', c x dim
        if (c > 0) v = ga.M_llt.matrixL().solve(ga.W.transpose());
        for (int j = 0; j < dim; ++j) {
            double var = z.diag(j);
            if (c > 0) var -= v.col(j).squaredNorm();
            latent_mean(g, j) = ga.mode[j];
            latent_sd(g, j) = std::sqrt(std::max(var, 0.0));
        }
        for (int t = 0; t < model.T; ++t)
            for (int i = 0; i < model.S; ++i) {
                int cc = model.cell(i, t);
                auto row = model.cell_row(i, t, p.theta);
                double mean = 0.0, var = 0.0;
                for (const auto& [j1, a1] : row) {
                    mean += a1 * ga.mode[j1];
                    for (const auto& [j2, a2] : row) {
                        double zij;
                        if (!z.entry(j1, j2, zij))
                            throw FitError("latent_marginals: covariance entry outside pattern");
                        var += a1 * a2 * zij;
                    }
                }
                if (c > 0) {
                    Eigen::VectorXd u = Eigen::VectorXd::Zero(c);
                    for (const auto& [j1, a1] : row) u += a1 * v.col(j1);
                    var -= u.squaredNorm();
                }
                fr.cell_mean(g, cc) = mean;
                fr.cell_sd(g, cc) = std::sqrt(std::max(var, 0.0));
            }
    }

    // quantiles of the mixture marginals
    fr.effect_quantiles.resize(dim, nl);
    for (int j = 0; j < dim; ++j)
        for (int l = 0; l < nl; ++l)
            fr.effect_quantiles(j, l) = mixture_quantile(fr.mix_weights, latent_mean.col(j),
                                                         latent_sd.col(j),
                                                         opts.quantile_levels[l]);
    fr.risk_q025.resize(model.S, model.T);
    fr.risk_q50.resize(model.S, model.T);
    fr.risk_q975.resize(model.S, model.T);
    fr.eta_mean.resize(cells);
    for (int t = 0; t < model.T; ++t)
        for (int i = 0; i < model.S; ++i) {
            int cc = model.cell(i, t);
            auto q = [&](double p) {
                return std::exp(mixture_quantile(fr.mix_weights, fr.cell_mean.col(cc),
                                                 fr.cell_sd.col(cc), p));
            };
            fr.risk_q025(i, t) = q(0.025);
            fr.risk_q50(i, t) = q(0.5);
            fr.risk_q975(i, t) = q(0.975);
            fr.eta_mean[cc] = fr.mix_weights.dot(fr.cell_mean.col(cc));
        }

    // hyperparameter summaries on the interpretation scale
    for (std::size_t bi = 0; bi < model.blocks.size(); ++bi) {
        const auto& b = model.blocks[bi];
        if (b.theta_prec >= 0 && b.role != MixRole::Unstructured) {
            std::vector<double> sds(G);
            for (int g = 0; g < G; ++g)
                sds[g] = std::exp(-0.5 * grid.points[g].theta[b.theta_prec]);
            HyperSummary hs;
            hs.name = "sd_" + b.name;
            detail::weighted_discrete_summary(sds, fr.mix_weights, hs);
            fr.hyper_summary.push_back(hs);
        }
        if (b.theta_mix >= 0 && b.role == MixRole::Structured) {
            std::vector<double> lams(G);
            for (int g = 0; g < G; ++g)
                lams[g] = LatentModel::logistic(grid.points[g].theta[b.theta_mix]);
            HyperSummary hs;
            hs.name = "lambda";
            detail::weighted_discrete_summary(lams, fr.mix_weights, hs);
            fr.hyper_summary.push_back(hs);
        }
    }

    // seeded pointwise log-likelihood draws for DIC/WAIC
    Eigen::VectorXd cumw(G);
    double acc = 0.0;
    for (int g = 0; g < G; ++g) {
        acc += fr.mix_weights[g];
        cumw[g] = acc;
    }
    fr.pointwise_loglik.resize(opts.n_loglik_draws, cells);
    for (int d = 0; d < opts.n_loglik_draws; ++d) {
        RngStream rng(opts.seed, static_cast<std::uint64_t>(d));
        double u = rng.uniform();
        int g = 0;
        while (g + 1 < G && cumw[g] < u) ++g;
        const GaussianApprox& ga = *grid.points[g].approx;
        Eigen::VectorXd x = ga.sample(model, rng);
        Eigen::VectorXd eta = ga.A * x;
        for (int t = 0; t < model.T; ++t)
            for (int i = 0; i < model.S; ++i) {
                int cc = model.cell(i, t);
                fr.pointwise_loglik(d, cc) =
                    model.observed(i, t) ? model.cell_loglik(i, t, eta[cc]) : 0.0;
            }
    }

    fr.deviance_at_mean = 0.0;
    fr.cell_deviance_at_mean = Eigen::VectorXd::Zero(cells);
    for (int t = 0; t < model.T; ++t)
        for (int i = 0; i < model.S; ++i)
            if (model.observed(i, t)) {
                int cc = model.cell(i, t);
                fr.cell_deviance_at_mean[cc] = -2.0 * model.cell_loglik(i, t, fr.eta_mean[cc]);
                fr.deviance_at_mean += fr.cell_deviance_at_mean[cc];
            }
    return fr;
}

inline FitResult fit_model(const LatentModel& model, const FitOptions& opts = {}) {
    auto t0 = std::chrono::steady_clock::now();
    ThetaGrid grid = explore_hyperparameters(model, opts);
    FitResult fr = latent_marginals(grid, model, opts);
    fr.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                             .count();
    return fr;
}

}  // namespace stmap
