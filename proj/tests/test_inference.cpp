#include <gtest/gtest.h>

#include <cmath>

#include "helpers.hpp"
#include "stmap/lgm_summaries.hpp"
#include "stmap/models.hpp"
#include "stmap/simulator.hpp"

using namespace stmap;

namespace {

// Gaussian-likelihood model with all hyperparameters fixed, so the Laplace
// machinery must be exact and comparable to a dense closed form.
LatentModel gaussian_model(int rows, int cols, int T, std::uint64_t seed) {
    const int S = rows * cols;
    auto g = make_lattice(rows, cols);
    LatentModel m;
    m.S = S;
    m.T = T;
    m.likelihood = Likelihood::Gaussian;
    m.gaussian_noise_var = 0.5;
    m.expected = Eigen::ArrayXXd::Ones(S, T);
    m.observed = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(S, T, true);
    RngStream rng(seed);
    m.counts.resize(S, T);
    for (int t = 0; t < T; ++t)
        for (int i = 0; i < S; ++i) m.counts(i, t) = 0.3 * rng.normal();

    LatentBlock intercept;
    intercept.name = "intercept";
    intercept.prior.matrix.resize(1, 1);
    intercept.prior.matrix.insert(0, 0) = 1.0;
    m.blocks.push_back(intercept);

    LatentBlock spatial;
    spatial.name = "spatial";
    spatial.prior = scale_precision(icar_precision(g));
    m.ib_spatial = 1;
    m.blocks.push_back(spatial);

    if (T >= 2) {
        LatentBlock temporal;
        temporal.name = "temporal";
        temporal.prior = scale_precision(rw1_precision(T));
        m.ib_temporal = 2;
        m.blocks.push_back(temporal);

        LatentBlock inter;
        inter.name = "interaction";
        inter.prior = interaction_precision(InteractionType::II, m.blocks[1].prior,
                                            m.blocks[2].prior);
        m.ib_interaction = 3;
        m.blocks.push_back(inter);
    }
    m.finalize();
    return m;
}

}  // namespace

TEST(Inference, GaussianPosteriorMatchesDenseClosedForm) {
    LatentModel m = gaussian_model(3, 3, 3, 17);
    ASSERT_EQ(m.n_theta, 0);
    Eigen::VectorXd theta(0);
    Eigen::MatrixXd P = Eigen::MatrixXd(m.prior_precision(theta));
    Eigen::MatrixXd A = Eigen::MatrixXd(m.design(theta));
    Eigen::MatrixXd C = Eigen::MatrixXd(m.constraint_matrix);
    Eigen::VectorXd y(m.n_cells());
    for (int t = 0; t < m.T; ++t)
        for (int i = 0; i < m.S; ++i) y[m.cell(i, t)] = m.counts(i, t);
    auto oracle = testutil::constrained_gaussian_posterior(P, A, y, m.gaussian_noise_var, C);

    FitResult fr = fit_model(m);
    ASSERT_EQ(fr.mix_weights.size(), 1);
    Eigen::VectorXd eta_mean = A * oracle.mean;
    Eigen::MatrixXd eta_cov = A * oracle.cov * A.transpose();
    for (int c = 0; c < m.n_cells(); ++c) {
        EXPECT_NEAR(fr.cell_mean(0, c), eta_mean[c], 1e-8);
        EXPECT_NEAR(fr.cell_sd(0, c), std::sqrt(eta_cov(c, c)), 1e-6);
    }
    // latent effect medians equal the posterior mean in the Gaussian case
    for (int j = 0; j < m.dim; ++j)
        EXPECT_NEAR(fr.effect_quantiles(j, 1), oracle.mean[j], 1e-7);
    // constraints hold at the reported mode
    if (C.rows() > 0) {
        Eigen::VectorXd cm = C * oracle.mean;
        EXPECT_LT(cm.cwiseAbs().maxCoeff(), 1e-8);
    }
}

TEST(Inference, GaussianSingleYearExactness) {
    LatentModel m = gaussian_model(4, 4, 1, 23);
    Eigen::VectorXd theta(0);
    Eigen::MatrixXd P = Eigen::MatrixXd(m.prior_precision(theta));
    Eigen::MatrixXd A = Eigen::MatrixXd(m.design(theta));
    Eigen::MatrixXd C = Eigen::MatrixXd(m.constraint_matrix);
    Eigen::VectorXd y(m.n_cells());
    for (int i = 0; i < m.S; ++i) y[i] = m.counts(i, 0);
    auto oracle = testutil::constrained_gaussian_posterior(P, A, y, m.gaussian_noise_var, C);
    FitResult fr = fit_model(m);
    Eigen::VectorXd eta_mean = A * oracle.mean;
    for (int c = 0; c < m.n_cells(); ++c) EXPECT_NEAR(fr.eta_mean[c], eta_mean[c], 1e-8);
}

TEST(Inference, ConjugateScalarPosteriorMean) {
    // single cell, flat-ish intercept prior: rate posterior is Gamma(y, e)
    LatentModel m;
    m.S = 1;
    m.T = 1;
    const double y = 200.0, e = 40.0, kappa = 1e-5;
    m.counts = Eigen::ArrayXXd::Constant(1, 1, y);
    m.expected = Eigen::ArrayXXd::Constant(1, 1, e);
    m.observed = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(1, 1, true);
    LatentBlock b;
    b.name = "intercept";
    b.prior.matrix.resize(1, 1);
    b.prior.matrix.insert(0, 0) = kappa;
    m.blocks.push_back(b);
    m.finalize();

    FitResult fr = fit_model(m);
    double mean_rate = 0.0;
    for (int g = 0; g < fr.mix_weights.size(); ++g)
        mean_rate += fr.mix_weights[g] *
                     std::exp(fr.cell_mean(g, 0) + 0.5 * fr.cell_sd(g, 0) * fr.cell_sd(g, 0));

    // quadrature oracle on the exact unnormalized posterior in alpha
    auto logpost = [&](double a) { return y * a - e * std::exp(a) - 0.5 * kappa * a * a; };
    double a0 = std::log(y / e), h = 8.0 / std::sqrt(y), z0 = 0.0, z1 = 0.0;
    int n = 4000;
    for (int k = 0; k <= n; ++k) {
        double a = a0 - h + 2.0 * h * k / n;
        double w = (k == 0 || k == n) ? 0.5 : 1.0;
        double p = std::exp(logpost(a) - logpost(a0));
        z0 += w * p;
        z1 += w * p * std::exp(a);
    }
    double oracle_mean = z1 / z0;
    EXPECT_NEAR(mean_rate, oracle_mean, 0.02 * oracle_mean);
}

TEST(Inference, PoissonHyperparameterGridEndToEnd) {
    auto g = make_lattice(3, 3);
    HyperParams hp;
    hp.sigma2_spatial = 0.2;
    auto sim = simulate_panel(g, 1, hp, InteractionType::I,
                              Eigen::VectorXd::Constant(9, 80.0), 5);
    auto panel = expected_counts(sim.panel, ExpectedMode::PerYear);
    auto m = build_spatial_model(panel, 0, SpatialPrior::ICAR, g);
    ASSERT_EQ(m.n_theta, 1);
    FitOptions opts;
    opts.n_loglik_draws = 50;
    FitResult fr = fit_model(m, opts);
    EXPECT_EQ(fr.mix_weights.size(), 5);  // {0,+-1,+-2} in one dimension
    EXPECT_NEAR(fr.mix_weights.sum(), 1.0, 1e-12);
    for (int i = 0; i < 9; ++i) {
        EXPECT_LT(fr.risk_q025(i, 0), fr.risk_q50(i, 0));
        EXPECT_LT(fr.risk_q50(i, 0), fr.risk_q975(i, 0));
    }
    ASSERT_EQ(fr.hyper_summary.size(), 1u);
    EXPECT_EQ(fr.hyper_summary[0].name, "sd_spatial");
    EXPECT_GT(fr.hyper_summary[0].q50, 0.0);
}

TEST(Inference, DeterministicUnderSeed) {
    auto g = make_lattice(3, 3);
    HyperParams hp;
    auto sim = simulate_panel(g, 2, hp, InteractionType::I,
                              Eigen::VectorXd::Constant(9, 50.0), 9);
    auto panel = expected_counts(sim.panel, ExpectedMode::Global);
    auto m = build_st_model(panel, SpatialPrior::ICAR, InteractionType::I, g);
    FitOptions opts;
    opts.n_loglik_draws = 20;
    FitResult a = fit_model(m, opts);
    FitResult b = fit_model(m, opts);
    EXPECT_EQ(a.pointwise_loglik, b.pointwise_loglik);
    EXPECT_EQ(Eigen::MatrixXd(a.risk_q50), Eigen::MatrixXd(b.risk_q50));
    opts.seed = 2;
    FitResult c = fit_model(m, opts);
    EXPECT_NE(a.pointwise_loglik, c.pointwise_loglik);
}

TEST(Inference, NewtonReportsNonConvergence) {
    LatentModel m = gaussian_model(3, 3, 1, 31);
    FitOptions opts;
    opts.newton_max_iter = 0;
    Eigen::VectorXd theta(0);
    EXPECT_THROW(newton_mode(m, theta, opts), FitError);
}
