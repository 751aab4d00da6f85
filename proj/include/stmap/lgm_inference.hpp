#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <chrono>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "stmap/errors.hpp"
#include "stmap/lgm_model.hpp"
#include "stmap/mixture.hpp"
#include "stmap/parallel.hpp"
#include "stmap/rng.hpp"
#include "stmap/sparse_inverse.hpp"

namespace stmap {

struct FitOptions {
    std::uint64_t seed = 1;
    int n_loglik_draws = 1000;
    int workers = 1;
    std::vector<double> quantile_levels = {0.025, 0.5, 0.975};
    int newton_max_iter = 50;
    double newton_tol = 1e-8;
    int simplex_max_evals = 500;
    double fd_step = 0.01;
};

// Constrained Gaussian approximation at one hyperparameter point: the Newton
// mode, sparse factorization, and constraint conditioning data.
class GaussianApprox {
  public:
    Eigen::VectorXd theta;
    Eigen::VectorXd mode;          // satisfies C * mode = 0
    Eigen::VectorXd eta_at_mode;   // A * mode
    double loglik_at_mode = 0.0;
    double logdet_H = 0.0;
    double logdet_M = 0.0;         // logdet(C H^{-1} C')
    SparseMat A;                   // design at theta
    SparseMat P;                   // prior precision at theta
    Eigen::SimplicialLDLT<SparseMat> factor;  // of H = P + A'DA at the mode
    Eigen::MatrixXd W;             // H^{-1} C'
    Eigen::LLT<Eigen::MatrixXd> M_llt;
    int newton_iterations = 0;

    // project onto {Cx = 0} using the posterior covariance metric
    void project(const LatentModel& model, Eigen::VectorXd& x) const {
        if (model.n_constraints() == 0) return;
        Eigen::VectorXd cx = model.constraint_matrix * x;
        x -= W * M_llt.solve(cx);
    }

    // sample from N(mode, H^{-1}) conditioned on Cx = 0
    Eigen::VectorXd sample(const LatentModel& model, RngStream& rng) const {
        const int n = static_cast<int>(mode.size());
        Eigen::VectorXd z(n);
        for (int i = 0; i < n; ++i) z[i] = rng.normal();
        z.array() /= factor.vectorD().array().sqrt();
        Eigen::VectorXd y = factor.matrixU().solve(z);
        Eigen::VectorXd x = factor.permutationPinv() * y;
        project(model, x);
        x += mode;
        return x;
    }
};

namespace detail {

inline SparseMat assemble_hessian(const LatentModel& model, const Eigen::VectorXd& theta,
                                  const SparseMat& prior, const Eigen::VectorXd& curv) {
    std::vector<Triplet> trips;
    for (int k = 0; k < prior.outerSize(); ++k)
        for (SparseMat::InnerIterator it(prior, k); it; ++it)
            trips.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()),
                               it.value());
    // likelihood curvature, keeping structural entries for zero-curvature
    // (missing) cells so the factor pattern is theta-independent
    for (int t = 0; t < model.T; ++t)
        for (int i = 0; i < model.S; ++i) {
            auto row = model.cell_row(i, t, theta);
            double d = curv[model.cell(i, t)];
            for (const auto& [j1, v1] : row)
                for (const auto& [j2, v2] : row) trips.emplace_back(j1, j2, d * v1 * v2);
        }
    SparseMat h(model.dim, model.dim);
    h.setFromTriplets(trips.begin(), trips.end());
    return h;
}

}  // namespace detail

// Newton mode finding for log pi(x | y, theta) subject to Cx = 0.
inline std::shared_ptr<GaussianApprox> newton_mode(const LatentModel& model,
                                                   const Eigen::VectorXd& theta,
                                                   const FitOptions& opts = {},
                                                   const Eigen::VectorXd* warm_start = nullptr) {
    auto ga = std::make_shared<GaussianApprox>();
    ga->theta = theta;
    ga->A = model.design(theta);
    ga->P = model.prior_precision(theta);
    const int n = model.dim;
    const int nc = model.n_cells();
    const int c = model.n_constraints();
    Eigen::MatrixXd ct;
    if (c > 0) ct = Eigen::MatrixXd(SparseMat(model.constraint_matrix.transpose()));

    Eigen::VectorXd x = (warm_start && warm_start->size() == n)
                            ? *warm_start
                            : Eigen::VectorXd::Zero(n);

    auto objective = [&](const Eigen::VectorXd& v) {
        Eigen::VectorXd eta = ga->A * v;
        return model.loglik(eta) - 0.5 * v.dot(ga->P * v);
    };

    Eigen::VectorXd grad(nc), curv(nc);
    double f_old = objective(x);
    double last_grad_norm = 0.0;
    bool converged = false;
    for (int iter = 0; iter < opts.newton_max_iter; ++iter) {
        ga->newton_iterations = iter + 1;
        Eigen::VectorXd eta = ga->A * x;
        for (int t = 0; t < model.T; ++t)
            for (int i = 0; i < model.S; ++i)
                model.cell_grad_curv(i, t, eta[model.cell(i, t)], grad[model.cell(i, t)],
                                     curv[model.cell(i, t)]);
        SparseMat h = detail::assemble_hessian(model, theta, ga->P, curv);
        ga->factor.compute(h);
        if (ga->factor.info() != Eigen::Success || ga->factor.vectorD().minCoeff() <= 0.0)
            throw FitError("newton_mode: system not positive definite; consider a larger jitter");
        if (c > 0) {
            ga->W = ga->factor.solve(ct);
            Eigen::MatrixXd m = model.constraint_matrix * ga->W;
            ga->M_llt.compute(0.5 * (m + m.transpose()));
            if (ga->M_llt.info() != Eigen::Success)
                throw FitError("newton_mode: constraint system not positive definite");
        }
        Eigen::VectorXd b = ga->A.transpose() * (grad + curv.cwiseProduct(eta));
        Eigen::VectorXd mu = ga->factor.solve(b);
        ga->project(model, mu);
        Eigen::VectorXd delta = mu - x;
        double step_size = delta.cwiseAbs().maxCoeff();
        last_grad_norm = (ga->A.transpose() * grad - ga->P * x).norm();

        // step halving keeps the penalized objective non-decreasing
        double alpha = 1.0;
        Eigen::VectorXd x_new = mu;
        double f_new = objective(x_new);
        for (int h2 = 0; h2 < 30 && f_new < f_old - 1e-10 * (1.0 + std::abs(f_old)); ++h2) {
            alpha *= 0.5;
            x_new = x + alpha * delta;
            f_new = objective(x_new);
        }
        x = x_new;
        f_old = std::max(f_old, f_new);
        if (step_size < opts.newton_tol) {
            converged = true;
            break;
        }
    }
    if (!converged)
        throw FitError("newton_mode: no convergence in " +
                       std::to_string(opts.newton_max_iter) +
                       " iterations (gradient norm " + std::to_string(last_grad_norm) + ")");

    // final curvature and factorization exactly at the mode
    Eigen::VectorXd eta = ga->A * x;
    for (int t = 0; t < model.T; ++t)
        for (int i = 0; i < model.S; ++i)
            model.cell_grad_curv(i, t, eta[model.cell(i, t)], grad[model.cell(i, t)],
                                 curv[model.cell(i, t)]);
    SparseMat h = detail::assemble_hessian(model, theta, ga->P, curv);
    ga->factor.compute(h);
    if (ga->factor.info() != Eigen::Success || ga->factor.vectorD().minCoeff() <= 0.0)
        throw FitError("newton_mode: system not positive definite at mode");
    ga->logdet_H = ga->factor.vectorD().array().log().sum();
    if (c > 0) {
        ga->W = ga->factor.solve(ct);
        Eigen::MatrixXd m = model.constraint_matrix * ga->W;
        ga->M_llt.compute(0.5 * (m + m.transpose()));
        ga->logdet_M =
            2.0 * ga->M_llt.matrixLLT().diagonal().array().log().sum();
        // re-project; residual stays at the solver tolerance
        Eigen::VectorXd cx = model.constraint_matrix * x;
        x -= ga->W * ga->M_llt.solve(cx);
        eta = ga->A * x;
    }
    ga->mode = x;
    ga->eta_at_mode = eta;
    ga->loglik_at_mode = model.loglik(eta);
    return ga;
}

// Laplace approximation to log pi(theta, y), constraint-corrected.
inline double log_marginal_theta(const LatentModel& model, const GaussianApprox& ga) {
    double lm = ga.loglik_at_mode;
    Eigen::SimplicialLDLT<SparseMat> pf(ga.P);
    if (pf.info() != Eigen::Success || pf.vectorD().minCoeff() <= 0.0)
        throw FitError("log_marginal_theta: prior precision not positive definite");
    lm += 0.5 * pf.vectorD().array().log().sum();
    lm -= 0.5 * ga.mode.dot(ga.P * ga.mode);
    lm -= 0.5 * ga.logdet_H;
    if (model.n_constraints() > 0) {
        Eigen::MatrixXd ct = Eigen::MatrixXd(SparseMat(model.constraint_matrix.transpose()));
        Eigen::MatrixXd wp = pf.solve(ct);
        Eigen::MatrixXd mp = model.constraint_matrix * wp;
        Eigen::LLT<Eigen::MatrixXd> mp_llt(0.5 * (mp + mp.transpose()));
        if (mp_llt.info() != Eigen::Success)
            throw FitError("log_marginal_theta: prior constraint system not positive definite");
        lm += mp_llt.matrixLLT().diagonal().array().log().sum();  // +1/2 logdet(C P^-1 C')
        lm -= 0.5 * ga.logdet_M;
    }
    lm += model.log_hyperprior(ga.theta);
    return lm;
}

struct ThetaPoint {
    Eigen::VectorXd theta;
    double log_posterior = 0.0;
    double weight = 0.0;
    std::shared_ptr<GaussianApprox> approx;
};

struct ThetaGrid {
    std::vector<ThetaPoint> points;
    Eigen::VectorXd theta_star;
    bool hessian_fallback = false;
    int n_evaluations = 0;
};

namespace detail {

struct MarginalEvaluator {
    const LatentModel& model;
    const FitOptions& opts;
    Eigen::VectorXd warm_mode;
    int evals = 0;

    std::pair<double, std::shared_ptr<GaussianApprox>> eval(const Eigen::VectorXd& theta) {
        ++evals;
        auto ga = newton_mode(model, theta, opts,
                              warm_mode.size() == model.dim ? &warm_mode : nullptr);
        warm_mode = ga->mode;
        return {log_marginal_theta(model, *ga), ga};
    }
};

// Nelder-Mead maximization of the Laplace hyperparameter marginal.
inline Eigen::VectorXd simplex_maximize(MarginalEvaluator& ev, const Eigen::VectorXd& start,
                                        int max_evals, bool* converged) {
    const int d = static_cast<int>(start.size());
    std::vector<Eigen::VectorXd> xs(d + 1, start);
    std::vector<double> fs(d + 1);
    for (int i = 0; i < d; ++i) xs[i + 1][i] += 0.5;
    for (int i = 0; i <= d; ++i) fs[i] = -ev.eval(xs[i]).first;  // minimize -lm

    auto order = [&]() {
        for (int i = 1; i <= d; ++i)
            for (int j = i; j > 0 && fs[j] < fs[j - 1]; --j) {
                std::swap(fs[j], fs[j - 1]);
                std::swap(xs[j], xs[j - 1]);
            }
    };
    order();
    *converged = false;
    while (ev.evals < max_evals) {
        double spread = fs[d] - fs[0];
        double diam = 0.0;
        for (int i = 1; i <= d; ++i) diam = std::max(diam, (xs[i] - xs[0]).norm());
        if (spread < 1e-6 * (1.0 + std::abs(fs[0])) && diam < 1e-3) {
            *converged = true;
            break;
        }
        Eigen::VectorXd centroid = Eigen::VectorXd::Zero(d);
        for (int i = 0; i < d; ++i) centroid += xs[i];
        centroid /= d;
        Eigen::VectorXd xr = centroid + (centroid - xs[d]);
        double fr = -ev.eval(xr).first;
        if (fr < fs[0]) {
            Eigen::VectorXd xe = centroid + 2.0 * (centroid - xs[d]);
            double fe = -ev.eval(xe).first;
            if (fe < fr) { xs[d] = xe; fs[d] = fe; }
            else { xs[d] = xr; fs[d] = fr; }
        } else if (fr < fs[d - 1]) {
            xs[d] = xr;
            fs[d] = fr;
        } else {
            Eigen::VectorXd xc = centroid + 0.5 * (xs[d] - centroid);
            double fc = -ev.eval(xc).first;
            if (fc < fs[d]) { xs[d] = xc; fs[d] = fc; }
            else {
                for (int i = 1; i <= d; ++i) {
                    xs[i] = xs[0] + 0.5 * (xs[i] - xs[0]);
                    fs[i] = -ev.eval(xs[i]).first;
                }
            }
        }
        order();
    }
    return xs[0];
}

}  // namespace detail

// Locate the hyperparameter posterior mode, build a standardized grid around
// it from the finite-difference curvature, and weight the grid points by the
// Laplace marginal. Full cross product {0,+-1,+-2}^d when d <= 3, star design
// otherwise.
inline ThetaGrid explore_hyperparameters(const LatentModel& model, const FitOptions& opts = {}) {
    ThetaGrid grid;
    const int d = model.n_theta;
    if (d == 0) {
        ThetaPoint p;
        p.theta = Eigen::VectorXd(0);
        p.approx = newton_mode(model, p.theta, opts);
        p.log_posterior = log_marginal_theta(model, *p.approx);
        p.weight = 1.0;
        grid.theta_star = p.theta;
        grid.points.push_back(std::move(p));
        grid.n_evaluations = 1;
        return grid;
    }

    detail::MarginalEvaluator ev{model, opts};
    bool converged = false;
    Eigen::VectorXd start = Eigen::VectorXd::Zero(d);
    Eigen::VectorXd theta_star = detail::simplex_maximize(ev, start, opts.simplex_max_evals,
                                                          &converged);
    if (!converged) {
        // one deterministic restart, then fail
        Eigen::VectorXd restart = theta_star.array() + 0.5;
        theta_star = detail::simplex_maximize(ev, restart, 2 * opts.simplex_max_evals,
                                              &converged);
        if (!converged)
            throw FitError("explore_hyperparameters: simplex search did not converge");
    }
    grid.theta_star = theta_star;

    // finite-difference Hessian of the log marginal at the mode
    const double h = opts.fd_step;
    double f0 = ev.eval(theta_star).first;
    Eigen::MatrixXd hess(d, d);
    std::vector<double> fplus(d), fminus(d);
    for (int k = 0; k < d; ++k) {
        Eigen::VectorXd tp = theta_star, tm = theta_star;
        tp[k] += h;
        tm[k] -= h;
        fplus[k] = ev.eval(tp).first;
        fminus[k] = ev.eval(tm).first;
        hess(k, k) = (fplus[k] + fminus[k] - 2.0 * f0) / (h * h);
    }
    for (int k = 0; k < d; ++k)
        for (int l = k + 1; l < d; ++l) {
            Eigen::VectorXd tpp = theta_star, tmm = theta_star, tpm = theta_star,
                            tmp = theta_star;
            tpp[k] += h; tpp[l] += h;
            tmm[k] -= h; tmm[l] -= h;
            tpm[k] += h; tpm[l] -= h;
            tmp[k] -= h; tmp[l] += h;
            double v = (ev.eval(tpp).first + ev.eval(tmm).first - ev.eval(tpm).first -
                        ev.eval(tmp).first) / (4.0 * h * h);
            hess(k, l) = v;
            hess(l, k) = v;
        }

    Eigen::MatrixXd directions = Eigen::MatrixXd::Identity(d, d);
    Eigen::VectorXd scales = Eigen::VectorXd::Ones(d);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(-hess);
    if (es.eigenvalues().minCoeff() > 0.0) {
        directions = es.eigenvectors();
        scales = es.eigenvalues().array().rsqrt();
    } else {
        grid.hessian_fallback = true;
    }

    // standardized-coordinate offsets
    std::vector<Eigen::VectorXd> zs;
    const std::array<double, 5> offs = {0.0, -1.0, 1.0, -2.0, 2.0};
    if (d <= 3) {
        int npts = 1;
        for (int k = 0; k < d; ++k) npts *= 5;
        for (int idx = 0; idx < npts; ++idx) {
            Eigen::VectorXd z(d);
            int rem = idx;
            for (int k = 0; k < d; ++k) {
                z[k] = offs[rem % 5];
                rem /= 5;
            }
            zs.push_back(z);
        }
    } else {
        zs.push_back(Eigen::VectorXd::Zero(d));
        for (int k = 0; k < d; ++k)
            for (double o : {-2.0, -1.0, 1.0, 2.0}) {
                Eigen::VectorXd z = Eigen::VectorXd::Zero(d);
                z[k] = o;
                zs.push_back(z);
            }
    }

    grid.points.resize(zs.size());
    std::vector<Eigen::VectorXd> thetas(zs.size());
    for (std::size_t g = 0; g < zs.size(); ++g)
        thetas[g] = theta_star + directions * scales.cwiseProduct(zs[g]).eval();
    Eigen::VectorXd warm = ev.warm_mode;
    parallel_for(zs.size(), opts.workers, [&](std::size_t g) {
        ThetaPoint p;
        p.theta = thetas[g];
        Eigen::VectorXd w0 = warm;
        p.approx = newton_mode(model, p.theta, opts, w0.size() == model.dim ? &w0 : nullptr);
        p.log_posterior = log_marginal_theta(model, *p.approx);
        grid.points[g] = std::move(p);
    });
    grid.n_evaluations = ev.evals + static_cast<int>(zs.size());

    double lmax = grid.points[0].log_posterior;
    for (const auto& p : grid.points) lmax = std::max(lmax, p.log_posterior);
    double wsum = 0.0;
    for (auto& p : grid.points) {
        p.weight = std::exp(p.log_posterior - lmax);  // equal cell volumes cancel
        wsum += p.weight;
    }
    for (auto& p : grid.points) p.weight /= wsum;
    return grid;
}

}  // namespace stmap
