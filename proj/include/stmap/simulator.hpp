#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "stmap/area_graph.hpp"
#include "stmap/models.hpp"
#include "stmap/rng.hpp"
#include "stmap/structures.hpp"

namespace stmap {

// Rook-contiguity lattice with ids r{row}c{col}, row-major order.
inline AreaGraph make_lattice(int rows, int cols) {
    if (rows < 1 || cols < 1) throw InputError("make_lattice: rows and cols must be >= 1");
    std::vector<std::string> ids;
    ids.reserve(static_cast<std::size_t>(rows) * cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            ids.push_back("r" + std::to_string(r) + "c" + std::to_string(c));
    std::vector<std::pair<std::string, std::string>> edges;
    auto id = [&](int r, int c) { return ids[static_cast<std::size_t>(r) * cols + c]; };
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            if (c + 1 < cols) edges.emplace_back(id(r, c), id(r, c + 1));
            if (r + 1 < rows) edges.emplace_back(id(r, c), id(r + 1, c));
        }
    return load_graph(edges, ids);
}

namespace detail {

// Draw from N(0, sigma2 * Q^-) under the structure's constraints:
// unconstrained draw from the jittered precision, then conditioning by
// kriging onto {Cx = 0}.
inline Eigen::VectorXd sample_structured(const PrecisionStructure& q, double sigma2,
                                         RngStream& rng, double jitter = 1e-6) {
    const int n = q.size();
    SparseMat qj = q.matrix;
    if (q.rank_deficiency > 0) {
        SparseMat eye(n, n);
        eye.setIdentity();
        qj += jitter * eye;
    }
    Eigen::SimplicialLDLT<SparseMat> f(qj);
    if (f.info() != Eigen::Success)
        throw StructureError("sample_structured: factorization failed");
    Eigen::VectorXd z(n);
    for (int i = 0; i < n; ++i) z[i] = rng.normal();
    z.array() /= f.vectorD().array().sqrt();
    Eigen::VectorXd x = f.permutationPinv() * f.matrixU().solve(z).eval();
    if (q.n_constraints() > 0) {
        Eigen::MatrixXd ct = Eigen::MatrixXd(SparseMat(q.constraints.transpose()));
        Eigen::MatrixXd w = f.solve(ct);
        Eigen::MatrixXd m = Eigen::MatrixXd(q.constraints) * w;
        Eigen::LLT<Eigen::MatrixXd> mllt(0.5 * (m + m.transpose()));
        x -= w * mllt.solve((Eigen::MatrixXd(q.constraints) * x).eval());
    }
    return std::sqrt(sigma2) * x;
}

}  // namespace detail

struct SimulatedPanel {
    CountsPanel panel;
    Eigen::ArrayXXd true_risk;  // S x T
    Eigen::VectorXd spatial, temporal;
    Eigen::ArrayXXd interaction;
};

// Generative mirror of the spatio-temporal model: constrained latent fields
// from the prior structures, then Y ~ Poisson(e * r).
inline SimulatedPanel simulate_panel(const AreaGraph& graph, int T, const HyperParams& hyper,
                                     InteractionType type,
                                     const Eigen::VectorXd& base_expected, std::uint64_t seed,
                                     double alpha0 = 0.0) {
    const int S = graph.n_areas;
    if (base_expected.size() != S)
        throw InputError("simulate_panel: base_expected size must match the graph");
    SimulatedPanel out;
    RngStream rng_spatial(seed, 1), rng_temporal(seed, 2), rng_inter(seed, 3), rng_counts(seed, 4);

    PrecisionStructure q_sp = scale_precision(icar_precision(graph));
    out.spatial = detail::sample_structured(q_sp, hyper.sigma2_spatial, rng_spatial);
    if (T >= 2) {
        PrecisionStructure q_tm = scale_precision(rw1_precision(T));
        out.temporal = detail::sample_structured(q_tm, hyper.sigma2_temporal, rng_temporal);
        PrecisionStructure q_int = interaction_precision(type, q_sp, q_tm);
        Eigen::VectorXd delta =
            detail::sample_structured(q_int, hyper.sigma2_interaction, rng_inter);
        out.interaction = Eigen::Map<Eigen::ArrayXXd>(delta.data(), S, T);
    } else {
        out.temporal = Eigen::VectorXd::Zero(T);
        out.interaction = Eigen::ArrayXXd::Zero(S, T);
    }

    out.panel = CountsPanel::zeros(S, T);
    out.panel.area_ids = graph.area_ids;
    out.true_risk.resize(S, T);
    for (int t = 0; t < T; ++t)
        for (int i = 0; i < S; ++i) {
            double eta = alpha0 + out.spatial[i] + out.temporal[t] + out.interaction(i, t);
            out.true_risk(i, t) = std::exp(eta);
            out.panel.population(i, t) = base_expected[i];
            out.panel.counts(i, t) =
                static_cast<double>(rng_counts.poisson(base_expected[i] * out.true_risk(i, t)));
        }
    return out;
}

struct SuppressResult {
    CountsPanel panel;
    double masked_fraction = 0.0;
};

// Confidentiality-style masking of cells below the threshold.
inline SuppressResult suppress(const CountsPanel& panel, double threshold = 10.0) {
    SuppressResult out;
    out.panel = panel;
    int masked = 0;
    for (int t = 0; t < panel.T; ++t)
        for (int i = 0; i < panel.S; ++i)
            if (panel.counts(i, t) < threshold) {
                out.panel.observed(i, t) = false;
                ++masked;
            }
    out.panel.suppressed = true;
    out.masked_fraction = static_cast<double>(masked) / (panel.S * panel.T);
    return out;
}

}  // namespace stmap
