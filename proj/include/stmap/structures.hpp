#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <cmath>
#include <string>
#include <vector>

#include "stmap/area_graph.hpp"
#include "stmap/errors.hpp"

namespace stmap {

using SparseMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

// Sparse symmetric non-negative-definite matrix with declared rank
// deficiency and the sum-to-zero style constraints that span its null space.
struct PrecisionStructure {
    SparseMat matrix;
    int rank_deficiency = 0;
    SparseMat constraints;  // rows are linear functionals required to be zero
    bool scaled = false;

    int size() const { return static_cast<int>(matrix.rows()); }
    int n_constraints() const { return static_cast<int>(constraints.rows()); }
};

struct HyperParams {
    double sigma2_spatial = 1.0;
    double sigma2_temporal = 1.0;
    double sigma2_interaction = 1.0;
    double lambda = 0.5;  // BYM2 mixing proportion
};

enum class InteractionType { I = 1, II = 2, III = 3, IV = 4 };
enum class SpatialPrior { ICAR, BYM2 };

inline InteractionType parse_interaction(int t) {
    if (t < 1 || t > 4) throw InputError("interaction type must be in 1..4");
    return static_cast<InteractionType>(t);
}

inline SpatialPrior parse_prior(const std::string& s) {
    if (s == "icar" || s == "ICAR") return SpatialPrior::ICAR;
    if (s == "bym2" || s == "BYM2") return SpatialPrior::BYM2;
    throw InputError("unknown spatial prior: " + s);
}

inline std::string spatial_prior_name(SpatialPrior p) {
    return p == SpatialPrior::ICAR ? "icar" : "bym2";
}

inline std::string interaction_name(InteractionType t) {
    return std::to_string(static_cast<int>(t));
}

namespace detail {

inline SparseMat rows_to_sparse(const std::vector<std::vector<std::pair<int, double>>>& rows,
                                int ncols) {
    std::vector<Triplet> trips;
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (const auto& [c, v] : rows[r]) trips.emplace_back(static_cast<int>(r), c, v);
    SparseMat m(static_cast<int>(rows.size()), ncols);
    m.setFromTriplets(trips.begin(), trips.end());
    return m;
}

// Marginal variances of the generalized inverse under the declared
// constraints: orthonormalize the constraint rows into a null basis N,
// then (Q + N N')^{-1} - N N' is the constrained generalized inverse.
inline Eigen::VectorXd constrained_ginv_diag(const PrecisionStructure& q) {
    const int n = q.size();
    Eigen::MatrixXd dense = Eigen::MatrixXd(q.matrix);
    Eigen::MatrixXd nbasis;  // n x c, orthonormal columns
    if (q.n_constraints() > 0) {
        Eigen::MatrixXd ct = Eigen::MatrixXd(q.constraints).transpose();
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(ct);
        nbasis = qr.householderQ() * Eigen::MatrixXd::Identity(n, ct.cols());
        dense += nbasis * nbasis.transpose();
    }
    Eigen::LDLT<Eigen::MatrixXd> ldlt(dense);
    double dmax = ldlt.vectorD().maxCoeff();
    if (ldlt.info() != Eigen::Success || ldlt.vectorD().minCoeff() <= 1e-10 * dmax)
        throw StructureError("precision numerically singular beyond declared rank deficiency");
    Eigen::MatrixXd inv = ldlt.solve(Eigen::MatrixXd::Identity(n, n));
    Eigen::VectorXd diag = inv.diagonal();
    if (nbasis.cols() > 0) diag -= nbasis.rowwise().squaredNorm();
    return diag;
}

}  // namespace detail

// ICAR: degree diagonal minus adjacency; one sum-to-zero row per component.
inline PrecisionStructure icar_precision(const AreaGraph& g) {
    if (g.n_areas == 0) throw InputError("icar_precision: empty graph");
    PrecisionStructure q;
    std::vector<Triplet> trips;
    std::vector<int> deg = degree(g);
    for (int i = 0; i < g.n_areas; ++i) trips.emplace_back(i, i, static_cast<double>(deg[i]));
    for (const auto& [u, v] : g.edges) {
        trips.emplace_back(u, v, -1.0);
        trips.emplace_back(v, u, -1.0);
    }
    q.matrix.resize(g.n_areas, g.n_areas);
    q.matrix.setFromTriplets(trips.begin(), trips.end());
    q.rank_deficiency = g.n_components;
    std::vector<std::vector<std::pair<int, double>>> rows(g.n_components);
    for (int i = 0; i < g.n_areas; ++i) rows[g.component_label[i]].emplace_back(i, 1.0);
    q.constraints = detail::rows_to_sparse(rows, g.n_areas);
    return q;
}

// RW1 stencil on T periods; global sum-to-zero constraint.
inline PrecisionStructure rw1_precision(int T) {
    if (T < 2) throw InputError("rw1_precision: T must be >= 2");
    PrecisionStructure q;
    std::vector<Triplet> trips;
    for (int t = 0; t < T; ++t) {
        double d = (t == 0 || t == T - 1) ? 1.0 : 2.0;
        trips.emplace_back(t, t, d);
        if (t + 1 < T) {
            trips.emplace_back(t, t + 1, -1.0);
            trips.emplace_back(t + 1, t, -1.0);
        }
    }
    q.matrix.resize(T, T);
    q.matrix.setFromTriplets(trips.begin(), trips.end());
    q.rank_deficiency = 1;
    std::vector<std::vector<std::pair<int, double>>> rows(1);
    for (int t = 0; t < T; ++t) rows[0].emplace_back(t, 1.0);
    q.constraints = detail::rows_to_sparse(rows, T);
    return q;
}

// Multiplies the matrix by the geometric mean of the marginal variances of
// the constrained generalized inverse, so that afterwards the geometric mean
// of the marginal variances is 1. Singleton components (marginal variance 0
// under their own constraint) are excluded from the geometric mean.
inline PrecisionStructure scale_precision(const PrecisionStructure& q) {
    Eigen::VectorXd diag = detail::constrained_ginv_diag(q);
    double logsum = 0.0;
    int count = 0;
    double dmax = diag.maxCoeff();
    for (int i = 0; i < diag.size(); ++i) {
        if (diag[i] > 1e-10 * std::max(dmax, 1.0)) {
            logsum += std::log(diag[i]);
            ++count;
        }
    }
    if (count == 0) throw StructureError("scale_precision: no positive marginal variances");
    double gm = std::exp(logsum / count);
    PrecisionStructure out = q;
    out.matrix = q.matrix * gm;
    out.scaled = true;
    return out;
}

// Two-block BYM2 latent representation: xi = sigma*(sqrt(lambda)*u + sqrt(1-lambda)*v)
// with u ~ scaled ICAR (sum-to-zero per component) and v iid standard normal.
struct Bym2Spec {
    PrecisionStructure structured;  // scaled ICAR
    int n = 0;                      // size of each block
};

inline Bym2Spec bym2_effect_spec(const PrecisionStructure& q_scaled) {
    if (!q_scaled.scaled)
        throw StructureError("bym2_effect_spec requires a scaled spatial precision");
    return Bym2Spec{q_scaled, q_scaled.size()};
}

// Knorr-Held interaction structures, Kronecker built with space index varying
// fastest: delta ordering (d_11,...,d_S1,...,d_1T,...,d_ST).
// Spatial components are read off the per-component constraint rows of
// q_spatial; disconnected subdomain graphs get per-(component, year)
// constraints with the deficiency recomputed accordingly.
inline PrecisionStructure interaction_precision(InteractionType type,
                                                const PrecisionStructure& q_spatial,
                                                const PrecisionStructure& q_temporal) {
    const int S = q_spatial.size();
    const int T = q_temporal.size();
    const int ST = S * T;
    PrecisionStructure out;
    out.scaled = true;

    if (type == InteractionType::I) {
        out.matrix.resize(ST, ST);
        out.matrix.setIdentity();
        out.rank_deficiency = 0;
        out.constraints.resize(0, ST);
        return out;
    }

    if (!q_temporal.scaled || (type != InteractionType::II && !q_spatial.scaled))
        throw StructureError("interaction_precision requires scaled input structures");

    // component membership from the spatial constraint rows
    const int ncomp = q_spatial.n_constraints();
    std::vector<std::vector<int>> components(std::max(ncomp, 0));
    if (type == InteractionType::III || type == InteractionType::IV) {
        if (ncomp == 0)
            throw StructureError(
                "interaction_precision: q_spatial carries no per-component constraints");
        Eigen::MatrixXd cd = Eigen::MatrixXd(q_spatial.constraints);
        for (int c = 0; c < ncomp; ++c)
            for (int i = 0; i < S; ++i)
                if (cd(c, i) != 0.0) components[c].push_back(i);
    }

    std::vector<Triplet> trips;
    std::vector<std::vector<std::pair<int, double>>> rows;
    auto cell = [S](int i, int t) { return t * S + i; };

    switch (type) {
        case InteractionType::II: {
            // Q_temporal (x) Identity_S; per-area sum-over-time rows
            for (int k = 0; k < q_temporal.matrix.outerSize(); ++k)
                for (SparseMat::InnerIterator it(q_temporal.matrix, k); it; ++it)
                    for (int i = 0; i < S; ++i)
                        trips.emplace_back(cell(i, static_cast<int>(it.row())),
                                           cell(i, static_cast<int>(it.col())), it.value());
            out.rank_deficiency = S * q_temporal.rank_deficiency;
            rows.resize(S);
            for (int i = 0; i < S; ++i)
                for (int t = 0; t < T; ++t) rows[i].emplace_back(cell(i, t), 1.0);
            break;
        }
        case InteractionType::III: {
            // Identity_T (x) Q_spatial; per-(component, year) sum-over-space rows
            for (int k = 0; k < q_spatial.matrix.outerSize(); ++k)
                for (SparseMat::InnerIterator it(q_spatial.matrix, k); it; ++it)
                    for (int t = 0; t < T; ++t)
                        trips.emplace_back(cell(static_cast<int>(it.row()), t),
                                           cell(static_cast<int>(it.col()), t), it.value());
            out.rank_deficiency = ncomp * T;
            rows.resize(static_cast<std::size_t>(ncomp) * T);
            for (int c = 0; c < ncomp; ++c)
                for (int t = 0; t < T; ++t)
                    for (int i : components[c]) rows[c * T + t].emplace_back(cell(i, t), 1.0);
            break;
        }
        case InteractionType::IV: {
            // Q_temporal (x) Q_spatial; per-area sum-over-time rows plus
            // per-(component, year) rows with the last year dropped per
            // component (the dropped rows are linearly dependent).
            for (int kt = 0; kt < q_temporal.matrix.outerSize(); ++kt)
                for (SparseMat::InnerIterator jt(q_temporal.matrix, kt); jt; ++jt)
                    for (int ks = 0; ks < q_spatial.matrix.outerSize(); ++ks)
                        for (SparseMat::InnerIterator js(q_spatial.matrix, ks); js; ++js)
                            trips.emplace_back(
                                cell(static_cast<int>(js.row()), static_cast<int>(jt.row())),
                                cell(static_cast<int>(js.col()), static_cast<int>(jt.col())),
                                jt.value() * js.value());
            out.rank_deficiency = S + ncomp * (T - 1);
            rows.resize(static_cast<std::size_t>(S) + static_cast<std::size_t>(ncomp) * (T - 1));
            for (int i = 0; i < S; ++i)
                for (int t = 0; t < T; ++t) rows[i].emplace_back(cell(i, t), 1.0);
            std::size_t r = S;
            for (int c = 0; c < ncomp; ++c)
                for (int t = 0; t + 1 < T; ++t, ++r)
                    for (int i : components[c]) rows[r].emplace_back(cell(i, t), 1.0);
            break;
        }
        default:
            break;
    }

    out.matrix.resize(ST, ST);
    out.matrix.setFromTriplets(trips.begin(), trips.end());
    out.constraints = detail::rows_to_sparse(rows, ST);
    return out;
}

}  // namespace stmap
