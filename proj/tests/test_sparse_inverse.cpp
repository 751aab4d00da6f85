#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>

#include "stmap/rng.hpp"
#include "stmap/sparse_inverse.hpp"
#include "stmap/structures.hpp"

using namespace stmap;

namespace {

SparseMat random_spd(int n, double density, std::uint64_t seed) {
    RngStream rng(seed);
    std::vector<Triplet> trips;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < i; ++j)
            if (rng.uniform() < density) {
                double v = rng.normal();
                trips.emplace_back(i, j, v);
                trips.emplace_back(j, i, v);
            }
    SparseMat m(n, n);
    m.setFromTriplets(trips.begin(), trips.end());
    // diagonal dominance guarantees positive definiteness
    Eigen::VectorXd rowsum = Eigen::VectorXd::Zero(n);
    for (int k = 0; k < m.outerSize(); ++k)
        for (SparseMat::InnerIterator it(m, k); it; ++it)
            rowsum[it.row()] += std::abs(it.value());
    for (int i = 0; i < n; ++i) m.coeffRef(i, i) = rowsum[i] + 1.0 + rng.uniform();
    m.makeCompressed();
    return m;
}

}  // namespace

TEST(PartialInverse, DiagonalMatchesDenseInverse) {
    for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
        SparseMat m = random_spd(40, 0.15, seed);
        Eigen::SimplicialLDLT<SparseMat> f(m);
        ASSERT_EQ(f.info(), Eigen::Success);
        PartialInverse z(f);
        Eigen::MatrixXd inv =
            Eigen::MatrixXd(m).ldlt().solve(Eigen::MatrixXd::Identity(40, 40));
        for (int i = 0; i < 40; ++i)
            EXPECT_NEAR(z.diag(i), inv(i, i), 1e-10 * std::abs(inv(i, i)) + 1e-12);
    }
}

TEST(PartialInverse, OffDiagonalEntriesWithinPattern) {
    SparseMat m = random_spd(30, 0.2, 9);
    Eigen::SimplicialLDLT<SparseMat> f(m);
    ASSERT_EQ(f.info(), Eigen::Success);
    PartialInverse z(f);
    Eigen::MatrixXd inv = Eigen::MatrixXd(m).ldlt().solve(Eigen::MatrixXd::Identity(30, 30));
    int checked = 0;
    for (int i = 0; i < 30; ++i)
        for (int j = 0; j < 30; ++j) {
            double v;
            if (z.entry(i, j, v)) {
                EXPECT_NEAR(v, inv(i, j), 1e-9);
                ++checked;
            }
        }
    // the fill-in pattern covers at least the nonzeros of m
    EXPECT_GE(checked, static_cast<int>(m.nonZeros()));
}

TEST(PartialInverse, TridiagonalExact) {
    // RW1 + diagonal has a known tridiagonal pattern with no fill-in
    auto q = rw1_precision(50);
    SparseMat m = q.matrix;
    SparseMat eye(50, 50);
    eye.setIdentity();
    m = m + 0.7 * eye;
    Eigen::SimplicialLDLT<SparseMat> f(m);
    PartialInverse z(f);
    Eigen::MatrixXd inv = Eigen::MatrixXd(m).ldlt().solve(Eigen::MatrixXd::Identity(50, 50));
    for (int i = 0; i < 50; ++i) {
        EXPECT_NEAR(z.diag(i), inv(i, i), 1e-12);
        double v;
        if (i + 1 < 50 && z.entry(i, i + 1, v)) EXPECT_NEAR(v, inv(i, i + 1), 1e-12);
    }
}
