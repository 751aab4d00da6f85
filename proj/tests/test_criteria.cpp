#include <gtest/gtest.h>

#include <cmath>

#include "stmap/criteria.hpp"

using namespace stmap;

TEST(Criteria, DicHandComputed) {
    // 2 draws, 2 cells; Dbar = -2 * mean total loglik
    Eigen::MatrixXd ll(2, 2);
    ll << -1.0, -2.0,
          -3.0, -4.0;
    // row totals -3 and -7, mean -5 -> Dbar = 10
    auto r = dic(ll, 8.0);
    EXPECT_DOUBLE_EQ(r.dbar, 10.0);
    EXPECT_DOUBLE_EQ(r.pd, 2.0);
    EXPECT_DOUBLE_EQ(r.dic, 12.0);
    EXPECT_FALSE(r.negative_pd);
    auto neg = dic(ll, 11.0);
    EXPECT_TRUE(neg.negative_pd);
}

TEST(Criteria, WaicHandComputed) {
    Eigen::MatrixXd ll(2, 1);
    ll << -1.0, -2.0;
    auto r = waic(ll);
    double lppd = std::log(0.5 * (std::exp(-1.0) + std::exp(-2.0)));
    double pwaic = 0.5;  // unbiased variance of {-1,-2}
    EXPECT_NEAR(r.lppd, lppd, 1e-12);
    EXPECT_NEAR(r.pwaic, pwaic, 1e-12);
    EXPECT_NEAR(r.waic, -2.0 * (lppd - pwaic), 1e-12);
}

TEST(Criteria, WaicAdditiveOverCells) {
    Eigen::MatrixXd a(3, 1), b(3, 1);
    a << -1.0, -1.5, -0.7;
    b << -2.0, -2.5, -1.9;
    Eigen::MatrixXd both(3, 2);
    both << a, b;
    EXPECT_NEAR(waic(both).waic, waic(a).waic + waic(b).waic, 1e-12);
}

TEST(Criteria, ErrorsOnDegenerateInput) {
    Eigen::MatrixXd one_draw(1, 3);
    one_draw.setConstant(-1.0);
    EXPECT_THROW(dic(one_draw, 1.0), CriteriaError);
    EXPECT_THROW(waic(one_draw), CriteriaError);
    Eigen::MatrixXd bad(2, 1);
    bad << -1.0, std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(waic(bad), CriteriaError);
    Eigen::MatrixXd good(2, 1);
    good << -1.0, -2.0;
    EXPECT_THROW(dic(good, std::numeric_limits<double>::infinity()), CriteriaError);
}

TEST(Criteria, DeltaTableSubtractsColumnMinima) {
    std::vector<CriteriaRow> rows(3);
    rows[0] = {"icar", "1", 100.0, 5.0, 110.0, 108.0};
    rows[1] = {"icar", "2", 95.0, 6.0, 105.0, 104.0};
    rows[2] = {"bym2", "2", 97.0, 7.0, 107.0, 103.0};
    auto d = delta_table(rows);
    EXPECT_DOUBLE_EQ(d[0].dic, 5.0);
    EXPECT_DOUBLE_EQ(d[1].dic, 0.0);
    EXPECT_DOUBLE_EQ(d[2].dic, 2.0);
    EXPECT_DOUBLE_EQ(d[0].waic, 5.0);
    EXPECT_DOUBLE_EQ(d[2].waic, 0.0);
    // Dbar and pD stay raw
    EXPECT_DOUBLE_EQ(d[1].dbar, 95.0);
    EXPECT_DOUBLE_EQ(d[2].pd, 7.0);
    EXPECT_THROW(delta_table({}), CriteriaError);
}
