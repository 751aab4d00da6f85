#include <gtest/gtest.h>

#include <set>

#include "stmap/imputation.hpp"
#include "stmap/simulator.hpp"

using namespace stmap;

namespace {

struct Scenario {
    AreaGraph graph;
    CountsPanel truth;
    CountsPanel masked;
};

Scenario make_scenario(std::uint64_t seed) {
    Scenario sc;
    sc.graph = make_lattice(5, 5);
    HyperParams hp;
    hp.sigma2_spatial = 0.3;
    auto sim = simulate_panel(sc.graph, 3, hp, InteractionType::I,
                              Eigen::VectorXd::Constant(25, 15.0), seed);
    sc.truth = sim.panel;
    sc.masked = suppress(sim.panel, 10.0).panel;
    return sc;
}

FitOptions quick_fit() {
    FitOptions fo;
    fo.n_loglik_draws = 10;
    return fo;
}

}  // namespace

TEST(Imputation, RequiresSuppressedFlag) {
    auto sc = make_scenario(1);
    CountsPanel p = sc.truth;  // not flagged
    EXPECT_THROW(impute_panel(p, sc.graph), InputError);
}

TEST(Imputation, TruncatesAtNineAndPreservesObserved) {
    auto sc = make_scenario(2);
    ImputationOptions opts;
    opts.fit = quick_fit();
    auto [filled, report] = impute_panel(sc.masked, sc.graph, opts);
    EXPECT_GT(report.cells.size(), 0u);
    for (const auto& c : report.cells) {
        EXPECT_GE(c.final_count, 0);
        EXPECT_LE(c.final_count, 9);
        EXPECT_EQ(c.truncated, c.raw_prediction > 9);
        EXPECT_EQ(c.final_count, std::min<long>(c.raw_prediction, 9));
    }
    for (int t = 0; t < sc.masked.T; ++t)
        for (int i = 0; i < sc.masked.S; ++i) {
            if (sc.masked.observed(i, t)) {
                EXPECT_EQ(filled.counts(i, t), sc.masked.counts(i, t));
                EXPECT_FALSE(filled.imputed(i, t));
            } else {
                EXPECT_TRUE(filled.observed(i, t));
                EXPECT_TRUE(filled.imputed(i, t));
            }
        }
    int exceed = 0;
    for (const auto& c : report.cells)
        if (c.raw_prediction > 9) ++exceed;
    EXPECT_NEAR(report.exceed9_fraction,
                static_cast<double>(exceed) / static_cast<double>(report.cells.size()), 1e-12);
}

TEST(Imputation, NoTruncationKeepsRawPredictions) {
    auto sc = make_scenario(3);
    ImputationOptions opts;
    opts.truncate = false;
    opts.fit = quick_fit();
    auto [filled, report] = impute_panel(sc.masked, sc.graph, opts);
    for (const auto& c : report.cells) {
        EXPECT_EQ(c.final_count, c.raw_prediction);
        EXPECT_FALSE(c.truncated);
    }
    (void)filled;
}

TEST(Imputation, DeterministicUnderSeed) {
    auto sc = make_scenario(4);
    ImputationOptions opts;
    opts.fit = quick_fit();
    auto [a, ra] = impute_panel(sc.masked, sc.graph, opts);
    auto [b, rb] = impute_panel(sc.masked, sc.graph, opts);
    EXPECT_EQ(Eigen::MatrixXd(a.counts), Eigen::MatrixXd(b.counts));
    ASSERT_EQ(ra.cells.size(), rb.cells.size());
    for (std::size_t k = 0; k < ra.cells.size(); ++k)
        EXPECT_EQ(ra.cells[k].median_risk, rb.cells[k].median_risk);
}

TEST(Imputation, ReportIdentifiesCellsAndYears) {
    auto sc = make_scenario(5);
    ImputationOptions opts;
    opts.fit = quick_fit();
    auto [filled, report] = impute_panel(sc.masked, sc.graph, opts);
    int missing = 0;
    for (int t = 0; t < sc.masked.T; ++t)
        missing += static_cast<int>((sc.masked.observed.col(t) == false).count());
    EXPECT_EQ(static_cast<int>(report.cells.size()), missing);
    std::set<int> years_with_missing;
    for (int t = 0; t < sc.masked.T; ++t)
        if (!sc.masked.observed.col(t).all()) years_with_missing.insert(t);
    EXPECT_EQ(report.n_years_fitted, static_cast<int>(years_with_missing.size()));
    (void)filled;
}
