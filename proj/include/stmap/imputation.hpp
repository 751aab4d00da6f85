#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "stmap/area_graph.hpp"
#include "stmap/lgm_summaries.hpp"
#include "stmap/models.hpp"
#include "stmap/parallel.hpp"

namespace stmap {

struct ImputationCell {
    std::string area_id;
    int year = 0;
    double expected = 0.0;
    double median_risk = 0.0;
    long raw_prediction = 0;
    long final_count = 0;
    bool truncated = false;
};

struct ImputationReport {
    std::vector<ImputationCell> cells;
    double exceed9_fraction = 0.0;  // share of raw predictions above 9
    int n_years_fitted = 0;
};

struct ImputationOptions {
    SpatialPrior prior = SpatialPrior::BYM2;
    bool truncate = true;
    std::uint64_t seed = 1;
    int workers = 1;
    ModelConfig model;
    FitOptions fit;
};

inline long round_half_away(double x) { return static_cast<long>(std::round(x)); }

// Replace suppressed counts with per-year spatial-model predictions,
// truncated at 9 when requested. Observed cells are never modified.
inline std::pair<CountsPanel, ImputationReport> impute_panel(const CountsPanel& panel,
                                                             const AreaGraph& graph,
                                                             const ImputationOptions& opts = {}) {
    if (!panel.suppressed)
        throw InputError("impute_panel: panel is not flagged as confidentiality-suppressed");
    CountsPanel filled = expected_counts(panel, ExpectedMode::PerYear);
    CountsPanel out = panel;
    ImputationReport report;

    std::vector<int> years_with_missing;
    for (int t = 0; t < panel.T; ++t)
        if (!panel.observed.col(t).all()) years_with_missing.push_back(t);
    report.n_years_fitted = static_cast<int>(years_with_missing.size());

    std::vector<std::vector<ImputationCell>> per_year(years_with_missing.size());
    parallel_for(years_with_missing.size(), opts.workers, [&](std::size_t k) {
        int t = years_with_missing[k];
        FitOptions fo = opts.fit;
        fo.seed = opts.seed + static_cast<std::uint64_t>(t);
        FitResult fit;
        try {
            LatentModel m = build_spatial_model(filled, t, opts.prior, graph, opts.model);
            fit = fit_model(m, fo);
        } catch (const std::exception& e) {
            throw FitError("imputation failed for year index " + std::to_string(t) + ": " +
                           e.what());
        }
        for (int i = 0; i < panel.S; ++i) {
            if (panel.observed(i, t)) continue;
            ImputationCell c;
            c.area_id = panel.area_ids[i];
            c.year = panel.years[t];
            c.expected = filled.expected(i, t);
            c.median_risk = fit.risk_median(i, 0);
            c.raw_prediction = round_half_away(c.expected * c.median_risk);
            c.final_count = opts.truncate ? std::min<long>(c.raw_prediction, 9) : c.raw_prediction;
            c.truncated = c.final_count != c.raw_prediction;
            per_year[k].push_back(std::move(c));
        }
    });

    int exceed = 0, total = 0;
    for (std::size_t k = 0; k < per_year.size(); ++k) {
        int t = years_with_missing[k];
        for (const auto& c : per_year[k]) {
            int i = graph.index_of(c.area_id);
            out.counts(i, t) = static_cast<double>(c.final_count);
            out.observed(i, t) = true;
            out.imputed(i, t) = true;
            ++total;
            if (c.raw_prediction > 9) ++exceed;
            report.cells.push_back(c);
        }
    }
    report.exceed9_fraction = total > 0 ? static_cast<double>(exceed) / total : 0.0;
    return {out, report};
}

}  // namespace stmap
