#pragma once

#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "stmap/lgm_summaries.hpp"
#include "stmap/models.hpp"
#include "stmap/partition.hpp"

namespace stmap {

struct TrendRow {
    std::string group;
    int year = 0;
    double weighted_risk = std::numeric_limits<double>::quiet_NaN();
    bool defined = false;
};

struct TrendOptions {
    int fixed_weight_year = -1;     // -1: per-year populations as weights
    bool include_fully_suppressed = false;
};

// Population-weighted median-risk trends per group of areas:
// sum_i N_it r^med_it / sum_i N_it over the group's members each year.
inline std::vector<TrendRow> weighted_trend(const MergedResult& merged, const CountsPanel& panel,
                                            const std::vector<std::string>& group_labels,
                                            const TrendOptions& opts = {}) {
    if (static_cast<int>(group_labels.size()) != panel.S)
        throw InputError("weighted_trend: one group label per area required");
    if (merged.S != panel.S || merged.T != panel.T)
        throw InputError("weighted_trend: fit and panel dimensions disagree");
    if (opts.fixed_weight_year >= panel.T)
        throw InputError("weighted_trend: fixed weight year out of range");
    std::map<std::string, std::vector<int>> groups;
    for (int i = 0; i < panel.S; ++i) {
        if (!opts.include_fully_suppressed && panel.imputed.row(i).all()) continue;
        groups[group_labels[i]].push_back(i);
    }
    std::vector<TrendRow> rows;
    for (const auto& [name, members] : groups) {
        for (int t = 0; t < panel.T; ++t) {
            TrendRow r;
            r.group = name;
            r.year = panel.years[t];
            int wt = opts.fixed_weight_year >= 0 ? opts.fixed_weight_year : t;
            double num = 0.0, den = 0.0;
            for (int i : members) {
                double w = panel.population(i, wt);
                num += w * merged.risk_q50(i, t);
                den += w;
            }
            if (den > 0.0) {
                r.weighted_risk = num / den;
                r.defined = true;
            }
            rows.push_back(std::move(r));
        }
    }
    return rows;
}

enum class RiskClass { High, Low, Uncertain };

inline const char* risk_class_name(RiskClass c) {
    switch (c) {
        case RiskClass::High: return "high";
        case RiskClass::Low: return "low";
        default: return "uncertain";
    }
}

// Interval-based classification against the null risk of 1.
inline RiskClass classify_risk(double q025, double q975) {
    if (q025 > 1.0) return RiskClass::High;
    if (q975 < 1.0) return RiskClass::Low;
    return RiskClass::Uncertain;
}

inline std::vector<std::vector<RiskClass>> risk_classification(const MergedResult& merged) {
    std::vector<std::vector<RiskClass>> out(merged.S, std::vector<RiskClass>(merged.T));
    for (int i = 0; i < merged.S; ++i)
        for (int t = 0; t < merged.T; ++t)
            out[i][t] = classify_risk(merged.risk_q025(i, t), merged.risk_q975(i, t));
    return out;
}

// Flag cells whose posterior exceedance probability P(r > threshold)
// reaches the given level (default 0.95).
inline bool exceedance_flag(const MergedResult& merged, int i, int t, double threshold,
                            double level = 0.95) {
    return merged.exceedance_probability(i, t, threshold) >= level;
}

}  // namespace stmap
