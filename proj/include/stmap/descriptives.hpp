#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <boost/math/distributions/gamma.hpp>
#include <cmath>
#include <limits>
#include <vector>

#include "stmap/errors.hpp"
#include "stmap/models.hpp"

namespace stmap {

struct SmrSpaceEntry {
    double smr = std::numeric_limits<double>::quiet_NaN();
    bool defined = false;
    bool displayable = true;  // false when every year was suppressed at the source
};

// Global SMR across space over the whole period: sum_t Y_it / sum_t e_it.
inline std::vector<SmrSpaceEntry> smr_space(const CountsPanel& panel) {
    if (panel.expected_mode != ExpectedMode::Global)
        throw InputError("smr_space: global expected counts required");
    std::vector<SmrSpaceEntry> out(panel.S);
    for (int i = 0; i < panel.S; ++i) {
        double y = 0.0, e = 0.0;
        bool any_original = false;
        for (int t = 0; t < panel.T; ++t) {
            if (panel.observed(i, t)) {
                y += panel.counts(i, t);
                e += panel.expected(i, t);
                if (!panel.imputed(i, t)) any_original = true;
            }
        }
        out[i].displayable = any_original;
        if (e > 0.0) {
            out[i].smr = y / e;
            out[i].defined = true;
        }
    }
    return out;
}

struct SmrTimeEntry {
    double smr = std::numeric_limits<double>::quiet_NaN();
    double lo = 0.0, hi = 0.0;
    bool defined = false;
};

// Per-year SMR with the Poisson exact (gamma-quantile) 95% interval.
inline std::vector<SmrTimeEntry> smr_time(const CountsPanel& panel) {
    if (panel.expected_mode != ExpectedMode::Global)
        throw InputError("smr_time: global expected counts required");
    std::vector<SmrTimeEntry> out(panel.T);
    for (int t = 0; t < panel.T; ++t) {
        double y = 0.0, e = 0.0;
        for (int i = 0; i < panel.S; ++i)
            if (panel.observed(i, t)) {
                y += panel.counts(i, t);
                e += panel.expected(i, t);
            }
        if (e <= 0.0) continue;
        out[t].smr = y / e;
        out[t].defined = true;
        out[t].lo = (y > 0.0)
                        ? boost::math::quantile(boost::math::gamma_distribution<double>(y), 0.025) / e
                        : 0.0;
        out[t].hi = boost::math::quantile(boost::math::gamma_distribution<double>(y + 1.0), 0.975) / e;
    }
    return out;
}

struct SmrCellStats {
    double smr = 0.0;
    double var = 0.0;  // Poisson plug-in Y / e^2
    double cv = std::numeric_limits<double>::quiet_NaN();  // 1/sqrt(Y) for Y > 0
    bool cv_defined = false;
};

inline SmrCellStats smr_cell_stats(double y, double e) {
    if (e <= 0.0) throw InputError("smr_cell_stats: expected count must be positive");
    SmrCellStats s;
    s.smr = y / e;
    s.var = y / (e * e);
    if (y > 0.0) {
        s.cv = std::sqrt(s.var) / s.smr;  // equals 1/sqrt(Y)
        s.cv_defined = true;
    } else {
        s.var = 0.0;
    }
    return s;
}

// Type-7 quantile (linear interpolation between order statistics).
inline double quantile_type7(std::vector<double> v, double p) {
    if (v.empty()) throw InputError("quantile of empty set");
    std::sort(v.begin(), v.end());
    double h = (static_cast<double>(v.size()) - 1.0) * p;
    std::size_t lo = static_cast<std::size_t>(std::floor(h));
    std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (h - lo) * (v[hi] - v[lo]);
}

struct BoxplotRow {
    int year = 0;
    double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0;
    std::vector<double> outliers;  // beyond 1.5 IQR from the quartiles
};

// Per-year five-number summaries of cell SMRs over displayable cells.
inline std::vector<BoxplotRow> boxplot_export(const CountsPanel& panel) {
    if (panel.expected_mode != ExpectedMode::Global)
        throw InputError("boxplot_export: global expected counts required");
    auto space = smr_space(panel);
    std::vector<BoxplotRow> rows;
    for (int t = 0; t < panel.T; ++t) {
        std::vector<double> smrs;
        for (int i = 0; i < panel.S; ++i)
            if (panel.observed(i, t) && space[i].displayable && panel.expected(i, t) > 0.0)
                smrs.push_back(panel.counts(i, t) / panel.expected(i, t));
        if (smrs.empty()) continue;
        BoxplotRow r;
        r.year = panel.years[t];
        r.min = *std::min_element(smrs.begin(), smrs.end());
        r.max = *std::max_element(smrs.begin(), smrs.end());
        r.q1 = quantile_type7(smrs, 0.25);
        r.median = quantile_type7(smrs, 0.5);
        r.q3 = quantile_type7(smrs, 0.75);
        double iqr = r.q3 - r.q1;
        for (double s : smrs)
            if (s < r.q1 - 1.5 * iqr || s > r.q3 + 1.5 * iqr) r.outliers.push_back(s);
        std::sort(r.outliers.begin(), r.outliers.end());
        rows.push_back(std::move(r));
    }
    return rows;
}

}  // namespace stmap
