#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "stmap/errors.hpp"

namespace stmap {

struct DicResult {
    double dbar = 0.0;   // posterior mean deviance
    double pd = 0.0;     // effective number of parameters
    double dic = 0.0;
    bool negative_pd = false;  // known DIC pathology, flagged not fatal
};

struct WaicResult {
    double lppd = 0.0;
    double pwaic = 0.0;
    double waic = 0.0;
};

namespace detail {

inline void check_draws(const Eigen::MatrixXd& loglik) {
    if (loglik.rows() < 2) throw CriteriaError("criteria require at least 2 draws");
    if (!loglik.allFinite()) throw CriteriaError("non-finite pointwise log-likelihood draws");
}

}  // namespace detail

// loglik: draws x cells pointwise log-likelihood matrix.
inline DicResult dic(const Eigen::MatrixXd& loglik, double deviance_at_mean) {
    detail::check_draws(loglik);
    if (!std::isfinite(deviance_at_mean))
        throw CriteriaError("non-finite plug-in deviance");
    DicResult r;
    r.dbar = -2.0 * loglik.rowwise().sum().mean();
    r.pd = r.dbar - deviance_at_mean;
    r.dic = r.dbar + r.pd;
    r.negative_pd = r.pd < 0.0;
    return r;
}

inline WaicResult waic(const Eigen::MatrixXd& loglik) {
    detail::check_draws(loglik);
    const int n = static_cast<int>(loglik.rows());
    WaicResult r;
    for (int c = 0; c < loglik.cols(); ++c) {
        double m = loglik.col(c).maxCoeff();
        double lse = m + std::log((loglik.col(c).array() - m).exp().sum());
        r.lppd += lse - std::log(static_cast<double>(n));
        double mean = loglik.col(c).mean();
        r.pwaic += (loglik.col(c).array() - mean).square().sum() / (n - 1);
    }
    r.waic = -2.0 * (r.lppd - r.pwaic);
    return r;
}

struct CriteriaRow {
    std::string prior;
    std::string interaction;
    double dbar = 0.0;
    double pd = 0.0;
    double dic = 0.0;
    double waic = 0.0;
};

// DIC/WAIC columns replaced by differences from the column minimum;
// Dbar and pD stay raw.
inline std::vector<CriteriaRow> delta_table(std::vector<CriteriaRow> rows) {
    if (rows.empty()) throw CriteriaError("delta_table: need at least one row");
    double min_dic = rows[0].dic, min_waic = rows[0].waic;
    for (const auto& r : rows) {
        min_dic = std::min(min_dic, r.dic);
        min_waic = std::min(min_waic, r.waic);
    }
    for (auto& r : rows) {
        r.dic -= min_dic;
        r.waic -= min_waic;
    }
    return rows;
}

}  // namespace stmap
