#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "stmap/errors.hpp"

namespace stmap {

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z * M_SQRT1_2); }

// Weighted mixture of normals; weights assumed normalized.
inline double mixture_cdf(const Eigen::VectorXd& weights, const Eigen::VectorXd& means,
                          const Eigen::VectorXd& sds, double x) {
    double c = 0.0;
    for (int g = 0; g < weights.size(); ++g) {
        double sd = sds[g];
        c += weights[g] * (sd > 0.0 ? normal_cdf((x - means[g]) / sd)
                                    : (x >= means[g] ? 1.0 : 0.0));
    }
    return c;
}

// Quantile by bisection on the mixture CDF.
inline double mixture_quantile(const Eigen::VectorXd& weights, const Eigen::VectorXd& means,
                               const Eigen::VectorXd& sds, double p) {
    double lo = means[0], hi = means[0];
    for (int g = 0; g < weights.size(); ++g) {
        lo = std::min(lo, means[g] - 10.0 * sds[g] - 1e-12);
        hi = std::max(hi, means[g] + 10.0 * sds[g] + 1e-12);
    }
    for (int it = 0; it < 200 && hi - lo > 1e-12 * std::max(1.0, std::abs(lo) + std::abs(hi));
         ++it) {
        double mid = 0.5 * (lo + hi);
        if (mixture_cdf(weights, means, sds, mid) < p) lo = mid;
        else hi = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace stmap
