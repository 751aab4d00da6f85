#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <vector>

#include "stmap/errors.hpp"

namespace stmap {

// Takahashi partial inversion: entries of H^{-1} on the fill-in pattern of
// the sparse LDL^T factor. Covers every (i,j) that is structurally nonzero
// in H, which is all the pairs needed for latent and linear-predictor
// marginal variances.
class PartialInverse {
  public:
    using Factor = Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>;

    explicit PartialInverse(const Factor& factor) {
        Eigen::SparseMatrix<double> L = factor.matrixL();
        n_ = static_cast<int>(L.rows());
        perm_ = factor.permutationP().indices();
        const Eigen::VectorXd& d = factor.vectorD();

        // CSC copy of the strictly-lower pattern, plus the diagonal slot.
        col_ptr_.assign(n_ + 1, 0);
        const int* outer = L.outerIndexPtr();
        const int* inner = L.innerIndexPtr();
        const double* vals = L.valuePtr();
        row_idx_.reserve(L.nonZeros());
        lval_.reserve(L.nonZeros());
        for (int j = 0; j < n_; ++j) {
            col_ptr_[j] = static_cast<int>(row_idx_.size());
            for (int p = outer[j]; p < outer[j + 1]; ++p) {
                row_idx_.push_back(inner[p]);
                lval_.push_back(vals[p]);
            }
        }
        col_ptr_[n_] = static_cast<int>(row_idx_.size());
        zval_.assign(row_idx_.size(), 0.0);

        // Z_ij = delta_ij / d_j - sum_{k in col j, k > j} L_kj * Z_(i,k),
        // columns processed right to left, rows bottom up.
        for (int j = n_ - 1; j >= 0; --j) {
            int begin = col_ptr_[j], end = col_ptr_[j + 1];
            for (int p = end - 1; p >= begin; --p) {
                int i = row_idx_[p];
                double sum = (i == j) ? 1.0 / d[j] : 0.0;
                for (int q = begin; q < end; ++q) {
                    int k = row_idx_[q];
                    if (k <= j) continue;
                    sum -= lval_[q] * lookup_permuted(std::max(i, k), std::min(i, k));
                }
                zval_[p] = sum;
            }
        }
    }

    // H^{-1} diagonal entry, original (unpermuted) index.
    double diag(int i) const {
        double v = 0.0;
        find(perm_[i], perm_[i], v);
        return v;
    }

    // H^{-1}(i,j) in original indices; false when outside the factor pattern.
    bool entry(int i, int j, double& out) const {
        int pi = perm_[i], pj = perm_[j];
        if (pi < pj) std::swap(pi, pj);
        return find(pi, pj, out);
    }

    int size() const { return n_; }

  private:
    bool find(int row, int col, double& out) const {
        auto begin = row_idx_.begin() + col_ptr_[col];
        auto end = row_idx_.begin() + col_ptr_[col + 1];
        auto it = std::lower_bound(begin, end, row);
        if (it == end || *it != row) return false;
        out = zval_[it - row_idx_.begin()];
        return true;
    }

    double lookup_permuted(int row, int col) const {
        double v = 0.0;
        if (!find(row, col, v))
            throw FitError("partial inverse: factor pattern is not fill-in closed");
        return v;
    }

    int n_ = 0;
    Eigen::Matrix<int, Eigen::Dynamic, 1> perm_;
    std::vector<int> col_ptr_;
    std::vector<int> row_idx_;
    std::vector<double> lval_;
    std::vector<double> zval_;
};

}  // namespace stmap
