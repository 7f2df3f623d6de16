#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "credal/common.hpp"
#include "credal/types.hpp"

namespace credal {

/// Exact solution of  min_{lb <= x <= ub} max_i (offsets[i] + slopes.row(i) x).
struct BoxLpResult {
    Vector x;
    double value = 0.0;
};

namespace detail {

/// Dense two-phase tableau simplex with Bland's rule. Solves
///   min c'v  s.t.  A v = b, v >= 0,  b >= 0 after row flips.
/// Small problems only; rows and columns are a few hundred at most.
class TableauSimplex {
  public:
    TableauSimplex(Matrix a, Vector b, Vector c) : a_(std::move(a)), b_(std::move(b)), c_(std::move(c)) {}

    /// Returns the optimal v; throws on infeasibility or iteration blowup.
    Vector solve() {
        const Eigen::Index m = a_.rows();
        const Eigen::Index n = a_.cols();
        for (Eigen::Index i = 0; i < m; ++i) {
            if (b_[i] < 0.0) {
                a_.row(i) = -a_.row(i);
                b_[i] = -b_[i];
            }
        }
        // Tableau with one artificial per row; phase 1 drives them to zero.
        const Eigen::Index total = n + m;
        t_.resize(m + 1, total + 1);
        t_.setZero();
        t_.block(0, 0, m, n) = a_;
        t_.block(0, n, m, m) = Matrix::Identity(m, m);
        t_.col(total).head(m) = b_;
        basis_.assign(static_cast<std::size_t>(m), 0);
        for (Eigen::Index i = 0; i < m; ++i) basis_[static_cast<std::size_t>(i)] = n + i;
        first_artificial_ = n;

        // Phase 1 objective: sum of artificials.
        t_.row(m).setZero();
        for (Eigen::Index j = n; j < total; ++j) t_(m, j) = 1.0;
        for (Eigen::Index i = 0; i < m; ++i) t_.row(m) -= t_.row(i);
        run(total, /*allow_artificial=*/false);
        if (-t_(m, total) > 1e-7) {
            throw std::runtime_error("simplex: LP infeasible (phase 1 residual)");
        }
        // Pivot remaining artificials out of the basis where possible.
        for (Eigen::Index i = 0; i < m; ++i) {
            if (basis_[static_cast<std::size_t>(i)] >= first_artificial_) {
                for (Eigen::Index j = 0; j < n; ++j) {
                    if (std::abs(t_(i, j)) > kPivotTol) {
                        pivot(i, j);
                        break;
                    }
                }
            }
        }
        // Phase 2 objective row.
        t_.row(m).setZero();
        t_.row(m).head(n) = c_.transpose();
        for (Eigen::Index i = 0; i < m; ++i) {
            const Eigen::Index bj = basis_[static_cast<std::size_t>(i)];
            if (bj < n) t_.row(m) -= c_[bj] * t_.row(i);
        }
        run(total, /*allow_artificial=*/false);

        Vector v = Vector::Zero(n);
        for (Eigen::Index i = 0; i < m; ++i) {
            const Eigen::Index bj = basis_[static_cast<std::size_t>(i)];
            if (bj < n) v[bj] = t_(i, total);
        }
        return v;
    }

  private:
    static constexpr double kPivotTol = 1e-9;

    void run(Eigen::Index total, bool allow_artificial) {
        const Eigen::Index m = t_.rows() - 1;
        const Eigen::Index limit = allow_artificial ? total : first_artificial_;
        for (long iter = 0; iter < 100000; ++iter) {
            // Bland: entering column with the smallest index.
            Eigen::Index enter = -1;
            for (Eigen::Index j = 0; j < limit; ++j) {
                if (t_(m, j) < -kPivotTol) {
                    enter = j;
                    break;
                }
            }
            if (enter < 0) return;
            Eigen::Index leave = -1;
            double best_ratio = kInf;
            for (Eigen::Index i = 0; i < m; ++i) {
                const double aij = t_(i, enter);
                if (aij > kPivotTol) {
                    const double ratio = t_(i, total) / aij;
                    if (ratio < best_ratio - 1e-12 ||
                        (ratio < best_ratio + 1e-12 && leave >= 0 &&
                         basis_[static_cast<std::size_t>(i)] <
                             basis_[static_cast<std::size_t>(leave)])) {
                        best_ratio = ratio;
                        leave = i;
                    }
                }
            }
            if (leave < 0) throw std::runtime_error("simplex: LP unbounded");
            pivot(leave, enter);
        }
        throw std::runtime_error("simplex: iteration limit exceeded");
    }

    void pivot(Eigen::Index row, Eigen::Index col) {
        t_.row(row) /= t_(row, col);
        for (Eigen::Index i = 0; i < t_.rows(); ++i) {
            if (i != row && std::abs(t_(i, col)) > 0.0) t_.row(i) -= t_(i, col) * t_.row(row);
        }
        basis_[static_cast<std::size_t>(row)] = col;
    }

    Matrix a_;
    Vector b_;
    Vector c_;
    Matrix t_;
    std::vector<Eigen::Index> basis_;
    Eigen::Index first_artificial_ = 0;
};

}  // namespace detail

/// min_{x in [lb, ub]} max_i (offsets[i] + slopes.row(i) x), solved exactly as
/// an LP in (x, theta). Rows are scaled to unit infinity norm for numerics.
inline BoxLpResult minimize_max_affine_over_box(const Matrix& slopes, const Vector& offsets,
                                                const Vector& lb, const Vector& ub) {
    const Eigen::Index k = slopes.rows();
    const Eigen::Index d = slopes.cols();
    if (k < 1 || offsets.size() != k) {
        throw std::invalid_argument("minimize_max_affine_over_box: bad cut count");
    }
    if (lb.size() != d || ub.size() != d) {
        throw std::invalid_argument("minimize_max_affine_over_box: box dimension mismatch");
    }
    for (Eigen::Index j = 0; j < d; ++j) {
        if (!(lb[j] <= ub[j])) {
            throw std::invalid_argument("minimize_max_affine_over_box: empty box");
        }
        if (!std::isfinite(lb[j]) || !std::isfinite(ub[j])) {
            throw std::invalid_argument("minimize_max_affine_over_box: box must be bounded");
        }
    }

    // Shift to z = x - lb in [0, r]. Variables: [z (d), theta+, theta-,
    // cut slacks (k), bound slacks (d)].
    const Vector r = ub - lb;
    const Eigen::Index nv = d + 2 + k + d;
    Matrix a = Matrix::Zero(k + d, nv);
    Vector b(k + d);
    Vector c = Vector::Zero(nv);
    c[d] = 1.0;
    c[d + 1] = -1.0;
    for (Eigen::Index i = 0; i < k; ++i) {
        const double ci = offsets[i] + slopes.row(i).dot(lb);
        double scale = std::max(1.0, slopes.row(i).cwiseAbs().maxCoeff());
        a.row(i).head(d) = slopes.row(i) / scale;
        a(i, d) = -1.0 / scale;
        a(i, d + 1) = 1.0 / scale;
        a(i, d + 2 + i) = 1.0;
        b[i] = -ci / scale;
    }
    for (Eigen::Index j = 0; j < d; ++j) {
        a(k + j, j) = 1.0;
        a(k + j, d + 2 + k + j) = 1.0;
        b[k + j] = r[j];
    }
    detail::TableauSimplex simplex(std::move(a), std::move(b), std::move(c));
    Vector v = simplex.solve();
    BoxLpResult result;
    result.x = lb + v.head(d);
    // Clamp away float fuzz so callers can rely on membership.
    result.x = result.x.cwiseMax(lb).cwiseMin(ub);
    double theta = -kInf;
    for (Eigen::Index i = 0; i < k; ++i) {
        theta = std::max(theta, offsets[i] + slopes.row(i).dot(result.x));
    }
    result.value = theta;
    return result;
}

}  // namespace credal
