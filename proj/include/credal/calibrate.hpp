#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "credal/common.hpp"
#include "credal/rng.hpp"
#include "credal/types.hpp"

namespace credal {

// ---------------------------------------------------------------------------
// Score functions
// ---------------------------------------------------------------------------

/// s(xi) = ||L^{-1}(xi - center)||_2.
struct MahalanobisScore {
    Vector center;
    Matrix factor;  // lower Cholesky factor of the fitted covariance
};

/// s(xi) = max_i |xi_i - center_i| / scale_i.
struct ScaledBoxScore {
    Vector center;
    Vector scale;
};

using ScoreFunction = std::variant<MahalanobisScore, ScaledBoxScore>;

inline double score_value(const ScoreFunction& score, const Vector& xi) {
    if (std::holds_alternative<MahalanobisScore>(score)) {
        const auto& s = std::get<MahalanobisScore>(score);
        if (xi.size() != s.center.size()) throw std::invalid_argument("score_value: dimension mismatch");
        return s.factor.triangularView<Eigen::Lower>().solve(xi - s.center).norm();
    }
    const auto& s = std::get<ScaledBoxScore>(score);
    if (xi.size() != s.center.size()) throw std::invalid_argument("score_value: dimension mismatch");
    return ((xi - s.center).cwiseAbs().array() / s.scale.array()).maxCoeff();
}

/// Sub-level set {xi : s(xi) <= t} as a BulkSet; membership is equivalent to
/// score_value(score, xi) <= t for every xi and t >= 0.
inline BulkSet score_bulk(const ScoreFunction& score, double threshold) {
    if (std::holds_alternative<MahalanobisScore>(score)) {
        const auto& s = std::get<MahalanobisScore>(score);
        return make_ellipsoid_bulk(s.center, s.factor, threshold);
    }
    const auto& s = std::get<ScaledBoxScore>(score);
    return make_box_bulk(s.center, s.scale, threshold);
}

inline std::vector<double> score_values(const ScoreFunction& score, const OutcomeMatrix& data) {
    std::vector<double> out(static_cast<std::size_t>(data.rows()));
    for (Eigen::Index i = 0; i < data.rows(); ++i) {
        out[static_cast<std::size_t>(i)] = score_value(score, data.row(i));
    }
    return out;
}

enum class BulkGeometry { Ellipsoid, Box };

/// Fit a score function on the score-fitting split only. Mahalanobis uses the
/// sample mean and (sample covariance + ridge I); ScaledBox uses per-coordinate
/// sample standard deviations floored at the ridge.
inline ScoreFunction fit_score(const OutcomeMatrix& data_fit, BulkGeometry geometry,
                               double ridge = defaults().covariance_ridge) {
    const Eigen::Index n = data_fit.rows();
    const Eigen::Index d = data_fit.dim();
    if (n < d + 1) {
        throw std::invalid_argument("fit_score: need at least d + 1 rows, got n = " +
                                    std::to_string(n) + ", d = " + std::to_string(d));
    }
    const Matrix& x = data_fit.values();
    Vector mean = x.colwise().mean().transpose();
    Matrix centered = x.rowwise() - mean.transpose();
    if (geometry == BulkGeometry::Ellipsoid) {
        Matrix cov = centered.transpose() * centered / static_cast<double>(n - 1);
        cov += ridge * Matrix::Identity(d, d);
        Eigen::LLT<Matrix> llt(cov);
        if (llt.info() != Eigen::Success) {
            Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
            throw std::runtime_error("fit_score: Cholesky failed after ridge; smallest eigenvalue " +
                                     std::to_string(eig.eigenvalues().minCoeff()));
        }
        return MahalanobisScore{std::move(mean), llt.matrixL()};
    }
    Vector sd = (centered.array().square().colwise().sum() / static_cast<double>(n - 1))
                    .sqrt()
                    .transpose();
    sd = sd.cwiseMax(ridge);
    return ScaledBoxScore{std::move(mean), std::move(sd)};
}

// ---------------------------------------------------------------------------
// DKW threshold selection
// ---------------------------------------------------------------------------

/// r_{m,delta} = sqrt(log(2/delta) / (2m)).
inline double dkw_radius(int m, double delta) {
    if (m < 1) throw std::invalid_argument("dkw_radius: m must be >= 1");
    if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("dkw_radius: delta must lie in (0,1)");
    return std::sqrt(std::log(2.0 / delta) / (2.0 * static_cast<double>(m)));
}

/// Smallest m with r_{m,delta} <= gamma, i.e. ceil(log(2/delta) / (2 gamma^2)).
inline int min_selection_size(double gamma, double delta) {
    if (!(gamma > 0.0 && gamma < 1.0) || !(delta > 0.0 && delta < 1.0)) {
        throw std::invalid_argument("min_selection_size: gamma, delta must lie in (0,1)");
    }
    const double raw = std::log(2.0 / delta) / (2.0 * gamma * gamma);
    return static_cast<int>(std::ceil(raw - 1e-12));
}

/// DKW-selected threshold with its certificate metadata. When certified, the
/// threshold equals the j*-th order statistic with j* = ceil(m(1 - gamma + r)),
/// and Pr{ P*(Xi_0(t)) >= 1 - gamma } >= 1 - delta for i.i.d. selection scores
/// independent of the score fit.
struct CalibrationResult {
    double threshold = kNan;
    double gamma = 0.0;
    double delta = 0.0;
    int m = 0;
    double r_mdelta = 0.0;
    int selected_index = 0;  // 1-based j*; 0 when uncertified
    bool certified = false;
    double smallest_certifiable_gamma = 0.0;
};

inline CalibrationResult select_threshold(std::vector<double> selection_scores, double gamma,
                                          double delta) {
    if (selection_scores.empty()) throw std::invalid_argument("select_threshold: empty score set");
    if (!(gamma > 0.0 && gamma < 1.0) || !(delta > 0.0 && delta < 1.0)) {
        throw std::invalid_argument("select_threshold: gamma, delta must lie in (0,1)");
    }
    const int m = static_cast<int>(selection_scores.size());
    CalibrationResult result;
    result.gamma = gamma;
    result.delta = delta;
    result.m = m;
    result.r_mdelta = dkw_radius(m, delta);
    result.smallest_certifiable_gamma = result.r_mdelta;
    if (gamma < result.r_mdelta) {
        result.certified = false;
        return result;
    }
    std::sort(selection_scores.begin(), selection_scores.end());
    // Nudged ceil so that values landing within 1e-12 of an integer resolve to
    // that integer (index arithmetic at exact data-point boundaries).
    const double raw = static_cast<double>(m) * (1.0 - gamma + result.r_mdelta);
    int jstar = static_cast<int>(std::ceil(raw - 1e-12));
    jstar = std::max(1, std::min(m, jstar));
    result.selected_index = jstar;
    result.threshold = selection_scores[static_cast<std::size_t>(jstar - 1)];
    result.certified = true;
    return result;
}

/// Per-block DKW selections plus the union-bound aggregate certificate
/// (sum gamma_i, sum delta_i); the aggregate is certified only when every
/// block is.
struct BlockwiseCalibration {
    std::vector<CalibrationResult> blocks;
    double total_gamma = 0.0;
    double total_delta = 0.0;
    bool certified = false;
};

inline BlockwiseCalibration calibrate_blockwise(
    const std::vector<std::vector<double>>& block_scores,
    const std::vector<std::pair<double, double>>& budgets) {
    if (block_scores.empty()) throw std::invalid_argument("calibrate_blockwise: need at least one block");
    if (block_scores.size() != budgets.size()) {
        throw std::invalid_argument("calibrate_blockwise: one (gamma, delta) budget per block required");
    }
    BlockwiseCalibration out;
    out.certified = true;
    for (std::size_t i = 0; i < block_scores.size(); ++i) {
        CalibrationResult r = select_threshold(block_scores[i], budgets[i].first, budgets[i].second);
        out.total_gamma += r.gamma;
        out.total_delta += r.delta;
        out.certified = out.certified && r.certified;
        out.blocks.push_back(std::move(r));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Data splitting
// ---------------------------------------------------------------------------

struct SplitData {
    OutcomeMatrix fit;
    OutcomeMatrix select;
};

/// Seeded random split into score-fitting and selection parts.
inline SplitData split_fit_select(const OutcomeMatrix& data, double fit_fraction,
                                  std::uint64_t seed) {
    if (!(fit_fraction > 0.0 && fit_fraction < 1.0)) {
        throw std::invalid_argument("split_fit_select: fit_fraction must lie in (0,1)");
    }
    const Eigen::Index n = data.rows();
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    Rng rng(seed);
    for (std::size_t i = idx.size(); i > 1; --i) {
        std::swap(idx[i - 1], idx[rng.uniform_index(i)]);
    }
    const Eigen::Index n_fit = std::max<Eigen::Index>(
        1, std::min<Eigen::Index>(n - 1, static_cast<Eigen::Index>(std::floor(
                                             fit_fraction * static_cast<double>(n)))));
    Matrix fit(n_fit, data.dim());
    Matrix select(n - n_fit, data.dim());
    for (Eigen::Index i = 0; i < n_fit; ++i) fit.row(i) = data.values().row(idx[static_cast<std::size_t>(i)]);
    for (Eigen::Index i = n_fit; i < n; ++i) {
        select.row(i - n_fit) = data.values().row(idx[static_cast<std::size_t>(i)]);
    }
    return SplitData{OutcomeMatrix(std::move(fit)), OutcomeMatrix(std::move(select))};
}

// ---------------------------------------------------------------------------
// Centre-mismatch diagnostics
// ---------------------------------------------------------------------------

/// Inputs for the score-based lower bound on the in-bulk centre mismatch:
/// empirical CDF values of the training-law and centre scores at a common
/// increasing threshold grid, with the outermost threshold defining the bulk.
struct EpsilonDiagnostics {
    std::vector<double> thresholds;  // t_1 < ... < t_K
    std::vector<double> train_cdf;   // \hat p*_k over m selection scores
    std::vector<double> centre_cdf;  // \hat p^g_k over N_c centre scores
    int m = 0;
    int centre_n = 0;
    double gamma = 0.0;
    double delta = 0.0;
};

/// High-probability lower bound on eps_c. Returns
///   max over k with \hat p^g_k > r_c of
///   [1 - (\hat p*_k + r_m)(\hat p^g_K + r_c) / ((1-gamma)(\hat p^g_k - r_c))]_+
/// with r_m = sqrt(log(4/delta)/(2m)) and r_c = sqrt(log(4/delta)/(2 N_c)),
/// zero when no threshold qualifies; clamped to [0,1].
inline double eps_c_lower_bound(const EpsilonDiagnostics& diag) {
    const std::size_t k_count = diag.thresholds.size();
    if (k_count == 0) throw std::invalid_argument("eps_c_lower_bound: empty threshold grid");
    if (diag.train_cdf.size() != k_count || diag.centre_cdf.size() != k_count) {
        throw std::invalid_argument("eps_c_lower_bound: CDF grids must match the threshold grid");
    }
    if (diag.m < 1 || diag.centre_n < 1) {
        throw std::invalid_argument("eps_c_lower_bound: need samples from both laws");
    }
    if (!(diag.gamma >= 0.0 && diag.gamma < 1.0)) {
        throw std::invalid_argument("eps_c_lower_bound: gamma must lie in [0,1)");
    }
    const double r_m = dkw_radius(diag.m, diag.delta / 2.0);
    const double r_c = dkw_radius(diag.centre_n, diag.delta / 2.0);
    const double centre_bulk = diag.centre_cdf.back() + r_c;
    double best = 0.0;
    for (std::size_t k = 0; k < k_count; ++k) {
        const double pg = diag.centre_cdf[k];
        if (!(pg > r_c)) continue;
        const double ratio =
            (diag.train_cdf[k] + r_m) * centre_bulk / ((1.0 - diag.gamma) * (pg - r_c));
        best = std::max(best, 1.0 - ratio);
    }
    return std::min(1.0, std::max(0.0, best));
}

/// Build diagnostics from raw scores with a K-point threshold grid placed at
/// equally spaced empirical quantiles of the selection scores.
inline EpsilonDiagnostics make_eps_diagnostics(std::vector<double> train_scores,
                                               std::vector<double> centre_scores, double gamma,
                                               double delta, int grid_size = 20) {
    if (train_scores.empty() || centre_scores.empty()) {
        throw std::invalid_argument("make_eps_diagnostics: empty score set");
    }
    if (grid_size < 1) throw std::invalid_argument("make_eps_diagnostics: grid_size must be >= 1");
    std::sort(train_scores.begin(), train_scores.end());
    std::sort(centre_scores.begin(), centre_scores.end());
    EpsilonDiagnostics diag;
    diag.m = static_cast<int>(train_scores.size());
    diag.centre_n = static_cast<int>(centre_scores.size());
    diag.gamma = gamma;
    diag.delta = delta;
    const std::size_t m = train_scores.size();
    for (int k = 1; k <= grid_size; ++k) {
        const std::size_t idx = std::min(
            m - 1, static_cast<std::size_t>(std::ceil(
                       static_cast<double>(k) / grid_size * static_cast<double>(m))) -
                       1);
        const double t = train_scores[idx];
        if (!diag.thresholds.empty() && t <= diag.thresholds.back()) continue;
        diag.thresholds.push_back(t);
    }
    auto ecdf = [](const std::vector<double>& sorted, double t) {
        return static_cast<double>(std::upper_bound(sorted.begin(), sorted.end(), t) -
                                   sorted.begin()) /
               static_cast<double>(sorted.size());
    };
    for (double t : diag.thresholds) {
        diag.train_cdf.push_back(ecdf(train_scores, t));
        diag.centre_cdf.push_back(ecdf(centre_scores, t));
    }
    return diag;
}

// ---------------------------------------------------------------------------
// LV distortion on finite supports
// ---------------------------------------------------------------------------

namespace detail {

/// Union the supports of Q and P (exact atom-value matching, zero padding).
inline std::pair<std::vector<double>, std::vector<double>> aligned_probs(
    const DiscreteDistribution& q, const DiscreteDistribution& p) {
    std::vector<double> atoms;
    atoms.reserve(q.size() + p.size());
    atoms.insert(atoms.end(), q.atoms.begin(), q.atoms.end());
    atoms.insert(atoms.end(), p.atoms.begin(), p.atoms.end());
    std::sort(atoms.begin(), atoms.end());
    atoms.erase(std::unique(atoms.begin(), atoms.end()), atoms.end());
    std::vector<double> qp(atoms.size(), 0.0), pp(atoms.size(), 0.0);
    auto place = [&atoms](std::vector<double>& dst, const DiscreteDistribution& src) {
        for (std::size_t i = 0; i < src.size(); ++i) {
            const auto it = std::lower_bound(atoms.begin(), atoms.end(), src.atoms[i]);
            dst[static_cast<std::size_t>(it - atoms.begin())] += src.probs[i];
        }
    };
    place(qp, q);
    place(pp, p);
    return {std::move(qp), std::move(pp)};
}

}  // namespace detail

/// LV distortion on a finite support: 1 - min over positive-mass atoms of
/// q_i / p_i. Tiny negative values from rounding (Q identical to P) clamp to 0.
inline double lv_distortion_discrete(const DiscreteDistribution& q, const DiscreteDistribution& p) {
    auto [qp, pp] = detail::aligned_probs(q, p);
    bool any = false;
    double min_ratio = kInf;
    for (std::size_t i = 0; i < pp.size(); ++i) {
        if (pp[i] > 0.0) {
            any = true;
            min_ratio = std::min(min_ratio, qp[i] / pp[i]);
        }
    }
    if (!any) throw std::invalid_argument("lv_distortion_discrete: P has no positive-mass atom");
    double value = 1.0 - min_ratio;
    if (value < 0.0 && value > -defaults().prob_sum_tol) value = 0.0;
    return value;
}

/// Event-wise definition: max over all nonempty subsets A with P(A) > 0 of
/// (P(A) - Q(A)) / P(A). Exponential enumeration, capped at 20 atoms.
inline double lv_distortion_bruteforce(const DiscreteDistribution& q,
                                       const DiscreteDistribution& p) {
    auto [qp, pp] = detail::aligned_probs(q, p);
    const std::size_t n = pp.size();
    if (n > 20) throw std::invalid_argument("lv_distortion_bruteforce: capped at 20 atoms");
    double best = -kInf;
    bool any = false;
    for (std::size_t mask = 1; mask < (std::size_t{1} << n); ++mask) {
        double pa = 0.0, qa = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if ((mask >> i) & 1) {
                pa += pp[i];
                qa += qp[i];
            }
        }
        if (pa > 0.0) {
            any = true;
            best = std::max(best, (pa - qa) / pa);
        }
    }
    if (!any) throw std::invalid_argument("lv_distortion_bruteforce: P has no positive-mass atom");
    if (best < 0.0 && best > -defaults().prob_sum_tol) best = 0.0;
    return best;
}

}  // namespace credal
