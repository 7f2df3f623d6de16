#pragma once

#include <algorithm>
#include <cmath>
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
// Centre samplers
// ---------------------------------------------------------------------------

/// Resamples rows of the stored data with replacement.
struct EmpiricalCentre {
    OutcomeMatrix data;
};

/// Semiparametric plug-in law for (X, Y): Gaussian copula with empirical
/// marginals over the covariates plus a homoscedastic Gaussian linear
/// regression head for the response. Draws have dimension d + 1.
struct GaussianCopulaCentre {
    std::vector<std::vector<double>> marginals;  // sorted fitting values per coordinate
    Matrix latent_factor;                        // lower Cholesky of Cov(Z) + jitter I
    double jitter = 0.0;
    Vector head_w;
    double head_b = 0.0;
    double sigma_y = 0.0;
};

/// Student-t posterior predictive: retained Gibbs states (mu, chol(Sigma));
/// each predictive draw uses one state cyclically.
struct StudentTPredictiveCentre {
    double nu = 3.0;
    std::vector<std::pair<Vector, Matrix>> states;
    int burn_in = 0;
    double ridge = 0.0;
};

using CentreSampler = std::variant<EmpiricalCentre, GaussianCopulaCentre, StudentTPredictiveCentre>;

inline Eigen::Index centre_dim(const CentreSampler& sampler) {
    struct Visitor {
        Eigen::Index operator()(const EmpiricalCentre& c) const { return c.data.dim(); }
        Eigen::Index operator()(const GaussianCopulaCentre& c) const {
            return static_cast<Eigen::Index>(c.marginals.size()) + 1;
        }
        Eigen::Index operator()(const StudentTPredictiveCentre& c) const {
            return c.states.empty() ? 0 : c.states.front().first.size();
        }
    };
    return std::visit(Visitor{}, sampler);
}

namespace detail {

/// Left-continuous generalized inverse of the empirical CDF over sorted
/// fitting values: F^{-1}(u) = sorted[ceil(u n) - 1].
inline double empirical_inverse_cdf(const std::vector<double>& sorted, double u) {
    const std::size_t n = sorted.size();
    const double raw = std::ceil(u * static_cast<double>(n));
    std::size_t idx = raw <= 1.0 ? 0 : static_cast<std::size_t>(raw) - 1;
    if (idx >= n) idx = n - 1;
    return sorted[idx];
}

inline Vector draw_student_t(const Vector& mu, const Matrix& chol, double nu, Rng& rng) {
    Vector z(mu.size());
    for (Eigen::Index j = 0; j < z.size(); ++j) z[j] = rng.normal();
    const double g = rng.chi_square(nu);
    return mu + (chol * z) / std::sqrt(g / nu);
}

}  // namespace detail

/// k i.i.d. draws; identical (sampler, k, seed) triples produce bit-identical
/// matrices.
inline OutcomeMatrix sample_centre(const CentreSampler& sampler, int k, std::uint64_t seed) {
    if (k < 1) throw std::invalid_argument("sample_centre: k must be >= 1");
    Rng rng(seed);
    if (std::holds_alternative<EmpiricalCentre>(sampler)) {
        const auto& c = std::get<EmpiricalCentre>(sampler);
        Matrix out(k, c.data.dim());
        for (int i = 0; i < k; ++i) {
            out.row(i) = c.data.values().row(
                static_cast<Eigen::Index>(rng.uniform_index(static_cast<std::size_t>(c.data.rows()))));
        }
        return OutcomeMatrix(std::move(out));
    }
    if (std::holds_alternative<GaussianCopulaCentre>(sampler)) {
        const auto& c = std::get<GaussianCopulaCentre>(sampler);
        if (c.marginals.empty()) throw std::runtime_error("sample_centre: copula centre is unfitted");
        const Eigen::Index d = static_cast<Eigen::Index>(c.marginals.size());
        Matrix out(k, d + 1);
        Vector z(d);
        for (int i = 0; i < k; ++i) {
            for (Eigen::Index j = 0; j < d; ++j) z[j] = rng.normal();
            Vector latent = c.latent_factor * z;
            Vector x(d);
            for (Eigen::Index j = 0; j < d; ++j) {
                x[j] = detail::empirical_inverse_cdf(c.marginals[static_cast<std::size_t>(j)],
                                                     normal_cdf(latent[j]));
            }
            const double y = c.head_w.dot(x) + c.head_b + c.sigma_y * rng.normal();
            out.row(i).head(d) = x.transpose();
            out(i, d) = y;
        }
        return OutcomeMatrix(std::move(out));
    }
    const auto& c = std::get<StudentTPredictiveCentre>(sampler);
    if (c.states.empty()) throw std::runtime_error("sample_centre: predictive centre has no states");
    const Eigen::Index d = c.states.front().first.size();
    Matrix out(k, d);
    for (int i = 0; i < k; ++i) {
        const auto& [mu, chol] = c.states[static_cast<std::size_t>(i) % c.states.size()];
        out.row(i) = detail::draw_student_t(mu, chol, c.nu, rng).transpose();
    }
    return OutcomeMatrix(std::move(out));
}

// ---------------------------------------------------------------------------
// Copula fitting
// ---------------------------------------------------------------------------

/// Fit the Gaussian-copula centre: pseudo-observations U_ij = F^_j(X_ij)
/// clipped to [1/(n+1), n/(n+1)], mapped through the normal quantile; latent
/// covariance plus jitter; OLS head (w, b) with residual scale sigma_Y.
inline CentreSampler fit_copula_centre(const OutcomeMatrix& x, const Vector& y, double jitter) {
    const Eigen::Index n = x.rows();
    const Eigen::Index d = x.dim();
    if (y.size() != n) throw std::invalid_argument("fit_copula_centre: y length mismatch");
    if (n < d + 2) throw std::invalid_argument("fit_copula_centre: need at least d + 2 rows");
    if (!(jitter >= 0.0)) throw std::invalid_argument("fit_copula_centre: jitter must be >= 0");

    GaussianCopulaCentre c;
    c.jitter = jitter;
    c.marginals.resize(static_cast<std::size_t>(d));
    Matrix latent(n, d);
    const double lo = 1.0 / static_cast<double>(n + 1);
    const double hi = static_cast<double>(n) / static_cast<double>(n + 1);
    for (Eigen::Index j = 0; j < d; ++j) {
        auto& sorted = c.marginals[static_cast<std::size_t>(j)];
        sorted.resize(static_cast<std::size_t>(n));
        for (Eigen::Index i = 0; i < n; ++i) sorted[static_cast<std::size_t>(i)] = x.values()(i, j);
        std::sort(sorted.begin(), sorted.end());
        for (Eigen::Index i = 0; i < n; ++i) {
            const double v = x.values()(i, j);
            const double rank = static_cast<double>(
                std::upper_bound(sorted.begin(), sorted.end(), v) - sorted.begin());
            const double u = std::min(hi, std::max(lo, rank / static_cast<double>(n)));
            latent(i, j) = normal_quantile(u);
        }
    }
    Vector lmean = latent.colwise().mean().transpose();
    Matrix lc = latent.rowwise() - lmean.transpose();
    Matrix cov = lc.transpose() * lc / static_cast<double>(n - 1);
    cov += jitter * Matrix::Identity(d, d);
    Eigen::LLT<Matrix> llt(cov);
    if (llt.info() != Eigen::Success) {
        throw std::runtime_error("fit_copula_centre: latent covariance singular after jitter " +
                                 std::to_string(jitter));
    }
    c.latent_factor = llt.matrixL();

    // OLS head on (X, y) with intercept.
    Matrix design(n, d + 1);
    design.leftCols(d) = x.values();
    design.col(d).setOnes();
    Vector beta = (design.transpose() * design)
                      .ldlt()
                      .solve(design.transpose() * y);
    c.head_w = beta.head(d);
    c.head_b = beta[d];
    const Vector resid = y - design * beta;
    c.sigma_y = std::sqrt(resid.squaredNorm() / static_cast<double>(n));
    return c;
}

// ---------------------------------------------------------------------------
// Student-t Gibbs fitting
// ---------------------------------------------------------------------------

/// Normal-inverse-Wishart prior. `weak_from_data` uses the sample mean,
/// kappa0 = 1, nu0 = d + 2, Psi0 = sample covariance.
struct NiwPrior {
    Vector mu0;
    double kappa0 = 1.0;
    Matrix psi0;
    double nu0 = 0.0;

    static NiwPrior weak_from_data(const OutcomeMatrix& data) {
        const Eigen::Index n = data.rows();
        const Eigen::Index d = data.dim();
        NiwPrior prior;
        prior.mu0 = data.values().colwise().mean().transpose();
        prior.kappa0 = 1.0;
        prior.nu0 = static_cast<double>(d) + 2.0;
        Matrix centered = data.values().rowwise() - prior.mu0.transpose();
        prior.psi0 = centered.transpose() * centered / static_cast<double>(n - 1);
        return prior;
    }
};

namespace detail {

/// Inverse-Wishart draw via the Bartlett decomposition: Sigma = F F' with
/// F = chol(Psi) * A^{-T}, where A A' ~ Wishart(I, dof).
inline Matrix draw_inverse_wishart_factor(const Matrix& psi_chol, double dof, Rng& rng) {
    const Eigen::Index d = psi_chol.rows();
    Matrix a = Matrix::Zero(d, d);
    for (Eigen::Index i = 0; i < d; ++i) {
        a(i, i) = std::sqrt(rng.chi_square(dof - static_cast<double>(i)));
        for (Eigen::Index j = 0; j < i; ++j) a(i, j) = rng.normal();
    }
    Matrix f = a.transpose()
                   .triangularView<Eigen::Upper>()
                   .solve<Eigen::OnTheRight>(psi_chol);
    return f;  // general square root, F F' = Sigma
}

}  // namespace detail

/// Gibbs sampler for the Student-t likelihood with an NIW prior, alternating
/// latent Gamma weights and the weighted conjugate (mu, Sigma) update. Retains
/// the post-burn-in states as a StudentTPredictiveCentre.
inline CentreSampler fit_student_t_gibbs(const OutcomeMatrix& data, double nu,
                                         const std::optional<NiwPrior>& prior_in, int iters,
                                         int burn_in, double ridge, std::uint64_t seed) {
    const Eigen::Index n = data.rows();
    const Eigen::Index d = data.dim();
    if (!(nu > 0.0)) throw std::invalid_argument("fit_student_t_gibbs: nu must be positive");
    if (!(iters > burn_in) || burn_in < 0) {
        throw std::invalid_argument("fit_student_t_gibbs: need iters > burn_in >= 0");
    }
    if (n <= d) throw std::invalid_argument("fit_student_t_gibbs: need n > d rows");
    const NiwPrior prior = prior_in ? *prior_in : NiwPrior::weak_from_data(data);
    if (prior.mu0.size() != d || prior.psi0.rows() != d || prior.psi0.cols() != d) {
        throw std::invalid_argument("fit_student_t_gibbs: prior dimension mismatch");
    }

    Rng rng(seed);
    const Matrix& x = data.values();
    Vector mu = x.colwise().mean().transpose();
    Matrix centered = x.rowwise() - mu.transpose();
    Matrix sigma = centered.transpose() * centered / static_cast<double>(n - 1) +
                   ridge * Matrix::Identity(d, d);
    Eigen::LLT<Matrix> init_llt(sigma);
    if (init_llt.info() != Eigen::Success) {
        throw std::runtime_error("fit_student_t_gibbs: initial covariance not positive definite");
    }
    Matrix sigma_chol = init_llt.matrixL();

    StudentTPredictiveCentre centre;
    centre.nu = nu;
    centre.burn_in = burn_in;
    centre.ridge = ridge;
    centre.states.reserve(static_cast<std::size_t>(iters - burn_in));

    Vector weights(n);
    const double shape = 0.5 * (nu + static_cast<double>(d));
    for (int it = 0; it < iters; ++it) {
        // Latent weights w_i | mu, Sigma ~ Gamma((nu+d)/2, (nu+m_i)/2).
        for (Eigen::Index i = 0; i < n; ++i) {
            const double m_i =
                sigma_chol.triangularView<Eigen::Lower>().solve(x.row(i).transpose() - mu).squaredNorm();
            weights[i] = rng.gamma(shape) / (0.5 * (nu + m_i));
        }
        // Weighted NIW conjugate update for (mu, Sigma).
        const double wsum = weights.sum();
        Vector xbar = (x.transpose() * weights) / wsum;
        Matrix dev = x.rowwise() - xbar.transpose();
        Matrix scatter = dev.transpose() * (weights.asDiagonal() * dev);
        const double kappa_n = prior.kappa0 + wsum;
        const double nu_n = prior.nu0 + static_cast<double>(n);
        Vector mu_n = (prior.kappa0 * prior.mu0 + wsum * xbar) / kappa_n;
        Vector gap = xbar - prior.mu0;
        Matrix psi_n = prior.psi0 + scatter +
                       (prior.kappa0 * wsum / kappa_n) * (gap * gap.transpose()) +
                       ridge * Matrix::Identity(d, d);
        Eigen::LLT<Matrix> psi_llt(psi_n);
        if (psi_llt.info() != Eigen::Success) {
            throw std::runtime_error("fit_student_t_gibbs: Cholesky of the scale matrix failed after ridge");
        }
        Matrix f = detail::draw_inverse_wishart_factor(psi_llt.matrixL(), nu_n, rng);
        sigma = f * f.transpose();
        Eigen::LLT<Matrix> sigma_llt(sigma);
        if (sigma_llt.info() != Eigen::Success) {
            throw std::runtime_error("fit_student_t_gibbs: sampled scale matrix not positive definite");
        }
        sigma_chol = sigma_llt.matrixL();
        Vector z(d);
        for (Eigen::Index j = 0; j < d; ++j) z[j] = rng.normal();
        mu = mu_n + (sigma_chol * z) / std::sqrt(kappa_n);
        if (it >= burn_in) centre.states.emplace_back(mu, sigma_chol);
    }
    return centre;
}

// ---------------------------------------------------------------------------
// Rejection sampling to the bulk
// ---------------------------------------------------------------------------

/// Thrown when rejection sampling cannot collect the requested number of
/// in-bulk rows within the draw budget.
class RejectionShortfallError : public std::runtime_error {
  public:
    RejectionShortfallError(int accepted, long long drawn)
        : std::runtime_error("rejection_sample_bulk: accepted " + std::to_string(accepted) +
                             " of " + std::to_string(drawn) + " draws (acceptance rate " +
                             std::to_string(static_cast<double>(accepted) /
                                            static_cast<double>(drawn)) +
                             "); increase max_draw_factor or loosen the bulk"),
          acceptance_rate_(static_cast<double>(accepted) / static_cast<double>(drawn)) {}

    double acceptance_rate() const { return acceptance_rate_; }

  private:
    double acceptance_rate_;
};

/// Draw max_draw_factor * target_k rows in one pass (so a posterior-predictive
/// sampler spends one draw per retained state) and keep the first target_k
/// in-bulk rows.
inline OutcomeMatrix rejection_sample_bulk(const CentreSampler& sampler, const BulkSet& bulk,
                                           int target_k, double max_draw_factor,
                                           std::uint64_t seed) {
    if (target_k < 1) throw std::invalid_argument("rejection_sample_bulk: target_k must be >= 1");
    if (!(max_draw_factor >= 1.0)) {
        throw std::invalid_argument("rejection_sample_bulk: max_draw_factor must be >= 1");
    }
    const int budget = static_cast<int>(std::ceil(max_draw_factor * static_cast<double>(target_k)));
    OutcomeMatrix draws = sample_centre(sampler, budget, seed);
    Matrix out(target_k, bulk_dim(bulk));
    int accepted = 0;
    int scanned = 0;
    for (Eigen::Index i = 0; i < draws.rows() && accepted < target_k; ++i) {
        ++scanned;
        Vector row = draws.row(i);
        if (bulk_contains(bulk, row)) out.row(accepted++) = row.transpose();
    }
    if (accepted < target_k) throw RejectionShortfallError(accepted, scanned);
    return OutcomeMatrix(std::move(out));
}

}  // namespace credal
