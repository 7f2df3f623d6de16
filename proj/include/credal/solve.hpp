#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "credal/common.hpp"
#include "credal/simplex.hpp"
#include "credal/types.hpp"
#include "credal/worstcase.hpp"

namespace credal {

// ---------------------------------------------------------------------------
// Objective oracles
// ---------------------------------------------------------------------------

/// Convex objective exposed through a value-and-subgradient map. The first
/// `nonneg_prefix` decision coordinates are constrained to the nonnegative
/// orthant; the rest are free.
struct ObjectiveOracle {
    int dim = 0;
    int nonneg_prefix = 0;
    std::function<double(const Vector& x, Vector& subgrad)> eval;

    double value(const Vector& x) const {
        Vector g(dim);
        return eval(x, g);
    }
};

struct SolveReport {
    Vector minimizer;
    double value = 0.0;
    double certified_gap = kNan;  // NaN means uncertified (subgradient method)
    int iterations = 0;
    double wall_seconds = 0.0;
    std::string method;
};

// ---------------------------------------------------------------------------
// In-bulk support helpers (shared by the LV builders)
// ---------------------------------------------------------------------------

namespace detail {

struct SupportWithGrad {
    double value = 0.0;  // sup over the bulk of slope' xi
    Vector grad;         // d(value)/d(slope)
};

inline void accumulate_support(const EllipsoidBulk& b, const Vector& slope,
                               const std::vector<Eigen::Index>* dims, SupportWithGrad& out) {
    Vector s = dims ? gather(slope, *dims) : slope;
    Vector lt_s = b.factor.transpose() * s;
    const double norm = lt_s.norm();
    out.value += s.dot(b.center) + b.radius * norm;
    Vector g = b.center;
    if (norm > 0.0) g += (b.radius / norm) * (b.factor * lt_s);
    if (dims) {
        for (std::size_t i = 0; i < dims->size(); ++i) {
            out.grad[(*dims)[i]] += g[static_cast<Eigen::Index>(i)];
        }
    } else {
        out.grad += g;
    }
}

inline void accumulate_support(const BoxBulk& b, const Vector& slope,
                               const std::vector<Eigen::Index>* dims, SupportWithGrad& out) {
    Vector s = dims ? gather(slope, *dims) : slope;
    out.value += s.dot(b.center) + b.radius * (b.halfwidth.array() * s.array().abs()).sum();
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        const double sign = s[i] > 0.0 ? 1.0 : (s[i] < 0.0 ? -1.0 : 0.0);
        const double gi = b.center[i] + b.radius * b.halfwidth[i] * sign;
        out.grad[dims ? (*dims)[static_cast<std::size_t>(i)] : i] += gi;
    }
}

/// sup over the bulk of slope' xi together with its gradient in the slope.
inline SupportWithGrad affine_support_with_grad(const BulkSet& bulk, const Vector& slope) {
    SupportWithGrad out;
    out.grad = Vector::Zero(slope.size());
    if (std::holds_alternative<EllipsoidBulk>(bulk)) {
        accumulate_support(std::get<EllipsoidBulk>(bulk), slope, nullptr, out);
    } else if (std::holds_alternative<BoxBulk>(bulk)) {
        accumulate_support(std::get<BoxBulk>(bulk), slope, nullptr, out);
    } else {
        for (const auto& block : std::get<ProductBulk>(bulk).blocks) {
            std::visit([&](const auto& inner) { accumulate_support(inner, slope, &block.dims, out); },
                       block.bulk);
        }
    }
    return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// LV objective
// ---------------------------------------------------------------------------

/// (1 - eps) * SAA mean over the in-bulk samples + eps * closed-form in-bulk
/// sup of the induced loss. The sup subgradient follows the attaining piece:
/// -a for a newsvendor piece, the closed-form residual/norm gradient for LAD.
inline ObjectiveOracle build_lv_objective(const DecisionLoss& loss,
                                          const OutcomeMatrix& in_bulk_samples, const BulkSet& bulk,
                                          double eps) {
    if (!(eps >= 0.0 && eps <= 1.0)) throw std::invalid_argument("build_lv_objective: eps in [0,1]");
    const Eigen::Index n = in_bulk_samples.rows();
    if (n == 0 && eps < 1.0) {
        throw std::invalid_argument("build_lv_objective: empty sample set with eps < 1");
    }
    if (in_bulk_samples.dim() != loss.outcome_dim() || bulk_dim(bulk) != loss.outcome_dim()) {
        throw std::invalid_argument("build_lv_objective: dimension mismatch");
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!bulk_contains(bulk, in_bulk_samples.row(i))) {
            throw std::invalid_argument("build_lv_objective: sample " + std::to_string(i) +
                                        " lies outside the bulk");
        }
    }

    ObjectiveOracle oracle;
    oracle.dim = loss.decision_dim();
    oracle.nonneg_prefix = loss.kind() == DecisionLoss::Kind::Newsvendor ? loss.decision_dim() : 0;

    if (loss.kind() == DecisionLoss::Kind::Newsvendor) {
        // Piece slopes do not depend on the decision: precompute each piece's
        // bulk support of a'xi once; at x the sup is max_j (support_j - a_j'x).
        const int d = loss.decision_dim();
        const std::size_t count = std::size_t{1} << d;
        Matrix piece_slopes(static_cast<Eigen::Index>(count), d);
        Vector piece_support(static_cast<Eigen::Index>(count));
        {
            PiecewiseAffineLoss induced = loss.induced(Vector::Zero(d));
            for (std::size_t j = 0; j < count; ++j) {
                const Vector& a = induced.pieces()[j].slope;
                piece_slopes.row(static_cast<Eigen::Index>(j)) = a.transpose();
                piece_support[static_cast<Eigen::Index>(j)] =
                    detail::affine_support_with_grad(bulk, a).value;
            }
        }
        const Matrix samples = in_bulk_samples.values();
        oracle.eval = [loss, eps, samples, piece_slopes, piece_support,
                       d](const Vector& x, Vector& grad) {
            grad.setZero(d);
            double mean = 0.0;
            const Eigen::Index n_s = samples.rows();
            if (eps < 1.0) {
                Vector gsum = Vector::Zero(d);
                for (Eigen::Index i = 0; i < n_s; ++i) {
                    const Vector xi = samples.row(i).transpose();
                    mean += loss.evaluate(x, xi);
                    gsum += loss.subgradient(x, xi);
                }
                mean /= static_cast<double>(n_s);
                grad += (1.0 - eps) / static_cast<double>(n_s) * gsum;
            }
            Vector piece_vals = piece_support - piece_slopes * x;
            Eigen::Index jstar = 0;
            const double sup = piece_vals.maxCoeff(&jstar);
            grad -= eps * piece_slopes.row(jstar).transpose();
            return (1.0 - eps) * mean + eps * sup;
        };
        return oracle;
    }

    // LAD regression: decision (w, b0); pieces +-(y - w'x - b0).
    const int d = loss.decision_dim() - 1;
    const Matrix samples = in_bulk_samples.values();
    BulkSet bulk_copy = bulk;
    oracle.eval = [loss, eps, samples, bulk_copy, d](const Vector& wb, Vector& grad) {
        grad.setZero(d + 1);
        double mean = 0.0;
        if (eps < 1.0) {
            Vector gsum = Vector::Zero(d + 1);
            for (Eigen::Index i = 0; i < samples.rows(); ++i) {
                const Vector xi = samples.row(i).transpose();
                mean += loss.evaluate(wb, xi);
                gsum += loss.subgradient(wb, xi);
            }
            mean /= static_cast<double>(samples.rows());
            grad += (1.0 - eps) / static_cast<double>(samples.rows()) * gsum;
        }
        Vector slope(d + 1);
        slope.head(d) = -wb.head(d);
        slope[d] = 1.0;
        auto plus = detail::affine_support_with_grad(bulk_copy, slope);
        auto minus = detail::affine_support_with_grad(bulk_copy, -slope);
        const double v_plus = plus.value - wb[d];
        const double v_minus = minus.value + wb[d];
        double sup;
        Vector sup_grad(d + 1);
        if (v_plus >= v_minus) {
            sup = v_plus;
            sup_grad.head(d) = -plus.grad.head(d);  // d(slope)/dw = -I on x coords
            sup_grad[d] = -1.0;
        } else {
            sup = v_minus;
            sup_grad.head(d) = minus.grad.head(d);
            sup_grad[d] = 1.0;
        }
        grad += eps * sup_grad;
        return (1.0 - eps) * mean + eps * sup;
    };
    return oracle;
}

// ---------------------------------------------------------------------------
// CVaR objective (Rockafellar-Uryasev)
// ---------------------------------------------------------------------------

/// Joint convex objective in (decision, tau):
///   tau + (1/(eps n)) sum (l_i(decision) - tau)_+.
/// At the inner tau-optimum this equals reverse_lv_risk of the losses.
inline ObjectiveOracle build_cvar_objective(const DecisionLoss& loss, const OutcomeMatrix& samples,
                                            double eps) {
    if (!(eps > 0.0 && eps < 1.0)) {
        throw std::invalid_argument("build_cvar_objective: eps must lie in (0,1)");
    }
    if (samples.dim() != loss.outcome_dim()) {
        throw std::invalid_argument("build_cvar_objective: sample dimension mismatch");
    }
    ObjectiveOracle oracle;
    const int xd = loss.decision_dim();
    oracle.dim = xd + 1;
    oracle.nonneg_prefix = loss.kind() == DecisionLoss::Kind::Newsvendor ? xd : 0;
    const Matrix data = samples.values();
    oracle.eval = [loss, eps, data, xd](const Vector& z, Vector& grad) {
        const Vector x = z.head(xd);
        const double tau = z[xd];
        const double n = static_cast<double>(data.rows());
        grad.setZero(xd + 1);
        double tail = 0.0;
        double indicator_mass = 0.0;
        for (Eigen::Index i = 0; i < data.rows(); ++i) {
            const Vector xi = data.row(i).transpose();
            const double li = loss.evaluate(x, xi);
            if (li > tau) {
                tail += li - tau;
                indicator_mass += 1.0;
                grad.head(xd) += loss.subgradient(x, xi);
            }
        }
        grad.head(xd) /= eps * n;
        grad[xd] = 1.0 - indicator_mass / (eps * n);
        return tau + tail / (eps * n);
    };
    return oracle;
}

// ---------------------------------------------------------------------------
// KL dual
// ---------------------------------------------------------------------------

struct KlDualResult {
    double value = 0.0;
    double lambda = 0.0;              // 0 encodes the saturated limit, inf the mean limit
    std::vector<double> weights;      // optimal exponential tilt (softmax at lambda)
};

/// inf_{lambda > 0} lambda eps + lambda log((1/n) sum exp(l_i / lambda)), by
/// golden-section search over a geometrically expanded bracket, with the
/// lambda -> 0 limit (the max loss) included as an exact candidate so the
/// saturation regime eps >= log(n / #argmax) returns the max exactly.
inline KlDualResult kl_dual(const std::vector<double>& losses, double eps_kl) {
    if (losses.empty()) throw std::invalid_argument("kl_dual: empty loss sample");
    if (!(eps_kl >= 0.0)) throw std::invalid_argument("kl_dual: eps_kl must be >= 0");
    const std::size_t n = losses.size();
    const double max_loss = *std::max_element(losses.begin(), losses.end());
    const double min_loss = *std::min_element(losses.begin(), losses.end());

    KlDualResult result;
    if (eps_kl == 0.0) {
        double mean = 0.0;
        for (double l : losses) mean += l;
        result.value = mean / static_cast<double>(n);
        result.lambda = kInf;
        result.weights.assign(n, 1.0 / static_cast<double>(n));
        return result;
    }

    const double scale = max_loss - min_loss + 1e-12;
    auto phi = [&](double lambda) {
        double acc = 0.0;
        for (double l : losses) acc += std::exp((l - max_loss) / lambda);
        return lambda * eps_kl + max_loss + lambda * std::log(acc / static_cast<double>(n));
    };

    double lo = 1e-6 * scale;
    double hi = 10.0 * scale;
    for (int guard = 0; guard < 60 && phi(hi) < phi(0.5 * hi); ++guard) hi *= 2.0;
    for (int guard = 0; guard < 60 && phi(lo) < phi(2.0 * lo); ++guard) lo *= 0.5;

    const double golden = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = lo, b = hi;
    double x1 = b - golden * (b - a), x2 = a + golden * (b - a);
    double f1 = phi(x1), f2 = phi(x2);
    for (int it = 0; it < 140; ++it) {
        if (f1 <= f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - golden * (b - a);
            f1 = phi(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + golden * (b - a);
            f2 = phi(x2);
        }
    }
    const double lambda_hat = 0.5 * (a + b);
    const double interior = phi(lambda_hat);

    if (max_loss <= interior) {
        // Saturated: the infimum is the lambda -> 0 limit.
        result.value = max_loss;
        result.lambda = 0.0;
        result.weights.assign(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            if (losses[i] == max_loss) {
                result.weights[i] = 1.0;
                break;
            }
        }
        return result;
    }
    result.value = interior;
    result.lambda = lambda_hat;
    result.weights.resize(n);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        result.weights[i] = std::exp((losses[i] - max_loss) / lambda_hat);
        acc += result.weights[i];
    }
    for (double& w : result.weights) w /= acc;
    return result;
}

/// Forward-KL divergence-ball DRO objective centred at the sample law of the
/// given scenarios. The subgradient uses the envelope theorem at the inner
/// optimum: the softmax-weighted average of per-sample subgradients.
inline ObjectiveOracle build_kl_objective(const DecisionLoss& loss, const OutcomeMatrix& samples,
                                          double eps_kl) {
    if (!(eps_kl >= 0.0)) throw std::invalid_argument("build_kl_objective: eps_kl must be >= 0");
    if (samples.dim() != loss.outcome_dim()) {
        throw std::invalid_argument("build_kl_objective: sample dimension mismatch");
    }
    ObjectiveOracle oracle;
    oracle.dim = loss.decision_dim();
    oracle.nonneg_prefix = loss.kind() == DecisionLoss::Kind::Newsvendor ? oracle.dim : 0;
    const Matrix data = samples.values();
    oracle.eval = [loss, eps_kl, data](const Vector& x, Vector& grad) {
        std::vector<double> losses(static_cast<std::size_t>(data.rows()));
        for (Eigen::Index i = 0; i < data.rows(); ++i) {
            losses[static_cast<std::size_t>(i)] = loss.evaluate(x, data.row(i).transpose());
        }
        auto dual = kl_dual(losses, eps_kl);
        grad.setZero(x.size());
        for (Eigen::Index i = 0; i < data.rows(); ++i) {
            const double w = dual.weights[static_cast<std::size_t>(i)];
            if (w > 0.0) grad += w * loss.subgradient(x, data.row(i).transpose());
        }
        return dual.value;
    };
    return oracle;
}

/// Bayesian KL-DRO: the average over posterior draws of the per-draw KL dual
/// on that draw's predictive scenarios.
inline ObjectiveOracle build_kl_bdro_objective(const DecisionLoss& loss,
                                               const std::vector<OutcomeMatrix>& per_draw_scenarios,
                                               double eps_kl) {
    if (per_draw_scenarios.empty()) {
        throw std::invalid_argument("build_kl_bdro_objective: need at least one posterior draw");
    }
    for (const auto& draw : per_draw_scenarios) {
        if (draw.dim() != loss.outcome_dim()) {
            throw std::invalid_argument("build_kl_bdro_objective: scenario dimension mismatch");
        }
    }
    ObjectiveOracle oracle;
    oracle.dim = loss.decision_dim();
    oracle.nonneg_prefix = loss.kind() == DecisionLoss::Kind::Newsvendor ? oracle.dim : 0;
    std::vector<Matrix> draws;
    draws.reserve(per_draw_scenarios.size());
    for (const auto& d : per_draw_scenarios) draws.push_back(d.values());
    oracle.eval = [loss, eps_kl, draws](const Vector& x, Vector& grad) {
        grad.setZero(x.size());
        double total = 0.0;
        Vector gdraw(x.size());
        for (const Matrix& data : draws) {
            std::vector<double> losses(static_cast<std::size_t>(data.rows()));
            for (Eigen::Index i = 0; i < data.rows(); ++i) {
                losses[static_cast<std::size_t>(i)] = loss.evaluate(x, data.row(i).transpose());
            }
            auto dual = kl_dual(losses, eps_kl);
            total += dual.value;
            gdraw.setZero();
            for (Eigen::Index i = 0; i < data.rows(); ++i) {
                const double w = dual.weights[static_cast<std::size_t>(i)];
                if (w > 0.0) gdraw += w * loss.subgradient(x, data.row(i).transpose());
            }
            grad += gdraw;
        }
        const double m = static_cast<double>(draws.size());
        grad /= m;
        return total / m;
    };
    return oracle;
}

// ---------------------------------------------------------------------------
// Wasserstein-LAD and ridge
// ---------------------------------------------------------------------------

/// (1/n) sum |y_i - w'x_i - b| + rho ||(w, sigma_y)||_2, intercept unpenalized.
inline ObjectiveOracle build_wasserstein_lad_objective(const OutcomeMatrix& x, const Vector& y,
                                                       double rho, double sigma_y) {
    if (y.size() != x.rows()) throw std::invalid_argument("wasserstein_lad: y length mismatch");
    if (!(rho >= 0.0)) throw std::invalid_argument("wasserstein_lad: rho must be >= 0");
    if (!(sigma_y > 0.0)) throw std::invalid_argument("wasserstein_lad: sigma_y must be positive");
    ObjectiveOracle oracle;
    const Eigen::Index d = x.dim();
    oracle.dim = static_cast<int>(d) + 1;
    const Matrix data = x.values();
    const Vector target = y;
    oracle.eval = [data, target, rho, sigma_y, d](const Vector& wb, Vector& grad) {
        const Vector w = wb.head(d);
        const double b = wb[d];
        const double n = static_cast<double>(data.rows());
        grad.setZero(d + 1);
        double mean = 0.0;
        for (Eigen::Index i = 0; i < data.rows(); ++i) {
            const double resid = target[i] - data.row(i).dot(w) - b;
            mean += std::abs(resid);
            const double s = resid > 0.0 ? 1.0 : (resid < 0.0 ? -1.0 : 0.0);
            grad.head(d) -= s * data.row(i).transpose();
            grad[d] -= s;
        }
        mean /= n;
        grad /= n;
        const double norm = std::sqrt(w.squaredNorm() + sigma_y * sigma_y);
        grad.head(d) += rho / norm * w;
        return mean + rho * norm;
    };
    return oracle;
}

struct RidgeSolution {
    Vector w;
    double b = 0.0;
};

/// l2-regularised least squares with an unpenalised intercept, solved in
/// closed form on centred data.
inline RidgeSolution solve_ridge(const OutcomeMatrix& x, const Vector& y, double lambda) {
    if (y.size() != x.rows()) throw std::invalid_argument("solve_ridge: y length mismatch");
    if (!(lambda >= 0.0)) throw std::invalid_argument("solve_ridge: lambda must be >= 0");
    const Eigen::Index n = x.rows();
    const Eigen::Index d = x.dim();
    Vector xmean = x.values().colwise().mean().transpose();
    const double ymean = y.mean();
    Matrix xc = x.values().rowwise() - xmean.transpose();
    Vector yc = y - Vector::Constant(n, ymean);
    Matrix gram = xc.transpose() * xc / static_cast<double>(n) + lambda * Matrix::Identity(d, d);
    Eigen::LLT<Matrix> llt(gram);
    if (llt.info() != Eigen::Success) {
        throw std::runtime_error("solve_ridge: singular system (lambda too small for this design)");
    }
    RidgeSolution sol;
    sol.w = llt.solve(xc.transpose() * yc / static_cast<double>(n));
    sol.b = ymean - xmean.dot(sol.w);
    return sol;
}

/// (1/n) sum (y_i - w'x_i - b)^2 + lambda ||w||^2, as an oracle (smooth).
inline ObjectiveOracle build_ridge_objective(const OutcomeMatrix& x, const Vector& y,
                                             double lambda) {
    if (y.size() != x.rows()) throw std::invalid_argument("build_ridge_objective: y length mismatch");
    if (!(lambda >= 0.0)) throw std::invalid_argument("build_ridge_objective: lambda must be >= 0");
    ObjectiveOracle oracle;
    const Eigen::Index d = x.dim();
    oracle.dim = static_cast<int>(d) + 1;
    const Matrix data = x.values();
    const Vector target = y;
    oracle.eval = [data, target, lambda, d](const Vector& wb, Vector& grad) {
        const Vector w = wb.head(d);
        const double b = wb[d];
        const double n = static_cast<double>(data.rows());
        Vector resid = target - data * w - Vector::Constant(data.rows(), b);
        grad.setZero(d + 1);
        grad.head(d) = -2.0 / n * (data.transpose() * resid) + 2.0 * lambda * w;
        grad[d] = -2.0 / n * resid.sum();
        return resid.squaredNorm() / n + lambda * w.squaredNorm();
    };
    return oracle;
}

// ---------------------------------------------------------------------------
// Minimization engine
// ---------------------------------------------------------------------------

enum class SolveMethod { CuttingPlane, Subgradient };

struct MinimizeOptions {
    SolveMethod method = SolveMethod::CuttingPlane;
    double tol = defaults().solver_tol;          // relative gap target
    int max_iters = defaults().solver_max_iters;
    Vector lower;  // optional domain box; empty -> scaled from x0
    Vector upper;
    int max_cuts = 250;
};

namespace detail {

struct CutModel {
    std::deque<Vector> slopes;
    std::deque<double> offsets;

    void add(const Vector& x, double f, const Vector& g, int cap) {
        slopes.push_back(g);
        offsets.push_back(f - g.dot(x));
        if (static_cast<int>(slopes.size()) > cap) {
            slopes.pop_front();
            offsets.pop_front();
        }
    }

    BoxLpResult minimize_over(const Vector& lb, const Vector& ub) const {
        const Eigen::Index k = static_cast<Eigen::Index>(slopes.size());
        Matrix a(k, slopes.front().size());
        Vector c(k);
        for (Eigen::Index i = 0; i < k; ++i) {
            a.row(i) = slopes[static_cast<std::size_t>(i)].transpose();
            c[i] = offsets[static_cast<std::size_t>(i)];
        }
        return minimize_max_affine_over_box(a, c, lb, ub);
    }
};

}  // namespace detail

/// Kelley cutting-plane minimization over a box trust region with an exact
/// LP inner step and proximal stabilization around the incumbent; the box
/// doubles along any artificial face the LP solution touches. Terminates when
/// upper - lower <= tol * (1 + |upper|). The subgradient fallback is a
/// projected diminishing-step method with best-iterate tracking and no gap
/// certificate.
inline SolveReport minimize(const ObjectiveOracle& oracle, const Vector& x0,
                            const MinimizeOptions& options = {}) {
    const auto t_start = std::chrono::steady_clock::now();
    const int d = oracle.dim;
    if (x0.size() != d) throw std::invalid_argument("minimize: x0 dimension mismatch");
    for (int j = 0; j < oracle.nonneg_prefix; ++j) {
        if (x0[j] < 0.0) throw std::invalid_argument("minimize: x0 violates the domain");
    }

    Vector lb, ub;
    if (options.lower.size() == d && options.upper.size() == d) {
        lb = options.lower;
        ub = options.upper;
    } else {
        const double r = 10.0 * (1.0 + x0.cwiseAbs().maxCoeff());
        lb = x0 - Vector::Constant(d, r);
        ub = x0 + Vector::Constant(d, r);
    }
    for (int j = 0; j < oracle.nonneg_prefix; ++j) lb[j] = std::max(0.0, lb[j]);
    for (int j = 0; j < d; ++j) {
        if (!(lb[j] <= ub[j])) throw std::invalid_argument("minimize: empty domain box");
    }

    auto finish = [&](SolveReport report) {
        report.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
        return report;
    };

    Vector x = x0.cwiseMax(lb).cwiseMin(ub);
    Vector grad(d);
    double fx = oracle.eval(x, grad);
    if (!std::isfinite(fx)) throw std::runtime_error("minimize: non-finite objective at x0");

    if (options.method == SolveMethod::Subgradient) {
        Vector best_x = x;
        double best_f = fx;
        const double step0 = 0.1 * (ub - lb).maxCoeff();
        for (int it = 1; it <= options.max_iters; ++it) {
            const double gn = grad.norm();
            if (gn == 0.0) break;
            x -= step0 / (gn * std::sqrt(static_cast<double>(it))) * grad;
            x = x.cwiseMax(lb).cwiseMin(ub);
            fx = oracle.eval(x, grad);
            if (fx < best_f) {
                best_f = fx;
                best_x = x;
            }
        }
        SolveReport report;
        report.minimizer = best_x;
        report.value = best_f;
        report.certified_gap = kNan;
        report.iterations = options.max_iters;
        report.method = "subgradient";
        return finish(report);
    }

    detail::CutModel model;
    model.add(x, fx, grad, options.max_cuts);
    std::deque<std::pair<Vector, double>> probes{{x, fx}};
    Vector best_x = x;
    double best_f = fx;
    double prox_radius = 0.125 * (ub - lb).maxCoeff();
    double gap = kInf;
    int iterations = 0;

    int domain_growths = 0;
    for (int it = 1; it <= options.max_iters; ++it) {
        iterations = it;
        // Grow the domain box only when the incumbent presses a growable face;
        // LP iterates landing on corners are ordinary Kelley behaviour.
        if (domain_growths < 30) {
            for (int j = 0; j < d; ++j) {
                const double span = std::max(ub[j] - lb[j], 1e-12);
                const double edge = 1e-6 * span;
                if (ub[j] - best_x[j] <= edge) {
                    ub[j] += span;
                    ++domain_growths;
                }
                if (best_x[j] - lb[j] <= edge && !(j < oracle.nonneg_prefix && lb[j] == 0.0)) {
                    lb[j] -= span;
                    ++domain_growths;
                }
            }
        }
        BoxLpResult lp = model.minimize_over(lb, ub);
        const double lower = lp.value;
        gap = best_f - lower;
        if (gap <= options.tol * (1.0 + std::abs(best_f))) break;

        // Proximal step: restrict the candidate to a box around the incumbent.
        Vector cand = lp.x;
        Vector plo = (best_x - Vector::Constant(d, prox_radius)).cwiseMax(lb);
        Vector phi = (best_x + Vector::Constant(d, prox_radius)).cwiseMin(ub);
        const bool inside_prox = (lp.x.array() >= plo.array() - 1e-12).all() &&
                                 (lp.x.array() <= phi.array() + 1e-12).all();
        if (!inside_prox) {
            BoxLpResult prox_lp = model.minimize_over(plo, phi);
            cand = prox_lp.x;
            for (int j = 0; j < d; ++j) {
                const bool at_face = (phi[j] - cand[j] <= 1e-9 && phi[j] < ub[j]) ||
                                     (cand[j] - plo[j] <= 1e-9 && plo[j] > lb[j]);
                if (at_face) {
                    prox_radius *= 2.0;
                    break;
                }
            }
        }

        const double fc = oracle.eval(cand, grad);
        if (!std::isfinite(fc)) throw std::runtime_error("minimize: non-finite objective value");
        // Convexity guard: the new cut must underestimate every probe, and the
        // model must underestimate the new value.
        for (const auto& [px, pf] : probes) {
            const double slack = defaults().convexity_guard_tol * (1.0 + std::abs(pf));
            if (pf < fc + grad.dot(px - cand) - slack) {
                throw std::runtime_error(
                    "minimize: subgradient inequality violated; objective is not convex");
            }
        }
        model.add(cand, fc, grad, options.max_cuts);
        probes.emplace_back(cand, fc);
        if (probes.size() > 8) probes.pop_front();
        if (fc < best_f) {
            best_f = fc;
            best_x = cand;
        }
    }

    SolveReport report;
    report.minimizer = best_x;
    report.value = best_f;
    report.certified_gap = std::max(0.0, gap);
    report.iterations = iterations;
    report.method = "cutting_plane";
    return finish(report);
}

}  // namespace credal
