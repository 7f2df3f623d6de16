#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <variant>
#include <vector>

#include "credal/common.hpp"
#include "credal/types.hpp"

namespace credal {

// ---------------------------------------------------------------------------
// Closed-form in-bulk suprema
// ---------------------------------------------------------------------------

struct SupResult {
    double value = 0.0;
    int piece = 0;  // attaining piece index, smallest on ties
};

namespace detail {

/// sup over the bulk of the affine form a'xi restricted to one geometry,
/// reported relative to the centre: returns a'center + radius * support(a).
inline double affine_sup(const EllipsoidBulk& b, const Vector& a) {
    return a.dot(b.center) + b.radius * (b.factor.transpose() * a).norm();
}

inline double affine_sup(const BoxBulk& b, const Vector& a) {
    return a.dot(b.center) + b.radius * (b.halfwidth.array() * a.array().abs()).sum();
}

}  // namespace detail

/// Closed-form sup_{xi in bulk} max_j (a_j' xi + b_j): each affine piece is
/// maximized exactly (Cauchy-Schwarz on ellipsoids, sign alignment on boxes,
/// blockwise separability on products), then the piecewise max is taken.
inline SupResult sup_over_bulk(const PiecewiseAffineLoss& loss, const BulkSet& bulk) {
    if (loss.dim() != bulk_dim(bulk)) {
        throw std::invalid_argument("sup_over_bulk: loss/bulk dimension mismatch");
    }
    SupResult best{-kInf, 0};
    const auto& pieces = loss.pieces();
    for (std::size_t j = 0; j < pieces.size(); ++j) {
        const Vector& a = pieces[j].slope;
        double value = pieces[j].offset;
        if (std::holds_alternative<EllipsoidBulk>(bulk)) {
            value += detail::affine_sup(std::get<EllipsoidBulk>(bulk), a);
        } else if (std::holds_alternative<BoxBulk>(bulk)) {
            value += detail::affine_sup(std::get<BoxBulk>(bulk), a);
        } else {
            const auto& product = std::get<ProductBulk>(bulk);
            for (const auto& block : product.blocks) {
                Vector sub = detail::gather(a, block.dims);
                value += std::visit([&sub](const auto& inner) { return detail::affine_sup(inner, sub); },
                                    block.bulk);
            }
        }
        if (value > best.value) {
            best.value = value;
            best.piece = static_cast<int>(j);
        }
    }
    return best;
}

// ---------------------------------------------------------------------------
// Worst-case risks
// ---------------------------------------------------------------------------

/// Forward-LV worst-case risk: (1 - eps) * mean + eps * sup.
inline double lv_risk(double eps, double in_bulk_mean, double in_bulk_sup) {
    if (!(eps >= 0.0 && eps <= 1.0)) throw std::invalid_argument("lv_risk: eps must lie in [0,1]");
    return (1.0 - eps) * in_bulk_mean + eps * in_bulk_sup;
}

/// CVaR at tail mass eps: average of the worst eps-fraction of losses, with
/// fractional inclusion of the boundary atom. eps = 1 gives the mean; eps = 0
/// is rejected (use the max separately).
inline double reverse_lv_risk(const std::vector<double>& losses, const std::vector<double>& weights,
                              double eps) {
    if (losses.empty() || losses.size() != weights.size()) {
        throw std::invalid_argument("reverse_lv_risk: losses/weights size mismatch");
    }
    double total = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0)) throw std::invalid_argument("reverse_lv_risk: negative weight");
        total += w;
    }
    if (std::abs(total - 1.0) > defaults().prob_sum_tol) {
        throw std::invalid_argument("reverse_lv_risk: weights must sum to one");
    }
    if (eps == 0.0) throw std::invalid_argument("reverse_lv_risk: eps = 0 (take the max instead)");
    if (!(eps > 0.0 && eps <= 1.0)) throw std::invalid_argument("reverse_lv_risk: eps must lie in (0,1]");
    std::vector<std::size_t> order(losses.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&losses](std::size_t a, std::size_t b) { return losses[a] > losses[b]; });
    double remaining = eps;
    double acc = 0.0;
    for (std::size_t idx : order) {
        const double take = std::min(remaining, weights[idx]);
        acc += take * losses[idx];
        remaining -= take;
        if (remaining <= 0.0) break;
    }
    return acc / eps;
}

/// TV worst-case risk: (1 - eps) * CVaR over the worst (1 - eps)-fraction plus
/// eps * sup. Equivalently: trim the best eps of the centre mass and add eps
/// adversarial mass at the sup.
inline double tv_risk(const std::vector<double>& losses, const std::vector<double>& weights,
                      double eps, double sup_value) {
    if (!(eps >= 0.0 && eps <= 1.0)) throw std::invalid_argument("tv_risk: eps must lie in [0,1]");
    if (eps == 1.0) return sup_value;
    if (eps == 0.0) {
        double mean = 0.0;
        for (std::size_t i = 0; i < losses.size(); ++i) mean += weights[i] * losses[i];
        return mean;
    }
    return (1.0 - eps) * reverse_lv_risk(losses, weights, 1.0 - eps) + eps * sup_value;
}

/// Primal greedy TV oracle on a finite support: move min(eps, available) mass
/// from the lowest-loss atoms onto the maximal-loss atom, then take the mean.
/// Exact on finite supports.
inline double tv_risk_oracle_discrete(const DiscreteDistribution& p, double eps) {
    if (!(eps >= 0.0)) throw std::invalid_argument("tv_risk_oracle_discrete: eps must be >= 0");
    const std::size_t n = p.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&p](std::size_t a, std::size_t b) { return p.atoms[a] < p.atoms[b]; });
    std::size_t max_idx = 0;
    for (std::size_t i = 1; i < n; ++i) {
        if (p.atoms[i] > p.atoms[max_idx]) max_idx = i;
    }
    std::vector<double> q = p.probs;
    double remaining = std::min(eps, 1.0);
    double moved = 0.0;
    for (std::size_t idx : order) {
        if (idx == max_idx) continue;
        const double take = std::min(remaining, q[idx]);
        q[idx] -= take;
        moved += take;
        remaining -= take;
        if (remaining <= 0.0) break;
    }
    q[max_idx] += moved;
    double value = 0.0;
    for (std::size_t i = 0; i < n; ++i) value += q[i] * p.atoms[i];
    return value;
}

/// Worst-case distribution of the forward-LV set: mix (1 - eps) of the centre
/// with a Dirac on the maximal-loss atom (smallest index on ties). Its
/// expectation reproduces lv_risk exactly.
inline DiscreteDistribution worst_case_distribution_lv(const DiscreteDistribution& centre,
                                                       const std::vector<double>& losses,
                                                       double eps) {
    if (losses.size() != centre.size()) {
        throw std::invalid_argument("worst_case_distribution_lv: losses must match the centre atoms");
    }
    if (!(eps >= 0.0 && eps <= 1.0)) {
        throw std::invalid_argument("worst_case_distribution_lv: eps must lie in [0,1]");
    }
    std::size_t max_idx = 0;
    for (std::size_t i = 1; i < losses.size(); ++i) {
        if (losses[i] > losses[max_idx]) max_idx = i;
    }
    std::vector<double> q(centre.size());
    for (std::size_t i = 0; i < centre.size(); ++i) q[i] = (1.0 - eps) * centre.probs[i];
    q[max_idx] += eps;
    return DiscreteDistribution(centre.atoms, std::move(q));
}

// ---------------------------------------------------------------------------
// Risk certificate arithmetic
// ---------------------------------------------------------------------------

/// eps_eff = eps_c + eps* rho - eps* eps_c rho, clamped to [0,1].
inline double effective_tolerance(double eps_c, double eps_star, double rho_bulk) {
    if (!(eps_c >= 0.0 && eps_c < 1.0)) {
        throw std::invalid_argument("effective_tolerance: eps_c must lie in [0,1)");
    }
    if (!(eps_star >= 0.0 && eps_star < 1.0)) {
        throw std::invalid_argument("effective_tolerance: eps_star must lie in [0,1)");
    }
    if (!(rho_bulk >= 0.0)) throw std::invalid_argument("effective_tolerance: rho must be >= 0");
    const double value = eps_c + eps_star * rho_bulk - eps_star * eps_c * rho_bulk;
    return std::min(1.0, std::max(0.0, value));
}

/// Inputs of the high-probability deployment-risk certificate.
struct CertificateInputs {
    double eps_c = 0.0;               // in-bulk centre mismatch
    double eps_star = 0.0;            // deployment contamination level
    double rho_bulk = 0.0;            // R~(Xi_0) / P~(Xi_0)
    double gamma = 0.0;               // certified bulk tail budget
    double deploy_bulk_mass = 1.0;    // R~(Xi_0)
    double p = 2.0;                   // moment order, > 1
    double moment_bound = 0.0;        // M_p >= (E_{P~}|f|^p)^{1/p}
    double in_bulk_mean = 0.0;
    double in_bulk_sup = 0.0;
};

/// (1 - eps_eff) mean + eps_eff sup
///   + M_p ((1 - eps*) gamma + eps* (1 - R~(Xi_0)))^{1/q},  q = p / (p - 1).
inline double certificate_bound(const CertificateInputs& c) {
    if (!(c.p > 1.0)) throw std::invalid_argument("certificate_bound: p must exceed 1");
    if (!(c.gamma >= 0.0 && c.gamma < 1.0)) {
        throw std::invalid_argument("certificate_bound: gamma must lie in [0,1)");
    }
    if (!(c.deploy_bulk_mass >= 0.0 && c.deploy_bulk_mass <= 1.0)) {
        throw std::invalid_argument("certificate_bound: deployment bulk mass must lie in [0,1]");
    }
    if (!(c.moment_bound >= 0.0)) throw std::invalid_argument("certificate_bound: M_p must be >= 0");
    const double eps_eff = effective_tolerance(c.eps_c, c.eps_star, c.rho_bulk);
    const double q = c.p / (c.p - 1.0);
    const double tail_mass = (1.0 - c.eps_star) * c.gamma + c.eps_star * (1.0 - c.deploy_bulk_mass);
    return lv_risk(eps_eff, c.in_bulk_mean, c.in_bulk_sup) +
           c.moment_bound * std::pow(tail_mass, 1.0 / q);
}

}  // namespace credal
