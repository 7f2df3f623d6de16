#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "credal/common.hpp"

namespace credal {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// n x d matrix of i.i.d. outcome rows. Immutable after construction; all
/// entries are required to be finite.
class OutcomeMatrix {
  public:
    explicit OutcomeMatrix(Matrix values) : values_(std::move(values)) {
        if (values_.rows() < 1 || values_.cols() < 1) {
            throw std::invalid_argument("OutcomeMatrix: need at least one row and one column");
        }
        if (!values_.allFinite()) {
            throw std::invalid_argument("OutcomeMatrix: all entries must be finite");
        }
    }

    Eigen::Index rows() const { return values_.rows(); }
    Eigen::Index dim() const { return values_.cols(); }
    Vector row(Eigen::Index i) const { return values_.row(i).transpose(); }
    const Matrix& values() const { return values_; }

  private:
    Matrix values_;
};

// ---------------------------------------------------------------------------
// Piecewise-affine losses
// ---------------------------------------------------------------------------

struct AffinePiece {
    Vector slope;   // a_j
    double offset;  // b_j
};

/// f(xi) = max_j (a_j' xi + b_j), J >= 1.
class PiecewiseAffineLoss {
  public:
    explicit PiecewiseAffineLoss(std::vector<AffinePiece> pieces) : pieces_(std::move(pieces)) {
        if (pieces_.empty()) throw std::invalid_argument("PiecewiseAffineLoss: need at least one piece");
        const Eigen::Index d = pieces_.front().slope.size();
        for (const auto& p : pieces_) {
            if (p.slope.size() != d) {
                throw std::invalid_argument("PiecewiseAffineLoss: inconsistent piece dimensions");
            }
            if (!p.slope.allFinite() || !std::isfinite(p.offset)) {
                throw std::invalid_argument("PiecewiseAffineLoss: coefficients must be finite");
            }
        }
    }

    Eigen::Index dim() const { return pieces_.front().slope.size(); }
    std::size_t piece_count() const { return pieces_.size(); }
    const std::vector<AffinePiece>& pieces() const { return pieces_; }

  private:
    std::vector<AffinePiece> pieces_;
};

inline double evaluate_loss(const PiecewiseAffineLoss& loss, const Vector& xi) {
    if (xi.size() != loss.dim()) {
        throw std::invalid_argument("evaluate_loss: outcome dimension mismatch");
    }
    double best = -kInf;
    for (const auto& p : loss.pieces()) best = std::max(best, p.slope.dot(xi) + p.offset);
    return best;
}

// ---------------------------------------------------------------------------
// Decision-parametrized losses
// ---------------------------------------------------------------------------

/// Loss families whose induced outcome loss is piecewise affine in xi for every
/// fixed decision, and convex in the decision for every fixed xi.
///
/// Newsvendor: l(x; xi) = sum_j h[x_j - xi_j]_+ + b[xi_j - x_j]_+ over d items;
/// expands to the 2^d pieces a in {-h, b}^d with offset -a'x.
/// LadRegression: decision (w, b0), outcome xi = (x, y), loss |y - w'x - b0|.
class DecisionLoss {
  public:
    enum class Kind { Newsvendor, LadRegression };

    static DecisionLoss newsvendor(double holding, double backorder, int items) {
        if (!(holding > 0.0) || !(backorder > 0.0)) {
            throw std::invalid_argument("newsvendor: holding and backorder costs must be positive");
        }
        if (items < 1) throw std::invalid_argument("newsvendor: need at least one item");
        DecisionLoss l;
        l.kind_ = Kind::Newsvendor;
        l.holding_ = holding;
        l.backorder_ = backorder;
        l.dim_ = items;
        return l;
    }

    static DecisionLoss lad_regression(int feature_dim) {
        if (feature_dim < 1) throw std::invalid_argument("lad_regression: need at least one feature");
        DecisionLoss l;
        l.kind_ = Kind::LadRegression;
        l.dim_ = feature_dim;
        return l;
    }

    Kind kind() const { return kind_; }
    double holding() const { return holding_; }
    double backorder() const { return backorder_; }

    /// Dimension of the decision vector: d items, or (w, b0).
    int decision_dim() const { return kind_ == Kind::Newsvendor ? dim_ : dim_ + 1; }
    /// Dimension of the outcome vector: d demands, or (x, y).
    int outcome_dim() const { return kind_ == Kind::Newsvendor ? dim_ : dim_ + 1; }

    double evaluate(const Vector& decision, const Vector& xi) const {
        check_dims(decision, xi);
        if (kind_ == Kind::Newsvendor) {
            double total = 0.0;
            for (int j = 0; j < dim_; ++j) {
                const double over = decision[j] - xi[j];
                total += over >= 0.0 ? holding_ * over : -backorder_ * over;
            }
            return total;
        }
        const double resid = xi[dim_] - decision.head(dim_).dot(xi.head(dim_)) - decision[dim_];
        return std::abs(resid);
    }

    /// Subgradient in the decision at (decision, xi); kinks resolve to zero.
    Vector subgradient(const Vector& decision, const Vector& xi) const {
        check_dims(decision, xi);
        Vector g(decision.size());
        if (kind_ == Kind::Newsvendor) {
            for (int j = 0; j < dim_; ++j) {
                if (decision[j] > xi[j]) {
                    g[j] = holding_;
                } else if (decision[j] < xi[j]) {
                    g[j] = -backorder_;
                } else {
                    g[j] = 0.0;
                }
            }
            return g;
        }
        const double resid = xi[dim_] - decision.head(dim_).dot(xi.head(dim_)) - decision[dim_];
        const double s = resid > 0.0 ? 1.0 : (resid < 0.0 ? -1.0 : 0.0);
        g.head(dim_) = -s * xi.head(dim_);
        g[dim_] = -s;
        return g;
    }

    /// Expand into the induced piecewise-affine loss in xi. Newsvendor is
    /// exact with 2^d pieces and capped at d <= 20.
    PiecewiseAffineLoss induced(const Vector& decision) const {
        if (decision.size() != decision_dim()) {
            throw std::invalid_argument("induced: decision dimension mismatch");
        }
        std::vector<AffinePiece> pieces;
        if (kind_ == Kind::Newsvendor) {
            if (dim_ > 20) {
                throw std::invalid_argument(
                    "newsvendor piece enumeration capped at d <= 20 (2^d pieces); got d = " +
                    std::to_string(dim_));
            }
            const std::size_t count = std::size_t{1} << dim_;
            pieces.reserve(count);
            for (std::size_t mask = 0; mask < count; ++mask) {
                Vector a(dim_);
                for (int j = 0; j < dim_; ++j) a[j] = (mask >> j) & 1 ? backorder_ : -holding_;
                pieces.push_back({a, -a.dot(decision)});
            }
        } else {
            Vector a_plus(dim_ + 1);
            a_plus.head(dim_) = -decision.head(dim_);
            a_plus[dim_] = 1.0;
            pieces.push_back({a_plus, -decision[dim_]});
            pieces.push_back({-a_plus, decision[dim_]});
        }
        return PiecewiseAffineLoss(std::move(pieces));
    }

  private:
    DecisionLoss() = default;
    void check_dims(const Vector& decision, const Vector& xi) const {
        if (decision.size() != decision_dim() || xi.size() != outcome_dim()) {
            throw std::invalid_argument("DecisionLoss: dimension mismatch");
        }
    }

    Kind kind_ = Kind::Newsvendor;
    double holding_ = 0.0, backorder_ = 0.0;
    int dim_ = 0;
};

// ---------------------------------------------------------------------------
// Bulk sets
// ---------------------------------------------------------------------------

/// { xi : ||L^{-1}(xi - center)||_2 <= radius } with Sigma = L L'.
struct EllipsoidBulk {
    Vector center;
    Matrix factor;  // lower-triangular, invertible
    double radius = 0.0;
};

/// { xi : max_i |xi_i - center_i| / halfwidth_i <= radius }.
struct BoxBulk {
    Vector center;
    Vector halfwidth;  // all > 0
    double radius = 0.0;
};

/// Intersection of per-block bulk sets over a partition of the coordinates.
struct ProductBulk {
    struct Block {
        std::vector<Eigen::Index> dims;
        std::variant<EllipsoidBulk, BoxBulk> bulk;
    };
    std::vector<Block> blocks;
};

using BulkSet = std::variant<EllipsoidBulk, BoxBulk, ProductBulk>;

inline BulkSet make_ellipsoid_bulk(Vector center, Matrix factor, double radius) {
    const Eigen::Index d = center.size();
    if (factor.rows() != d || factor.cols() != d) {
        throw std::invalid_argument("make_ellipsoid_bulk: factor must be d x d");
    }
    if (!(radius >= 0.0)) throw std::invalid_argument("make_ellipsoid_bulk: radius must be >= 0");
    for (Eigen::Index i = 0; i < d; ++i) {
        if (!(factor(i, i) > 0.0)) {
            throw std::invalid_argument("make_ellipsoid_bulk: factor diagonal must be positive");
        }
        for (Eigen::Index j = i + 1; j < d; ++j) {
            if (factor(i, j) != 0.0) {
                throw std::invalid_argument("make_ellipsoid_bulk: factor must be lower-triangular");
            }
        }
    }
    return EllipsoidBulk{std::move(center), std::move(factor), radius};
}

inline BulkSet make_box_bulk(Vector center, Vector halfwidth, double radius) {
    if (halfwidth.size() != center.size()) {
        throw std::invalid_argument("make_box_bulk: halfwidth dimension mismatch");
    }
    if (!(radius >= 0.0)) throw std::invalid_argument("make_box_bulk: radius must be >= 0");
    if ((halfwidth.array() <= 0.0).any()) {
        throw std::invalid_argument("make_box_bulk: halfwidths must be positive");
    }
    return BoxBulk{std::move(center), std::move(halfwidth), radius};
}

inline BulkSet make_product_bulk(std::vector<ProductBulk::Block> blocks, Eigen::Index total_dim) {
    if (blocks.empty()) throw std::invalid_argument("make_product_bulk: need at least one block");
    std::vector<bool> seen(static_cast<std::size_t>(total_dim), false);
    for (const auto& block : blocks) {
        const Eigen::Index block_dim = std::visit(
            [](const auto& b) -> Eigen::Index { return b.center.size(); }, block.bulk);
        if (static_cast<Eigen::Index>(block.dims.size()) != block_dim) {
            throw std::invalid_argument("make_product_bulk: block index/geometry size mismatch");
        }
        for (Eigen::Index dim : block.dims) {
            if (dim < 0 || dim >= total_dim || seen[static_cast<std::size_t>(dim)]) {
                throw std::invalid_argument("make_product_bulk: blocks must partition the dimensions");
            }
            seen[static_cast<std::size_t>(dim)] = true;
        }
    }
    for (bool s : seen) {
        if (!s) throw std::invalid_argument("make_product_bulk: blocks must cover every dimension");
    }
    return ProductBulk{std::move(blocks)};
}

inline Eigen::Index bulk_dim(const BulkSet& bulk) {
    struct Visitor {
        Eigen::Index operator()(const EllipsoidBulk& b) const { return b.center.size(); }
        Eigen::Index operator()(const BoxBulk& b) const { return b.center.size(); }
        Eigen::Index operator()(const ProductBulk& b) const {
            Eigen::Index total = 0;
            for (const auto& block : b.blocks) total += static_cast<Eigen::Index>(block.dims.size());
            return total;
        }
    };
    return std::visit(Visitor{}, bulk);
}

namespace detail {

inline bool ellipsoid_contains(const EllipsoidBulk& b, const Vector& xi) {
    Vector u = b.factor.triangularView<Eigen::Lower>().solve(xi - b.center);
    return u.norm() <= b.radius;
}

inline bool box_contains(const BoxBulk& b, const Vector& xi) {
    return ((xi - b.center).cwiseAbs().array() / b.halfwidth.array()).maxCoeff() <= b.radius;
}

inline Vector gather(const Vector& xi, const std::vector<Eigen::Index>& dims) {
    Vector sub(static_cast<Eigen::Index>(dims.size()));
    for (std::size_t i = 0; i < dims.size(); ++i) sub[static_cast<Eigen::Index>(i)] = xi[dims[i]];
    return sub;
}

}  // namespace detail

inline bool bulk_contains(const BulkSet& bulk, const Vector& xi) {
    if (xi.size() != bulk_dim(bulk)) {
        throw std::invalid_argument("bulk_contains: outcome dimension mismatch");
    }
    struct Visitor {
        const Vector& xi;
        bool operator()(const EllipsoidBulk& b) const { return detail::ellipsoid_contains(b, xi); }
        bool operator()(const BoxBulk& b) const { return detail::box_contains(b, xi); }
        bool operator()(const ProductBulk& b) const {
            for (const auto& block : b.blocks) {
                Vector sub = detail::gather(xi, block.dims);
                bool inside = std::visit(
                    [&sub](const auto& inner) {
                        using T = std::decay_t<decltype(inner)>;
                        if constexpr (std::is_same_v<T, EllipsoidBulk>) {
                            return detail::ellipsoid_contains(inner, sub);
                        } else {
                            return detail::box_contains(inner, sub);
                        }
                    },
                    block.bulk);
                if (!inside) return false;
            }
            return true;
        }
    };
    return std::visit(Visitor{xi}, bulk);
}

// ---------------------------------------------------------------------------
// Finite distributions
// ---------------------------------------------------------------------------

/// Finite-support law over scalar atoms; the substrate for all brute-force
/// oracles. Probabilities must be nonnegative and sum to one within 1e-12.
struct DiscreteDistribution {
    std::vector<double> atoms;
    std::vector<double> probs;

    DiscreteDistribution(std::vector<double> atoms_in, std::vector<double> probs_in)
        : atoms(std::move(atoms_in)), probs(std::move(probs_in)) {
        if (atoms.empty() || atoms.size() != probs.size()) {
            throw std::invalid_argument("DiscreteDistribution: atoms/probs size mismatch");
        }
        double total = 0.0;
        for (double p : probs) {
            if (!(p >= 0.0)) throw std::invalid_argument("DiscreteDistribution: negative probability");
            total += p;
        }
        if (std::abs(total - 1.0) > defaults().prob_sum_tol) {
            throw std::invalid_argument("DiscreteDistribution: probabilities sum to " +
                                        std::to_string(total));
        }
    }

    std::size_t size() const { return atoms.size(); }

    double mean() const {
        double m = 0.0;
        for (std::size_t i = 0; i < atoms.size(); ++i) m += probs[i] * atoms[i];
        return m;
    }
};

// ---------------------------------------------------------------------------
// Reporting
// ---------------------------------------------------------------------------

/// One point of an OOS mean/SD frontier sweep. msd is always (mean + sd) / 2.
struct FrontierPoint {
    double tolerance = 0.0;
    double oos_mean = 0.0;
    double oos_sd = 0.0;
    double msd = 0.0;
    double solve_seconds = 0.0;
};

inline FrontierPoint make_frontier_point(double tolerance, double oos_mean, double oos_sd,
                                         double solve_seconds) {
    return FrontierPoint{tolerance, oos_mean, oos_sd, 0.5 * (oos_mean + oos_sd), solve_seconds};
}

}  // namespace credal
