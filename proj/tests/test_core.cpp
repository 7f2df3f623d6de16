#include <catch2/catch_amalgamated.hpp>

#include "credal/rng.hpp"
#include "credal/types.hpp"

using namespace credal;

namespace {

Vector vec(std::initializer_list<double> xs) {
    Vector v(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) v[i++] = x;
    return v;
}

}  // namespace

TEST_CASE("evaluate_loss matches hand values") {
    PiecewiseAffineLoss abs_x1({{vec({1, 0}), 0.0}, {vec({-1, 0}), 0.0}});
    CHECK(evaluate_loss(abs_x1, vec({2, 5})) == 2.0);

    auto nv = DecisionLoss::newsvendor(3.0, 8.0, 1);
    auto induced = nv.induced(vec({5}));
    CHECK(evaluate_loss(induced, vec({3})) == Catch::Approx(6.0).margin(1e-12));
    CHECK(evaluate_loss(induced, vec({7})) == Catch::Approx(16.0).margin(1e-12));

    CHECK_THROWS_AS(evaluate_loss(abs_x1, vec({1, 2, 3})), std::invalid_argument);
}

TEST_CASE("newsvendor piece expansion equals direct evaluation") {
    Rng rng(20260810);
    for (int d : {1, 2, 3, 5}) {
        auto loss = DecisionLoss::newsvendor(3.0, 8.0, d);
        for (int trial = 0; trial < 250; ++trial) {
            Vector x(d), xi(d);
            for (int j = 0; j < d; ++j) {
                x[j] = rng.uniform(-5.0, 40.0);
                xi[j] = rng.uniform(-5.0, 40.0);
            }
            const double direct = loss.evaluate(x, xi);
            const double expanded = evaluate_loss(loss.induced(x), xi);
            REQUIRE(direct == Catch::Approx(expanded).margin(1e-10));
        }
    }
}

TEST_CASE("newsvendor expansion is capped at 20 items") {
    auto loss = DecisionLoss::newsvendor(3.0, 8.0, 21);
    CHECK_THROWS_AS(loss.induced(Vector::Zero(21)), std::invalid_argument);
}

TEST_CASE("decision losses are midpoint convex in the decision") {
    Rng rng(7);
    auto check_midpoint = [&rng](const DecisionLoss& loss) {
        const int dd = loss.decision_dim();
        const int od = loss.outcome_dim();
        for (int trial = 0; trial < 1000; ++trial) {
            Vector a(dd), b(dd), xi(od);
            for (int j = 0; j < dd; ++j) {
                a[j] = rng.uniform(-10.0, 10.0);
                b[j] = rng.uniform(-10.0, 10.0);
            }
            for (int j = 0; j < od; ++j) xi[j] = rng.uniform(-10.0, 10.0);
            const double mid = loss.evaluate(0.5 * (a + b), xi);
            const double avg = 0.5 * loss.evaluate(a, xi) + 0.5 * loss.evaluate(b, xi);
            REQUIRE(mid <= avg + 1e-9);
        }
    };
    check_midpoint(DecisionLoss::newsvendor(3.0, 8.0, 3));
    check_midpoint(DecisionLoss::lad_regression(4));
}

TEST_CASE("bulk membership") {
    BulkSet unit = make_ellipsoid_bulk(Vector::Zero(2), Matrix::Identity(2, 2), 1.0);
    CHECK(bulk_contains(unit, vec({0, 0})));
    const double c = 1.001 / std::sqrt(2.0);
    CHECK_FALSE(bulk_contains(unit, vec({c, c})));

    BulkSet box = make_box_bulk(Vector::Zero(2), vec({1, 2}), 1.0);
    CHECK(bulk_contains(box, vec({0.5, 1.9})));
    CHECK_FALSE(bulk_contains(box, vec({1.01, 0.0})));

    CHECK_THROWS_AS(bulk_contains(unit, vec({1, 2, 3})), std::invalid_argument);
}

TEST_CASE("product bulk membership is the conjunction of block memberships") {
    Rng rng(99);
    Matrix l(2, 2);
    l << 1.0, 0.0, 0.4, 0.8;
    ProductBulk::Block bx{{0, 1}, EllipsoidBulk{vec({1, -1}), l, 1.7}};
    ProductBulk::Block by{{2}, BoxBulk{vec({3}), vec({0.5}), 2.0}};
    BulkSet product = make_product_bulk({bx, by}, 3);
    BulkSet ex = make_ellipsoid_bulk(vec({1, -1}), l, 1.7);
    BulkSet bxy = make_box_bulk(vec({3}), vec({0.5}), 2.0);
    for (int trial = 0; trial < 2000; ++trial) {
        Vector xi(3);
        for (int j = 0; j < 3; ++j) xi[j] = rng.uniform(-4.0, 6.0);
        const bool joint = bulk_contains(product, xi);
        const bool split = bulk_contains(ex, xi.head(2)) && bulk_contains(bxy, xi.tail(1));
        REQUIRE(joint == split);
    }
}

TEST_CASE("bulk constructors enforce invariants") {
    Matrix bad = Matrix::Identity(2, 2);
    bad(0, 0) = 0.0;
    CHECK_THROWS_AS(make_ellipsoid_bulk(Vector::Zero(2), bad, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(make_ellipsoid_bulk(Vector::Zero(2), Matrix::Identity(2, 2), -0.5),
                    std::invalid_argument);
    CHECK_THROWS_AS(make_box_bulk(Vector::Zero(2), vec({1, 0}), 1.0), std::invalid_argument);
    // Overlapping and missing dimensions both reject.
    ProductBulk::Block b0{{0}, BoxBulk{vec({0}), vec({1}), 1.0}};
    ProductBulk::Block b0_again{{0}, BoxBulk{vec({0}), vec({1}), 1.0}};
    CHECK_THROWS_AS(make_product_bulk({b0, b0_again}, 2), std::invalid_argument);
    CHECK_THROWS_AS(make_product_bulk({b0}, 2), std::invalid_argument);
}

TEST_CASE("outcome matrix validation") {
    Matrix m(2, 2);
    m << 1, 2, 3, 4;
    OutcomeMatrix ok(m);
    CHECK(ok.rows() == 2);
    CHECK(ok.dim() == 2);
    m(1, 1) = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(OutcomeMatrix(m), std::invalid_argument);
}

TEST_CASE("discrete distribution validation") {
    CHECK_THROWS_AS(DiscreteDistribution({1.0, 2.0}, {0.6, 0.5}), std::invalid_argument);
    CHECK_THROWS_AS(DiscreteDistribution({1.0, 2.0}, {1.2, -0.2}), std::invalid_argument);
    DiscreteDistribution d({1.0, 3.0}, {0.25, 0.75});
    CHECK(d.mean() == Catch::Approx(2.5));
}

TEST_CASE("frontier point keeps msd recomputable") {
    auto fp = make_frontier_point(0.1, 4.0, 2.0, 0.25);
    CHECK(fp.msd == 0.5 * (fp.oos_mean + fp.oos_sd));
}

TEST_CASE("rng streams are deterministic and distinct") {
    Rng a = Rng::derive(42, 3);
    Rng b = Rng::derive(42, 3);
    Rng c = Rng::derive(42, 4);
    bool all_equal = true;
    bool any_diff_stream = false;
    for (int i = 0; i < 64; ++i) {
        const auto va = a.next_u64();
        all_equal = all_equal && (va == b.next_u64());
        any_diff_stream = any_diff_stream || (va != c.next_u64());
    }
    CHECK(all_equal);
    CHECK(any_diff_stream);
}

TEST_CASE("rng moments are sane") {
    Rng rng(123);
    double sum = 0.0, sum_sq = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double z = rng.normal();
        sum += z;
        sum_sq += z * z;
    }
    CHECK(sum / n == Catch::Approx(0.0).margin(0.01));
    CHECK(sum_sq / n == Catch::Approx(1.0).margin(0.02));

    double gsum = 0.0;
    const double shape = 2.5;
    for (int i = 0; i < n; ++i) gsum += rng.gamma(shape);
    CHECK(gsum / n == Catch::Approx(shape).margin(0.02));
}
