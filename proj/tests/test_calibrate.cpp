#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

#include "credal/calibrate.hpp"
#include "credal/common.hpp"
#include "credal/rng.hpp"

using namespace credal;

namespace {

DiscreteDistribution random_distribution(Rng& rng, std::size_t n) {
    std::vector<double> atoms(n), probs(n);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        atoms[i] = static_cast<double>(i);
        probs[i] = rng.uniform01();
        total += probs[i];
    }
    for (double& p : probs) p /= total;
    return DiscreteDistribution(std::move(atoms), std::move(probs));
}

}  // namespace

TEST_CASE("fit_score recovers symmetric centres exactly") {
    Matrix x(7, 2);
    x << 0, 0, 0, 0, 0, 0, 2, 0, -2, 0, 0, 2, 0, -2;
    auto score = fit_score(OutcomeMatrix(x), BulkGeometry::Ellipsoid);
    const auto& s = std::get<MahalanobisScore>(score);
    CHECK(s.center[0] == 0.0);
    CHECK(s.center[1] == 0.0);
}

TEST_CASE("fit_score covariance approaches identity on standard normal data") {
    Rng rng(2024);
    Matrix x(5000, 2);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        x(i, 0) = rng.normal();
        x(i, 1) = rng.normal();
    }
    auto score = fit_score(OutcomeMatrix(x), BulkGeometry::Ellipsoid);
    const auto& s = std::get<MahalanobisScore>(score);
    Matrix sigma = s.factor * s.factor.transpose();
    CHECK((sigma - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() < 0.1);

    auto box = fit_score(OutcomeMatrix(x), BulkGeometry::Box);
    const auto& b = std::get<ScaledBoxScore>(box);
    CHECK(b.scale[0] == Catch::Approx(1.0).margin(0.1));
    CHECK(b.scale[1] == Catch::Approx(1.0).margin(0.1));
}

TEST_CASE("fit_score rejects n_fit = d") {
    Matrix x(2, 2);
    x << 1, 2, 3, 4;
    CHECK_THROWS_AS(fit_score(OutcomeMatrix(x), BulkGeometry::Ellipsoid), std::invalid_argument);
}

TEST_CASE("dkw radius closed form") {
    CHECK(dkw_radius(1000, 0.05) ==
          Catch::Approx(std::sqrt(std::log(40.0) / 2000.0)).margin(1e-15));
    CHECK(dkw_radius(1000, 0.05) == Catch::Approx(0.0429469).margin(1e-6));
    CHECK(dkw_radius(4000, 0.05) == Catch::Approx(dkw_radius(1000, 0.05) / 2.0).margin(1e-15));
    CHECK(min_selection_size(0.05, 0.05) == 738);
    CHECK(min_selection_size(0.10, 0.05) == 185);
    // Scan cross-check: the returned m is the first certifiable one.
    for (auto [g, d] : {std::pair{0.05, 0.05}, std::pair{0.10, 0.05}, std::pair{0.05, 0.01}}) {
        const int m = min_selection_size(g, d);
        CHECK(dkw_radius(m, d) <= g);
        CHECK(dkw_radius(m - 1, d) > g);
    }
}

TEST_CASE("select_threshold follows the order-statistic rule") {
    std::vector<double> scores{10, 9, 8, 7, 6, 5, 4, 3, 2, 1};
    auto r = select_threshold(scores, 0.5, 0.5);
    REQUIRE(r.certified);
    CHECK(r.r_mdelta == Catch::Approx(0.2632769).margin(1e-6));
    CHECK(r.selected_index == 8);
    CHECK(r.threshold == 8.0);
}

TEST_CASE("select_threshold reports the smallest certifiable gamma") {
    std::vector<double> scores(100);
    Rng rng(5);
    for (auto& s : scores) s = rng.uniform01();
    auto r = select_threshold(scores, 0.01, 0.05);
    CHECK_FALSE(r.certified);
    CHECK(r.smallest_certifiable_gamma == Catch::Approx(0.1358102).margin(1e-6));
    CHECK(std::isnan(r.threshold));
}

TEST_CASE("select_threshold boundary index arithmetic") {
    // gamma = 1 - 1/m + r makes m(1 - gamma + r) land exactly on 1; only
    // m <= 2 keeps such a gamma below one.
    std::vector<double> scores{3.0, 0.2};
    const int m = 2;
    const double r = dkw_radius(m, 0.9);
    const double gamma = 1.0 - 1.0 / m + r;
    REQUIRE(gamma < 1.0);
    auto res = select_threshold(scores, gamma, 0.9);
    REQUIRE(res.certified);
    CHECK(res.selected_index == 1);
    CHECK(res.threshold == 0.2);
}

TEST_CASE("select_threshold rejects bad input") {
    CHECK_THROWS_AS(select_threshold({}, 0.1, 0.1), std::invalid_argument);
    CHECK_THROWS_AS(select_threshold({1.0}, 0.0, 0.1), std::invalid_argument);
    CHECK_THROWS_AS(select_threshold({1.0}, 0.1, 1.0), std::invalid_argument);
}

TEST_CASE("threshold is nonincreasing in gamma") {
    Rng rng(11);
    std::vector<double> scores(400);
    for (auto& s : scores) s = rng.normal();
    double prev = kInf;
    for (double gamma : {0.05, 0.1, 0.2, 0.3, 0.5, 0.7}) {
        auto r = select_threshold(scores, gamma, 0.05);
        if (!r.certified) continue;
        CHECK(r.threshold <= prev + 1e-15);
        prev = r.threshold;
    }
}

TEST_CASE("score/bulk consistency") {
    Rng rng(31);
    Matrix x(200, 3);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        for (Eigen::Index j = 0; j < 3; ++j) x(i, j) = rng.normal() * (1.0 + 0.3 * j);
    }
    OutcomeMatrix data(x);
    for (auto geometry : {BulkGeometry::Ellipsoid, BulkGeometry::Box}) {
        auto score = fit_score(data, geometry);
        for (int trial = 0; trial < 500; ++trial) {
            Vector xi(3);
            for (int j = 0; j < 3; ++j) xi[j] = rng.uniform(-6.0, 6.0);
            const double t = rng.uniform(0.0, 4.0);
            const bool by_score = score_value(score, xi) <= t;
            const bool by_bulk = bulk_contains(score_bulk(score, t), xi);
            REQUIRE(by_score == by_bulk);
        }
    }
}

TEST_CASE("blockwise calibration aggregates budgets") {
    Rng rng(77);
    std::vector<double> s1(1000), s2(1000);
    for (auto& s : s1) s = std::abs(rng.normal());
    for (auto& s : s2) s = std::abs(rng.normal());
    auto agg = calibrate_blockwise({s1, s2}, {{0.05, 0.025}, {0.05, 0.025}});
    REQUIRE(agg.certified);
    CHECK(agg.total_gamma == Catch::Approx(0.1));
    CHECK(agg.total_delta == Catch::Approx(0.05));

    auto single = calibrate_blockwise({s1}, {{0.1, 0.05}});
    auto direct = select_threshold(s1, 0.1, 0.05);
    CHECK(single.blocks[0].threshold == direct.threshold);
    CHECK(single.blocks[0].selected_index == direct.selected_index);

    auto uncertifiable = calibrate_blockwise({s1, {1.0, 2.0}}, {{0.05, 0.025}, {0.05, 0.025}});
    CHECK_FALSE(uncertifiable.certified);
}

TEST_CASE("blockwise certificate holds on a known product law") {
    // Two independent standard-normal score blocks; true joint mass of the
    // calibrated intersection is Phi(t1) * Phi(t2) by independence.
    const int trials = 500;
    const int m = 1000;  // must exceed min_selection_size(0.05, 0.025) = 877
    const double gamma_i = 0.05, delta_i = 0.025;
    int covered = 0;
    for (int trial = 0; trial < trials; ++trial) {
        Rng rng = Rng::derive(991100, static_cast<std::uint64_t>(trial));
        std::vector<double> s1(m), s2(m);
        for (int i = 0; i < m; ++i) {
            s1[static_cast<std::size_t>(i)] = rng.normal();
            s2[static_cast<std::size_t>(i)] = rng.normal();
        }
        auto agg = calibrate_blockwise({s1, s2}, {{gamma_i, delta_i}, {gamma_i, delta_i}});
        REQUIRE(agg.certified);
        const double mass =
            normal_cdf(agg.blocks[0].threshold) * normal_cdf(agg.blocks[1].threshold);
        if (mass >= 1.0 - agg.total_gamma) ++covered;
    }
    const double target = 1.0 - 0.05;  // 1 - sum delta_i
    const double slack = 3.0 * std::sqrt(target * (1.0 - target) / trials);
    CHECK(static_cast<double>(covered) / trials >= target - slack);
}

TEST_CASE("eps_c lower bound is zero for a matched centre") {
    Rng rng(13);
    std::vector<double> train(20000), centre(20000);
    for (auto& s : train) s = std::abs(rng.normal());
    for (auto& s : centre) s = std::abs(rng.normal());
    auto diag = make_eps_diagnostics(train, centre, 0.05, 0.1);
    CHECK(eps_c_lower_bound(diag) == 0.0);
}

TEST_CASE("eps_c lower bound falls back to zero without usable thresholds") {
    EpsilonDiagnostics diag;
    diag.thresholds = {1.0};
    diag.train_cdf = {0.5};
    diag.centre_cdf = {0.001};  // below r_c for N_c = 100
    diag.m = 100;
    diag.centre_n = 100;
    diag.gamma = 0.05;
    diag.delta = 0.1;
    CHECK(eps_c_lower_bound(diag) == 0.0);
}

TEST_CASE("eps_c lower bound on a dominating centre CDF") {
    EpsilonDiagnostics diag;
    diag.thresholds = {1.0, 2.0};
    diag.train_cdf = {0.2, 1.0};
    diag.centre_cdf = {0.8, 1.0};
    diag.m = 10000;
    diag.centre_n = 10000;
    diag.gamma = 0.05;
    diag.delta = 0.1;
    // Spreadsheet-style recomputation of the k = 1 bracket.
    const double r = std::sqrt(std::log(4.0 / 0.1) / (2.0 * 10000.0));
    const double expected = 1.0 - (0.2 + r) * (1.0 + r) / (0.95 * (0.8 - r));
    CHECK(expected == Catch::Approx(0.7102).margin(5e-4));
    CHECK(eps_c_lower_bound(diag) == Catch::Approx(expected).margin(1e-12));
}

TEST_CASE("lv distortion discrete examples") {
    DiscreteDistribution p({0.0, 1.0}, {0.5, 0.5});
    DiscreteDistribution q({0.0, 1.0}, {0.3, 0.7});
    CHECK(lv_distortion_discrete(q, p) == Catch::Approx(0.4).margin(1e-12));
    CHECK(lv_distortion_discrete(p, p) == 0.0);
    DiscreteDistribution dirac({0.0, 1.0}, {0.0, 1.0});
    CHECK(lv_distortion_discrete(dirac, p) == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("lv distortion brute force examples") {
    DiscreteDistribution p({0.0, 1.0}, {0.5, 0.5});
    DiscreteDistribution q({0.0, 1.0}, {0.3, 0.7});
    CHECK(lv_distortion_bruteforce(q, p) == Catch::Approx(0.4).margin(1e-12));
    CHECK(lv_distortion_bruteforce(p, p) == 0.0);
    DiscreteDistribution uniform4({0.0, 1.0, 2.0, 3.0}, {0.25, 0.25, 0.25, 0.25});
    DiscreteDistribution moved({0.0, 1.0, 2.0, 3.0}, {0.0, 0.25, 0.25, 0.5});
    CHECK(lv_distortion_bruteforce(moved, uniform4) == Catch::Approx(1.0).margin(1e-12));
    std::vector<double> atoms(21), probs(21, 1.0 / 21.0);
    for (std::size_t i = 0; i < atoms.size(); ++i) atoms[i] = static_cast<double>(i);
    DiscreteDistribution large(atoms, probs);
    CHECK_THROWS_AS(lv_distortion_bruteforce(large, large), std::invalid_argument);
}

TEST_CASE("discrete formula equals the event-wise brute force") {
    Rng rng(404);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t n = 2 + rng.uniform_index(11);
        auto p = random_distribution(rng, n);
        auto q = random_distribution(rng, n);
        REQUIRE(lv_distortion_discrete(q, p) ==
                Catch::Approx(lv_distortion_bruteforce(q, p)).margin(1e-12));
    }
}

TEST_CASE("mixtures stay within the LV ball radius") {
    Rng rng(505);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t n = 2 + rng.uniform_index(9);
        auto p = random_distribution(rng, n);
        auto r = random_distribution(rng, n);
        const double eps = rng.uniform01();
        std::vector<double> mix(n);
        for (std::size_t i = 0; i < n; ++i) mix[i] = (1.0 - eps) * p.probs[i] + eps * r.probs[i];
        DiscreteDistribution q(p.atoms, mix);
        REQUIRE(lv_distortion_discrete(q, p) <= eps + 1e-12);
    }
}

TEST_CASE("distortion unions non-shared supports with zero padding") {
    DiscreteDistribution p({0.0, 1.0}, {0.5, 0.5});
    DiscreteDistribution q({1.0, 2.0}, {0.5, 0.5});
    // Q gives mass 0 to atom 0, so the distortion is 1.
    CHECK(lv_distortion_discrete(q, p) == Catch::Approx(1.0).margin(1e-12));
    CHECK(lv_distortion_bruteforce(q, p) == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("split_fit_select partitions deterministically") {
    Rng rng(606);
    Matrix x(101, 2);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        x(i, 0) = static_cast<double>(i);
        x(i, 1) = rng.normal();
    }
    OutcomeMatrix data(x);
    auto a = split_fit_select(data, 0.5, 42);
    auto b = split_fit_select(data, 0.5, 42);
    CHECK(a.fit.values() == b.fit.values());
    CHECK(a.select.values() == b.select.values());
    CHECK(a.fit.rows() + a.select.rows() == data.rows());
    std::vector<double> seen;
    for (Eigen::Index i = 0; i < a.fit.rows(); ++i) seen.push_back(a.fit.values()(i, 0));
    for (Eigen::Index i = 0; i < a.select.rows(); ++i) seen.push_back(a.select.values()(i, 0));
    std::sort(seen.begin(), seen.end());
    for (std::size_t i = 0; i < seen.size(); ++i) REQUIRE(seen[i] == static_cast<double>(i));
}

TEST_CASE("coverage certificate holds for standard normal scores") {
    // Reduced-trial smoke version of the acceptance criterion.
    const int trials = 120;
    const int m = 1000;
    int covered = 0;
    for (int trial = 0; trial < trials; ++trial) {
        Rng rng = Rng::derive(321, static_cast<std::uint64_t>(trial));
        std::vector<double> scores(m);
        for (auto& s : scores) s = rng.normal();
        auto r = select_threshold(scores, 0.05, 0.05);
        REQUIRE(r.certified);
        if (normal_cdf(r.threshold) >= 0.95) ++covered;
    }
    CHECK(static_cast<double>(covered) / trials >= 0.9);
}
