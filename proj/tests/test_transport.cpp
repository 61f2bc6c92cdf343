#include <algorithm>
#include <cmath>
#include <limits>

#include "support.hpp"
#include "otrom/transport.hpp"

using namespace otrom;
using namespace otrom::transport;
using measure::DiscreteMeasure;
using measure::Grid;

namespace {

CostMatrix matrix(std::size_t n, std::size_t m, std::vector<double> e) { return CostMatrix{n, m, 2, std::move(e)}; }

CostMatrix random_cost(std::mt19937_64& rng, std::size_t n, std::size_t m) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> e(n * m);
    for (auto& v : e) v = u(rng);
    return matrix(n, m, e);
}

SinkhornOptions with_eps(double eps) {
    SinkhornOptions o;
    o.epsilon = eps;
    return o;
}

// Entropic objective on the one-parameter family [[x, 0.5 - x], [0.5 - x, x]].
double entropic_objective(double x, const CostMatrix& c, double eps) {
    const double p[4] = {x, 0.5 - x, 0.5 - x, x};
    double v = 0.0;
    for (int k = 0; k < 4; ++k) {
        v += c.entries[k] * p[k];
        if (p[k] > 0.0) v += eps * p[k] * std::log(p[k]);
    }
    return v;
}

DiscreteMeasure random_measure(std::mt19937_64& rng, std::size_t cells, std::size_t n) {
    std::vector<std::uint32_t> all(cells);
    for (std::uint32_t l = 0; l < cells; ++l) all[l] = l;
    std::shuffle(all.begin(), all.end(), rng);
    std::vector<std::uint32_t> support(all.begin(), all.begin() + static_cast<long>(n));
    std::sort(support.begin(), support.end());
    return DiscreteMeasure(support, test::random_simplex(rng, n), 1.0);
}

}  // namespace

TEST_CASE("cost matrix examples") {
    const Grid g(2, 1, 1.0, 1.0);
    const DiscreteMeasure a({0}, {1.0}, 1.0);
    CHECK(build_cost_matrix(a, a, g).entries == std::vector<double>{0.0});

    const Grid line(4, 1, 1.5, 1.0);
    const DiscreteMeasure far({3}, {1.0}, 1.0);
    CHECK(build_cost_matrix(a, far, line).entries[0] == doctest::Approx(4.5 * 4.5));
    CHECK(build_cost_matrix(a, far, line, 1).entries[0] == doctest::Approx(4.5));

    const DiscreteMeasure two({0, 1}, {0.5, 0.5}, 1.0);
    CHECK(build_cost_matrix(two, two, g).entries == std::vector<double>{0.0, 1.0, 1.0, 0.0});
    CHECK_CODE(build_cost_matrix(two, two, g, 3), ErrorCode::InvalidArgument);
}

TEST_CASE("single atom coupling is trivial") {
    const std::vector<double> one{1.0};
    const auto p = sinkhorn(one, one, matrix(1, 1, {7.0}), with_eps(0.1));
    CHECK(p(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(p.marginal_violation <= 1e-15);
}

TEST_CASE("2x2 plan matches brute force minimization of the entropic objective") {
    const std::vector<double> half{0.5, 0.5};
    const auto c = matrix(2, 2, {0.0, 1.0, 1.0, 0.0});
    for (double eps : {0.01, 0.3, 1.0}) {
        const auto p = sinkhorn(half, half, c, with_eps(eps));
        double best_x = 0.0, best = std::numeric_limits<double>::infinity();
        for (int k = 0; k <= 500000; ++k) {
            const double x = 0.5 * k / 500000.0;
            const double v = entropic_objective(x, c, eps);
            if (v < best) best = v, best_x = x;
        }
        CHECK(std::abs(p(0, 0) - best_x) <= 2e-6);
        CHECK(std::abs(p(0, 1) - (0.5 - best_x)) <= 2e-6);
        if (eps == 0.01) {
            CHECK(p(0, 1) < 1e-3);
            CHECK(p(0, 0) == doctest::Approx(0.5).epsilon(1e-6));
        }
    }
}

TEST_CASE("exact_lp examples") {
    const std::vector<double> half{0.5, 0.5};
    auto s = exact_lp(half, half, matrix(2, 2, {0, 1, 1, 0}));
    CHECK(s.cost == 0.0);
    CHECK(s.plan == std::vector<double>{0.5, 0.0, 0.0, 0.5});

    s = exact_lp(half, half, matrix(2, 2, {1, 0, 0, 1}));
    CHECK(s.cost == 0.0);
    CHECK(s.plan == std::vector<double>{0.0, 0.5, 0.5, 0.0});

    const std::vector<double> a{0.7, 0.3}, b{0.4, 0.6};
    s = exact_lp(a, b, matrix(2, 2, {0, 1, 1, 0}));
    // Feasible family [[x, 0.7 - x], [0.4 - x, x - 0.1]] for x in [0.1, 0.4]; cost 1.1 - 2x.
    double best = std::numeric_limits<double>::infinity();
    for (int k = 0; k <= 30000; ++k) best = std::min(best, 1.1 - 2.0 * (0.1 + 0.3 * k / 30000.0));
    CHECK(s.cost == doctest::Approx(best).epsilon(1e-12));
    CHECK(s.cost == doctest::Approx(0.3).epsilon(1e-12));
    const std::vector<double> expected{0.4, 0.3, 0.0, 0.3};
    for (int k = 0; k < 4; ++k) CHECK(s.plan[k] == doctest::Approx(expected[k]).epsilon(1e-12));

    const std::vector<double> big(9, 1.0 / 9.0);
    CHECK_CODE(exact_lp(big, big, matrix(9, 9, std::vector<double>(81, 1.0))), ErrorCode::TooLarge);
}

TEST_CASE("exact_lp agrees with permutation enumeration on random non-uniform instances") {
    // For uniform square marginals the optimum is a permutation; for general
    // marginals check against the permutation bound and LP duality via random feasible plans.
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t n = 2 + trial % 3, m = 2 + (trial / 3) % 3;
        const auto a = test::random_simplex(rng, n);
        const auto b = test::random_simplex(rng, m);
        const auto c = random_cost(rng, n, m);
        const auto s = exact_lp(a, b, c);
        std::vector<double> rows(n, 0.0), cols(m, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < m; ++j) {
                CHECK(s.plan[i * m + j] >= -1e-15);
                rows[i] += s.plan[i * m + j];
                cols[j] += s.plan[i * m + j];
            }
        for (std::size_t i = 0; i < n; ++i) CHECK(rows[i] == doctest::Approx(a[i]).epsilon(1e-12));
        for (std::size_t j = 0; j < m; ++j) CHECK(cols[j] == doctest::Approx(b[j]).epsilon(1e-12));
        // The product coupling is feasible, so it can never beat the optimum.
        double product = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < m; ++j) product += a[i] * b[j] * c(i, j);
        CHECK(s.cost <= product + 1e-12);
        // North-west corner plan is also feasible.
        std::vector<double> ra = a, rb = b;
        double nw = 0.0;
        for (std::size_t i = 0, j = 0; i < n && j < m;) {
            const double x = std::min(ra[i], rb[j]);
            nw += x * c(i, j);
            ra[i] -= x;
            rb[j] -= x;
            if (ra[i] <= 1e-15) ++i;
            else ++j;
        }
        CHECK(s.cost <= nw + 1e-12);
    }
}

TEST_CASE("uniform 3-atom instances come within 1% of the LP optimum") {
    std::mt19937_64 rng(3);
    const std::vector<double> u(3, 1.0 / 3.0);
    for (int trial = 0; trial < 20; ++trial) {
        const auto c = random_cost(rng, 3, 3);
        const auto lp = exact_lp(u, u, c);
        const auto p = sinkhorn(u, u, c, with_eps(1e-3 * c.mean()));
        CHECK(transport_cost(p, c) <= lp.cost * 1.01 + 1e-12);
        CHECK(transport_cost(p, c) >= lp.cost - 1e-9);
    }
}

TEST_CASE("transport_cost examples") {
    CHECK(transport_cost(TransportPlan::dense(1, 1, {1.0}), matrix(1, 1, {0.0})) == 0.0);
    CHECK(transport_cost(TransportPlan::dense(1, 1, {1.0}), matrix(1, 1, {3.5})) == 3.5);
    CHECK(transport_cost(TransportPlan::dense(2, 2, {0.5, 0, 0, 0.5}), matrix(2, 2, {0, 1, 1, 0})) == 0.0);
    CHECK_CODE(transport_cost(TransportPlan::dense(1, 1, {1.0}), matrix(2, 1, {0, 0})), ErrorCode::ShapeMismatch);
}

TEST_CASE("random instances are feasible, symmetric and deterministic") {
    std::mt19937_64 rng(5);
    const Grid g(16, 16, 1.0, 1.0);
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t n = 1 + rng() % 32, m = 1 + rng() % 32;
        const auto mu = random_measure(rng, g.size(), n);
        const auto nu = random_measure(rng, g.size(), m);
        const auto c = build_cost_matrix(mu, nu, g);
        const auto opts = with_eps(1e-2 * c.mean() + 1e-3);
        const auto p = sinkhorn(mu.weights(), nu.weights(), c, opts);
        CHECK(p.marginal_violation <= 1e-9);
        CHECK(p.marginal_error(mu.weights(), nu.weights()) <= 1e-9);
        CHECK(std::abs(p.total_mass() - 1.0) <= 1e-9);
        for (double v : p.values()) CHECK(v >= 0.0);

        const auto q = sinkhorn(nu.weights(), mu.weights(), c.transposed(), opts);
        double diff = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < m; ++j) diff = std::max(diff, std::abs(p(i, j) - q(j, i)));
        CHECK(diff <= 1e-9);

        CHECK(sinkhorn(mu.weights(), nu.weights(), c, opts) == p);
    }
}

TEST_CASE("grid kernel solver agrees with the dense solver") {
    std::mt19937_64 rng(9);
    const Grid g(12, 9, 0.7, 1.3, 2.0, -1.0);
    for (int trial = 0; trial < 10; ++trial) {
        const auto mu = random_measure(rng, g.size(), 5 + rng() % 40);
        const auto nu = random_measure(rng, g.size(), 5 + rng() % 40);
        const auto c = build_cost_matrix(mu, nu, g);
        CHECK(mean_squared_distance(mu, nu, g) == doctest::Approx(c.mean()).epsilon(1e-12));
        const auto opts = with_eps(0.05 * c.mean());
        const auto dense = sinkhorn(mu.weights(), nu.weights(), c, opts);
        const auto grid = sinkhorn_on_grid(mu, nu, g, opts);
        REQUIRE(grid.rows() == dense.rows());
        double diff = 0.0;
        for (std::size_t i = 0; i < dense.rows(); ++i)
            for (std::size_t j = 0; j < dense.cols(); ++j) diff = std::max(diff, std::abs(dense(i, j) - grid(i, j)));
        CHECK(diff <= 1e-9);
    }
}

TEST_CASE("transport cost is nonincreasing as epsilon decreases") {
    std::mt19937_64 rng(13);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 3 + trial % 6, m = 2 + trial % 5;
        const auto a = test::random_simplex(rng, n);
        const auto b = test::random_simplex(rng, m);
        const auto c = random_cost(rng, n, m);
        double prev = std::numeric_limits<double>::infinity();
        for (double f : {1.0, 0.1, 0.01}) {
            const double cost = transport_cost(sinkhorn(a, b, c, with_eps(f * c.mean())), c);
            CHECK(cost <= prev + 1e-9);
            prev = cost;
        }
    }
}

TEST_CASE("large supports are stored sparse and still feasible") {
    const Grid g(40, 40, 1.0, 1.0);
    std::vector<double> da(g.size()), db(g.size());
    for (std::size_t l = 0; l < g.size(); ++l) {
        const auto p = g.cell_center(l);
        da[l] = std::exp(-((p.x - 12) * (p.x - 12) + (p.z - 20) * (p.z - 20)) / 18.0);
        db[l] = std::exp(-((p.x - 26) * (p.x - 26) + (p.z - 20) * (p.z - 20)) / 18.0);
    }
    const auto mu = *DiscreteMeasure::from_density(da);
    const auto nu = *DiscreteMeasure::from_density(db);
    SinkhornOptions opts = with_eps(0.01 * mean_squared_distance(mu, nu, g));
    opts.dense_limit = 1000;
    const auto p = sinkhorn_on_grid(mu, nu, g, opts);
    CHECK(p.is_sparse());
    CHECK(p.stored_entries() < p.rows() * p.cols());
    CHECK(p.marginal_error(mu.weights(), nu.weights()) <= 1e-9);
    CHECK(p.marginal_violation <= 1e-9);
}

TEST_CASE("failures carry their category") {
    const std::vector<double> half{0.5, 0.5};
    const auto c = matrix(2, 2, {0, 1, 1, 0});
    SinkhornOptions tight = with_eps(1e-3);
    tight.max_iters = 1;
    tight.check_every = 1;
    tight.eps_start_multiplier = 1.0;
    const std::vector<double> a{0.9, 0.1}, b{0.2, 0.8};
    try {
        (void)sinkhorn(a, b, matrix(2, 2, {0, 5, 5, 0}), tight);
        FAIL("expected NotConverged");
    } catch (const NotConvergedError& e) {
        CHECK(e.code() == ErrorCode::NotConverged);
        CHECK(e.violation() > 1e-9);
        CHECK(e.best_plan().rows() == 2);
    }
    CHECK_CODE(sinkhorn(half, half, c, with_eps(-1.0)), ErrorCode::InvalidArgument);
    const std::vector<double> bad{0.6, 0.6};
    CHECK_CODE(sinkhorn(bad, half, c, with_eps(1.0)), ErrorCode::InvalidArgument);
    CHECK_CODE(sinkhorn(half, half, matrix(1, 2, {0, 1}), with_eps(1.0)), ErrorCode::ShapeMismatch);
}

TEST_CASE("solve counter advances once per solve") {
    const std::vector<double> one{1.0};
    const auto before = solve_count();
    (void)sinkhorn(one, one, matrix(1, 1, {0.0}), with_eps(1.0));
    (void)sinkhorn(one, one, matrix(1, 1, {0.0}), with_eps(1.0));
    CHECK(solve_count() == before + 2);
}
