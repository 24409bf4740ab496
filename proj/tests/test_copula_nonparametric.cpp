#include <catch_amalgamated.hpp>

#include <random>
#include <vector>

#include "oracles.hpp"
#include "urmc/copula_models.hpp"
#include "urmc/copula_nonparametric.hpp"
#include "urmc/parallel.hpp"

using namespace urmc;
using Catch::Approx;

namespace {

RankPairs pairs(std::vector<std::size_t> a, std::vector<std::size_t> b) { return RankPairs(a, b); }

Sample from_ranks(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
    return Sample({a.begin(), a.end()}, {b.begin(), b.end()});
}

} // namespace

TEST_CASE("empirical copula hand cases", "[copula]") {
    const auto r = pairs({1, 2}, {2, 1});
    CHECK(empirical_copula(r, 0.5, 0.5) == 0.0);
    CHECK(empirical_copula(r, 0.5, 1.0) == 0.5);
    CHECK(empirical_copula(r, 1.0, 1.0) == 1.0);
    CHECK(empirical_copula(r, 0.49, 1.0) == 0.0);
    CHECK_THROWS_AS(empirical_copula(RankVector{1, 2}, RankVector{1}, 0.5, 0.5), InputError);
}

TEST_CASE("lattice matches brute-force C_n", "[copula]") {
    std::mt19937_64 rng(5);
    for (int rep = 0; rep < 50; ++rep) {
        std::vector<double> x, y;
        oracle::random_sample(rng, 7 + rep, x, y);
        const auto r0 = oracle::ranks(x), r1 = oracle::ranks(y);
        const RankPairs r(r0, r1);
        for (std::size_t m : {1u, 2u, 3u, 5u, 7u}) {
            const EmpiricalCopulaGrid g(r, m);
            for (std::size_t k = 0; k <= m; ++k)
                for (std::size_t l = 0; l <= m; ++l)
                    REQUIRE(g.at(k, l) == oracle::cn(r0, r1, double(k) / m, double(l) / m));
        }
    }
}

TEST_CASE("binomial weights sum to one", "[bernstein]") {
    for (std::size_t m : {1u, 2u, 10u, 200u, 100000u}) {
        for (double u : {0.0, 1e-9, 0.3, 0.5, 0.999, 1.0}) {
            double s = 0.0;
            for (double p : binomial_pmf(m, u))
                s += p;
            CHECK(s == Approx(1.0).margin(1e-12));
        }
    }
    CHECK(binomial_pmf(4, 0.3)[2] == Approx(oracle::binom(4, 2, 0.3)).epsilon(1e-13));
}

TEST_CASE("Bernstein derivative hand cases", "[bernstein]") {
    CHECK(bernstein_copula_deriv(pairs({1, 2}, {1, 2}), 1, 0.3, 0.5) == Approx(0.5));
    CHECK(bernstein_copula_deriv(pairs({1, 2}, {2, 1}), 2, 0.5, 0.5) == Approx(0.5));
    CHECK(bernstein_copula_deriv(pairs({1, 2}, {2, 1}), 2, 0.5, 0.5) ==
          Approx(oracle::bernstein_deriv({1, 2}, {2, 1}, 2, 0.5, 0.5)));
    CHECK_THROWS_AS(bernstein_copula_deriv(pairs({1, 2}, {2, 1}), 0, 0.5, 0.5), ParameterError);
    CHECK_THROWS_AS(bernstein_copula_deriv(pairs({1, 2}, {2, 1}), 3, 0.5, 0.5), ParameterError);
}

TEST_CASE("Bernstein derivative can exceed one when the order does not divide n", "[bernstein]") {
    // columns of the 2-grid hold one and two of three points
    const double d = bernstein_copula_deriv(pairs({1, 2, 3}, {1, 2, 3}), 2, 0.9, 1.0);
    CHECK(d == Approx(2.0 * (0.1 / 3.0 + 0.9 * 2.0 / 3.0)).epsilon(1e-12));
    CHECK(d == Approx(oracle::bernstein_deriv({1, 2, 3}, {1, 2, 3}, 2, 0.9, 1.0)).epsilon(1e-12));
    CHECK(d > 1.0);
}

TEST_CASE("Bernstein derivative equals the naive double sum", "[bernstein]") {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int rep = 0; rep < 40; ++rep) {
        std::vector<double> x, y;
        oracle::random_sample(rng, 5 + rep, x, y, 0.3);
        const auto r0 = oracle::ranks(x), r1 = oracle::ranks(y);
        const std::size_t m = 1 + static_cast<std::size_t>(unit(rng) * double(x.size()));
        const double u0 = unit(rng), u1 = unit(rng);
        REQUIRE(bernstein_copula_deriv(RankPairs(r0, r1), std::min(m, x.size()), u0, u1) ==
                Approx(oracle::bernstein_deriv(r0, r1, std::min(m, x.size()), u0, u1)).margin(1e-12));
    }
}

TEST_CASE("Bernstein derivative equals a numerical derivative of the smoothed surface", "[bernstein]") {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> unit(0.05, 0.95);
    const double h = 1e-6;
    for (int rep = 0; rep < 30; ++rep) {
        std::vector<double> x, y;
        oracle::random_sample(rng, 10 + rep, x, y, 0.6);
        const auto r0 = oracle::ranks(x), r1 = oracle::ranks(y);
        const std::size_t m = 2 + rep % 8;
        const double u0 = unit(rng), u1 = unit(rng);
        const double fd = (oracle::bernstein_surface(r0, r1, m, u0 + h, u1) -
                           oracle::bernstein_surface(r0, r1, m, u0 - h, u1)) / (2 * h);
        REQUIRE(std::abs(bernstein_copula_deriv(RankPairs(r0, r1), m, u0, u1) - fd) < 1e-4);
    }
}

TEST_CASE("beta copula derivative", "[beta]") {
    CHECK(beta_copula_deriv(pairs({1}, {1}), 0.3, 0.7) == Approx(0.7));
    CHECK(beta_copula_deriv(pairs({1}, {1}), 0.9, 0.2) == Approx(0.2));
    CHECK(beta_copula_deriv(pairs({1, 2}, {1, 2}), 0.5, 0.5) == Approx(0.5));
    CHECK_THROWS_AS(beta_copula_deriv(pairs({1, 2}, {1, 2}), 0.0, 0.5), DomainError);
    // mixture of all beta densities is uniform
    for (std::size_t n : {1u, 5u, 40u}) {
        for (double u : {0.01, 0.4, 0.93}) {
            double s = 0.0;
            for (double p : binomial_pmf(n - 1, u))
                s += p;
            CHECK(s == Approx(1.0));
        }
    }
}

TEST_CASE("beta estimator equals EBC with m = n", "[beta]") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> unit(0.01, 0.99);
    for (int rep = 0; rep < 30; ++rep) {
        std::vector<double> x, y;
        oracle::random_sample(rng, 3 + 4 * rep, x, y, -0.4);
        const RankPairs r(oracle::ranks(x), oracle::ranks(y));
        const double u0 = unit(rng), u1 = unit(rng);
        REQUIRE(std::abs(beta_copula_deriv(r, u0, u1) - bernstein_copula_deriv(r, r.size(), u0, u1)) < 1e-10);
    }
}

TEST_CASE("EBC curve examples", "[ebc]") {
    const Sample two = from_ranks({1, 2}, {1, 2});
    const std::vector<double> mid{0.5};
    CHECK(urmc_ebc(two, 1, 0.0, mid).values[0] == Approx(0.5));
    CHECK(urmc_ebc(two, 0.0, mid).estimator.m == std::optional<std::size_t>(2));
    CHECK_THROWS_AS(urmc_ebc(two, 1, 0.6, mid), DomainError);
    CHECK_THROWS_AS(urmc_ebc(two, 3, 0.0, mid), ParameterError);
    CHECK(sqrt_order(3) == 2);
    CHECK(sqrt_order(100) == 10);
    CHECK(sqrt_order(101) == 11);
    CHECK(sqrt_order(200) == 15);
}

TEST_CASE("EBC on comonotone data matches the brute-force sum", "[ebc]") {
    std::vector<std::size_t> r(20);
    for (std::size_t i = 0; i < 20; ++i)
        r[i] = i + 1;
    const Sample s = from_ranks(r, r);
    const auto grid = uniform_grid(5, 95, 100);
    const auto c = urmc_ebc(s, 5, 0.0, grid);
    for (std::size_t g = 0; g < grid.size(); ++g)
        CHECK(c.values[g] == Approx(1.0 - oracle::bernstein_deriv(r, r, 5, grid[g], grid[g])).margin(1e-12));
    CHECK(c.values[grid.size() / 2] == Approx(0.5).margin(1e-12));
}

TEST_CASE("EBC on independent data stays near 1 - s", "[ebc]") {
    auto rng = make_stream(17, 0);
    const Sample s = sample(CopulaModel::independence(), 400, Marginal::uniform, rng);
    const auto grid = default_grid();
    const auto c = urmc_ebc(s, 20, 0.0, grid);
    double sup = 0.0;
    for (std::size_t g = 0; g < grid.size(); ++g)
        sup = std::max(sup, std::abs(c.values[g] - (1.0 - grid[g])));
    CHECK(sup < 0.15);
}

TEST_CASE("beta curve examples", "[beta]") {
    const auto grid = default_grid();
    const auto one = urmc_beta(Sample({4.0}, {2.0}), 0.0, grid);
    for (std::size_t g = 0; g < grid.size(); ++g)
        CHECK(one.values[g] == Approx(1.0 - grid[g]).margin(1e-14));
    CHECK(one.estimator.kind == EstimatorKind::beta);
}

TEST_CASE("beta curve equals EBC(n) curve", "[beta]") {
    auto rng = make_stream(2, 0);
    const Sample s = sample(CopulaModel(Family::gaussian, 0.6), 150, Marginal::standard_normal, rng);
    const auto grid = default_grid();
    const auto a = urmc_beta(s, 0.0, grid);
    const auto b = urmc_ebc(s, s.size(), 0.0, grid);
    for (std::size_t g = 0; g < grid.size(); ++g)
        REQUIRE(std::abs(a.values[g] - b.values[g]) < 1e-10);
}

TEST_CASE("estimators depend on data only through ranks", "[ebc]") {
    auto rng = make_stream(8, 1);
    const Sample s = sample(CopulaModel(Family::clayton, 2.0), 80, Marginal::standard_normal, rng);
    std::vector<double> p(s.parent().begin(), s.parent().end()), c(s.child().begin(), s.child().end());
    for (auto& v : p)
        v = std::exp(v);
    for (auto& v : c)
        v = 3.0 * v * v * v + 1.0;
    const Sample t(p, c);
    const auto grid = default_grid();
    CHECK(urmc_ebc(s, 9, 0.0, grid).values == urmc_ebc(t, 9, 0.0, grid).values);
    CHECK(urmc_beta(s, 0.1, trim_grid(grid, 0.1)).values == urmc_beta(t, 0.1, trim_grid(grid, 0.1)).values);
}

TEST_CASE("interval measure", "[interval]") {
    CHECK(urm_interval(from_ranks({1, 2, 3, 4}, {1, 2, 3, 4}), 0.0, 0.2, 0.8) == 0.0);
    CHECK(urm_interval(from_ranks({1, 2, 3, 4}, {4, 3, 2, 1}), 0.0, 0.2, 0.6) == 1.0);
    CHECK(urm_interval(from_ranks({1, 2}, {2, 1}), 0.0, 0.4, 0.6) == 1.0);
    CHECK_THROWS_AS(urm_interval(from_ranks({1, 2}, {2, 1}), 0.0, 0.1, 0.2), EstimationError);
    CHECK_THROWS_AS(urm_interval(from_ranks({1, 2}, {2, 1}), 0.0, 0.6, 0.4), DomainError);
}
