#include <catch_amalgamated.hpp>

#include <random>
#include <vector>

#include "oracles.hpp"
#include "urmc/sample.hpp"

using namespace urmc;
using Catch::Approx;

TEST_CASE("ranks follow the max convention", "[ranks]") {
    CHECK(compute_ranks(std::vector<double>{3.0, 1.0, 2.0}) == RankVector{3, 1, 2});
    CHECK(compute_ranks(std::vector<double>{1.0, 1.0}) == RankVector{2, 2});
    CHECK(compute_ranks(std::vector<double>{5.0}) == RankVector{1});
    CHECK(compute_ranks(std::vector<double>{2.0, 1.0, 2.0, 0.0}) == RankVector{4, 2, 4, 1});
}

TEST_CASE("ranks reject non-finite values", "[ranks]") {
    CHECK_THROWS_AS(compute_ranks(std::vector<double>{1.0, std::nan("")}), InputError);
    CHECK_THROWS_AS(compute_ranks(std::vector<double>{INFINITY}), InputError);
}

TEST_CASE("ranks by margin of a sample", "[ranks]") {
    Sample s({3.0, 1.0, 2.0}, {1.0, 1.0, 0.0});
    CHECK(compute_ranks(s, Margin::parent) == RankVector{3, 1, 2});
    CHECK(compute_ranks(s, Margin::child) == RankVector{3, 3, 1});
}

TEST_CASE("sample validation", "[sample]") {
    CHECK_THROWS_AS(Sample({}, {}), InputError);
    CHECK_THROWS_AS(Sample({1.0}, {1.0, 2.0}), InputError);
    CHECK_THROWS_AS(Sample({1.0, NAN}, {1.0, 2.0}), InputError);
    CHECK_THROWS_AS(Sample({1.0, 2.0}, {1.0, 2.0}, std::vector<std::string>{"a"}), InputError);
    Sample g({1.0, 2.0, 3.0}, {1.0, 2.0, 3.0}, std::vector<std::string>{"b", "a", "b"});
    CHECK(g.has_groups());
    CHECK(g.group_levels() == std::vector<std::string>{"a", "b"});
    CHECK(g.group_count("b") == 2);
    CHECK(g.group_count("c") == 0);
    const std::vector<std::size_t> rows{2, 2, 0};
    const Sample sub = g.subsample(rows);
    CHECK(sub.size() == 3);
    CHECK(sub.parent()[0] == 3.0);
    CHECK(sub.groups()[2] == "b");
}

TEST_CASE("empirical cdf", "[ecdf]") {
    const std::vector<double> v{1, 2, 3};
    CHECK(empirical_cdf(v, 2.0) == Approx(2.0 / 3.0));
    CHECK(empirical_cdf(v, 0.5) == 0.0);
    CHECK(empirical_cdf(v, 10.0) == 1.0);
    CHECK_THROWS_AS(empirical_cdf(std::vector<double>{}, 1.0), InputError);
}

TEST_CASE("empirical quantile is the inf-form inverse", "[quantile]") {
    const std::vector<double> v{10, 20, 30};
    CHECK(empirical_quantile(v, 0.5) == 20.0);
    CHECK(empirical_quantile(v, 1.0) == 30.0);
    CHECK(empirical_quantile(v, 0.34) == 20.0);
    CHECK(empirical_quantile(v, 1.0 / 3.0) == 10.0);
    CHECK_THROWS_AS(empirical_quantile(v, 0.0), DomainError);
    CHECK_THROWS_AS(empirical_quantile(v, 1.5), DomainError);
    CHECK_THROWS_AS(empirical_quantile(v, -0.1), DomainError);
}

TEST_CASE("interpolated quantile", "[quantile]") {
    const EmpiricalDistribution d(std::vector<double>{30, 10, 20});
    CHECK(d.interpolated_quantile(0.0) == 10.0);
    CHECK(d.interpolated_quantile(0.25) == Approx(15.0));
    CHECK(d.interpolated_quantile(1.0) == 30.0);
}

TEST_CASE("ecdf and quantile agree with brute force on random data", "[ecdf][property]") {
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<int> len(1, 40);
    std::uniform_int_distribution<int> val(0, 15);   // heavy ties
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int rep = 0; rep < 1000; ++rep) {
        std::vector<double> v(static_cast<std::size_t>(len(rng)));
        for (auto& x : v)
            x = val(rng);
        const EmpiricalDistribution d(v);
        const auto r = oracle::ranks(v);
        for (std::size_t i = 0; i < v.size(); ++i)
            REQUIRE(d.cdf(v[i]) == empirical_cdf(v, v[i]));
        const double p = 1.0 - unit(rng);   // (0, 1]
        // smallest sample value with ecdf >= p
        double best = INFINITY;
        for (std::size_t i = 0; i < v.size(); ++i)
            if (static_cast<double>(r[i]) / static_cast<double>(v.size()) >= p)
                best = std::min(best, v[i]);
        REQUIRE(d.quantile(p) == best);
    }
}
