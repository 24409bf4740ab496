#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "urmc/bernstein.hpp"
#include "urmc/curve.hpp"
#include "urmc/error.hpp"
#include "urmc/sample.hpp"

namespace urmc {

/// Parent and child ranks of the same sample.
struct RankPairs {
    RankVector parent;
    RankVector child;

    RankPairs(RankVector r0, RankVector r1) : parent(std::move(r0)), child(std::move(r1)) {
        if (parent.size() != child.size())
            throw InputError("rank vectors differ in length");
        if (parent.empty())
            throw InputError("rank vectors are empty");
        const std::size_t n = parent.size();
        for (std::size_t i = 0; i < n; ++i) {
            if (parent[i] < 1 || parent[i] > n || child[i] < 1 || child[i] > n)
                throw InputError("rank outside 1..n");
        }
    }

    explicit RankPairs(const Sample& sample)
        : RankPairs(compute_ranks(sample, Margin::parent), compute_ranks(sample, Margin::child)) {}

    std::size_t size() const noexcept { return parent.size(); }
};

/// Rank-based empirical copula C_n(u0, u1) = n^-1 #{i : R_i0/n <= u0, R_i1/n <= u1}.
inline double empirical_copula(const RankPairs& ranks, double u0, double u1) {
    const std::size_t n = ranks.size();
    const double dn = static_cast<double>(n);
    std::size_t count = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (static_cast<double>(ranks.parent[i]) / dn <= u0 &&
            static_cast<double>(ranks.child[i]) / dn <= u1)
            ++count;
    }
    return static_cast<double>(count) / dn;
}

inline double empirical_copula(const RankVector& ranks0, const RankVector& ranks1, double u0, double u1) {
    return empirical_copula(RankPairs(ranks0, ranks1), u0, u1);
}

/// C_n on the lattice {k/m}^2, built in O(n + m^2) with exact integer comparisons.
class EmpiricalCopulaGrid {
public:
    EmpiricalCopulaGrid(const RankPairs& ranks, std::size_t m) : m_(m), values_((m + 1) * (m + 1), 0.0) {
        const std::size_t n = ranks.size();
        if (m < 1)
            throw ParameterError("Bernstein order must be at least 1");
        std::vector<std::size_t> counts((m + 1) * (m + 1), 0);
        for (std::size_t i = 0; i < n; ++i) {
            // smallest k with R/n <= k/m
            const std::size_t a = (ranks.parent[i] * m + n - 1) / n;
            const std::size_t b = (ranks.child[i] * m + n - 1) / n;
            ++counts[a * (m + 1) + b];
        }
        const double dn = static_cast<double>(n);
        std::vector<std::size_t> acc((m + 1) * (m + 1), 0);
        for (std::size_t k = 0; k <= m; ++k) {
            std::size_t row = 0;
            for (std::size_t l = 0; l <= m; ++l) {
                row += counts[k * (m + 1) + l];
                acc[k * (m + 1) + l] = row + (k > 0 ? acc[(k - 1) * (m + 1) + l] : 0);
                values_[k * (m + 1) + l] = static_cast<double>(acc[k * (m + 1) + l]) / dn;
            }
        }
    }

    std::size_t order() const noexcept { return m_; }
    double at(std::size_t k, std::size_t l) const { return values_[k * (m_ + 1) + l]; }

    /// m * sum_k sum_l (C(k+1,l) - C(k,l)) b0[k] b1[l], with b0 = P_{m-1,.}(u0), b1 = P_{m,.}(u1).
    double derivative(std::span<const double> basis0, std::span<const double> basis1) const {
        double total = 0.0;
        for (std::size_t k = 0; k < m_; ++k) {
            double inner = 0.0;
            for (std::size_t l = 0; l <= m_; ++l)
                inner += (at(k + 1, l) - at(k, l)) * basis1[l];
            total += basis0[k] * inner;
        }
        return static_cast<double>(m_) * total;
    }

private:
    std::size_t m_;
    std::vector<double> values_;
};

/// Partial derivative in u0 of the empirical Bernstein copula of order m.
inline double bernstein_copula_deriv(const RankPairs& ranks, std::size_t m, double u0, double u1) {
    if (m < 1 || m > ranks.size())
        throw ParameterError("Bernstein order m must satisfy 1 <= m <= n");
    if (!(u0 >= 0.0 && u0 <= 1.0 && u1 >= 0.0 && u1 <= 1.0))
        throw DomainError("copula arguments must lie in [0, 1]");
    const EmpiricalCopulaGrid grid(ranks, m);
    const auto b0 = binomial_pmf(m - 1, u0);
    const auto b1 = binomial_pmf(m, u1);
    return grid.derivative(b0, b1);
}

/// Partial derivative in u0 of the empirical beta copula:
/// n^-1 sum_i f_{n,R_i0}(u0) F_{n,R_i1}(u1), with f/F the Beta(r, n+1-r) density and CDF.
inline double beta_copula_deriv(const RankPairs& ranks, double u0, double u1) {
    if (!(u0 > 0.0 && u0 < 1.0))
        throw DomainError("beta copula derivative requires u0 in (0, 1)");
    if (!(u1 >= 0.0 && u1 <= 1.0))
        throw DomainError("beta copula derivative requires u1 in [0, 1]");
    const std::size_t n = ranks.size();
    // f_{n,r}(u) = n P_{n-1,r-1}(u); the leading n cancels the 1/n average.
    const auto dens = binomial_pmf(n - 1, u0);
    const auto tails = upper_tails(binomial_pmf(n, u1));
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        total += dens[ranks.parent[i] - 1] * std::min(1.0, tails[ranks.child[i]]);
    return std::clamp(total, 0.0, 1.0);
}

/// Evaluates 1 - d0 C_{m,n}(s, s + tau) over a fixed grid for any sample of size n.
/// Bernstein bases are computed once, so repeated evaluation (Monte Carlo, bootstrap) costs O(n + m^2) per order.
class EbcCurveEvaluator {
public:
    EbcCurveEvaluator(std::size_t n, std::vector<std::size_t> orders, double tau, std::vector<double> grid)
        : n_(n), orders_(std::move(orders)), tau_(tau), grid_(std::move(grid)) {
        validate_grid(tau_, grid_);
        if (orders_.size() != grid_.size())
            throw InputError("one Bernstein order per grid point is required");
        std::map<std::size_t, std::vector<double>> rows;
        for (std::size_t i = 0; i < grid_.size(); ++i) {
            const std::size_t m = orders_[i];
            if (m < 1 || m > n_)
                throw ParameterError("Bernstein order m must satisfy 1 <= m <= n");
            if (!rows.count(m - 1))
                rows[m - 1] = log_binomial_row(m - 1);
            if (!rows.count(m))
                rows[m] = log_binomial_row(m);
            basis0_.push_back(binomial_pmf(m - 1, grid_[i], rows[m - 1]));
            basis1_.push_back(binomial_pmf(m, grid_[i] + tau_, rows[m]));
        }
    }

    EbcCurveEvaluator(std::size_t n, std::size_t m, double tau, std::vector<double> grid)
        : EbcCurveEvaluator(n, std::vector<std::size_t>(grid.size(), m), tau, grid) {}

    std::vector<double> evaluate(const RankPairs& ranks) const {
        if (ranks.size() != n_)
            throw InputError("evaluator built for a different sample size");
        std::map<std::size_t, EmpiricalCopulaGrid> lattices;
        std::vector<double> out(grid_.size());
        for (std::size_t i = 0; i < grid_.size(); ++i) {
            const std::size_t m = orders_[i];
            auto it = lattices.find(m);
            if (it == lattices.end())
                it = lattices.emplace(m, EmpiricalCopulaGrid(ranks, m)).first;
            out[i] = 1.0 - it->second.derivative(basis0_[i], basis1_[i]);
        }
        return out;
    }

    const std::vector<double>& grid() const noexcept { return grid_; }
    const std::vector<std::size_t>& orders() const noexcept { return orders_; }

private:
    std::size_t n_;
    std::vector<std::size_t> orders_;
    double tau_;
    std::vector<double> grid_;
    std::vector<std::vector<double>> basis0_;
    std::vector<std::vector<double>> basis1_;
};

/// Evaluates 1 - d0 C^beta_n(s, s + tau) over a fixed grid in O(n) per point.
class BetaCurveEvaluator {
public:
    BetaCurveEvaluator(std::size_t n, double tau, std::vector<double> grid)
        : n_(n), tau_(tau), grid_(std::move(grid)) {
        validate_grid(tau_, grid_);
        if (n_ < 1)
            throw ParameterError("sample size must be positive");
        const auto row0 = log_binomial_row(n_ - 1);
        const auto row1 = log_binomial_row(n_);
        for (double s : grid_) {
            dens_.push_back(binomial_pmf(n_ - 1, s, row0));
            auto t = upper_tails(binomial_pmf(n_, s + tau_, row1));
            for (double& v : t)
                v = std::min(v, 1.0);
            tails_.push_back(std::move(t));
        }
    }

    std::vector<double> evaluate(const RankPairs& ranks) const {
        if (ranks.size() != n_)
            throw InputError("evaluator built for a different sample size");
        std::vector<double> out(grid_.size());
        for (std::size_t g = 0; g < grid_.size(); ++g) {
            const auto& d = dens_[g];
            const auto& t = tails_[g];
            double total = 0.0;
            for (std::size_t i = 0; i < n_; ++i)
                total += d[ranks.parent[i] - 1] * t[ranks.child[i]];
            out[g] = 1.0 - std::clamp(total, 0.0, 1.0);
        }
        return out;
    }

    const std::vector<double>& grid() const noexcept { return grid_; }

private:
    std::size_t n_;
    double tau_;
    std::vector<double> grid_;
    std::vector<std::vector<double>> dens_;
    std::vector<std::vector<double>> tails_;
};

/// ceil(sqrt(n)), the default Bernstein order.
inline std::size_t sqrt_order(std::size_t n) {
    auto m = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n))));
    while (m > 1 && (m - 1) * (m - 1) >= n)
        --m;
    while (m * m < n)
        ++m;
    return std::max<std::size_t>(m, 1);
}

namespace detail {
inline CurveEstimate make_curve(double tau, std::span<const double> grid, std::vector<double> values,
                                EstimatorTag tag, std::size_t n) {
    CurveEstimate c;
    c.tau = tau;
    c.grid.assign(grid.begin(), grid.end());
    c.values = std::move(values);
    c.status.assign(c.grid.size(), PointStatus::ok);
    c.estimator = std::move(tag);
    c.n = n;
    return c;
}
} // namespace detail

/// EBC estimator with a single order m across the grid.
inline CurveEstimate urmc_ebc(const Sample& sample, std::size_t m, double tau, std::span<const double> grid) {
    const RankPairs ranks(sample);
    if (m < 1 || m > ranks.size())
        throw ParameterError("Bernstein order m must satisfy 1 <= m <= n");
    const EbcCurveEvaluator eval(ranks.size(), m, tau, {grid.begin(), grid.end()});
    return detail::make_curve(tau, grid, eval.evaluate(ranks), {EstimatorKind::ebc, m, {}, {}}, ranks.size());
}

/// EBC estimator with a separate order per grid point (e.g. the oracle m*).
inline CurveEstimate urmc_ebc(const Sample& sample, std::span<const std::size_t> orders, double tau,
                              std::span<const double> grid) {
    const RankPairs ranks(sample);
    const EbcCurveEvaluator eval(ranks.size(), {orders.begin(), orders.end()}, tau, {grid.begin(), grid.end()});
    return detail::make_curve(tau, grid, eval.evaluate(ranks), {EstimatorKind::ebc, {}, {}, {}}, ranks.size());
}

/// EBC estimator with the default order ceil(sqrt(n)).
inline CurveEstimate urmc_ebc(const Sample& sample, double tau, std::span<const double> grid) {
    return urmc_ebc(sample, sqrt_order(sample.size()), tau, grid);
}

/// Empirical beta copula estimator; tuning-free, values in [0, 1].
inline CurveEstimate urmc_beta(const Sample& sample, double tau, std::span<const double> grid) {
    const RankPairs ranks(sample);
    const BetaCurveEvaluator eval(ranks.size(), tau, {grid.begin(), grid.end()});
    return detail::make_curve(tau, grid, eval.evaluate(ranks), {EstimatorKind::beta, ranks.size(), {}, {}},
                              ranks.size());
}

/// Sample analogue of the interval measure: among observations with s1 <= R_i0/n <= s2,
/// the share whose child rank exceeds the parent rank by more than tau.
inline double urm_interval(const Sample& sample, double tau, double s1, double s2) {
    if (!(s1 > 0.0 && s1 < s2 && s2 < 1.0))
        throw DomainError("interval requires 0 < s1 < s2 < 1");
    if (!(tau >= 0.0 && tau <= 1.0 - s2))
        throw DomainError("tau must lie in [0, 1 - s2]");
    const RankPairs ranks(sample);
    const double dn = static_cast<double>(ranks.size());
    std::size_t in = 0, up = 0;
    for (std::size_t i = 0; i < ranks.size(); ++i) {
        const double r0 = static_cast<double>(ranks.parent[i]) / dn;
        if (r0 < s1 || r0 > s2)
            continue;
        ++in;
        if (static_cast<double>(ranks.child[i]) / dn > r0 + tau)
            ++up;
    }
    if (in == 0)
        throw EstimationError("no observation has a parent rank inside the interval");
    return static_cast<double>(up) / static_cast<double>(in);
}

} // namespace urmc
