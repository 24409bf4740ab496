#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "urmc/error.hpp"

namespace urmc {

enum class Margin { parent, child };

/// Paired parent/child incomes with an optional group label per observation.
///
/// Construction validates the data, so every live Sample satisfies: n >= 1,
/// equal column lengths, finite incomes, and either no labels or one label per row.
class Sample {
public:
    Sample(std::vector<double> parent, std::vector<double> child,
           std::optional<std::vector<std::string>> group = std::nullopt)
        : parent_(std::move(parent)), child_(std::move(child)), group_(std::move(group)) {
        if (parent_.empty())
            throw InputError("sample must contain at least one observation");
        if (parent_.size() != child_.size())
            throw InputError("parent and child income columns differ in length");
        for (std::size_t i = 0; i < parent_.size(); ++i) {
            if (!std::isfinite(parent_[i]) || !std::isfinite(child_[i]))
                throw InputError("non-finite income at observation " + std::to_string(i));
        }
        if (group_ && group_->size() != parent_.size())
            throw InputError("group column must label every observation");
    }

    std::size_t size() const noexcept { return parent_.size(); }
    std::span<const double> parent() const noexcept { return parent_; }
    std::span<const double> child() const noexcept { return child_; }
    std::span<const double> margin(Margin m) const noexcept {
        return m == Margin::parent ? parent() : child();
    }

    bool has_groups() const noexcept { return group_.has_value(); }
    const std::vector<std::string>& groups() const {
        if (!group_)
            throw InputError("sample has no group column");
        return *group_;
    }

    /// Distinct group labels in lexicographic order.
    std::vector<std::string> group_levels() const {
        std::vector<std::string> levels = groups();
        std::sort(levels.begin(), levels.end());
        levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
        return levels;
    }

    std::size_t group_count(const std::string& label) const {
        const auto& g = groups();
        return static_cast<std::size_t>(std::count(g.begin(), g.end(), label));
    }

    /// Rows picked by index, with replacement allowed. Used by the bootstrap.
    Sample subsample(std::span<const std::size_t> rows) const {
        std::vector<double> p, c;
        p.reserve(rows.size());
        c.reserve(rows.size());
        std::optional<std::vector<std::string>> g;
        if (group_) {
            g.emplace();
            g->reserve(rows.size());
        }
        for (std::size_t r : rows) {
            p.push_back(parent_.at(r));
            c.push_back(child_.at(r));
            if (g)
                g->push_back((*group_)[r]);
        }
        return Sample(std::move(p), std::move(c), std::move(g));
    }

private:
    std::vector<double> parent_;
    std::vector<double> child_;
    std::optional<std::vector<std::string>> group_;
};

/// Ranks of one margin: rank[i] = #{k : value[k] <= value[i]}, so ties share the maximal rank.
using RankVector = std::vector<std::size_t>;

inline RankVector compute_ranks(std::span<const double> values) {
    const std::size_t n = values.size();
    for (double v : values) {
        if (!std::isfinite(v))
            throw InputError("cannot rank a non-finite value");
    }
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i)
        order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    RankVector ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]])
            ++j;
        for (std::size_t k = i; k <= j; ++k)
            ranks[order[k]] = j + 1;
        i = j + 1;
    }
    return ranks;
}

inline RankVector compute_ranks(const Sample& sample, Margin margin) {
    return compute_ranks(sample.margin(margin));
}

/// Sorted copy of one margin answering ECDF and quantile queries in O(log n).
class EmpiricalDistribution {
public:
    explicit EmpiricalDistribution(std::span<const double> values)
        : sorted_(values.begin(), values.end()) {
        if (sorted_.empty())
            throw InputError("empirical distribution of an empty sequence");
        std::sort(sorted_.begin(), sorted_.end());
    }

    std::size_t size() const noexcept { return sorted_.size(); }

    double cdf(double y) const {
        const auto it = std::upper_bound(sorted_.begin(), sorted_.end(), y);
        return static_cast<double>(it - sorted_.begin()) / static_cast<double>(sorted_.size());
    }

    // inf{y : cdf(y) >= p}; the count/n comparison mirrors cdf() so the pair is an exact Galois connection.
    double quantile(double p) const {
        if (!(p > 0.0 && p <= 1.0))
            throw DomainError("quantile level must lie in (0, 1]");
        const std::size_t n = sorted_.size();
        const double dn = static_cast<double>(n);
        auto k = static_cast<std::size_t>(std::ceil(p * dn));
        k = std::clamp<std::size_t>(k, 1, n);
        while (k > 1 && static_cast<double>(k - 1) / dn >= p)
            --k;
        while (k < n && static_cast<double>(k) / dn < p)
            ++k;
        return sorted_[k - 1];
    }

    /// Linear interpolation between order statistics at position (n - 1) p (R's default type 7).
    /// Not the estimator's quantile; kept for reproducing simulation output that used it.
    double interpolated_quantile(double p) const {
        if (!(p >= 0.0 && p <= 1.0))
            throw DomainError("quantile level must lie in [0, 1]");
        const double h = static_cast<double>(sorted_.size() - 1) * p;
        const auto j = static_cast<std::size_t>(std::floor(h));
        if (j + 1 >= sorted_.size())
            return sorted_.back();
        return sorted_[j] + (h - static_cast<double>(j)) * (sorted_[j + 1] - sorted_[j]);
    }

    std::span<const double> sorted() const noexcept { return sorted_; }

private:
    std::vector<double> sorted_;
};

inline double empirical_cdf(std::span<const double> values, double y) {
    if (values.empty())
        throw InputError("empirical CDF of an empty sequence");
    std::size_t count = 0;
    for (double v : values)
        count += v <= y ? 1 : 0;
    return static_cast<double>(count) / static_cast<double>(values.size());
}

inline double empirical_quantile(std::span<const double> values, double p) {
    return EmpiricalDistribution(values).quantile(p);
}

} // namespace urmc
