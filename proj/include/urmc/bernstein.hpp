#pragma once

#include <math.h>

#include <cmath>
#include <cstddef>
#include <vector>

#include "urmc/error.hpp"

namespace urmc {

/// log C(m, k) for k = 0..m, from log-gamma so that large orders do not overflow.
inline std::vector<double> log_binomial_row(std::size_t m) {
    std::vector<double> row(m + 1);
    int sign = 0;
    const double lm = ::lgamma_r(static_cast<double>(m) + 1.0, &sign);
    for (std::size_t k = 0; k <= m; ++k) {
        row[k] = lm - ::lgamma_r(static_cast<double>(k) + 1.0, &sign) -
                 ::lgamma_r(static_cast<double>(m - k) + 1.0, &sign);
    }
    return row;
}

/// Binomial probabilities P_{m,k}(u) = C(m,k) u^k (1-u)^(m-k), k = 0..m.
inline std::vector<double> binomial_pmf(std::size_t m, double u, const std::vector<double>& log_row) {
    if (!(u >= 0.0 && u <= 1.0))
        throw DomainError("Bernstein basis argument outside [0, 1]");
    std::vector<double> p(m + 1, 0.0);
    if (u == 0.0) {
        p[0] = 1.0;
        return p;
    }
    if (u == 1.0) {
        p[m] = 1.0;
        return p;
    }
    const double lu = std::log(u);
    const double l1u = std::log1p(-u);
    for (std::size_t k = 0; k <= m; ++k)
        p[k] = std::exp(log_row[k] + static_cast<double>(k) * lu + static_cast<double>(m - k) * l1u);
    return p;
}

inline std::vector<double> binomial_pmf(std::size_t m, double u) {
    return binomial_pmf(m, u, log_binomial_row(m));
}

/// Upper tails T[r] = sum_{s >= r} p[s], with T[size] = 0.
inline std::vector<double> upper_tails(const std::vector<double>& p) {
    std::vector<double> t(p.size() + 1, 0.0);
    for (std::size_t r = p.size(); r-- > 0;)
        t[r] = t[r + 1] + p[r];
    return t;
}

} // namespace urmc
