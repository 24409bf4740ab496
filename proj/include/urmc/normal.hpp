#pragma once

#include <cmath>
#include <numbers>

#include <boost/math/special_functions/erf.hpp>

#include "urmc/error.hpp"

namespace urmc::normal {

inline double pdf(double x) noexcept {
    return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

inline double cdf(double x) noexcept { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// Standard normal quantile. Exact antisymmetry is kept by always inverting the smaller tail.
inline double quantile(double p) {
    if (!(p > 0.0 && p < 1.0))
        throw DomainError("normal quantile requires p in (0, 1)");
    if (p > 0.5)
        return std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * (1.0 - p));
    return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

/// Quantile from an upper-tail probability q = 1 - p, accurate when p is close to one.
inline double upper_quantile(double q) {
    if (!(q > 0.0 && q < 1.0))
        throw DomainError("normal quantile requires q in (0, 1)");
    return std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * q);
}

// pdf(x) / cdf(x), finite for all x including the far lower tail.
inline double inverse_mills(double x) noexcept {
    if (x < -35.0) {
        const double r = 1.0 / (x * x);
        return -x * (1.0 + r * (1.0 - 2.0 * r));
    }
    return pdf(x) / cdf(x);
}

} // namespace urmc::normal
