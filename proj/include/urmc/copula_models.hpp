#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "urmc/curve.hpp"
#include "urmc/error.hpp"
#include "urmc/normal.hpp"
#include "urmc/sample.hpp"

namespace urmc {

enum class Family { gaussian, clayton, gumbel, independence };

inline std::string to_string(Family f) {
    switch (f) {
    case Family::gaussian:
        return "gaussian";
    case Family::clayton:
        return "clayton";
    case Family::gumbel:
        return "gumbel";
    default:
        return "independence";
    }
}

enum class Marginal { standard_normal, uniform };

/// A parametric copula used as the simulation oracle.
class CopulaModel {
public:
    CopulaModel(Family family, double theta) : family_(family), theta_(theta) {
        switch (family_) {
        case Family::gaussian:
            if (!(theta > -1.0 && theta < 1.0))
                throw ParameterError("Gaussian copula requires theta in (-1, 1)");
            break;
        case Family::clayton:
            if (!(theta > 0.0 && std::isfinite(theta)))
                throw ParameterError("Clayton copula requires theta in (0, inf)");
            break;
        case Family::gumbel:
            if (!(theta >= 1.0 && std::isfinite(theta)))
                throw ParameterError("Gumbel copula requires theta in [1, inf)");
            break;
        case Family::independence:
            theta_ = 0.0;
            break;
        }
    }

    static CopulaModel independence() { return {Family::independence, 0.0}; }

    Family family() const noexcept { return family_; }
    double theta() const noexcept { return theta_; }

    std::string describe() const {
        if (family_ == Family::independence)
            return "independence";
        return to_string(family_) + "(theta=" + std::to_string(theta_) + ")";
    }

private:
    Family family_;
    double theta_;
};

/// Kendall's tau implied by the model.
inline double kendall_tau(const CopulaModel& model) {
    const double t = model.theta();
    switch (model.family()) {
    case Family::gaussian:
        return 2.0 / std::numbers::pi * std::asin(t);
    case Family::clayton:
        return t / (t + 2.0);
    case Family::gumbel:
        return 1.0 - 1.0 / t;
    default:
        return 0.0;
    }
}

/// Parameter matching a target Kendall's tau.
inline double theta_from_tau(Family family, double tau_k) {
    switch (family) {
    case Family::gaussian:
        if (!(tau_k > -1.0 && tau_k < 1.0))
            throw DomainError("Gaussian copula attains Kendall's tau only in (-1, 1)");
        return std::sin(std::numbers::pi * tau_k / 2.0);
    case Family::clayton:
        if (!(tau_k > 0.0 && tau_k < 1.0))
            throw DomainError("Clayton copula attains Kendall's tau only in (0, 1)");
        return 2.0 * tau_k / (1.0 - tau_k);
    case Family::gumbel:
        if (!(tau_k >= 0.0 && tau_k < 1.0))
            throw DomainError("Gumbel copula attains Kendall's tau only in [0, 1)");
        return 1.0 / (1.0 - tau_k);
    default:
        if (tau_k != 0.0)
            throw DomainError("independence copula has Kendall's tau 0");
        return 0.0;
    }
}

inline CopulaModel model_from_tau(Family family, double tau_k) {
    return {family, theta_from_tau(family, tau_k)};
}

namespace detail {

inline void require_unit(double u0, double u1) {
    if (!(u0 >= 0.0 && u0 <= 1.0 && u1 >= 0.0 && u1 <= 1.0))
        throw DomainError("copula arguments must lie in [0, 1]");
}

// Phi_2(h, k; rho) = int_{-inf}^{h} phi(x) Phi((k - rho x) / sqrt(1 - rho^2)) dx
inline double bivariate_normal_cdf(double h, double k, double rho) {
    const double sd = std::sqrt(1.0 - rho * rho);
    auto integrand = [&](double x) { return normal::pdf(x) * normal::cdf((k - rho * x) / sd); };
    const double lower = std::min(h, -40.0) - 1.0;
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(integrand, lower, h, 15, 1e-15);
}

} // namespace detail

/// Copula CDF C(u0, u1).
inline double cdf(const CopulaModel& model, double u0, double u1) {
    detail::require_unit(u0, u1);
    if (u0 == 0.0 || u1 == 0.0)
        return 0.0;
    if (u0 == 1.0)
        return u1;
    if (u1 == 1.0)
        return u0;
    const double t = model.theta();
    switch (model.family()) {
    case Family::gaussian:
        return std::clamp(detail::bivariate_normal_cdf(normal::quantile(u0), normal::quantile(u1), t), 0.0,
                          std::min(u0, u1));
    case Family::clayton:
        return std::pow(std::pow(u0, -t) + std::pow(u1, -t) - 1.0, -1.0 / t);
    case Family::gumbel: {
        const double a = std::pow(-std::log(u0), t) + std::pow(-std::log(u1), t);
        return std::exp(-std::pow(a, 1.0 / t));
    }
    default:
        return u0 * u1;
    }
}

/// Closed-form d C / d u0, the conditional CDF of the child rank given parent rank u0.
inline double conditional_deriv(const CopulaModel& model, double u0, double u1) {
    if (!(u0 > 0.0 && u0 < 1.0))
        throw DomainError("conditional derivative requires u0 in (0, 1)");
    if (!(u1 >= 0.0 && u1 <= 1.0))
        throw DomainError("conditional derivative requires u1 in [0, 1]");
    if (u1 == 0.0)
        return 0.0;
    if (u1 == 1.0)
        return 1.0;
    const double t = model.theta();
    switch (model.family()) {
    case Family::gaussian:
        return normal::cdf((normal::quantile(u1) - t * normal::quantile(u0)) / std::sqrt(1.0 - t * t));
    case Family::clayton:
        // (u0^-t + u1^-t - 1)^(-1/t - 1) u0^(-t-1), rewritten to avoid overflow for small u0
        return std::pow(1.0 + std::pow(u0, t) * (std::pow(u1, -t) - 1.0), -1.0 / t - 1.0);
    case Family::gumbel: {
        const double x = -std::log(u0);
        const double y = -std::log(u1);
        const double a = std::pow(x, t) + std::pow(y, t);
        const double c = std::exp(-std::pow(a, 1.0 / t));
        return std::clamp(c * std::pow(x, t - 1.0) * std::pow(a, 1.0 / t - 1.0) / u0, 0.0, 1.0);
    }
    default:
        return u1;
    }
}

/// True mobility curve 1 - d0 C(s, s + tau).
inline CurveEstimate true_urmc(const CopulaModel& model, double tau, std::span<const double> grid) {
    validate_grid(tau, grid);
    CurveEstimate c;
    c.tau = tau;
    c.grid.assign(grid.begin(), grid.end());
    for (double s : grid)
        c.values.push_back(1.0 - conditional_deriv(model, s, s + tau));
    c.status.assign(grid.size(), PointStatus::ok);
    c.estimator = {EstimatorKind::truth, {}, {}, model.describe()};
    return c;
}

/// Draws n pairs with the model's copula. Gaussian: Z1 = theta Z0 + sqrt(1 - theta^2) e.
/// Clayton: gamma frailty. Gumbel: positive-stable frailty (Kanter's representation).
template <class Rng>
Sample sample(const CopulaModel& model, std::size_t n, Marginal marginal, Rng& rng) {
    if (n < 1)
        throw ParameterError("sample size must be positive");
    std::vector<double> y0(n), y1(n);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::exponential_distribution<double> expo(1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const double t = model.theta();

    // u and 1-u are both carried so the normal score stays finite when u rounds to 1.
    auto store = [&](std::size_t i, double u0, double v0, double u1, double v1) {
        if (marginal == Marginal::uniform) {
            y0[i] = u0;
            y1[i] = u1;
            return;
        }
        auto score = [](double u, double v) {
            constexpr double tiny = std::numeric_limits<double>::min();
            return u <= 0.5 ? normal::quantile(std::max(u, tiny)) : normal::upper_quantile(std::max(v, tiny));
        };
        y0[i] = score(u0, v0);
        y1[i] = score(u1, v1);
    };

    switch (model.family()) {
    case Family::gaussian: {
        const double sd = std::sqrt(1.0 - t * t);
        for (std::size_t i = 0; i < n; ++i) {
            const double z0 = gauss(rng);
            const double z1 = t * z0 + sd * gauss(rng);
            if (marginal == Marginal::standard_normal) {
                y0[i] = z0;
                y1[i] = z1;
            } else {
                y0[i] = normal::cdf(z0);
                y1[i] = normal::cdf(z1);
            }
        }
        break;
    }
    case Family::clayton: {
        std::gamma_distribution<double> frailty(1.0 / t, 1.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double v = frailty(rng);
            const double x0 = std::log1p(expo(rng) / v) / t;
            const double x1 = std::log1p(expo(rng) / v) / t;
            store(i, std::exp(-x0), -std::expm1(-x0), std::exp(-x1), -std::expm1(-x1));
        }
        break;
    }
    case Family::gumbel: {
        const double alpha = 1.0 / t;
        for (std::size_t i = 0; i < n; ++i) {
            double v = 1.0;
            if (alpha < 1.0) {
                const double w = std::numbers::pi * unif(rng);
                const double e = expo(rng);
                v = std::sin(alpha * w) / std::pow(std::sin(w), 1.0 / alpha) *
                    std::pow(std::sin((1.0 - alpha) * w) / e, (1.0 - alpha) / alpha);
            }
            const double x0 = std::pow(expo(rng) / v, alpha);
            const double x1 = std::pow(expo(rng) / v, alpha);
            store(i, std::exp(-x0), -std::expm1(-x0), std::exp(-x1), -std::expm1(-x1));
        }
        break;
    }
    default:
        for (std::size_t i = 0; i < n; ++i) {
            const double x0 = expo(rng);
            const double x1 = expo(rng);
            store(i, std::exp(-x0), -std::expm1(-x0), std::exp(-x1), -std::expm1(-x1));
        }
        break;
    }
    return Sample(std::move(y0), std::move(y1));
}

/// Step used by the finite-difference bias approximation.
inline constexpr double bias_fd_step = 1e-4;

namespace detail {

// First and second derivative of f at x with step h: central when the stencil fits in (0,1),
// otherwise one-sided second-order stencils.
template <class F>
std::pair<double, double> derivatives_1_2(F f, double x, double h) {
    if (x - h > 0.0 && x + h < 1.0) {
        const double fm = f(x - h), f0 = f(x), fp = f(x + h);
        return {(fp - fm) / (2.0 * h), (fp - 2.0 * f0 + fm) / (h * h)};
    }
    const double s = x - h > 0.0 ? -1.0 : 1.0;  // step away from the nearer boundary
    const double f0 = f(x), f1 = f(x + s * h), f2 = f(x + 2 * s * h), f3 = f(x + 3 * s * h);
    const double d1 = s * (-3.0 * f0 + 4.0 * f1 - f2) / (2.0 * h);
    const double d2 = (2.0 * f0 - 5.0 * f1 + 4.0 * f2 - f3) / (h * h);
    return {d1, d2};
}

inline void require_bias_domain(double u0, double u1, double h) {
    if (!(u0 >= h && u0 <= 1.0 - h && u1 >= h && u1 <= 1.0 - h))
        throw DomainError("bias evaluation point lies within the finite-difference step of the boundary");
}

} // namespace detail

/// Leading bias term b(u0, u1) of the EBC derivative, from finite differences of the closed-form d0 C.
inline double asymptotic_bias_b(const CopulaModel& model, double u0, double u1, double h = bias_fd_step) {
    detail::require_bias_domain(u0, u1, h);
    if (model.family() == Family::independence)
        return 0.0;
    const auto [c00, c000] = detail::derivatives_1_2([&](double x) { return conditional_deriv(model, x, u1); }, u0, h);
    const auto [unused, c011] =
        detail::derivatives_1_2([&](double y) { return conditional_deriv(model, u0, y); }, u1, h);
    (void)unused;
    return (1.0 - 2.0 * u0) * c00 + u0 * (1.0 - u0) * c000 + u1 * (1.0 - u1) * c011;
}

/// Leading variance term sigma^2(u0, u1) = d0C (1 - d0C) / (2 sqrt(pi u0 (1 - u0))).
inline double asymptotic_var_sigma2(const CopulaModel& model, double u0, double u1) {
    if (!(u0 > 0.0 && u0 < 1.0 && u1 > 0.0 && u1 < 1.0))
        throw DomainError("variance evaluation requires (u0, u1) in (0, 1)^2");
    const double d = conditional_deriv(model, u0, u1);
    return d * (1.0 - d) / (2.0 * std::sqrt(std::numbers::pi * u0 * (1.0 - u0)));
}

/// |b| below this counts as zero bias, giving the order 2.
inline constexpr double zero_bias_tolerance = 1e-8;

/// ceil((b^2/sigma^2)^(2/5) n^(2/5)) clamped to [2, n].
inline std::size_t optimal_order_from_ratio(double bias2_over_var, std::size_t n) {
    const double raw = std::pow(bias2_over_var, 0.4) * std::pow(static_cast<double>(n), 0.4);
    // guard against pow() overshooting an exact integer by an ulp
    const double m = std::ceil(raw * (1.0 - 1e-12));
    const double upper = static_cast<double>(std::max<std::size_t>(n, 2));
    return static_cast<std::size_t>(std::clamp(m, 2.0, upper));
}

/// AMSE-optimal Bernstein order at (tau, s) under the true copula.
inline std::size_t optimal_order(const CopulaModel& model, double tau, double s, std::size_t n) {
    if (!(s > 0.0 && s < 1.0 && s + tau < 1.0 && tau >= 0.0))
        throw DomainError("optimal order requires s in (0,1) and s + tau < 1");
    const double b = asymptotic_bias_b(model, s, s + tau);
    if (std::abs(b) < zero_bias_tolerance)
        return 2;
    const double v = asymptotic_var_sigma2(model, s, s + tau);
    if (!(v > 0.0))
        throw ParameterError("degenerate conditional distribution: sigma^2 = 0");
    return optimal_order_from_ratio(b * b / v, n);
}

} // namespace urmc
