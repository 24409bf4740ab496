#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "urmc/error.hpp"

namespace urmc {

enum class Link { logit, probit };

inline std::string to_string(Link link) { return link == Link::logit ? "logit" : "probit"; }

/// How group labels enter a distribution-regression design.
enum class GroupTerms {
    none,       // ignore labels
    shift,      // one intercept shift per non-reference group
    interact,   // every polynomial term interacted with every non-reference group
};

/// Link plus basis specification for a distribution regression.
/// The design is [1, y0, ..., y0^degree] optionally extended by group terms.
struct DRSpec {
    Link link = Link::logit;
    int degree = 1;
    GroupTerms groups = GroupTerms::none;

    std::string describe() const {
        std::ostringstream os;
        os << "dr(" << to_string(link) << ",degree=" << degree;
        if (groups == GroupTerms::shift)
            os << ",group-shift";
        else if (groups == GroupTerms::interact)
            os << ",group-interact";
        os << ')';
        return os.str();
    }
};

enum class EstimatorKind { ebc, beta, dr, truth, other };

struct EstimatorTag {
    EstimatorKind kind = EstimatorKind::other;
    std::optional<std::size_t> m;   // EBC order when constant across the grid
    std::optional<DRSpec> dr;
    std::string label;

    std::string describe() const {
        switch (kind) {
        case EstimatorKind::ebc:
            return m ? "ebc(m=" + std::to_string(*m) + ")" : "ebc(m=pointwise)";
        case EstimatorKind::beta:
            return "beta";
        case EstimatorKind::dr:
            return dr ? dr->describe() : "dr";
        case EstimatorKind::truth:
            return "true";
        default:
            return label;
        }
    }
};

enum class PointStatus {
    ok,
    separation,   // binary fit separated or diverged; value kept after clamping
    degenerate,   // threshold left one indicator class empty; value is the clamped frequency
};

/// An estimated mobility curve u(tau, .) on a rank grid.
struct CurveEstimate {
    double tau = 0.0;
    std::vector<double> grid;
    std::vector<double> values;
    std::vector<PointStatus> status;
    EstimatorTag estimator;
    std::size_t n = 0;
    std::vector<std::string> warnings;

    std::size_t flagged_points() const {
        std::size_t k = 0;
        for (auto s : status)
            k += s != PointStatus::ok ? 1 : 0;
        return k;
    }
};

/// Checks a rank grid: strictly increasing, inside (0,1), and s + tau < 1 at every point.
inline void validate_grid(double tau, std::span<const double> grid) {
    if (!(tau >= 0.0 && tau < 1.0))
        throw DomainError("tau must lie in [0, 1)");
    if (grid.empty())
        throw DomainError("rank grid is empty");
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double s = grid[i];
        if (!(s > 0.0 && s < 1.0))
            throw DomainError("grid point " + std::to_string(s) + " outside (0, 1)");
        if (!(s + tau < 1.0))
            throw DomainError("grid point s=" + std::to_string(s) + " violates s + tau < 1 for tau=" +
                              std::to_string(tau));
        if (i > 0 && !(grid[i - 1] < s))
            throw DomainError("grid must be strictly increasing");
    }
}

/// Points k/denominator for k = first..last, each correctly rounded.
inline std::vector<double> uniform_grid(int first, int last, int denominator) {
    std::vector<double> g;
    for (int k = first; k <= last; ++k)
        g.push_back(static_cast<double>(k) / static_cast<double>(denominator));
    return g;
}

/// {0.01, 0.02, ..., 0.99}
inline std::vector<double> default_grid() { return uniform_grid(1, 99, 100); }

/// {0.05, 0.06, ..., 0.95}, the default for confidence bands.
inline std::vector<double> band_grid() { return uniform_grid(5, 95, 100); }

/// Drops grid points with s + tau >= 1.
inline std::vector<double> trim_grid(std::span<const double> grid, double tau) {
    std::vector<double> out;
    for (double s : grid)
        if (s + tau < 1.0)
            out.push_back(s);
    return out;
}

} // namespace urmc
