#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "urmc/curve.hpp"
#include "urmc/distribution_regression.hpp"
#include "urmc/error.hpp"
#include "urmc/normal.hpp"
#include "urmc/parallel.hpp"
#include "urmc/sample.hpp"

namespace urmc {

/// Any curve procedure: sample, tau and grid in, curve out.
using CurveProcedure = std::function<CurveEstimate(const Sample&, double, std::span<const double>)>;

struct BandOptions {
    std::size_t B = 500;
    double alpha = 0.05;
    std::uint64_t seed = 0;
    std::size_t threads = 1;
};

/// Points whose bootstrap standard deviation falls below this are excluded from the sup statistic.
inline constexpr double min_bootstrap_sd = 1e-12;

/// Centre curve and B bootstrap replicates of it on a common grid.
struct BootstrapDraws {
    double tau = 0.0;
    std::vector<double> grid;
    std::vector<double> center;
    std::vector<std::vector<double>> replicates;   // B rows of |grid| values
    std::size_t redraws = 0;                       // resamples rejected and redrawn
};

struct BandResult {
    double tau = 0.0;
    std::vector<double> grid;
    std::vector<double> center;
    std::vector<double> sd;   // pointwise bootstrap standard deviation
    std::vector<double> pointwise_lo, pointwise_hi;
    std::vector<double> uniform_lo, uniform_hi;
    std::vector<bool> retained;
    std::vector<double> dropped_points;
    double alpha = 0.05;
    std::size_t B = 0;
    double critical_value = 0.0;   // (1 - alpha) quantile of the studentized sup deviation
    double z_value = 0.0;          // normal (1 - alpha/2) quantile for the pointwise band
    std::size_t redraws = 0;
};

namespace detail {

// inf{x : ecdf(x) >= p} over a finite set
inline double upper_quantile(std::vector<double> values, double p) {
    if (values.empty())
        return 0.0;
    return EmpiricalDistribution(values).quantile(p);
}

} // namespace detail

/// Draws B row-resamples (with replacement) and evaluates `curve` on each one.
/// Resamples rejected by `accept` are redrawn from the same stream; more than 10 B rejections abort.
inline BootstrapDraws bootstrap_draws(const Sample& sample,
                                      const std::function<std::vector<double>(const Sample&)>& curve,
                                      double tau, std::span<const double> grid, const BandOptions& opt,
                                      const std::function<bool(const Sample&)>& accept = {}) {
    if (opt.B < 1)
        throw ParameterError("bootstrap needs at least one replication");
    BootstrapDraws out;
    out.tau = tau;
    out.grid.assign(grid.begin(), grid.end());
    out.center = curve(sample);
    if (out.center.size() != grid.size())
        throw InputError("curve procedure returned the wrong number of points");
    out.replicates.assign(opt.B, {});
    std::atomic<std::size_t> redraws{0};
    const std::size_t n = sample.size();
    const std::size_t limit = 10 * opt.B;
    parallel_for(
        opt.B,
        [&](std::size_t b) {
            auto rng = make_stream(opt.seed, b);
            std::uniform_int_distribution<std::size_t> pick(0, n - 1);
            std::vector<std::size_t> rows(n);
            while (true) {
                for (auto& r : rows)
                    r = pick(rng);
                Sample resample = sample.subsample(rows);
                if (!accept || accept(resample)) {
                    out.replicates[b] = curve(resample);
                    return;
                }
                if (++redraws > limit)
                    throw EstimationError("bootstrap could not draw an admissible resample");
            }
        },
        opt.threads);
    out.redraws = redraws.load();
    return out;
}

/// Pointwise (normal multiplier) and uniform (sup-t bootstrap) bands from a set of draws.
inline BandResult make_band(const BootstrapDraws& draws, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0))
        throw ParameterError("alpha must lie in (0, 1)");
    const std::size_t G = draws.grid.size();
    const std::size_t B = draws.replicates.size();
    BandResult band;
    band.tau = draws.tau;
    band.grid = draws.grid;
    band.center = draws.center;
    band.alpha = alpha;
    band.B = B;
    band.redraws = draws.redraws;
    band.sd.assign(G, 0.0);
    band.retained.assign(G, false);

    for (std::size_t g = 0; g < G; ++g) {
        double sum = 0.0, sum2 = 0.0;
        std::size_t k = 0;
        for (const auto& rep : draws.replicates) {
            if (std::isfinite(rep[g])) {
                sum += rep[g];
                ++k;
            }
        }
        if (k < 2) {
            band.dropped_points.push_back(draws.grid[g]);
            continue;
        }
        const double mean = sum / static_cast<double>(k);
        for (const auto& rep : draws.replicates)
            if (std::isfinite(rep[g]))
                sum2 += (rep[g] - mean) * (rep[g] - mean);
        band.sd[g] = std::sqrt(sum2 / static_cast<double>(k - 1));
        band.retained[g] = band.sd[g] >= min_bootstrap_sd;
        if (!band.retained[g])
            band.dropped_points.push_back(draws.grid[g]);
    }

    std::vector<double> sup_stats;
    sup_stats.reserve(B);
    for (const auto& rep : draws.replicates) {
        double sup = 0.0;
        bool any = false;
        for (std::size_t g = 0; g < G; ++g) {
            if (!band.retained[g] || !std::isfinite(rep[g]))
                continue;
            sup = std::max(sup, std::abs(rep[g] - draws.center[g]) / band.sd[g]);
            any = true;
        }
        if (any)
            sup_stats.push_back(sup);
    }
    band.critical_value = detail::upper_quantile(sup_stats, 1.0 - alpha);
    band.z_value = normal::quantile(1.0 - alpha / 2.0);

    band.pointwise_lo.resize(G);
    band.pointwise_hi.resize(G);
    band.uniform_lo.resize(G);
    band.uniform_hi.resize(G);
    for (std::size_t g = 0; g < G; ++g) {
        const double c = draws.center[g];
        const double s = band.retained[g] ? band.sd[g] : 0.0;
        band.pointwise_lo[g] = c - band.z_value * s;
        band.pointwise_hi[g] = c + band.z_value * s;
        band.uniform_lo[g] = c - band.critical_value * s;
        band.uniform_hi[g] = c + band.critical_value * s;
    }
    return band;
}

/// Empirical-bootstrap bands for one curve; quantiles and fits are recomputed on every resample.
inline BandResult bootstrap_band(const Sample& sample, const CurveProcedure& estimator, double tau,
                                 std::span<const double> grid, const BandOptions& opt) {
    if (opt.B < 50)
        throw ParameterError("bootstrap bands need B >= 50");
    validate_grid(tau, grid);
    std::vector<double> g(grid.begin(), grid.end());
    auto curve = [&](const Sample& s) { return estimator(s, tau, g).values; };
    return make_band(bootstrap_draws(sample, curve, tau, g, opt), opt.alpha);
}

/// Draws for the between-group difference u_c(x1) - u_c(x2) from pooled-sample resampling.
inline BootstrapDraws difference_draws(const Sample& sample, const DRSpec& spec, const std::string& x1,
                                       const std::string& x2, double tau, std::span<const double> grid,
                                       const BandOptions& opt, const DROptions& dr = {}) {
    validate_grid(tau, grid);
    if (!sample.has_groups())
        throw InputError("difference band needs a group column");
    if (sample.group_count(x1) == 0 || sample.group_count(x2) == 0)
        throw InputError("both groups must occur in the sample");
    const auto levels = sample.group_levels();
    std::vector<double> g(grid.begin(), grid.end());
    auto curve = [&](const Sample& s) {
        const auto curves = urmc_dr_conditional(s, spec, {x1, x2}, tau, g, dr, levels);
        std::vector<double> diff(g.size());
        for (std::size_t k = 0; k < g.size(); ++k)
            diff[k] = curves[0].values[k] - curves[1].values[k];
        return diff;
    };
    auto accept = [&](const Sample& s) {
        for (const auto& l : levels)
            if (s.group_count(l) == 0)
                return false;
        return true;
    };
    return bootstrap_draws(sample, curve, tau, g, opt, accept);
}

inline BandResult difference_band(const Sample& sample, const DRSpec& spec, const std::string& x1,
                                  const std::string& x2, double tau, std::span<const double> grid,
                                  const BandOptions& opt, const DROptions& dr = {}) {
    if (opt.B < 50)
        throw ParameterError("bootstrap bands need B >= 50");
    return make_band(difference_draws(sample, spec, x1, x2, tau, grid, opt, dr), opt.alpha);
}

struct DominanceReport {
    std::vector<double> dominance_set;                     // retained points with uniform_lo > 0
    std::vector<std::pair<double, double>> intervals;      // maximal runs of consecutive such points
    bool violation = false;                                // uniform_hi < 0 somewhere
    std::vector<double> violation_points;

    bool dominates() const { return !dominance_set.empty() && !violation; }
};

/// Reads a difference band as a dominance diagnosis at the band's level.
inline DominanceReport dominance_report(const BandResult& band) {
    DominanceReport rep;
    bool in_run = false;
    for (std::size_t g = 0; g < band.grid.size(); ++g) {
        const bool retained = g < band.retained.size() ? band.retained[g] : true;
        const bool above = retained && band.uniform_lo[g] > 0.0;
        if (retained && band.uniform_hi[g] < 0.0) {
            rep.violation = true;
            rep.violation_points.push_back(band.grid[g]);
        }
        if (above) {
            rep.dominance_set.push_back(band.grid[g]);
            if (in_run)
                rep.intervals.back().second = band.grid[g];
            else
                rep.intervals.emplace_back(band.grid[g], band.grid[g]);
        }
        in_run = above;
    }
    return rep;
}

} // namespace urmc
