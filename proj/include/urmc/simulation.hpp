#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "urmc/copula_models.hpp"
#include "urmc/copula_nonparametric.hpp"
#include "urmc/curve.hpp"
#include "urmc/distribution_regression.hpp"
#include "urmc/error.hpp"
#include "urmc/parallel.hpp"

namespace urmc {

/// Rule for the Bernstein order of an EBC estimator.
enum class OrderRule { optimal, sqrt_n, n, fixed };

struct EstimatorSpec {
    enum class Kind { ebc, dr } kind = Kind::ebc;
    OrderRule rule = OrderRule::sqrt_n;
    std::size_t fixed_order = 0;
    DRSpec dr;
    std::string name;

    static EstimatorSpec ebc(OrderRule rule, std::size_t m = 0) {
        EstimatorSpec e;
        e.kind = Kind::ebc;
        e.rule = rule;
        e.fixed_order = m;
        switch (rule) {
        case OrderRule::optimal:
            e.name = "ebc-opt";
            break;
        case OrderRule::sqrt_n:
            e.name = "ebc-sqrt";
            break;
        case OrderRule::n:
            e.name = "beta";
            break;
        case OrderRule::fixed:
            e.name = "ebc-" + std::to_string(m);
            break;
        }
        return e;
    }

    static EstimatorSpec distribution_regression(Link link, int degree) {
        EstimatorSpec e;
        e.kind = Kind::dr;
        e.dr = DRSpec{link, degree, GroupTerms::none};
        e.name = "dr-" + to_string(link) + (degree == 1 ? "-linear" : degree == 2 ? "-quadratic"
                                                                      : "-degree" + std::to_string(degree));
        return e;
    }

    /// Parses names such as ebc-opt, ebc-sqrt, ebc-n, beta, ebc-12, dr-probit-linear, dr-logit-quadratic.
    static EstimatorSpec parse(const std::string& name) {
        if (name == "ebc-opt" || name == "ebc-optimal")
            return ebc(OrderRule::optimal);
        if (name == "ebc-sqrt" || name == "ebc-sqrt-n")
            return ebc(OrderRule::sqrt_n);
        if (name == "ebc-n" || name == "beta")
            return ebc(OrderRule::n);
        if (name.rfind("ebc-", 0) == 0) {
            const std::string tail = name.substr(4);
            if (!tail.empty() && tail.find_first_not_of("0123456789") == std::string::npos)
                return ebc(OrderRule::fixed, std::stoul(tail));
        }
        if (name.rfind("dr-", 0) == 0) {
            const auto dash = name.find('-', 3);
            if (dash != std::string::npos) {
                const std::string link = name.substr(3, dash - 3);
                const std::string design = name.substr(dash + 1);
                if ((link == "logit" || link == "probit") && (design == "linear" || design == "quadratic"))
                    return distribution_regression(link == "logit" ? Link::logit : Link::probit,
                                                   design == "linear" ? 1 : 2);
            }
        }
        throw InputError("unknown estimator '" + name + "'");
    }
};

struct ExperimentConfig {
    CopulaModel model = CopulaModel::independence();
    std::size_t n = 100;
    std::size_t reps = 1000;
    double tau = 0.0;
    std::vector<double> grid = default_grid();
    std::vector<EstimatorSpec> estimators;
    std::uint64_t seed = 0;
    std::size_t threads = 0;
    std::size_t keep_replications = 0;   // per-replication curves retained for overlay export
    QuantileRule dr_quantile = QuantileRule::inverse_cdf;

    void validate() const {
        if (reps < 1)
            throw ParameterError("at least one replication is required");
        if (n < 2)
            throw ParameterError("sample size must be at least 2");
        if (estimators.empty())
            throw ParameterError("no estimators requested");
        validate_grid(tau, grid);
    }
};

struct MetricResult {
    std::string estimator;
    double risb = 0.0;    // x100
    double rimse = 0.0;   // x100
    std::vector<double> mean_curve;
    std::vector<double> mse_curve;
    std::vector<double> bias2_curve;
    std::size_t failures = 0;   // flagged (replication, grid point) pairs
    std::vector<std::size_t> orders;   // Bernstein order per grid point, EBC only
    std::vector<std::vector<double>> kept_curves;
    std::string model;
    std::size_t n = 0;
    std::size_t reps = 0;
};

/// m*(tau, s) at every grid point under the true copula.
inline std::vector<std::size_t> oracle_order_curve(const CopulaModel& model, double tau,
                                                   std::span<const double> grid, std::size_t n) {
    validate_grid(tau, grid);
    std::vector<std::size_t> out;
    out.reserve(grid.size());
    for (double s : grid)
        out.push_back(optimal_order(model, tau, s, n));
    return out;
}

namespace detail {

struct PreparedEstimator {
    std::optional<EbcCurveEvaluator> ebc;
    std::optional<BetaCurveEvaluator> beta;
    std::optional<DRSpec> dr;
    std::vector<std::size_t> orders;
};

inline PreparedEstimator prepare(const EstimatorSpec& spec, const ExperimentConfig& cfg) {
    PreparedEstimator p;
    if (spec.kind == EstimatorSpec::Kind::dr) {
        p.dr = spec.dr;
        return p;
    }
    switch (spec.rule) {
    case OrderRule::n:
        p.beta.emplace(cfg.n, cfg.tau, cfg.grid);
        p.orders.assign(cfg.grid.size(), cfg.n);
        return p;
    case OrderRule::optimal:
        p.orders = oracle_order_curve(cfg.model, cfg.tau, cfg.grid, cfg.n);
        break;
    case OrderRule::sqrt_n:
        p.orders.assign(cfg.grid.size(), sqrt_order(cfg.n));
        break;
    case OrderRule::fixed:
        p.orders.assign(cfg.grid.size(), spec.fixed_order);
        break;
    }
    p.ebc.emplace(cfg.n, p.orders, cfg.tau, cfg.grid);
    return p;
}

struct ReplicationOutput {
    std::vector<std::vector<double>> curves;   // per estimator
    std::vector<std::size_t> failures;
};

} // namespace detail

/// Simulates `reps` datasets from the model (standard normal margins) and reports RISB and RIMSE (x100)
/// per estimator, integrating over the grid by its mean.
inline std::vector<MetricResult> run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    const auto truth = true_urmc(cfg.model, cfg.tau, cfg.grid).values;
    std::vector<detail::PreparedEstimator> prepared;
    for (const auto& e : cfg.estimators)
        prepared.push_back(detail::prepare(e, cfg));

    std::vector<detail::ReplicationOutput> outputs(cfg.reps);
    parallel_for(
        cfg.reps,
        [&](std::size_t r) {
            auto rng = make_stream(cfg.seed, r);
            const Sample data = sample(cfg.model, cfg.n, Marginal::standard_normal, rng);
            const RankPairs ranks(data);
            auto& out = outputs[r];
            for (const auto& p : prepared) {
                if (p.beta) {
                    out.curves.push_back(p.beta->evaluate(ranks));
                    out.failures.push_back(0);
                } else if (p.ebc) {
                    out.curves.push_back(p.ebc->evaluate(ranks));
                    out.failures.push_back(0);
                } else {
                    DROptions dro;
                    dro.quantile = cfg.dr_quantile;
                    auto c = urmc_dr(data, *p.dr, cfg.tau, cfg.grid, dro);
                    out.failures.push_back(c.flagged_points());
                    out.curves.push_back(std::move(c.values));
                }
            }
        },
        cfg.threads);

    const std::size_t G = cfg.grid.size();
    const double reps = static_cast<double>(cfg.reps);
    std::vector<MetricResult> results;
    for (std::size_t e = 0; e < cfg.estimators.size(); ++e) {
        MetricResult m;
        m.estimator = cfg.estimators[e].name;
        m.model = cfg.model.describe();
        m.n = cfg.n;
        m.reps = cfg.reps;
        m.orders = prepared[e].orders;
        m.mean_curve.assign(G, 0.0);
        m.mse_curve.assign(G, 0.0);
        for (std::size_t r = 0; r < cfg.reps; ++r) {
            const auto& c = outputs[r].curves[e];
            for (std::size_t g = 0; g < G; ++g) {
                m.mean_curve[g] += c[g];
                m.mse_curve[g] += (c[g] - truth[g]) * (c[g] - truth[g]);
            }
            m.failures += outputs[r].failures[e];
            if (r < cfg.keep_replications)
                m.kept_curves.push_back(c);
        }
        double ib2 = 0.0, imse = 0.0;
        m.bias2_curve.resize(G);
        for (std::size_t g = 0; g < G; ++g) {
            m.mean_curve[g] /= reps;
            m.mse_curve[g] /= reps;
            const double bias = m.mean_curve[g] - truth[g];
            m.bias2_curve[g] = bias * bias;
            ib2 += m.bias2_curve[g];
            imse += m.mse_curve[g];
        }
        m.risb = 100.0 * std::sqrt(ib2 / static_cast<double>(G));
        m.rimse = 100.0 * std::sqrt(imse / static_cast<double>(G));
        results.push_back(std::move(m));
    }
    return results;
}

struct OverlayRow {
    double s = 0.0;
    double value = 0.0;
    std::string series;
};

/// Long-format rows from finished metrics: the true curve, each estimator's mean curve and the
/// per-replication curves kept by the run.
inline std::vector<OverlayRow> overlay_rows(const ExperimentConfig& cfg, const std::vector<MetricResult>& metrics) {
    const auto truth = true_urmc(cfg.model, cfg.tau, cfg.grid).values;
    std::vector<OverlayRow> rows;
    auto emit = [&](const std::vector<double>& values, const std::string& series) {
        for (std::size_t g = 0; g < cfg.grid.size(); ++g)
            rows.push_back({cfg.grid[g], values[g], series});
    };
    emit(truth, "true");
    for (const auto& m : metrics) {
        emit(m.mean_curve, "mean:" + m.estimator);
        for (std::size_t r = 0; r < m.kept_curves.size(); ++r)
            emit(m.kept_curves[r], "rep" + std::to_string(r) + ":" + m.estimator);
    }
    return rows;
}

/// Runs the experiment and exports the first `replications` curves of each estimator for plotting.
inline std::vector<OverlayRow> curve_overlay_export(ExperimentConfig cfg, std::size_t replications) {
    cfg.keep_replications = std::min(replications, cfg.reps);
    return overlay_rows(cfg, run_experiment(cfg));
}

} // namespace urmc
