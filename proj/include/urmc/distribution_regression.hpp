#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "urmc/curve.hpp"
#include "urmc/error.hpp"
#include "urmc/normal.hpp"
#include "urmc/sample.hpp"

namespace urmc {

/// Probabilities are kept inside [prob_floor, 1 - prob_floor] in the likelihood and in reported CDFs.
inline constexpr double prob_floor = 1e-10;

inline double link_cdf(Link link, double eta) {
    const double p = link == Link::logit ? 1.0 / (1.0 + std::exp(-eta)) : normal::cdf(eta);
    return std::clamp(p, prob_floor, 1.0 - prob_floor);
}

inline double link_quantile(Link link, double p) {
    if (!(p > 0.0 && p < 1.0))
        throw DomainError("link quantile requires p in (0, 1)");
    return link == Link::logit ? std::log(p / (1.0 - p)) : normal::quantile(p);
}

struct FitOptions {
    double gradient_tolerance = 1e-8;   // sup-norm of the per-observation score
    int max_iterations = 100;
    int max_halvings = 40;
    double separation_eps = 1e-6;
    double divergence_norm = 1e6;
    bool record_trace = false;
};

struct FitDiagnostics {
    int iterations = 0;
    double gradient_norm = 0.0;
    bool converged = false;
    bool separated = false;
    std::vector<double> loglik_trace;   // mean log-likelihood after each accepted step
};

struct ThresholdFit {
    double threshold = 0.0;
    Eigen::VectorXd coefficients;   // on the raw (unstandardized) basis
    FitDiagnostics diagnostics;

    bool flagged() const { return diagnostics.separated || !diagnostics.converged; }
};

/// Basis P(y0, x) for a DRSpec, plus the standardized design matrix of a sample.
class DRDesign {
public:
    DRDesign(const Sample& sample, DRSpec spec, std::vector<std::string> levels = {})
        : spec_(spec), levels_(std::move(levels)) {
        if (spec_.degree < 0)
            throw ParameterError("polynomial degree must be nonnegative");
        if (spec_.groups != GroupTerms::none) {
            if (!sample.has_groups())
                throw InputError("design uses group terms but the sample has no group column");
            if (levels_.empty())
                levels_ = sample.group_levels();
        }
        const std::size_t n = sample.size();
        const std::size_t p = width();
        Eigen::MatrixXd raw(n, p);
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t g = spec_.groups == GroupTerms::none ? 0 : level_index(sample.groups()[i]);
            raw.row(static_cast<Eigen::Index>(i)) = basis(sample.parent()[i], g).transpose();
        }
        mean_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p));
        scale_ = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(p));
        for (Eigen::Index j = 1; j < static_cast<Eigen::Index>(p); ++j) {
            const double mu = raw.col(j).mean();
            const double sd = std::sqrt((raw.col(j).array() - mu).square().mean());
            if (!(sd > 0.0) || !std::isfinite(sd))
                throw InputError("design column " + std::to_string(j) + " is constant on the sample");
            mean_[j] = mu;
            scale_[j] = sd;
        }
        x_ = raw;
        for (Eigen::Index j = 1; j < static_cast<Eigen::Index>(p); ++j)
            x_.col(j) = (raw.col(j).array() - mean_[j]) / scale_[j];
    }

    std::size_t width() const {
        const std::size_t poly = static_cast<std::size_t>(spec_.degree) + 1;
        const std::size_t extra = levels_.size() > 1 ? levels_.size() - 1 : 0;
        switch (spec_.groups) {
        case GroupTerms::shift:
            return poly + extra;
        case GroupTerms::interact:
            return poly * (1 + extra);
        default:
            return poly;
        }
    }

    /// Raw basis row at parent income y0 and group index g (0 = reference level).
    Eigen::VectorXd basis(double y0, std::size_t g) const {
        const std::size_t poly = static_cast<std::size_t>(spec_.degree) + 1;
        Eigen::VectorXd row = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(width()));
        double power = 1.0;
        for (std::size_t k = 0; k < poly; ++k, power *= y0)
            row[static_cast<Eigen::Index>(k)] = power;
        if (g == 0 || levels_.size() < 2)
            return row;
        if (spec_.groups == GroupTerms::shift) {
            row[static_cast<Eigen::Index>(poly + g - 1)] = 1.0;
        } else if (spec_.groups == GroupTerms::interact) {
            for (std::size_t k = 0; k < poly; ++k)
                row[static_cast<Eigen::Index>(poly * g + k)] = row[static_cast<Eigen::Index>(k)];
        }
        return row;
    }

    std::size_t level_index(const std::string& label) const {
        const auto it = std::find(levels_.begin(), levels_.end(), label);
        if (it == levels_.end())
            throw InputError("group '" + label + "' is not a level of the design");
        return static_cast<std::size_t>(it - levels_.begin());
    }

    const Eigen::MatrixXd& standardized() const noexcept { return x_; }
    const DRSpec& spec() const noexcept { return spec_; }
    const std::vector<std::string>& levels() const noexcept { return levels_; }

    /// Maps coefficients fitted on the standardized columns back to the raw basis.
    Eigen::VectorXd unstandardize(const Eigen::VectorXd& gamma) const {
        Eigen::VectorXd beta = gamma;
        for (Eigen::Index j = 1; j < gamma.size(); ++j) {
            beta[j] = gamma[j] / scale_[j];
            beta[0] -= gamma[j] * mean_[j] / scale_[j];
        }
        return beta;
    }

private:
    DRSpec spec_;
    std::vector<std::string> levels_;
    Eigen::MatrixXd x_;
    Eigen::VectorXd mean_;
    Eigen::VectorXd scale_;
};

namespace detail {

struct LikelihoodState {
    double loglik = 0.0;
    Eigen::VectorXd gradient;
    Eigen::MatrixXd information;
    Eigen::VectorXd fitted;
};

// Mean log-likelihood, score and (expected) information of the binary regression.
inline LikelihoodState evaluate_likelihood(Link link, const Eigen::MatrixXd& x, const std::vector<char>& below,
                                           const Eigen::VectorXd& gamma) {
    const Eigen::Index n = x.rows();
    const Eigen::VectorXd eta = x * gamma;
    Eigen::VectorXd resid(n), weight(n);
    LikelihoodState st;
    st.fitted.resize(n);
    double ll = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double e = eta[i];
        const bool d = below[static_cast<std::size_t>(i)] != 0;
        double p, q;   // P(Y1 <= y1 | x) and its complement
        if (link == Link::logit) {
            if (e >= 0.0) {
                const double z = std::exp(-e);
                p = 1.0 / (1.0 + z);
                q = z / (1.0 + z);
            } else {
                const double z = std::exp(e);
                p = z / (1.0 + z);
                q = 1.0 / (1.0 + z);
            }
            resid[i] = (d ? 1.0 : 0.0) - p;
            weight[i] = std::max(p * q, 1e-300);
        } else {
            const double phi = normal::pdf(e);
            if (e < 0.0) {
                p = normal::cdf(e);
                q = 1.0 - p;
            } else {
                q = normal::cdf(-e);
                p = 1.0 - q;
            }
            const double lam_p = p > 0.0 && e > -35.0 ? phi / p : normal::inverse_mills(e);
            const double lam_q = q > 0.0 && e < 35.0 ? phi / q : normal::inverse_mills(-e);
            resid[i] = d ? lam_p : -lam_q;
            weight[i] = std::max(lam_p * lam_q, 1e-300);
        }
        st.fitted[i] = p;
        ll += std::log(std::clamp(d ? p : q, prob_floor, 1.0 - prob_floor));
    }
    const double dn = static_cast<double>(n);
    st.loglik = ll / dn;
    st.gradient = x.transpose() * resid / dn;
    // p is small; a direct accumulation beats a general product with temporaries
    const Eigen::Index p = x.cols();
    st.information = Eigen::MatrixXd::Zero(p, p);
    for (Eigen::Index a = 0; a < p; ++a)
        for (Eigen::Index b = 0; b <= a; ++b) {
            const double v = (x.col(a).array() * x.col(b).array() * weight.array()).sum() / dn;
            st.information(a, b) = v;
            st.information(b, a) = v;
        }
    return st;
}

inline Eigen::VectorXd solve_information(const Eigen::MatrixXd& info, const Eigen::VectorXd& g) {
    Eigen::LLT<Eigen::MatrixXd> llt(info);
    if (llt.info() == Eigen::Success)
        return llt.solve(g);
    Eigen::MatrixXd ridge = info;
    ridge.diagonal().array() += 1e-10 * (1.0 + info.diagonal().cwiseAbs().maxCoeff());
    return ridge.ldlt().solve(g);
}

} // namespace detail

/// Maximizes the binary log-likelihood of 1{Y1 <= y1} on the design by Newton-Raphson
/// (Fisher scoring for probit) with step-halving, starting from the intercept-only solution.
inline ThresholdFit fit_threshold(const DRDesign& design, std::span<const double> child, double y1,
                                  const FitOptions& opt = {}) {
    const Eigen::MatrixXd& x = design.standardized();
    const std::size_t n = child.size();
    if (static_cast<std::size_t>(x.rows()) != n)
        throw InputError("design and child income differ in length");
    std::vector<char> below(n);
    std::size_t ones = 0;
    for (std::size_t i = 0; i < n; ++i) {
        below[i] = child[i] <= y1 ? 1 : 0;
        ones += static_cast<std::size_t>(below[i]);
    }
    if (ones == 0 || ones == n)
        throw EstimationError("degenerate threshold " + std::to_string(y1) + ": all indicators are equal");

    const Link link = design.spec().link;
    Eigen::VectorXd gamma = Eigen::VectorXd::Zero(x.cols());
    gamma[0] = link_quantile(link, static_cast<double>(ones) / static_cast<double>(n));

    ThresholdFit fit;
    fit.threshold = y1;
    auto state = detail::evaluate_likelihood(link, x, below, gamma);
    if (opt.record_trace)
        fit.diagnostics.loglik_trace.push_back(state.loglik);
    int iter = 0;
    bool stalled = false;
    while (true) {
        fit.diagnostics.gradient_norm = state.gradient.cwiseAbs().maxCoeff();
        if (fit.diagnostics.gradient_norm <= opt.gradient_tolerance) {
            fit.diagnostics.converged = true;
            break;
        }
        if (iter >= opt.max_iterations || stalled)
            break;
        ++iter;
        const Eigen::VectorXd step = detail::solve_information(state.information, state.gradient);
        double scale = 1.0;
        bool accepted = false;
        for (int h = 0; h <= opt.max_halvings; ++h, scale *= 0.5) {
            const Eigen::VectorXd trial = gamma + scale * step;
            auto next = detail::evaluate_likelihood(link, x, below, trial);
            if (std::isfinite(next.loglik) && next.loglik >= state.loglik) {
                gamma = trial;
                state = std::move(next);
                accepted = true;
                break;
            }
        }
        if (!accepted)
            stalled = true;
        else if (opt.record_trace)
            fit.diagnostics.loglik_trace.push_back(state.loglik);
    }
    fit.diagnostics.iterations = iter;

    bool all_extreme = true;
    for (std::size_t i = 0; i < n && all_extreme; ++i) {
        const double p = state.fitted[static_cast<Eigen::Index>(i)];
        all_extreme = p < opt.separation_eps || p > 1.0 - opt.separation_eps;
    }
    fit.coefficients = design.unstandardize(gamma);
    fit.diagnostics.separated = all_extreme || gamma.norm() > opt.divergence_norm ||
                                fit.coefficients.norm() > opt.divergence_norm;
    return fit;
}

inline ThresholdFit fit_threshold(const Sample& sample, const DRSpec& spec, double y1, const FitOptions& opt = {}) {
    const DRDesign design(sample, spec);
    return fit_threshold(design, sample.child(), y1, opt);
}

/// Lambda(P(y0, x)' theta) for raw-basis coefficients.
inline double conditional_cdf(Link link, const Eigen::VectorXd& coefficients, const Eigen::VectorXd& basis_row) {
    if (coefficients.size() != basis_row.size())
        throw InputError("coefficient and basis dimensions differ");
    return link_cdf(link, coefficients.dot(basis_row));
}

/// Threshold-indexed fits of one sample, fitted lazily and cached by threshold value.
class DRFit {
public:
    DRFit(const Sample& sample, DRSpec spec, std::vector<std::string> levels = {}, FitOptions opt = {})
        : design_(sample, spec, std::move(levels)), child_(sample.child().begin(), sample.child().end()),
          opt_(opt) {}

    const ThresholdFit& fit(double y1) {
        auto it = fits_.find(y1);
        if (it == fits_.end())
            it = fits_.emplace(y1, fit_threshold(design_, child_, y1, opt_)).first;
        return it->second;
    }

    bool has_threshold(double y1) const { return fits_.count(y1) > 0; }

    /// Estimated F_{1|0,X}(y1 | y0, x). Unfitted thresholds are fitted unless fit_on_demand is false.
    double conditional_cdf(double y1, double y0, const std::optional<std::string>& group = std::nullopt,
                           bool fit_on_demand = true) {
        if (!fit_on_demand && !has_threshold(y1))
            throw InputError("threshold " + std::to_string(y1) + " has not been fitted");
        const ThresholdFit& f = fit(y1);
        const std::size_t g = group ? design_.level_index(*group) : 0;
        return urmc::conditional_cdf(design_.spec().link, f.coefficients, design_.basis(y0, g));
    }

    const DRDesign& design() const noexcept { return design_; }
    const std::map<double, ThresholdFit>& fits() const noexcept { return fits_; }

private:
    DRDesign design_;
    std::vector<double> child_;
    FitOptions opt_;
    std::map<double, ThresholdFit> fits_;
};

/// How Q^_0 and Q^_1 are read off the pooled sample.
enum class QuantileRule { inverse_cdf, interpolated };

struct DROptions {
    FitOptions fit;
    std::size_t min_group_size = 30;
    QuantileRule quantile = QuantileRule::inverse_cdf;
};

namespace detail {

inline std::vector<CurveEstimate> dr_curves(const Sample& sample, const DRSpec& spec,
                                            const std::vector<std::optional<std::string>>& groups,
                                            std::vector<std::string> levels, double tau,
                                            std::span<const double> grid, const DROptions& opt) {
    validate_grid(tau, grid);
    const EmpiricalDistribution q0(sample.parent());
    const EmpiricalDistribution q1(sample.child());
    DRFit model(sample, spec, std::move(levels), opt.fit);

    std::vector<CurveEstimate> curves(groups.size());
    for (std::size_t c = 0; c < groups.size(); ++c) {
        auto& cur = curves[c];
        cur.tau = tau;
        cur.grid.assign(grid.begin(), grid.end());
        cur.values.resize(grid.size());
        cur.status.assign(grid.size(), PointStatus::ok);
        cur.estimator = {EstimatorKind::dr, {}, spec, groups[c] ? *groups[c] : std::string{}};
        cur.n = sample.size();
        if (groups[c] && sample.group_count(*groups[c]) < opt.min_group_size)
            cur.warnings.push_back("group '" + *groups[c] + "' has fewer than " +
                                   std::to_string(opt.min_group_size) + " observations");
    }

    for (std::size_t k = 0; k < grid.size(); ++k) {
        const bool interp = opt.quantile == QuantileRule::interpolated;
        const double y1 = interp ? q1.interpolated_quantile(grid[k] + tau) : q1.quantile(grid[k] + tau);
        const double y0 = interp ? q0.interpolated_quantile(grid[k]) : q0.quantile(grid[k]);
        try {
            const ThresholdFit& f = model.fit(y1);
            for (std::size_t c = 0; c < groups.size(); ++c) {
                const std::size_t g = groups[c] ? model.design().level_index(*groups[c]) : 0;
                const double F =
                    urmc::conditional_cdf(spec.link, f.coefficients, model.design().basis(y0, g));
                curves[c].values[k] = 1.0 - F;
                if (f.flagged())
                    curves[c].status[k] = PointStatus::separation;
            }
        } catch (const EstimationError&) {
            const double freq = q1.cdf(y1);
            const double F = std::clamp(freq, prob_floor, 1.0 - prob_floor);
            for (auto& cur : curves) {
                cur.values[k] = 1.0 - F;
                cur.status[k] = PointStatus::degenerate;
            }
        }
    }
    return curves;
}

} // namespace detail

/// DR estimator of the unconditional curve: 1 - F^_{1|0}(Q^_1(s + tau) | Q^_0(s)).
inline CurveEstimate urmc_dr(const Sample& sample, const DRSpec& spec, double tau, std::span<const double> grid,
                             const DROptions& opt = {}) {
    if (spec.groups != GroupTerms::none)
        throw InputError("unconditional DR estimator takes a design without group terms");
    return detail::dr_curves(sample, spec, {std::nullopt}, {}, tau, grid, opt).front();
}

/// Conditional DR curves for several groups from one pooled fit. Quantiles always come from the
/// pooled sample. A spec without group terms is treated as fully interacted.
inline std::vector<CurveEstimate> urmc_dr_conditional(const Sample& sample, DRSpec spec,
                                                      const std::vector<std::string>& groups, double tau,
                                                      std::span<const double> grid, const DROptions& opt = {},
                                                      std::vector<std::string> levels = {}) {
    if (!sample.has_groups())
        throw InputError("conditional DR estimator needs a group column");
    if (spec.groups == GroupTerms::none)
        spec.groups = GroupTerms::interact;
    std::vector<std::optional<std::string>> wanted;
    for (const auto& g : groups) {
        if (sample.group_count(g) == 0)
            throw InputError("group '" + g + "' does not occur in the sample");
        wanted.emplace_back(g);
    }
    return detail::dr_curves(sample, spec, wanted, std::move(levels), tau, grid, opt);
}

inline CurveEstimate urmc_dr_conditional(const Sample& sample, const DRSpec& spec, const std::string& group,
                                         double tau, std::span<const double> grid, const DROptions& opt = {}) {
    return urmc_dr_conditional(sample, spec, std::vector<std::string>{group}, tau, grid, opt).front();
}

} // namespace urmc
