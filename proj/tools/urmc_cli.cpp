// urmc: estimate mobility curves, bootstrap bands and simulation metrics from the command line.
//
// Exit codes: 0 ok, 2 usage or input error, 3 estimation failure.

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "urmc/urmc.hpp"

using namespace urmc;

namespace {

constexpr int exit_input = 2;
constexpr int exit_estimation = 3;

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos)
        return {};
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(line);
    while (std::getline(is, cur, sep))
        out.push_back(trim(cur));
    if (!line.empty() && line.back() == sep)
        out.emplace_back();
    return out;
}

double parse_real(const std::string& text, const std::string& where) {
    if (text.empty())
        throw InputError(where + ": empty numeric field");
    char* end = nullptr;
    const double v = std::strtod(text.c_str(), &end);
    if (end != text.c_str() + text.size() || !std::isfinite(v))
        throw InputError(where + ": '" + text + "' is not a finite number");
    return v;
}

/// Reads parent_income, child_income and an optional group column; the header is required.
Sample read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw InputError("cannot open '" + path + "'");
    std::string line;
    std::size_t lineno = 0;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        ++lineno;
        if (lineno == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0)
            line.erase(0, 3);
        if (!trim(line).empty()) {
            header = split(line, ',');
            break;
        }
    }
    if (header.empty())
        throw InputError(path + ": missing header line");
    int ip = -1, ic = -1, ig = -1;
    for (std::size_t j = 0; j < header.size(); ++j) {
        if (header[j] == "parent_income")
            ip = static_cast<int>(j);
        else if (header[j] == "child_income")
            ic = static_cast<int>(j);
        else if (header[j] == "group")
            ig = static_cast<int>(j);
    }
    if (ip < 0 || ic < 0)
        throw InputError(path + ": line " + std::to_string(lineno) +
                         ": header must name parent_income and child_income columns");
    std::vector<double> parent, child;
    std::vector<std::string> group;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty())
            continue;
        const auto f = split(line, ',');
        const std::string where = "line " + std::to_string(lineno);
        if (f.size() != header.size())
            throw InputError(where + ": expected " + std::to_string(header.size()) + " fields, found " +
                             std::to_string(f.size()));
        parent.push_back(parse_real(f[static_cast<std::size_t>(ip)], where + ", column parent_income"));
        child.push_back(parse_real(f[static_cast<std::size_t>(ic)], where + ", column child_income"));
        if (ig >= 0) {
            if (f[static_cast<std::size_t>(ig)].empty())
                throw InputError(where + ": empty group label");
            group.push_back(f[static_cast<std::size_t>(ig)]);
        }
    }
    if (parent.empty())
        throw InputError(path + ": no data rows");
    if (ig >= 0)
        return Sample(std::move(parent), std::move(child), std::move(group));
    return Sample(std::move(parent), std::move(child));
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos)
        return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"')
            out += '"';
        out += c;
    }
    return out + "\"";
}

/// Writes through a temporary file in the target directory, then renames it into place.
void write_atomically(const std::string& path, const std::string& content) {
    if (path.empty() || path == "-") {
        std::cout << content;
        std::cout.flush();
        return;
    }
    const std::filesystem::path target(path);
    std::filesystem::path tmp = target;
    tmp += ".tmp." + std::to_string(std::random_device{}());
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out)
            throw InputError("cannot write '" + tmp.string() + "'");
        out << content;
        out.flush();
        if (!out)
            throw InputError("write to '" + tmp.string() + "' failed");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, target, ec);
    if (ec) {
        std::filesystem::remove(tmp);
        throw InputError("cannot move output into '" + path + "': " + ec.message());
    }
}

/// "default", "band", "lo:hi:step" or a comma-separated list of rank points.
std::vector<double> parse_grid(const std::string& spec, const std::vector<double>& fallback) {
    if (spec.empty())
        return fallback;
    if (spec == "default")
        return default_grid();
    if (spec == "band")
        return band_grid();
    std::vector<double> grid;
    if (spec.find(':') != std::string::npos) {
        const auto f = split(spec, ':');
        if (f.size() != 3)
            throw InputError("grid range must look like lo:hi:step");
        const double lo = parse_real(f[0], "grid"), hi = parse_real(f[1], "grid"), step = parse_real(f[2], "grid");
        if (!(step > 0.0) || hi < lo)
            throw InputError("grid range needs lo <= hi and a positive step");
        const auto count = static_cast<long>(std::floor((hi - lo) / step + 1e-9));
        for (long k = 0; k <= count; ++k)
            grid.push_back(std::round((lo + static_cast<double>(k) * step) * 1e12) / 1e12);
        return grid;
    }
    for (const auto& f : split(spec, ','))
        grid.push_back(parse_real(f, "grid"));
    return grid;
}

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& seed) {
    if (seed)
        return *seed;
    std::random_device rd;
    const std::uint64_t s = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
    std::cerr << "seed: " << s << '\n';
    return s;
}

struct EstimatorFlags {
    std::string estimator = "ebc";
    std::string m = "sqrt-n";
    std::string link = "logit";
    std::string design = "quadratic";
    double tau = 0.0;
    std::string grid;

    DRSpec dr_spec(GroupTerms groups = GroupTerms::none) const {
        return DRSpec{link == "probit" ? Link::probit : Link::logit, design == "linear" ? 1 : 2, groups};
    }

    std::size_t order(std::size_t n) const {
        if (m == "sqrt-n")
            return sqrt_order(n);
        if (m == "n")
            return n;
        const double v = parse_real(m, "--m");
        if (v < 1 || v != std::floor(v))
            throw InputError("--m must be a positive integer, sqrt-n or n");
        return static_cast<std::size_t>(v);
    }

    CurveProcedure procedure(const std::optional<std::string>& group) const {
        if (estimator == "beta")
            return [](const Sample& s, double t, std::span<const double> g) { return urmc_beta(s, t, g); };
        if (estimator == "ebc") {
            const EstimatorFlags self = *this;
            return [self](const Sample& s, double t, std::span<const double> g) {
                return urmc_ebc(s, std::min(self.order(s.size()), s.size()), t, g);
            };
        }
        const DRSpec spec = dr_spec();
        if (group)
            return [spec, group](const Sample& s, double t, std::span<const double> g) {
                return urmc_dr_conditional(s, spec, *group, t, g);
            };
        return [spec](const Sample& s, double t, std::span<const double> g) { return urmc_dr(s, spec, t, g); };
    }

    void add_to(CLI::App& cmd) {
        cmd.add_option("--estimator", estimator, "ebc, beta or dr")
            ->check(CLI::IsMember({"ebc", "beta", "dr"}))
            ->capture_default_str();
        cmd.add_option("--m", m, "Bernstein order for ebc: an integer, sqrt-n or n")->capture_default_str();
        cmd.add_option("--link", link, "link for dr")->check(CLI::IsMember({"logit", "probit"}))->capture_default_str();
        cmd.add_option("--design", design, "polynomial in parent income for dr")
            ->check(CLI::IsMember({"linear", "quadratic"}))
            ->capture_default_str();
        cmd.add_option("--tau", tau, "rank offset")->capture_default_str();
        cmd.add_option("--grid", grid, "default, band, lo:hi:step or a comma list");
    }
};

std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(10) << v;
    return os.str();
}

int run_estimate(const std::string& input, const EstimatorFlags& flags, const std::optional<std::string>& group,
                 const std::string& out) {
    if (group && flags.estimator != "dr")
        throw InputError("--group applies to the dr estimator only");
    const Sample s = read_csv(input);
    const auto grid = parse_grid(flags.grid, default_grid());
    validate_grid(flags.tau, grid);
    if (flags.estimator == "ebc" && flags.order(s.size()) > s.size())
        throw ParameterError("--m exceeds the sample size");
    const CurveEstimate c = flags.procedure(group)(s, flags.tau, grid);
    std::ostringstream os;
    os << "s,tau,estimate,estimator,n\n";
    const std::string label = csv_field(c.estimator.describe() + (group ? "[" + *group + "]" : ""));
    for (std::size_t k = 0; k < c.grid.size(); ++k)
        os << fmt(c.grid[k]) << ',' << fmt(c.tau) << ',' << fmt(c.values[k]) << ',' << label << ',' << c.n << '\n';
    write_atomically(out, os.str());
    for (const auto& w : c.warnings)
        std::cerr << "warning: " << w << '\n';
    if (c.flagged_points() > 0)
        std::cerr << "warning: " << c.flagged_points() << " grid points flagged (separation or degenerate threshold)\n";
    return 0;
}

int run_bands(const std::string& input, const EstimatorFlags& flags, const std::string& group_a,
              const std::string& group_b, std::size_t B, double alpha, const std::optional<std::uint64_t>& seed_opt,
              std::size_t threads, const std::string& out) {
    const Sample s = read_csv(input);
    const auto grid = trim_grid(parse_grid(flags.grid, band_grid()), flags.tau);
    validate_grid(flags.tau, grid);
    BandOptions opt;
    opt.B = B;
    opt.alpha = alpha;
    opt.seed = resolve_seed(seed_opt);
    opt.threads = threads;

    const bool difference = !group_a.empty() || !group_b.empty();
    BandResult band;
    if (difference) {
        if (group_a.empty() || group_b.empty())
            throw InputError("--group-a and --group-b must be given together");
        if (!s.has_groups())
            throw InputError("group flags need a group column in the input");
        band = difference_band(s, flags.dr_spec(GroupTerms::interact), group_a, group_b, flags.tau, grid, opt);
    } else {
        band = bootstrap_band(s, flags.procedure(std::nullopt), flags.tau, grid, opt);
    }

    std::ostringstream os;
    os << "s,tau,center,sd,pointwise_lo,pointwise_hi,uniform_lo,uniform_hi,retained\n";
    for (std::size_t k = 0; k < band.grid.size(); ++k)
        os << fmt(band.grid[k]) << ',' << fmt(band.tau) << ',' << fmt(band.center[k]) << ',' << fmt(band.sd[k]) << ','
           << fmt(band.pointwise_lo[k]) << ',' << fmt(band.pointwise_hi[k]) << ',' << fmt(band.uniform_lo[k]) << ','
           << fmt(band.uniform_hi[k]) << ',' << (band.retained[k] ? 1 : 0) << '\n';
    os << "# alpha=" << fmt(band.alpha) << " B=" << band.B << " critical_value=" << fmt(band.critical_value)
       << " z=" << fmt(band.z_value) << " dropped_points=" << band.dropped_points.size() << '\n';
    if (difference) {
        const auto rep = dominance_report(band);
        os << "# difference: " << group_a << " minus " << group_b << " (redraws=" << band.redraws << ")\n";
        os << "# dominance_set:";
        if (rep.intervals.empty())
            os << " none";
        for (const auto& [lo, hi] : rep.intervals)
            os << " [" << fmt(lo) << "," << fmt(hi) << "]";
        os << "\n# dominance_points=" << rep.dominance_set.size() << " violation=" << (rep.violation ? "yes" : "no")
           << '\n';
    }
    write_atomically(out, os.str());
    return 0;
}

struct SimulateFlags {
    std::string family = "gaussian";
    double tau_k = 0.5;
    std::size_t n = 200;
    std::size_t reps = 1000;
    double tau = 0.0;
    std::vector<std::string> estimators{"ebc-opt", "ebc-sqrt", "beta", "dr-logit-linear", "dr-logit-quadratic",
                                        "dr-probit-linear"};
    bool fast = false;
    std::string overlay;
    std::size_t overlay_reps = 5;
    std::string dr_quantile = "inverse-cdf";
};

int run_simulate(const SimulateFlags& f, const std::optional<std::uint64_t>& seed_opt, std::size_t threads,
                 const std::string& out) {
    ExperimentConfig cfg;
    const Family fam = f.family == "gaussian"  ? Family::gaussian
                       : f.family == "clayton" ? Family::clayton
                       : f.family == "gumbel"  ? Family::gumbel
                                               : Family::independence;
    cfg.model = fam == Family::independence ? CopulaModel::independence() : model_from_tau(fam, f.tau_k);
    cfg.n = f.n;
    cfg.reps = f.fast ? 200 : f.reps;
    cfg.tau = f.tau;
    cfg.threads = threads;
    cfg.dr_quantile = f.dr_quantile == "interpolated" ? QuantileRule::interpolated : QuantileRule::inverse_cdf;
    for (const auto& e : f.estimators)
        for (const auto& name : split(e, ','))
            if (!name.empty())
                cfg.estimators.push_back(EstimatorSpec::parse(name));
    cfg.grid = trim_grid(default_grid(), cfg.tau);
    cfg.seed = resolve_seed(seed_opt);
    cfg.validate();

    std::cout << std::fixed << std::setprecision(3) << "# family=" << to_string(fam)
              << " theta=" << cfg.model.theta() << " tau_k=" << kendall_tau(cfg.model) << " n=" << cfg.n
              << " reps=" << cfg.reps << " tau=" << cfg.tau << " seed=" << cfg.seed << '\n'
              << std::defaultfloat;

    if (!f.overlay.empty())
        cfg.keep_replications = std::min(f.overlay_reps, cfg.reps);
    const auto results = run_experiment(cfg);
    std::ostringstream os;
    os << "estimator,family,theta,n,reps,risb_x100,rimse_x100,failures\n";
    for (const auto& m : results)
        os << m.estimator << ',' << to_string(fam) << ',' << fmt(cfg.model.theta()) << ',' << cfg.n << ','
           << cfg.reps << ',' << fmt(m.risb) << ',' << fmt(m.rimse) << ',' << m.failures << '\n';
    write_atomically(out, os.str());

    if (!f.overlay.empty()) {
        std::ostringstream ov;
        ov << "s,value,series\n";
        for (const auto& row : overlay_rows(cfg, results))
            ov << fmt(row.s) << ',' << fmt(row.value) << ',' << csv_field(row.series) << '\n';
        write_atomically(f.overlay, ov.str());
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Upward rank mobility curves: estimation, bootstrap bands and Monte Carlo metrics"};
    app.require_subcommand(1);
    std::optional<std::uint64_t> seed;
    std::size_t threads = 0;
    std::string out;

    auto* est = app.add_subcommand("estimate", "estimate a mobility curve from a CSV file");
    std::string est_input;
    EstimatorFlags est_flags;
    std::string est_group;
    est->add_option("input", est_input, "CSV with parent_income, child_income[, group]")->required();
    est_flags.add_to(*est);
    est->add_option("--group", est_group, "conditional dr curve for this group (pooled ranks)");
    est->add_option("--out", out, "output path (stdout when omitted)");

    auto* bands = app.add_subcommand("bands", "bootstrap pointwise and uniform bands");
    std::string band_input, group_a, group_b;
    EstimatorFlags band_flags;
    std::size_t B = 500;
    double alpha = 0.05;
    band_flags.estimator = "dr";
    bands->add_option("input", band_input, "CSV with parent_income, child_income[, group]")->required();
    band_flags.add_to(*bands);
    bands->add_option("--B", B, "bootstrap replications")->capture_default_str();
    bands->add_option("--alpha", alpha, "one minus the confidence level")->capture_default_str();
    bands->add_option("--group-a", group_a, "difference band: first group");
    bands->add_option("--group-b", group_b, "difference band: second group");
    bands->add_option("--seed", seed, "RNG seed (drawn from entropy and printed when omitted)");
    bands->add_option("--threads", threads, "worker threads (0 = hardware)");
    bands->add_option("--out", out, "output path (stdout when omitted)");

    auto* sim = app.add_subcommand("simulate", "Monte Carlo RISB and RIMSE (x100) for copula designs");
    SimulateFlags sf;
    sim->add_option("--family", sf.family)
        ->check(CLI::IsMember({"gaussian", "clayton", "gumbel", "independence"}))
        ->capture_default_str();
    sim->add_option("--tau-k", sf.tau_k, "Kendall's tau used to calibrate theta")->capture_default_str();
    sim->add_option("--n", sf.n)->capture_default_str();
    sim->add_option("--reps", sf.reps)->capture_default_str();
    sim->add_option("--tau", sf.tau, "rank offset")->capture_default_str();
    sim->add_option("--estimators", sf.estimators,
                    "ebc-opt, ebc-sqrt, beta, ebc-<m>, dr-{logit|probit}-{linear|quadratic}")
        ->delimiter(',');
    sim->add_flag("--fast", sf.fast, "200 replications");
    sim->add_option("--overlay", sf.overlay, "also write long-format curve data for plotting");
    sim->add_option("--overlay-reps", sf.overlay_reps, "replication curves per estimator in the overlay")
        ->capture_default_str();
    sim->add_option("--dr-quantile", sf.dr_quantile, "quantile rule inside the dr estimators")
        ->check(CLI::IsMember({"inverse-cdf", "interpolated"}))
        ->capture_default_str();
    sim->add_option("--seed", seed, "RNG seed (drawn from entropy and printed when omitted)");
    sim->add_option("--threads", threads, "worker threads (0 = hardware)");
    sim->add_option("--out", out, "output path (stdout when omitted)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : exit_input;
    }

    try {
        if (*est)
            return run_estimate(est_input, est_flags,
                                est_group.empty() ? std::nullopt : std::optional<std::string>(est_group), out);
        if (*bands)
            return run_bands(band_input, band_flags, group_a, group_b, B, alpha, seed, threads, out);
        if (*sim)
            return run_simulate(sf, seed, threads, out);
    } catch (const EstimationError& e) {
        std::cerr << "estimation failed: " << e.what() << '\n';
        return exit_estimation;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_input;
    } catch (const std::domain_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_input;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_estimation;
    }
    return 0;
}
