#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "smf/conditional.hpp"
#include "smf/diagnostics.hpp"
#include "smf/errors.hpp"
#include "smf/estimate.hpp"
#include "smf/io.hpp"
#include "smf/simulate.hpp"
#include "smf/synthetic.hpp"

namespace smf::cli {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

struct Context {
    std::string command;
    json cfg;
    fs::path base;
    std::uint64_t seed = 0;
    fs::path out;
    std::size_t grid_cap = kDefaultGridCap;
    std::size_t threads = 1;
    std::string hash;
    std::ostream* log = nullptr;

    /// One-line JSON comment for output files.
    std::string header(const json& extra = json::object()) const {
        json h = {{"command", command}, {"config_hash", hash}, {"seed", seed}};
        for (auto it = extra.begin(); it != extra.end(); ++it) h[it.key()] = it.value();
        return h.dump();
    }

    fs::path resolve(const std::string& p) const {
        const fs::path path(p);
        return path.is_absolute() ? path : base / path;
    }
};

std::string join(const std::string& where, const std::string& key) { return where.empty() ? key : where + "." + key; }

const json& need(const json& j, const std::string& key, const std::string& where) {
    if (!j.is_object() || !j.contains(key)) throw UsageError("missing config field '" + join(where, key) + "'");
    return j.at(key);
}

template <typename T>
T as(const json& v, const std::string& name) {
    try {
        return v.get<T>();
    } catch (const json::exception&) {
        throw UsageError("config field '" + name + "' has the wrong type");
    }
}

template <typename T>
T get(const json& j, const std::string& key, const std::string& where) {
    return as<T>(need(j, key, where), join(where, key));
}

template <typename T>
T get_or(const json& j, const std::string& key, const std::string& where, T fallback) {
    if (!j.is_object() || !j.contains(key)) return fallback;
    return as<T>(j.at(key), join(where, key));
}

const json& section(const json& cfg, const std::string& key) {
    static const json empty = json::object();
    if (!cfg.contains(key)) return empty;
    if (!cfg.at(key).is_object()) throw UsageError("config field '" + key + "' must be an object");
    return cfg.at(key);
}

CovModel parse_cov(const json& cfg) {
    const json& c = need(cfg, "covariance", "");
    const CovKind kind = cov_kind_from_string(get<std::string>(c, "kind", "covariance"));
    const double shape = kind == CovKind::PoweredExponential ? get_or(c, "shape", "covariance", 1.0)
                                                            : get<double>(c, "shape", "covariance");
    return CovModel(kind, get<double>(c, "range", "covariance"), shape, get_or(c, "nugget", "covariance", 0.0),
                    get<double>(c, "sill", "covariance"));
}

MeanModel parse_mean(const json& cfg) {
    const json& m = section(cfg, "mean");
    return {get_or(m, "intercept", "mean", 0.0), get_or(m, "drift", "mean", std::vector<double>{})};
}

GammaMixture parse_mixture(const json& cfg, const Context& ctx) {
    const json& m = need(cfg, "mixture", "");
    if (m.is_string()) {
        const auto name = m.get<std::string>();
        if (name == "gaussian") return GammaMixture::near_constant();
        if (name == "reference") return reference_field_mixture();
        throw UsageError("config field 'mixture' must be \"gaussian\", \"reference\" or an object");
    }
    GammaMixture raw = [&] {
        if (m.contains("file")) return read_mixture_csv(ctx.resolve(get<std::string>(m, "file", "mixture")));
        std::vector<GammaComponent> comps;
        for (const auto& c : need(m, "components", "mixture"))
            comps.push_back({get<double>(c, "weight", "mixture.components"), get<double>(c, "shape", "mixture.components"),
                             get<double>(c, "scale", "mixture.components")});
        return GammaMixture(std::move(comps), MeanPolicy::AllowUnnormalized);
    }();
    if (get_or(m, "normalize", "mixture", false)) return raw.normalized();
    return GammaMixture(std::vector<GammaComponent>(raw.components().begin(), raw.components().end()));
}

struct Geometry {
    SiteSet sites;
    CovariateTable covariates;
};

Geometry parse_sites(const json& cfg, const Context& ctx) {
    if (cfg.contains("grid")) {
        const json& g = cfg.at("grid");
        GridSpec spec;
        spec.nx = get<std::size_t>(g, "nx", "grid");
        spec.ny = get<std::size_t>(g, "ny", "grid");
        spec.spacing = get_or(g, "spacing", "grid", 1.0);
        const auto origin = get_or(g, "origin", "grid", std::vector<double>{0.0, 0.0});
        if (origin.size() != 2) throw UsageError("config field 'grid.origin' must have two entries");
        spec.origin = {origin[0], origin[1]};
        return {grid_spec_to_sites(spec, ctx.grid_cap), CovariateTable(0, 0)};
    }
    if (cfg.contains("sites")) {
        SitesFile f = read_sites_csv(ctx.resolve(get<std::string>(cfg, "sites", "")));
        if (f.sites.size() > ctx.grid_cap)
            throw SizeError(std::to_string(f.sites.size()) + " sites exceed the cap of " + std::to_string(ctx.grid_cap) +
                            " (raise it with --grid-cap)");
        return {std::move(f.sites), std::move(f.covariates)};
    }
    throw UsageError("missing config field 'grid' or 'sites'");
}

EstimationConfig parse_estimation(const json& cfg, const Context& ctx) {
    const json& e = section(cfg, "estimation");
    EstimationConfig ec;
    ec.K = get_or(e, "K", "estimation", ec.K);
    ec.S = get_or(e, "S", "estimation", ec.S);
    ec.optimizer.restarts = get_or(e, "restarts", "estimation", ec.optimizer.restarts);
    ec.optimizer.max_iters = get_or(e, "max_iters", "estimation", ec.optimizer.max_iters);
    ec.optimizer.tol = get_or(e, "tol", "estimation", ec.optimizer.tol);
    ec.cov_kind = cov_kind_from_string(get_or<std::string>(e, "cov_kind", "estimation", "powered_exponential"));
    ec.seed = ctx.seed;
    ec.threads = ctx.threads;
    return ec;
}

McmcConfig parse_mcmc(const json& j, const Context& ctx) {
    const json& m = section(j, "mcmc");
    McmcConfig mc;
    mc.burn_in = get_or(m, "burn_in", "mcmc", mc.burn_in);
    mc.proposal_sd = get_or(m, "proposal_sd", "mcmc", mc.proposal_sd);
    mc.thin = get_or(m, "thin", "mcmc", mc.thin);
    mc.initial = get_or(m, "initial", "mcmc", mc.initial);
    mc.seed = ctx.seed;
    return mc;
}

/// Columns x, y, value and optional covariates.
struct Observations {
    SiteSet sites;
    Eigen::VectorXd values;
    CovariateTable covariates;
};

Observations read_observations(const fs::path& path) {
    const CsvTable t = read_csv(path);
    const auto ix = t.column("x"), iy = t.column("y"), iv = t.column("value");
    if (ix < 0 || iy < 0 || iv < 0) throw InputError(path.string() + ": observations need columns x, y, value");
    if (t.data.rows() == 0) throw InputError(path.string() + ": no observations");
    std::vector<Point2> pts;
    for (Eigen::Index r = 0; r < t.data.rows(); ++r) pts.push_back({t.data(r, ix), t.data(r, iy)});
    std::vector<Eigen::Index> extra;
    for (Eigen::Index c = 0; c < t.data.cols(); ++c)
        if (c != ix && c != iy && c != iv) extra.push_back(c);
    CovariateTable cov(t.data.rows(), static_cast<Eigen::Index>(extra.size()));
    for (std::size_t k = 0; k < extra.size(); ++k) cov.col(static_cast<Eigen::Index>(k)) = t.data.col(extra[k]);
    return {SiteSet(std::move(pts)), t.data.col(iv), std::move(cov)};
}

SampleMatrix read_data(const fs::path& path) {
    if (path.extension() == ".smx1") return SampleMatrix(read_smx1(path), FieldKind::Observed);
    return read_sample_matrix_csv(path, FieldKind::Observed);
}

Eigen::MatrixXd sites_matrix(const SiteSet& s) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(s.size()), 2);
    for (std::size_t i = 0; i < s.size(); ++i) m.row(static_cast<Eigen::Index>(i)) << s[i].x, s[i].y;
    return m;
}

void ensure_out(const Context& ctx) {
    std::error_code ec;
    fs::create_directories(ctx.out, ec);
    if (ec) throw InputError("cannot create output directory " + ctx.out.string() + ": " + ec.message());
}

std::vector<double> parse_grid(const json& j, const std::string& name) {
    if (j.is_array()) return as<std::vector<double>>(j, name);
    const double from = get<double>(j, "from", name), to = get<double>(j, "to", name);
    const auto steps = get<std::size_t>(j, "steps", name);
    if (steps < 2) throw UsageError("config field '" + name + ".steps' must be >= 2");
    std::vector<double> g(steps);
    for (std::size_t i = 0; i < steps; ++i)
        g[i] = from + (to - from) * static_cast<double>(i) / static_cast<double>(steps - 1);
    return g;
}

// ---------------------------------------------------------------- commands

int cmd_simulate(const Context& ctx) {
    const std::size_t n = get<std::size_t>(ctx.cfg, "n", "");
    if (n < 1) throw UsageError("config field 'n' must be >= 1");
    const Geometry geo = parse_sites(ctx.cfg, ctx);
    const CovModel cov = parse_cov(ctx.cfg);
    const GammaMixture mix = parse_mixture(ctx.cfg, ctx);
    const Eigen::VectorXd mu = mean_vector(parse_mean(ctx.cfg), geo.sites, geo.covariates);
    const bool gaussian_mix = ctx.cfg.at("mixture").is_string() && ctx.cfg.at("mixture") == "gaussian";
    const FieldKind kind =
        field_kind_from_string(get_or<std::string>(ctx.cfg, "field", "", gaussian_mix ? "gaussian" : "scalemix"));
    if (kind == FieldKind::Observed) throw UsageError("config field 'field' must be gaussian or scalemix");

    const DependenceSpec spec(geo.sites, cov, mix, mu);
    const SampleMatrix sm = kind == FieldKind::Gaussian ? sample_gaussian(spec, n, ctx.seed, ctx.threads)
                                                         : sample_field(spec, n, ctx.seed, ctx.threads);
    ensure_out(ctx);
    const std::string header = ctx.header({{"kind", std::string(to_string(kind))}});
    const auto format = get_or<std::string>(ctx.cfg, "format", "", "csv");
    if (format == "smx1") {
        write_smx1(ctx.out / "samples.smx1", sm.values());
        if (sm.v_draws()) write_csv(ctx.out / "v.csv", header, {"v"}, *sm.v_draws());
    } else if (format == "csv") {
        write_sample_matrix_csv(ctx.out / "samples.csv", header, sm);
    } else {
        throw UsageError("config field 'format' must be csv or smx1");
    }
    write_csv(ctx.out / "sites.csv", header, {"x", "y"}, sites_matrix(geo.sites));

    const Eigen::MatrixXd& x = sm.values();
    const double mean = x.mean();
    const double sd = std::sqrt((x.array() - mean).square().sum() / std::max<double>(1.0, static_cast<double>(x.size() - 1)));
    auto& o = *ctx.log;
    o << "simulated " << sm.rows() << " x " << sm.cols() << " " << to_string(kind) << " field\n";
    o << "mean " << mean << " sd " << sd << " min " << x.minCoeff() << " max " << x.maxCoeff() << "\n";
    if (sm.v_draws()) o << "mean v " << sm.v_draws()->mean() << "\n";
    return kOk;
}

int cmd_estimate(const Context& ctx) {
    const SampleMatrix data = read_data(ctx.resolve(get<std::string>(ctx.cfg, "data", "")));
    const Geometry geo = parse_sites(ctx.cfg, ctx);
    if (static_cast<std::size_t>(data.cols()) != geo.sites.size())
        throw InputError("data has " + std::to_string(data.cols()) + " columns but there are " +
                         std::to_string(geo.sites.size()) + " sites");
    const EstimationConfig ec = parse_estimation(ctx.cfg, ctx);
    const EstimationResult res = estimate_all(data, geo.sites, ec);

    ensure_out(ctx);
    const std::string header = ctx.header();
    const std::size_t K = res.m_hat.order();
    Eigen::MatrixXd mom(static_cast<Eigen::Index>(K), 3);
    for (std::size_t k = 1; k <= K; ++k)
        mom.row(static_cast<Eigen::Index>(k - 1)) << static_cast<double>(k), res.m_hat(k), res.c_hat(k);
    write_csv(ctx.out / "moments.csv", header, {"order", "m_hat", "c_hat"}, mom);
    write_mixture_csv(ctx.out / "mixture.csv", header, res.mix);

    json j;
    j["config_hash"] = ctx.hash;
    j["seed"] = ctx.seed;
    j["covariance"] = {{"kind", std::string(to_string(res.cov.kind()))}, {"range", res.cov.range()},
                       {"shape", res.cov.shape()}, {"nugget", res.cov.nugget()}, {"sill", res.cov.sill()}};
    j["cov_log_likelihood"] = res.cov_log_likelihood;
    j["r2_scale"] = res.r2_scale;
    j["residual"] = res.residual;
    j["m_hat"] = std::vector<double>(res.m_hat.values().begin(), res.m_hat.values().end());
    j["c_hat"] = std::vector<double>(res.c_hat.values().begin(), res.c_hat.values().end());
    json comps = json::array();
    for (const auto& c : res.mix.components())
        comps.push_back({{"weight", c.weight}, {"shape", c.shape}, {"scale", c.scale}});
    j["mixture"] = {{"components", comps}};
    j["diagnostics"] = res.diagnostics;
    std::ofstream(ctx.out / "estimate.json") << j.dump(2) << "\n";

    auto& o = *ctx.log;
    o << "covariance " << to_string(res.cov.kind()) << " range " << res.cov.range() << " shape " << res.cov.shape()
      << " nugget " << res.cov.nugget() << " sill " << res.cov.sill() << "\n";
    for (std::size_t k = 1; k <= K; ++k) o << "m" << k << " " << res.m_hat(k) << "  c" << k << " " << res.c_hat(k) << "\n";
    o << "mixture residual " << res.residual << "\n";
    return kOk;
}

int cmd_interpolate(const Context& ctx) {
    const json& ic = need(ctx.cfg, "interpolate", "");
    const Observations obs = read_observations(ctx.resolve(get<std::string>(ic, "observations", "interpolate")));
    const auto target = get<std::vector<double>>(ic, "target", "interpolate");
    if (target.size() != 2) throw UsageError("config field 'interpolate.target' must be [x, y]");
    std::vector<double> grid = parse_grid(need(ic, "a", "interpolate"), "interpolate.a");
    std::sort(grid.begin(), grid.end());

    const CovModel cov = parse_cov(ctx.cfg);
    const GammaMixture mix = parse_mixture(ctx.cfg, ctx);
    const MeanModel mean = parse_mean(ctx.cfg);
    const Eigen::VectorXd mu = mean_vector(mean, obs.sites, obs.covariates);
    const SiteSet tsite({{target[0], target[1]}});
    CovariateTable tcov(1, static_cast<Eigen::Index>(mean.drift_coeffs.size()));
    if (tcov.cols() > 0) {
        const auto tc = get<std::vector<double>>(ic, "target_covariates", "interpolate");
        if (tc.size() != mean.drift_coeffs.size()) throw UsageError("interpolate.target_covariates has the wrong length");
        for (std::size_t k = 0; k < tc.size(); ++k) tcov(0, static_cast<Eigen::Index>(k)) = tc[k];
    }
    const DependenceSpec spec(obs.sites, cov, mix, mu);
    std::vector<std::size_t> idx(obs.sites.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    const ConditioningSet cond{idx, obs.values, tsite, mean_vector(mean, tsite, tcov),
                               get_or(ic, "allow_coincident", "interpolate", false)};
    const GaussianConditional g = gaussian_conditional(spec, cond);
    const double m = g.mean(0), s = std::sqrt(g.cov(0, 0));

    Eigen::MatrixXd table(static_cast<Eigen::Index>(grid.size()), 5);
    double prev = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const SaddleResult sr = saddlepoint_cdf(spec, cond, grid[i]);
        if (i > 0 && sr.probability < prev - 1e-6)
            throw SolverError("saddlepoint CDF is not monotone at a = " + format_double(grid[i]), "");
        prev = sr.probability;
        table.row(static_cast<Eigen::Index>(i)) << grid[i], sr.probability, 0.5 * std::erfc(-(grid[i] - m) / (s * std::sqrt(2.0))),
            sr.r, sr.near_mean ? 1.0 : 0.0;
    }
    ensure_out(ctx);
    write_csv(ctx.out / "cdf.csv", ctx.header({{"kriging_mean", m}, {"kriging_sd", s}}),
              {"a", "saddlepoint", "gaussian", "r", "near_mean"}, table);
    *ctx.log << "interpolated " << grid.size() << " thresholds; kriging mean " << m << " sd " << s << "\n";
    return kOk;
}

int cmd_condsim(const Context& ctx) {
    const json& cc = need(ctx.cfg, "condsim", "");
    const Observations obs = read_observations(ctx.resolve(get<std::string>(cc, "observations", "condsim")));
    const SitesFile targets = read_sites_csv(ctx.resolve(get<std::string>(cc, "targets", "condsim")), true);
    const auto B = get<std::size_t>(cc, "B", "condsim");
    const CovModel cov = parse_cov(ctx.cfg);
    const GammaMixture mix = parse_mixture(ctx.cfg, ctx);
    const MeanModel mean = parse_mean(ctx.cfg);
    const DependenceSpec spec(obs.sites, cov, mix, mean_vector(mean, obs.sites, obs.covariates));
    std::vector<std::size_t> idx(obs.sites.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    const ConditioningSet cond{idx, obs.values, targets.sites, mean_vector(mean, targets.sites, targets.covariates),
                               get_or(cc, "allow_coincident", "condsim", false)};
    const McmcConfig mc = parse_mcmc(cc, ctx);
    const CondSimResult res = conditional_simulate(spec, cond, B, mc, ctx.seed);

    ensure_out(ctx);
    const std::string header =
        ctx.header({{"acceptance_rate", res.chain.acceptance_rate}, {"ess", res.chain.ess}, {"B", B}});
    write_sample_matrix_csv(ctx.out / "ensemble.csv", header, res.ensemble);
    Eigen::MatrixXd chain(static_cast<Eigen::Index>(res.chain.samples.size()), 2);
    for (std::size_t i = 0; i < res.chain.samples.size(); ++i)
        chain.row(static_cast<Eigen::Index>(i)) << static_cast<double>(i + 1), res.chain.samples[i];
    write_csv(ctx.out / "v_chain.csv", header, {"iteration", "v"}, chain);
    auto& o = *ctx.log;
    o << "conditional ensemble " << B << " x " << targets.sites.size() << "; acceptance " << res.chain.acceptance_rate
      << " ess " << res.chain.ess << "\n";
    if (res.chain.pathological) o << "warning: effective sample size below 10\n";
    return kOk;
}

int cmd_reproduce_synthetic(const Context& ctx) {
    const json& sc = section(ctx.cfg, "synthetic");
    SyntheticConfig cfg;
    cfg.grid.nx = get_or(sc, "nx", "synthetic", cfg.grid.nx);
    cfg.grid.ny = get_or(sc, "ny", "synthetic", cfg.grid.ny);
    cfg.grid.spacing = get_or(sc, "spacing", "synthetic", cfg.grid.spacing);
    cfg.grid_cap = ctx.grid_cap;
    cfg.n = get_or(sc, "n", "synthetic", cfg.n);
    cfg.stations = get_or(sc, "stations", "synthetic", cfg.stations);
    cfg.layout_seed = get_or(sc, "layout_seed", "synthetic", cfg.layout_seed);
    cfg.range = get_or(sc, "range", "synthetic", cfg.range);
    cfg.thresholds = get_or(sc, "thresholds", "synthetic", cfg.thresholds);
    cfg.sum_probs = get_or(sc, "sum_probs", "synthetic", cfg.sum_probs);
    cfg.cond_probs = get_or(sc, "cond_probs", "synthetic", cfg.cond_probs);
    cfg.scalings = get_or(sc, "scalings", "synthetic", cfg.scalings);
    cfg.cond_counts = get_or(sc, "cond_counts", "synthetic", cfg.cond_counts);
    cfg.estimation = parse_estimation(ctx.cfg, ctx);
    cfg.seed = ctx.seed;
    cfg.threads = ctx.threads;
    const SyntheticReport rep = run_synthetic(cfg);

    ensure_out(ctx);
    const std::string header = ctx.header({{"nx", cfg.grid.nx}, {"ny", cfg.grid.ny}, {"n", cfg.n},
                                           {"layout_seed", cfg.layout_seed}, {"quantiles", "nearest-rank"}});
    const auto P = static_cast<Eigen::Index>(cfg.sum_probs.size());
    Eigen::MatrixXd sums(P, 6);
    for (Eigen::Index i = 0; i < P; ++i) {
        const auto u = static_cast<std::size_t>(i);
        sums.row(i) << cfg.sum_probs[u], rep.sums[0].values[u], rep.sums[1].values[u],
            rep.sums[1].relative_increase[u], rep.sums[2].values[u], rep.sums[2].relative_increase[u];
    }
    write_csv(ctx.out / "sums_quantiles.csv", header,
              {"prob", "gauss", "scalemix", "scalemix_pct", "scalemix_qq", "scalemix_qq_pct"}, sums);

    Eigen::MatrixXd counts(static_cast<Eigen::Index>(cfg.n * rep.thresholds.size()), 5);
    Eigen::Index r = 0;
    for (std::size_t t = 0; t < rep.thresholds.size(); ++t)
        for (Eigen::Index i = 0; i < rep.counts[t].rows(); ++i, ++r)
            counts.row(r) << rep.thresholds[t], static_cast<double>(i + 1), rep.counts[t](i, 0), rep.counts[t](i, 1),
                rep.counts[t](i, 2);
    write_csv(ctx.out / "threshold_counts.csv", header, {"threshold", "realization", "gauss", "scalemix", "scalemix_qq"},
              counts);

    const std::size_t K = rep.m_hat[0].order();
    Eigen::MatrixXd mom(static_cast<Eigen::Index>(K), 7);
    for (std::size_t k = 1; k <= K; ++k)
        mom.row(static_cast<Eigen::Index>(k - 1)) << static_cast<double>(k), rep.m_hat[0](k), rep.m_hat[1](k),
            rep.m_hat[2](k), rep.c_hat[0](k), rep.c_hat[1](k), rep.c_hat[2](k);
    write_csv(ctx.out / "moments.csv", header,
              {"order", "m_gauss", "m_scalemix", "m_scalemix_qq", "c_gauss", "c_scalemix", "c_scalemix_qq"}, mom);

    Eigen::MatrixXd cq(static_cast<Eigen::Index>(rep.conditional.size()), 5);
    for (std::size_t i = 0; i < rep.conditional.size(); ++i) {
        const auto& c = rep.conditional[i];
        cq.row(static_cast<Eigen::Index>(i)) << c.scaling, static_cast<double>(c.count), c.prob, c.gaussian, c.scalemix;
    }
    write_csv(ctx.out / "conditional_quantiles.csv", header, {"scaling", "count", "prob", "gaussian", "scalemix"}, cq);

    Eigen::MatrixXd st(static_cast<Eigen::Index>(rep.stations.size()), 4);
    const SiteSet grid = grid_spec_to_sites(cfg.grid, cfg.grid_cap);
    for (std::size_t i = 0; i < rep.stations.size(); ++i)
        st.row(static_cast<Eigen::Index>(i)) << static_cast<double>(i + 1), static_cast<double>(rep.stations[i]),
            grid[rep.stations[i]].x, grid[rep.stations[i]].y;
    write_csv(ctx.out / "stations.csv", header, {"station", "grid_index", "x", "y"}, st);

    auto& o = *ctx.log;
    o << "sum of positive values, quantiles (gauss / scalemix / scalemix_qq):\n";
    for (Eigen::Index i = 0; i < P; ++i)
        o << "  " << sums(i, 0) << ": " << sums(i, 1) << " / " << sums(i, 2) << " (" << std::showpos << sums(i, 3)
          << "%) / " << std::noshowpos << sums(i, 4) << " (" << std::showpos << sums(i, 5) << "%)" << std::noshowpos
          << "\n";
    o << "estimated m2 (gauss / scalemix / scalemix_qq): " << rep.m_hat[0](2) << " / " << rep.m_hat[1](2) << " / "
      << rep.m_hat[2](2) << "\n";
    for (const auto& d : rep.diagnostics) o << d << "\n";
    return kOk;
}

int cmd_diagnose(const Context& ctx) {
    const json& dc = need(ctx.cfg, "diagnose", "");
    const SampleMatrix data = read_data(ctx.resolve(get<std::string>(dc, "data", "diagnose")));
    std::optional<SampleMatrix> compare;
    if (dc.contains("compare")) compare = read_data(ctx.resolve(get<std::string>(dc, "compare", "diagnose")));
    const auto thresholds = get_or(dc, "thresholds", "diagnose", std::vector<double>{1.28, 2.5});
    const double sum_threshold = get_or(dc, "sum_threshold", "diagnose", 0.0);
    const auto probs = get_or(dc, "probs", "diagnose", std::vector<double>{0.8, 0.9, 0.95, 0.99, 0.995, 0.999, 1.0});
    const auto b_list = get_or(dc, "b", "diagnose", std::vector<double>{0.6, 0.7, 0.8, 0.9, 0.95, 0.99, 0.999});
    const auto reps = get_or<std::size_t>(dc, "bootstrap_reps", "diagnose", 0);
    std::vector<std::size_t> indices;
    for (auto i : get_or(dc, "indices", "diagnose", std::vector<std::size_t>{})) {
        if (i < 1) throw UsageError("config field 'diagnose.indices' is 1-based");
        indices.push_back(i - 1);
    }
    ensure_out(ctx);
    const std::string header = ctx.header({{"quantiles", "nearest-rank"}, {"bootstrap_reps", reps}});
    const Eigen::MatrixXd& x = data.values();

    Eigen::MatrixXd counts(x.rows(), static_cast<Eigen::Index>(thresholds.size()) + 1);
    std::vector<std::string> cols{"realization"};
    counts.col(0) = Eigen::VectorXd::LinSpaced(x.rows(), 1.0, static_cast<double>(x.rows()));
    for (std::size_t t = 0; t < thresholds.size(); ++t) {
        counts.col(static_cast<Eigen::Index>(t) + 1) = threshold_counts(x, thresholds[t]);
        cols.push_back("count_gt_" + format_double(thresholds[t]));
    }
    write_csv(ctx.out / "threshold_counts.csv", header, cols, counts);

    const Eigen::VectorXd sums = exceedance_sums(x, sum_threshold);
    std::optional<QuantileTable> base;
    if (compare) base = quantile_table(exceedance_sums(compare->values(), sum_threshold), probs);
    const QuantileTable qt = quantile_table(sums, probs, base);
    Eigen::MatrixXd q(static_cast<Eigen::Index>(probs.size()), base ? 4 : 2);
    for (std::size_t i = 0; i < probs.size(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        q(r, 0) = probs[i];
        q(r, 1) = qt.values[i];
        if (base) {
            q(r, 2) = base->values[i];
            q(r, 3) = qt.relative_increase[i];
        }
    }
    write_csv(ctx.out / "sum_quantiles.csv", header,
              base ? std::vector<std::string>{"prob", "value", "compare", "pct_increase"}
                   : std::vector<std::string>{"prob", "value"},
              q);

    if (!indices.empty()) {
        std::vector<std::string> warnings;
        std::vector<std::string> ccols{"b", "entropy"};
        Eigen::MatrixXd ct(static_cast<Eigen::Index>(b_list.size()), 2);
        for (std::size_t i = 0; i < b_list.size(); ++i)
            ct.row(static_cast<Eigen::Index>(i)) << b_list[i], congregation_entropy(x, indices, b_list[i], &warnings);
        if (compare) {
            const DiagnosticsReport ratio = congregation_ratio(x, compare->values(), indices, b_list);
            Eigen::MatrixXd ext(ct.rows(), 5);
            for (std::size_t i = 0; i < b_list.size(); ++i)
                ext.row(static_cast<Eigen::Index>(i)) << ct(static_cast<Eigen::Index>(i), 0),
                    ct(static_cast<Eigen::Index>(i), 1),
                    congregation_entropy(compare->values(), indices, b_list[i]), ratio.values[i],
                    ratio.flagged[i] ? 1.0 : 0.0;
            ct = ext;
            ccols.insert(ccols.end(), {"compare_entropy", "ratio", "zero_denominator"});
        }
        if (reps > 0) {
            Eigen::MatrixXd sub(x.rows(), static_cast<Eigen::Index>(indices.size()));
            for (std::size_t k = 0; k < indices.size(); ++k)
                sub.col(static_cast<Eigen::Index>(k)) = x.col(static_cast<Eigen::Index>(indices[k]));
            std::vector<std::size_t> all(indices.size());
            for (std::size_t k = 0; k < all.size(); ++k) all[k] = k;
            const auto stat = [&](const Eigen::MatrixXd& s) {
                Eigen::VectorXd h(static_cast<Eigen::Index>(b_list.size()));
                for (std::size_t i = 0; i < b_list.size(); ++i)
                    h(static_cast<Eigen::Index>(i)) = congregation_entropy(s, all, b_list[i]);
                return h;
            };
            BootstrapOptions bo;
            bo.reps = reps;
            bo.seed = ctx.seed;
            bo.threads = ctx.threads;
            const Band band = bootstrap_band(fit_gaussian(sub), static_cast<std::size_t>(x.rows()), stat, bo);
            Eigen::MatrixXd ext(ct.rows(), ct.cols() + 2);
            ext << ct, band.lower, band.upper;
            ct = ext;
            ccols.insert(ccols.end(), {"gaussian_lower", "gaussian_upper"});
        }
        write_csv(ctx.out / "congregation.csv", header, ccols, ct);
        for (const auto& w : warnings) *ctx.log << "warning: " << w << "\n";
    }
    *ctx.log << "diagnostics for " << x.rows() << " x " << x.cols() << " written to " << ctx.out.string() << "\n";
    return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Gaussian scale-mixture spatial fields", "smfield"};
    app.require_subcommand(1);
    std::string config_path, out_dir = ".";
    std::optional<std::uint64_t> seed;
    std::size_t grid_cap = kDefaultGridCap, threads = 1;
    app.add_option("--config", config_path, "run configuration (JSON)")->required();
    app.add_option("--seed", seed, "random seed (overrides the config)");
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--grid-cap", grid_cap, "maximum number of sites")->check(CLI::PositiveNumber);
    app.add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
    app.fallthrough();
    const std::vector<std::pair<std::string, int (*)(const Context&)>> commands{
        {"simulate", cmd_simulate},   {"estimate", cmd_estimate},
        {"interpolate", cmd_interpolate}, {"condsim", cmd_condsim},
        {"reproduce-synthetic", cmd_reproduce_synthetic}, {"diagnose", cmd_diagnose}};
    for (const auto& [name, fn] : commands) app.add_subcommand(name)->fallthrough();

    try {
        std::vector<std::string> rev(args.rbegin(), args.rend());
        app.parse(rev);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsage;
    }

    Context ctx;
    ctx.command = app.get_subcommands().front()->get_name();
    ctx.out = out_dir;
    ctx.grid_cap = grid_cap;
    ctx.threads = threads;
    ctx.log = &out;
    try {
        std::ifstream in(config_path);
        if (!in) throw InputError("cannot open config " + config_path);
        try {
            ctx.cfg = json::parse(in);
        } catch (const json::parse_error& e) {
            throw InputError(config_path + ": " + e.what());
        }
        if (!ctx.cfg.is_object()) throw InputError(config_path + ": top level must be an object");
        if (seed) ctx.cfg["seed"] = *seed;
        if (!ctx.cfg.contains("seed")) throw UsageError("missing config field 'seed' (or pass --seed)");
        ctx.seed = as<std::uint64_t>(ctx.cfg.at("seed"), "seed");
        ctx.base = fs::path(config_path).parent_path();
        ctx.hash = hex64(fnv1a64(ctx.cfg.dump()));
        for (const auto& [name, fn] : commands)
            if (name == ctx.command) return fn(ctx);
        return kUsage;
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << "\n";
        return kUsage;
    } catch (const InputError& e) {
        err << "input error: " << e.what() << "\n";
        return kInput;
    } catch (const SizeError& e) {
        err << "input error: " << e.what() << "\n";
        return kInput;
    } catch (const FactorizationError& e) {
        err << "numeric failure: " << e.what() << "\n";
        return kNumeric;
    } catch (const SolverError& e) {
        err << "numeric failure: " << e.what() << "\n";
        if (!e.trace().empty()) err << e.trace();
        return kNumeric;
    } catch (const DomainError& e) {
        err << "numeric failure: " << e.what() << "\n";
        return kNumeric;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kInput;
    }
}

}  // namespace smf::cli
