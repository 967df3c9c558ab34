#include "smf/estimate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>

#include "parallel.hpp"
#include "smf/errors.hpp"
#include "smf/optimize.hpp"
#include "smf/random.hpp"

namespace smf {

void EstimationConfig::validate() const {
    if (K < 2 || K > 8) throw InputError("moment order K must lie in [2, 8]");
    if (S < 1 || S > 8) throw InputError("mixture size S must lie in [1, 8]");
    if (optimizer.restarts < 1) throw InputError("optimizer restarts must be >= 1");
    if (optimizer.max_iters < 1) throw InputError("optimizer max_iters must be >= 1");
    if (!(optimizer.tol > 0.0)) throw InputError("optimizer tol must be positive");
}

SampleMatrix standardize(const SampleMatrix& data) {
    if (data.rows() < 2) throw InputError("standardize needs at least two realizations");
    Eigen::MatrixXd x = data.values();
    x.rowwise() -= x.colwise().mean();
    return SampleMatrix(std::move(x), data.kind(), data.v_draws());
}

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }
double logit(double p) { return std::log(p / (1.0 - p)); }

struct CovParamMap {
    CovKind kind;
    double var_scale;
    double log_range_lo, log_range_hi;
    double shape_lo, shape_hi;

    CovModel to_model(std::span<const double> z) const {
        const double range = std::exp(std::clamp(z[0], log_range_lo, log_range_hi));
        const double shape = shape_lo + (shape_hi - shape_lo) * sigmoid(z[1]);
        const double nugget = z[2] < -40.0 ? 0.0 : var_scale * std::exp(z[2]);
        const double sill = var_scale * std::exp(std::clamp(z[3], -30.0, 30.0));
        return CovModel(kind, range, shape, nugget, sill);
    }

    bool in_box(std::span<const double> z) const {
        return z[0] >= log_range_lo && z[0] <= log_range_hi && z[2] <= 10.0 && z[3] >= -30.0 && z[3] <= 10.0 &&
               std::abs(z[1]) <= 30.0;
    }
};

double gaussian_loglik(const CovModel& model, const SiteSet& sites, const Eigen::MatrixXd& scatter,
                       double n) {
    const Eigen::MatrixXd sigma = cov_matrix(model, sites);
    Eigen::LLT<Eigen::MatrixXd> llt(sigma);
    if (llt.info() != Eigen::Success) return -std::numeric_limits<double>::infinity();
    const double log_det = 2.0 * Eigen::MatrixXd(llt.matrixL()).diagonal().array().log().sum();
    const double trace = llt.solve(scatter).trace();
    const double J = static_cast<double>(sites.size());
    return -0.5 * (n * (log_det + J * std::log(2.0 * std::numbers::pi)) + trace);
}

}  // namespace

CovFit fit_cov_params(const SampleMatrix& data, const SiteSet& sites, CovKind kind, const OptimizerConfig& opt,
                      std::uint64_t seed) {
    const Eigen::Index J = data.cols();
    if (static_cast<std::size_t>(J) != sites.size())
        throw InputError("data has " + std::to_string(J) + " columns but there are " +
                         std::to_string(sites.size()) + " sites");
    const SampleMatrix centred = standardize(data);
    const Eigen::MatrixXd& x = centred.values();
    const double n = static_cast<double>(x.rows());
    const Eigen::VectorXd col_var = x.colwise().squaredNorm().transpose() / (n - 1.0);
    for (Eigen::Index j = 0; j < J; ++j)
        if (!(col_var(j) > 0.0)) throw InputError("column " + std::to_string(j) + " has zero variance");

    CovFit fit{CovModel(kind, 1.0, 1.0, 0.0, 1.0), 0.0, 0, 0, {}};
    if (x.rows() <= J)
        fit.warnings.push_back("n <= J: the covariance fit is poorly determined");

    double dmin = std::numeric_limits<double>::infinity(), dmax = 0.0;
    for (std::size_t i = 0; i < sites.size(); ++i)
        for (std::size_t j = i + 1; j < sites.size(); ++j) {
            const double d = distance(sites[i], sites[j]);
            if (d > 0.0) dmin = std::min(dmin, d);
            dmax = std::max(dmax, d);
        }
    if (!std::isfinite(dmin)) dmin = dmax = 1.0;

    const Eigen::MatrixXd scatter = x.transpose() * x;
    const double var_scale = col_var.mean();
    CovParamMap map{kind,
                    var_scale,
                    std::log(1e-3 * dmin),
                    std::log(1e3 * dmax),
                    0.05,
                    kind == CovKind::PoweredExponential ? 2.0 : 10.0};

    auto objective = [&](std::span<const double> z) {
        if (!map.in_box(z)) return std::numeric_limits<double>::infinity();
        try {
            return -gaussian_loglik(map.to_model(z), sites, scatter, n);
        } catch (const DomainError&) {
            return std::numeric_limits<double>::infinity();
        }
    };

    const std::size_t starts = static_cast<std::size_t>(opt.restarts);
    const double typical_shape = kind == CovKind::PoweredExponential ? 1.0 : 0.5;
    const double shape_z0 = logit((typical_shape - map.shape_lo) / (map.shape_hi - map.shape_lo));
    std::vector<OptimResult> results(starts);
    for (std::size_t s = 0; s < starts; ++s) {
        std::vector<double> z0;
        if (s == 0) {
            z0 = {std::log(0.25 * dmax), shape_z0, std::log(1e-3), 0.0};
        } else {
            Rng rng = make_rng(seed, Stream::Optimizer, s);
            std::uniform_real_distribution<double> u(0.0, 1.0);
            z0 = {std::log(dmin) + u(rng) * (std::log(dmax) - std::log(dmin)), shape_z0 + 2.0 * (u(rng) - 0.5),
                  std::log(1e-3 + 0.5 * u(rng)), std::log(0.5 + u(rng))};
        }
        NelderMeadOptions nm;
        nm.max_evals = opt.max_iters;
        nm.ftol_rel = opt.tol;
        nm.ftol_abs = 1e-9;
        nm.xtol = 1e-7;
        nm.initial_step = 0.5;
        results[s] = nelder_mead(objective, z0, nm);
    }
    std::size_t best = 0;
    int evals = 0;
    for (std::size_t s = 0; s < starts; ++s) {
        evals += results[s].evals;
        if (results[s].f < results[best].f) best = s;
    }
    if (!std::isfinite(results[best].f)) {
        std::ostringstream trace;
        for (std::size_t s = 0; s < starts; ++s)
            trace << "start " << s << ": f=" << results[s].f << " evals=" << results[s].evals << "\n";
        throw SolverError("covariance likelihood optimisation found no finite point", trace.str());
    }
    fit.model = map.to_model(results[best].x);
    fit.log_likelihood = -results[best].f;
    fit.evaluations = evals;
    fit.best_start = best;
    if (!results[best].converged) fit.warnings.push_back("best covariance start hit the evaluation limit");
    return fit;
}

Eigen::VectorXd mahalanobis_r2(const Eigen::MatrixXd& data, const CholeskyFactor& chol) {
    if (static_cast<std::size_t>(data.cols()) != chol.size())
        throw InputError("data width does not match the covariance dimension");
    const Eigen::MatrixXd y = chol.lower().triangularView<Eigen::Lower>().solve(data.transpose());
    return y.colwise().squaredNorm().transpose();
}

Eigen::VectorXd mahalanobis_r2(const Eigen::MatrixXd& data, const Eigen::MatrixXd& sigma) {
    return mahalanobis_r2(data, CholeskyFactor(sigma));
}

MomentEstimate estimate_m(const Eigen::VectorXd& r2, std::size_t J, std::size_t K) {
    if (K < 1) throw InputError("moment order must be >= 1");
    if (J == 0) throw InputError("dimension J must be positive");
    if (r2.size() == 0) throw InputError("no r^2 samples");
    const double n = static_cast<double>(r2.size());
    const double half_j = 0.5 * static_cast<double>(J);
    auto normaliser = [&](std::size_t k) {
        return std::exp(std::lgamma(half_j) - static_cast<double>(k) * std::log(2.0) -
                        std::lgamma(static_cast<double>(k) + half_j));
    };
    std::vector<double> raw(K, 0.0);
    for (Eigen::Index i = 0; i < r2.size(); ++i) {
        double p = 1.0;
        for (std::size_t k = 0; k < K; ++k) {
            p *= r2(i);
            raw[k] += p;
        }
    }
    for (auto& v : raw) v /= n;
    if (!(raw[0] > 0.0)) throw InputError("r^2 samples have zero mean");

    MomentEstimate est{MomentVector(std::vector<double>(K, 1.0)), raw, 1.0, 1.0};
    est.unscaled_m1 = normaliser(1) * raw[0];
    est.r2_scale = static_cast<double>(J) / raw[0];
    std::vector<double> m(K);
    double factor = 1.0;
    for (std::size_t k = 1; k <= K; ++k) {
        factor *= est.r2_scale;
        m[k - 1] = normaliser(k) * raw[k - 1] * factor;
    }
    m[0] = 1.0;
    est.m_hat = MomentVector(std::move(m));
    return est;
}

double moment_residual(const MomentVector& m_hat, const GammaMixture& mix) {
    double r = 0.0;
    for (std::size_t k = 2; k <= m_hat.order(); ++k) {
        const double d = m_hat(k) - mixture_moment(mix, static_cast<int>(k));
        r += d * d;
    }
    return r;
}

namespace {

/// Free parameters: S-1 weight logits (first fixed at 0), S log-shapes,
/// S-1 log-scales (first fixed at 0). Scales are then rescaled so E(V) = 1.
struct MixtureParamMap {
    std::size_t S;

    std::size_t dim() const { return 3 * S - 2; }

    GammaMixture to_mixture(std::span<const double> z) const {
        std::vector<double> logits(S, 0.0);
        for (std::size_t s = 1; s < S; ++s) logits[s] = z[s - 1];
        const double top = *std::max_element(logits.begin(), logits.end());
        double norm = 0.0;
        for (auto& l : logits) norm += std::exp(l - top);
        std::vector<GammaComponent> comps(S);
        for (std::size_t s = 0; s < S; ++s) {
            comps[s].weight = std::exp(logits[s] - top) / norm;
            comps[s].shape = std::clamp(std::exp(z[S - 1 + s]), 1e-8, GammaMixture::kMaxShape);
            comps[s].scale = s == 0 ? 1.0 : std::exp(std::clamp(z[2 * S - 1 + s - 1], -200.0, 200.0));
        }
        double mean = 0.0;
        for (const auto& c : comps) mean += c.weight * c.shape * c.scale;
        for (auto& c : comps) c.scale = std::max(c.scale / mean, GammaMixture::kMinScale);
        // Renormalise the weights exactly after floating-point division.
        double wsum = 0.0;
        for (const auto& c : comps) wsum += c.weight;
        for (auto& c : comps) c.weight /= wsum;
        return GammaMixture(std::move(comps), MeanPolicy::AllowUnnormalized);
    }
};

std::size_t effective_size(const GammaMixture& mix) {
    std::size_t n = 0;
    for (const auto& c : mix.components())
        if (c.weight > 1e-8) ++n;
    return n;
}

bool lexicographically_less(const GammaMixture& a, const GammaMixture& b) {
    const auto ca = a.components(), cb = b.components();
    for (std::size_t s = 0; s < std::min(ca.size(), cb.size()); ++s) {
        if (ca[s].weight != cb[s].weight) return ca[s].weight < cb[s].weight;
        if (ca[s].shape != cb[s].shape) return ca[s].shape < cb[s].shape;
        if (ca[s].scale != cb[s].scale) return ca[s].scale < cb[s].scale;
    }
    return false;
}

}  // namespace

MixtureFit fit_mixture_moments(const MomentVector& m_hat, std::size_t S, const EstimationConfig& cfg) {
    if (S < 1 || S > 8) throw InputError("mixture size S must lie in [1, 8]");
    if (m_hat.order() < 2) throw InputError("need at least m_2 to fit a mixture");
    for (std::size_t k = 1; k <= m_hat.order(); ++k)
        if (!(m_hat(k) > 0.0)) throw InputError("moment estimates must be positive");

    const MixtureParamMap map{S};
    auto objective = [&](std::span<const double> z) {
        for (double v : z)
            if (!std::isfinite(v) || std::abs(v) > 60.0) return std::numeric_limits<double>::infinity();
        try {
            return moment_residual(m_hat, map.to_mixture(z));
        } catch (const DomainError&) {
            return std::numeric_limits<double>::infinity();
        }
    };

    // A single gamma with matching variance seeds the shape scale.
    const double excess = m_hat(2) - 1.0;
    const double alpha0 = excess > 1e-9 ? std::min(1.0 / excess, 1e8) : 1e6;

    const auto starts = static_cast<std::size_t>(cfg.optimizer.restarts);
    std::vector<OptimResult> results(starts);
    std::vector<std::exception_ptr> failures(starts);
    detail::parallel_for(starts, cfg.threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t s = begin; s < end; ++s) {
            std::vector<double> z0(map.dim(), 0.0);
            Rng rng = make_rng(cfg.seed, Stream::Optimizer, 1000 + s);
            std::normal_distribution<double> normal(0.0, 1.0);
            for (std::size_t i = 0; i + 1 < S; ++i) z0[i] = s == 0 ? -1.0 * static_cast<double>(i + 1) : 1.5 * normal(rng);
            for (std::size_t i = 0; i < S; ++i)
                z0[S - 1 + i] = std::log(alpha0) + (s == 0 ? -0.5 * static_cast<double>(i) : 2.0 * normal(rng));
            for (std::size_t i = 0; i + 1 < S; ++i)
                z0[2 * S - 1 + i] = s == 0 ? 0.5 * static_cast<double>(i + 1) : 1.0 * normal(rng);
            NelderMeadOptions nm;
            nm.max_evals = cfg.optimizer.max_iters;
            nm.ftol_abs = cfg.optimizer.tol * 1e-3;
            nm.ftol_rel = cfg.optimizer.tol;
            nm.xtol = 1e-9;
            nm.initial_step = 1.0;
            nm.restarts = 4;
            results[s] = nelder_mead(objective, z0, nm);
        }
    });

    std::optional<MixtureFit> best;
    int evals = 0;
    for (std::size_t s = 0; s < starts; ++s) {
        evals += results[s].evals;
        if (!std::isfinite(results[s].f)) continue;
        MixtureFit cand{map.to_mixture(results[s].x), results[s].f, s, 0};
        if (!best) {
            best = std::move(cand);
            continue;
        }
        const double tol = 1e-14 * std::max(1.0, best->residual);
        if (cand.residual < best->residual - tol) {
            best = std::move(cand);
        } else if (std::abs(cand.residual - best->residual) <= tol) {
            const auto ea = effective_size(cand.mix), eb = effective_size(best->mix);
            if (ea < eb || (ea == eb && lexicographically_less(cand.mix, best->mix))) best = std::move(cand);
        }
    }
    if (!best) {
        std::ostringstream trace;
        for (std::size_t s = 0; s < starts; ++s) trace << "start " << s << ": f=" << results[s].f << "\n";
        throw SolverError("method-of-moments fit found no feasible point", trace.str());
    }
    best->evaluations = evals;
    best->mix = GammaMixture(std::vector<GammaComponent>(best->mix.components().begin(), best->mix.components().end()),
                             MeanPolicy::RequireUnit);
    return *best;
}

EstimationResult estimate_all(const SampleMatrix& data, const SiteSet& sites, const EstimationConfig& cfg) {
    cfg.validate();
    const SampleMatrix centred = standardize(data);
    const CovFit cov = fit_cov_params(centred, sites, cfg.cov_kind, cfg.optimizer, cfg.seed);
    const CholeskyFactor chol(cov_matrix(cov.model, sites));
    const Eigen::VectorXd r2 = mahalanobis_r2(centred.values(), chol);
    const MomentEstimate me = estimate_m(r2, sites.size(), cfg.K);
    const MixtureFit mf = fit_mixture_moments(me.m_hat, cfg.S, cfg);

    EstimationResult out{cov.model, mf.mix, me.m_hat, moments_to_cumulants(me.m_hat), mf.residual, me.r2_scale,
                         cov.log_likelihood, {}};
    std::ostringstream s;
    s << "covariance: " << to_string(cov.model.kind()) << " range=" << cov.model.range()
      << " shape=" << cov.model.shape() << " nugget=" << cov.model.nugget() << " sill=" << cov.model.sill()
      << " loglik=" << cov.log_likelihood << " evals=" << cov.evaluations;
    out.diagnostics.push_back(s.str());
    for (const auto& w : cov.warnings) out.diagnostics.push_back("warning: " + w);
    s.str("");
    s << "r2: n=" << r2.size() << " scale=" << me.r2_scale << " unscaled_m1=" << me.unscaled_m1;
    out.diagnostics.push_back(s.str());
    s.str("");
    s << "mixture: S=" << cfg.S << " residual=" << mf.residual << " best_start=" << mf.best_start
      << " evals=" << mf.evaluations;
    out.diagnostics.push_back(s.str());
    return out;
}

}  // namespace smf
