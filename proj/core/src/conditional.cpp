#include "smf/conditional.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>

#include "smf/errors.hpp"
#include "smf/estimate.hpp"
#include "smf/random.hpp"

namespace smf {

void ConditioningSet::validate(const DependenceSpec& spec) const {
    if (static_cast<std::size_t>(obs_values.size()) != obs_indices.size())
        throw InputError("observed values and indices differ in length");
    std::vector<std::size_t> sorted = obs_indices;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        throw InputError("observed indices must be distinct");
    for (auto i : obs_indices)
        if (i >= spec.dim()) throw InputError("observed index " + std::to_string(i) + " out of range");
    if (!obs_values.allFinite()) throw InputError("observed values must be finite");
    if (target_mean.size() != 0 && static_cast<std::size_t>(target_mean.size()) != targets())
        throw InputError("target mean has the wrong length");
    if (!spec.sites() || !spec.cov_model())
        throw InputError("conditioning on new sites needs a spec with sites and a covariance model");
    // The union geometry rejects targets on observed sites unless allowed.
    const std::vector<Point2> targets(target_sites.coords().begin(), target_sites.coords().end());
    if (obs_indices.empty())
        (void)SiteSet(targets, allow_coincident);
    else
        (void)spec.sites()->subset(obs_indices).concat(target_sites, allow_coincident);
}

namespace {

struct Blocks {
    Eigen::MatrixXd sigma_obs;  // J x J
    Eigen::MatrixXd cross;      // J x M
    Eigen::MatrixXd target;     // M x M
    Eigen::VectorXd x;          // centred observations
    Eigen::VectorXd mu_target;  // M
};

Blocks make_blocks(const DependenceSpec& spec, const ConditioningSet& cond) {
    cond.validate(spec);
    const auto J = static_cast<Eigen::Index>(cond.obs_indices.size());
    const auto M = static_cast<Eigen::Index>(cond.targets());
    Blocks b;
    b.sigma_obs.resize(J, J);
    b.x.resize(J);
    for (Eigen::Index i = 0; i < J; ++i) {
        const auto oi = static_cast<Eigen::Index>(cond.obs_indices[static_cast<std::size_t>(i)]);
        b.x(i) = cond.obs_values(i) - spec.mean()(oi);
        for (Eigen::Index j = 0; j < J; ++j)
            b.sigma_obs(i, j) = spec.sigma()(oi, static_cast<Eigen::Index>(cond.obs_indices[static_cast<std::size_t>(j)]));
    }
    const SiteSet& sites = *spec.sites();
    if (J > 0) {
        const SiteSet obs_sites = sites.subset(cond.obs_indices);
        b.cross = cross_cov(*spec.cov_model(), obs_sites, cond.target_sites);
    } else {
        b.cross.resize(0, M);
    }
    b.target = cov_matrix(*spec.cov_model(), cond.target_sites);
    b.mu_target = cond.target_mean.size() == 0 ? Eigen::VectorXd::Zero(M) : cond.target_mean;
    return b;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }
double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

}  // namespace

Eigen::MatrixXd extend_sigma(const DependenceSpec& spec, const ConditioningSet& cond) {
    const Blocks b = make_blocks(spec, cond);
    const auto J = b.sigma_obs.rows(), M = b.target.rows();
    Eigen::MatrixXd ext(J + M, J + M);
    ext.topLeftCorner(J, J) = b.sigma_obs;
    ext.topRightCorner(J, M) = b.cross;
    ext.bottomLeftCorner(M, J) = b.cross.transpose();
    ext.bottomRightCorner(M, M) = b.target;
    CholeskyFactor check(ext);
    return ext;
}

GaussianConditional gaussian_conditional(const DependenceSpec& spec, const ConditioningSet& cond) {
    const Blocks b = make_blocks(spec, cond);
    GaussianConditional out;
    if (b.sigma_obs.rows() == 0) {
        out.mean = b.mu_target;
        out.cov = b.target;
        return out;
    }
    const CholeskyFactor chol(b.sigma_obs);
    const Eigen::MatrixXd weights = chol.solve(b.cross);  // J x M
    out.mean = b.mu_target + weights.transpose() * b.x;
    out.cov = b.target - b.cross.transpose() * weights;
    out.cov = 0.5 * (out.cov + out.cov.transpose()).eval();
    return out;
}

namespace {

/// Gauss-Legendre nodes and weights on [-1, 1].
struct GaussLegendre {
    static constexpr int kPoints = 20;
    std::array<double, kPoints> x{}, w{};

    GaussLegendre() {
        for (int i = 0; i < kPoints; ++i) {
            double z = std::cos(std::numbers::pi * (i + 0.75) / (kPoints + 0.5));
            double dp = 0.0;
            for (int it = 0; it < 100; ++it) {
                double p0 = 1.0, p1 = z;
                for (int k = 2; k <= kPoints; ++k) {
                    const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
                    p0 = p1;
                    p1 = p2;
                }
                dp = kPoints * (z * p1 - p0) / (z * z - 1.0);
                const double dz = p1 / dp;
                z -= dz;
                if (std::abs(dz) < 1e-16) break;
            }
            x[static_cast<std::size_t>(i)] = z;
            w[static_cast<std::size_t>(i)] = 2.0 / ((1.0 - z * z) * dp * dp);
        }
    }
};

const GaussLegendre& gauss_legendre() {
    static const GaussLegendre gl;
    return gl;
}

/// For the scale-mixture c.g.f. K(w) = delta(w' S w / 2) the saddle equation
/// grad K(w) = b has solution w = lambda S^{-1} b, lambda = 1 / delta'(y), where
/// y solves 2 y delta'(y)^2 = Q := b' S^{-1} b. This reduces every saddlepoint
/// quantity to scalar functions of Q.
struct ScalarSaddle {
    const GammaMixture& mix;
    mutable int iterations = 0;

    struct Point {
        double y = 0.0;
        Derivs delta;
    };

    Point solve(double Q) const {
        if (Q <= 0.0) return {0.0, mixture_log_mgf(mix, 0.0)};
        const double ymax = mix.mgf_bound();
        auto h = [&](double y, Derivs& d) {
            d = mixture_log_mgf(mix, y);
            return 2.0 * y * d.d1 * d.d1 - Q;
        };
        double lo = 0.0, hi = std::min(0.5 * Q, 0.5 * ymax);
        Derivs d;
        while (h(hi, d) < 0.0) {
            lo = hi;
            hi = hi + 0.5 * (ymax - hi);
            if (ymax - hi < 1e-300) throw SolverError("saddle equation left the m.g.f. strip", "");
        }
        double y = 0.5 * (lo + hi);
        for (int it = 0; it < 200; ++it) {
            ++iterations;
            const double f = h(y, d);
            if (f == 0.0) break;
            if (f < 0.0) lo = y; else hi = y;
            const double fp = 2.0 * d.d1 * d.d1 + 4.0 * y * d.d1 * d.d2;
            double next = y - f / fp;
            if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
            if (std::abs(next - y) <= 1e-16 * std::max(y, 1e-300) || hi - lo <= 1e-16 * hi) {
                y = next;
                break;
            }
            y = next;
        }
        return {y, mixture_log_mgf(mix, y)};
    }

    double lambda(double Q) const { return 1.0 / solve(Q).delta.d1; }

    /// integral_{q0}^{q0+D} lambda(Q) dQ = r^2, on panels that grow with Q.
    double r_squared(double q0, double D) const {
        const auto& gl = gauss_legendre();
        double total = 0.0;
        double lo = q0;
        const double end = q0 + D;
        while (lo < end) {
            const double hi = std::min(end, lo + 0.5 * (1.0 + lo));
            const double half = 0.5 * (hi - lo), mid = 0.5 * (hi + lo);
            double panel = 0.0;
            for (int i = 0; i < GaussLegendre::kPoints; ++i)
                panel += gl.w[static_cast<std::size_t>(i)] * lambda(mid + half * gl.x[static_cast<std::size_t>(i)]);
            total += half * panel;
            lo = hi;
        }
        return total;
    }
};

struct SaddleInputs {
    double q_x = 0.0;       // x' Sigma^{-1} x
    double cond_mean = 0.0;  // k' Sigma^{-1} x (centred)
    double cond_sd = 1.0;    // sqrt(K* - k' Sigma^{-1} k)
    std::size_t J = 0;
    Eigen::VectorXd sigma_inv_x;
    Eigen::MatrixXd sigma_star;  // (target, observed) ordering
    Eigen::VectorXd x;
    double mu_target = 0.0;
};

SaddleInputs prepare(const DependenceSpec& spec, const ConditioningSet& cond) {
    if (cond.targets() != 1) throw InputError("saddlepoint CDF needs exactly one target site");
    const Blocks b = make_blocks(spec, cond);
    SaddleInputs in;
    in.J = static_cast<std::size_t>(b.sigma_obs.rows());
    in.x = b.x;
    in.mu_target = b.mu_target(0);
    const auto J = static_cast<Eigen::Index>(in.J);
    double var = b.target(0, 0);
    if (J > 0) {
        const CholeskyFactor chol(b.sigma_obs);
        in.sigma_inv_x = chol.solve(b.x);
        in.q_x = b.x.dot(in.sigma_inv_x);
        in.cond_mean = b.cross.col(0).dot(in.sigma_inv_x);
        var -= chol.quadratic_form(b.cross.col(0));
    } else {
        in.sigma_inv_x.resize(0);
    }
    if (!(var > 0.0))
        throw FactorizationError(0, var);
    in.cond_sd = std::sqrt(var);
    in.sigma_star.resize(J + 1, J + 1);
    in.sigma_star(0, 0) = b.target(0, 0);
    if (J > 0) {
        in.sigma_star.block(1, 1, J, J) = b.sigma_obs;
        in.sigma_star.block(1, 0, J, 1) = b.cross;
        in.sigma_star.block(0, 1, 1, J) = b.cross.transpose();
    }
    return in;
}

struct FormulaValue {
    double probability, r, q;
    ScalarSaddle::Point y_point, x_point;
};

/// Evaluates the tail formula at centred offset a - m = sign * s * sqrt(D).
FormulaValue evaluate_formula(const ScalarSaddle& ss, const SaddleInputs& in, double D, double sign) {
    const ScalarSaddle::Point px = ss.solve(in.q_x);
    const ScalarSaddle::Point py = ss.solve(in.q_x + D);
    const double r2 = ss.r_squared(in.q_x, D);
    const double r = sign * std::sqrt(std::max(r2, 0.0));
    const double J = static_cast<double>(in.J);
    const double log_ratio = J * std::log(px.delta.d1) + std::log1p(2.0 * px.y * px.delta.d2 / px.delta.d1) -
                             (J + 1.0) * std::log(py.delta.d1) -
                             std::log1p(2.0 * py.y * py.delta.d2 / py.delta.d1);
    const double q = py.delta.d1 / (sign * std::sqrt(D)) * std::exp(0.5 * log_ratio);
    const double p = normal_cdf(r) + normal_pdf(r) * (1.0 / r - q);
    return {p, r, q, py, px};
}

}  // namespace

SaddleResult saddlepoint_cdf(const DependenceSpec& spec, const ConditioningSet& cond, double a) {
    if (!std::isfinite(a)) throw DomainError("saddlepoint CDF needs a finite threshold");
    const SaddleInputs in = prepare(spec, cond);
    const ScalarSaddle ss{spec.mix()};
    const double offset = (a - in.mu_target) - in.cond_mean;
    const double D = (offset / in.cond_sd) * (offset / in.cond_sd);
    const double sign = offset >= 0.0 ? 1.0 : -1.0;

    SaddleResult res;
    const double band2 = kNearMeanBand * kNearMeanBand;
    const double r2 = D > 0.0 ? ss.r_squared(in.q_x, D) : 0.0;
    FormulaValue fv{};
    if (r2 >= band2) {
        fv = evaluate_formula(ss, in, D, sign);
        res.probability = fv.probability;
        res.r = fv.r;
        res.q = fv.q;
    } else {
        // Band edge D* with r^2(D*) = band^2, then a quadratic through the
        // edges and the conditional median (probability 1/2).
        double d_edge = band2 * ss.lambda(in.q_x) > 0.0 ? band2 / ss.lambda(in.q_x) : band2;
        for (int it = 0; it < 20; ++it) {
            const double f = ss.r_squared(in.q_x, d_edge) - band2;
            const double step = f / ss.lambda(in.q_x + d_edge);
            d_edge -= step;
            if (std::abs(step) <= 1e-15 * d_edge) break;
        }
        const double h = in.cond_sd * std::sqrt(d_edge);
        const FormulaValue plus = evaluate_formula(ss, in, d_edge, 1.0);
        const FormulaValue minus = evaluate_formula(ss, in, d_edge, -1.0);
        const double t = offset / h;  // in [-1, 1]
        // Lagrange basis on nodes -1, 0, 1.
        res.probability = minus.probability * 0.5 * t * (t - 1.0) + 0.5 * (1.0 - t * t) +
                          plus.probability * 0.5 * t * (t + 1.0);
        res.r = sign * std::sqrt(std::max(r2, 0.0));
        res.q = std::numeric_limits<double>::quiet_NaN();
        res.near_mean = true;
        fv.y_point = ss.solve(in.q_x + D);
        fv.x_point = ss.solve(in.q_x);
    }
    res.probability = std::clamp(res.probability, 0.0, 1.0);

    // Saddle points in the original coordinates.
    const auto J = static_cast<Eigen::Index>(in.J);
    Eigen::VectorXd b(J + 1);
    b(0) = a - in.mu_target;
    if (J > 0) b.tail(J) = in.x;
    const CholeskyFactor star(in.sigma_star);
    res.w_hat = star.solve(b) / fv.y_point.delta.d1;
    res.w_hat_minus = J > 0 ? Eigen::VectorXd(in.sigma_inv_x / fv.x_point.delta.d1) : Eigen::VectorXd();
    const Eigen::VectorXd sw = in.sigma_star * res.w_hat;
    const double y = 0.5 * res.w_hat.dot(sw);
    res.saddle_residual = (mixture_log_mgf(spec.mix(), y).d1 * sw - b).cwiseAbs().maxCoeff();
    res.newton_iters = ss.iterations;
    return res;
}

double saddlepoint_quantile(const DependenceSpec& spec, const ConditioningSet& cond, double p) {
    if (!(p > 0.0 && p < 1.0)) throw DomainError("quantile level must lie in (0, 1)");
    const GaussianConditional g = gaussian_conditional(spec, cond);
    const double m = g.mean(0), s = std::sqrt(g.cov(0, 0));
    auto cdf = [&](double a) { return saddlepoint_cdf(spec, cond, a).probability; };
    double lo = m - s, hi = m + s;
    for (int i = 0; i < 200 && cdf(lo) > p; ++i) lo = m - 2.0 * (m - lo);
    for (int i = 0; i < 200 && cdf(hi) < p; ++i) hi = m + 2.0 * (hi - m);
    for (int it = 0; it < 200 && hi - lo > 1e-12 * std::max(1.0, std::abs(m) + s); ++it) {
        const double mid = 0.5 * (lo + hi);
        if (cdf(mid) < p) lo = mid; else hi = mid;
    }
    return 0.5 * (lo + hi);
}

SaddleSolution saddle_solve(const SaddleProblem& problem, const Eigen::VectorXd& target,
                            const Eigen::VectorXd& start, const SaddleSolveOptions& opts) {
    Eigen::VectorXd w = start;
    if (!problem.in_domain(w)) throw DomainError("saddle solver start point outside the domain");
    std::ostringstream trace;
    auto merit = [&](const Eigen::VectorXd& v) { return problem.value(v) - v.dot(target); };
    double phi = merit(w);
    for (int it = 0; it <= opts.max_iters; ++it) {
        const Eigen::VectorXd g = problem.grad(w) - target;
        const double res = g.cwiseAbs().maxCoeff();
        trace << "iter " << it << " residual " << res << "\n";
        if (res <= opts.tol) return {w, it, res};
        if (it == opts.max_iters) break;
        const Eigen::MatrixXd h = problem.hess(w);
        Eigen::LLT<Eigen::MatrixXd> llt(h);
        if (llt.info() != Eigen::Success) throw SolverError("saddle Hessian is not positive definite", trace.str());
        const Eigen::VectorXd step = llt.solve(g);
        double t = 1.0;
        bool accepted = false;
        for (int ls = 0; ls < 60; ++ls, t *= 0.5) {
            const Eigen::VectorXd cand = w - t * step;
            if (!problem.in_domain(cand)) continue;
            const double phi_c = merit(cand);
            // The merit flattens to rounding level near the root; the
            // residual norm still discriminates there.
            const bool decreased = phi_c < phi - 1e-4 * t * g.dot(step) ||
                                   (problem.grad(cand) - target).norm() <= (1.0 - 0.5 * t) * g.norm();
            if (decreased) {
                w = cand;
                phi = phi_c;
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            // Near the optimum the merit can stall at rounding level; take the
            // full step when it stays in the domain.
            const Eigen::VectorXd cand = w - step;
            if (!problem.in_domain(cand)) throw SolverError("saddle line search failed", trace.str());
            w = cand;
            phi = merit(w);
        }
    }
    throw SolverError("saddle solver did not converge", trace.str());
}

void McmcConfig::validate() const {
    if (samples < 1) throw InputError("MCMC needs at least one retained sample");
    if (!(proposal_sd > 0.0)) throw InputError("MCMC proposal sd must be positive");
    if (thin < 1) throw InputError("MCMC thinning must be >= 1");
    if (!(initial > 0.0)) throw InputError("MCMC initial value must be positive");
}

namespace {

/// Geyer initial positive sequence estimate of the effective sample size.
double effective_sample_size(const std::vector<double>& x) {
    const std::size_t n = x.size();
    if (n < 4) return static_cast<double>(n);
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(n);
    double c0 = 0.0;
    for (double v : x) c0 += (v - mean) * (v - mean);
    c0 /= static_cast<double>(n);
    if (c0 <= 0.0) return 1.0;
    auto rho = [&](std::size_t lag) {
        double c = 0.0;
        for (std::size_t i = 0; i + lag < n; ++i) c += (x[i] - mean) * (x[i + lag] - mean);
        return c / (static_cast<double>(n) * c0);
    };
    double sum = 0.0;
    const std::size_t max_lag = std::min<std::size_t>(n - 2, 20000);
    for (std::size_t m = 0; 2 * m + 1 <= max_lag; ++m) {
        const double pair = (m == 0 ? 1.0 : rho(2 * m)) + rho(2 * m + 1);
        if (pair <= 0.0) break;
        sum += pair;
    }
    const double tau = std::max(1.0, 2.0 * sum - 1.0);
    return static_cast<double>(n) / tau;
}

}  // namespace

VChain sample_v_chain(double r2, std::size_t J, const GammaMixture& prior, const McmcConfig& cfg) {
    cfg.validate();
    if (!(r2 >= 0.0)) throw InputError("r^2 must be non-negative");
    const double half_j = 0.5 * static_cast<double>(J);
    auto log_target = [&](double v) { return -half_j * std::log(v) - 0.5 * r2 / v + mixture_log_density(prior, v); };

    Rng rng = make_rng(cfg.seed, Stream::Mcmc);
    std::normal_distribution<double> step(0.0, cfg.proposal_sd);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    double v = cfg.initial;
    double lt = log_target(v);
    if (!std::isfinite(lt)) throw InputError("MCMC initial value has zero posterior density");

    VChain chain;
    chain.samples.reserve(cfg.samples);
    const std::size_t total = cfg.burn_in + cfg.samples * cfg.thin;
    std::size_t accepted = 0;
    for (std::size_t it = 0; it < total; ++it) {
        const double cand = v + step(rng);
        const double u = unif(rng);
        if (cand > 0.0) {
            const double lc = log_target(cand);
            if (std::log(u) < lc - lt) {
                v = cand;
                lt = lc;
                ++accepted;
            }
        }
        if (it >= cfg.burn_in && (it - cfg.burn_in + 1) % cfg.thin == 0) chain.samples.push_back(v);
    }
    chain.acceptance_rate = static_cast<double>(accepted) / static_cast<double>(total);
    chain.ess = effective_sample_size(chain.samples);
    chain.pathological = chain.ess < 10.0;
    return chain;
}

VChain sample_v_posterior(const DependenceSpec& spec, const std::vector<std::size_t>& obs_indices,
                          const Eigen::VectorXd& obs_values, const McmcConfig& cfg) {
    if (obs_indices.empty()) throw InputError("posterior of V needs at least one observation");
    if (static_cast<std::size_t>(obs_values.size()) != obs_indices.size())
        throw InputError("observed values and indices differ in length");
    const auto J = static_cast<Eigen::Index>(obs_indices.size());
    Eigen::MatrixXd sigma(J, J);
    Eigen::MatrixXd x(1, J);
    for (Eigen::Index i = 0; i < J; ++i) {
        const auto oi = obs_indices[static_cast<std::size_t>(i)];
        if (oi >= spec.dim()) throw InputError("observed index " + std::to_string(oi) + " out of range");
        x(0, i) = obs_values(i) - spec.mean()(static_cast<Eigen::Index>(oi));
        for (Eigen::Index j = 0; j < J; ++j)
            sigma(i, j) = spec.sigma()(static_cast<Eigen::Index>(oi),
                                       static_cast<Eigen::Index>(obs_indices[static_cast<std::size_t>(j)]));
    }
    const double r2 = mahalanobis_r2(x, sigma)(0);
    return sample_v_chain(r2, obs_indices.size(), spec.mix(), cfg);
}

CondSimResult conditional_simulate(const DependenceSpec& spec, const ConditioningSet& cond, std::size_t B,
                                   const McmcConfig& mcmc, std::uint64_t seed) {
    if (B < 1) throw InputError("conditional simulation needs B >= 1");
    const GaussianConditional g = gaussian_conditional(spec, cond);
    const auto M = g.cov.rows();

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(g.cov);
    const double scale = std::max(1.0, g.cov.cwiseAbs().maxCoeff());
    if (eig.eigenvalues().minCoeff() < -1e-10 * scale)
        throw FactorizationError(0, eig.eigenvalues().minCoeff());
    const Eigen::MatrixXd root =
        eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();

    McmcConfig cfg = mcmc;
    cfg.samples = B;
    VChain chain;
    if (cond.obs_indices.empty()) {
        // Without data the posterior is the prior; sample it directly.
        chain.samples.resize(B);
        for (std::size_t b = 0; b < B; ++b) {
            Rng rng = make_rng(cfg.seed, Stream::Scaling, b);
            chain.samples[b] = sample_mixture(spec.mix(), rng);
        }
        chain.acceptance_rate = 1.0;
        chain.ess = static_cast<double>(B);
    } else {
        chain = sample_v_posterior(spec, cond.obs_indices, cond.obs_values, cfg);
    }

    Eigen::MatrixXd out(static_cast<Eigen::Index>(B), M);
    Eigen::VectorXd v(static_cast<Eigen::Index>(B));
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::VectorXd eps(M);
    for (std::size_t b = 0; b < B; ++b) {
        Rng rng = make_rng(seed, Stream::Conditional, b);
        normal.reset();
        for (Eigen::Index j = 0; j < M; ++j) eps(j) = normal(rng);
        const double vb = chain.samples[b];
        v(static_cast<Eigen::Index>(b)) = vb;
        out.row(static_cast<Eigen::Index>(b)) = (g.mean + std::sqrt(vb) * (root * eps)).transpose();
    }
    return {SampleMatrix(std::move(out), FieldKind::ScaleMixture, std::move(v)), std::move(chain)};
}

}  // namespace smf
