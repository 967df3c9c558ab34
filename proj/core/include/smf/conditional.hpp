#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "smf/cgf.hpp"
#include "smf/sample_matrix.hpp"

namespace smf {

/// Observed values at a subset of the spec's sites plus M >= 1 target sites.
struct ConditioningSet {
    std::vector<std::size_t> obs_indices;
    Eigen::VectorXd obs_values;
    SiteSet target_sites;
    /// Mean at the targets; zero when empty.
    Eigen::VectorXd target_mean{};
    /// Permit targets that coincide with observed sites.
    bool allow_coincident = false;

    std::size_t targets() const noexcept { return target_sites.size(); }
    void validate(const DependenceSpec& spec) const;
};

/// [Sigma_obs, k; k', K*] over the observed sites followed by the targets,
/// checked for positive definiteness (FactorizationError otherwise).
Eigen::MatrixXd extend_sigma(const DependenceSpec& spec, const ConditioningSet& cond);

/// Closed-form Gaussian (kriging) conditional of the targets given the
/// observations: mean mu* + k' Sigma^{-1} (x - mu) and covariance
/// K* - k' Sigma^{-1} k.
struct GaussianConditional {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
};
GaussianConditional gaussian_conditional(const DependenceSpec& spec, const ConditioningSet& cond);

struct SaddleResult {
    double probability = 0.0;
    double r = 0.0;
    double q = 0.0;
    Eigen::VectorXd w_hat;        // (target, observed) ordering
    Eigen::VectorXd w_hat_minus;  // observed only
    int newton_iters = 0;
    double saddle_residual = 0.0;  // max-norm of grad K_Y(w_hat) - (a, x)
    bool near_mean = false;        // |r| < kNearMeanBand, interpolated
};

inline constexpr double kNearMeanBand = 1e-3;

/// Conditional tail approximation Pr(X_target <= a | X_obs = x) for a single
/// target site:
///   Phi(r) + phi(r) (1/r - q),
///   r = sign(w_1) sqrt(2 {w'(a, x) - w_-'x - K_Y(w) + K_X(w_-)}),
///   q = (1/w_1) det K_X''(w_-)^{1/2} det K_Y''(w)^{-1/2},
/// where grad K_Y(w) = (a, x) and grad K_X(w_-) = x. Inside |r| < 1e-3 the
/// value is interpolated quadratically through the band edges and the
/// conditional median. Works on centred values: the spec mean and
/// cond.target_mean are removed first.
SaddleResult saddlepoint_cdf(const DependenceSpec& spec, const ConditioningSet& cond, double a);

/// Inverse of saddlepoint_cdf in a (bracketing plus bisection).
double saddlepoint_quantile(const DependenceSpec& spec, const ConditioningSet& cond, double p);

struct SaddleProblem {
    std::function<double(const Eigen::VectorXd&)> value;
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> grad;
    std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> hess;
    std::function<bool(const Eigen::VectorXd&)> in_domain;
};

struct SaddleSolveOptions {
    double tol = 1e-9;
    int max_iters = 50;
};

struct SaddleSolution {
    Eigen::VectorXd w;
    int iterations = 0;
    double residual = 0.0;
};

/// Damped Newton for grad(w) = target on a convex cumulant generating
/// function. Steps are halved until the iterate stays in the domain and
/// value(w) - w'target decreases. Throws SolverError on failure.
SaddleSolution saddle_solve(const SaddleProblem& problem, const Eigen::VectorXd& target,
                            const Eigen::VectorXd& start, const SaddleSolveOptions& opts = {});

struct McmcConfig {
    std::size_t burn_in = 500;
    std::size_t samples = 1000;
    double proposal_sd = 1.0;
    std::uint64_t seed = 1;
    std::size_t thin = 1;
    double initial = 1.0;

    void validate() const;
};

struct VChain {
    std::vector<double> samples;
    double acceptance_rate = 0.0;
    double ess = 0.0;
    bool pathological = false;  // ess < 10
};

/// Random-walk Metropolis chain for V with target density proportional to
///   V^{-J/2} exp(-r2 / (2 V)) f_V(V).
/// Candidates <= 0 are rejected by holding the current value. J = 0 and
/// r2 = 0 sample the prior itself.
VChain sample_v_chain(double r2, std::size_t J, const GammaMixture& prior, const McmcConfig& cfg);

/// Posterior of V given centred observations x - mu at obs_indices.
VChain sample_v_posterior(const DependenceSpec& spec, const std::vector<std::size_t>& obs_indices,
                          const Eigen::VectorXd& obs_values, const McmcConfig& cfg);

struct CondSimResult {
    SampleMatrix ensemble;  // B x M, kind ScaleMixture, v_draws = chain
    VChain chain;
};

/// For each posterior draw V_b: z* ~ N(k' Sigma^{-1} z, K* - k' Sigma^{-1} k)
/// with z = (x - mu) / sqrt(V_b), returned as mu* + sqrt(V_b) z*.
/// A singular conditional covariance (targets on observed sites) is allowed.
CondSimResult conditional_simulate(const DependenceSpec& spec, const ConditioningSet& cond, std::size_t B,
                                   const McmcConfig& mcmc, std::uint64_t seed);

}  // namespace smf
