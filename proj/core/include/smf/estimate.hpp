#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "smf/covmodel.hpp"
#include "smf/mixture.hpp"
#include "smf/sample_matrix.hpp"

namespace smf {

struct OptimizerConfig {
    int restarts = 8;
    int max_iters = 20000;
    double tol = 1e-12;
};

struct EstimationConfig {
    std::size_t K = 5;  // moment order, 2..8
    std::size_t S = 5;  // mixture size, 1..8
    OptimizerConfig optimizer{};
    CovKind cov_kind = CovKind::PoweredExponential;
    std::uint64_t seed = 1;
    std::size_t threads = 1;

    void validate() const;
};

/// Columns shifted to sample mean zero; variances are left as they are.
SampleMatrix standardize(const SampleMatrix& data);

struct CovFit {
    CovModel model;
    double log_likelihood = 0.0;
    int evaluations = 0;
    std::size_t best_start = 0;
    std::vector<std::string> warnings;
};

/// Gaussian maximum likelihood for (range, shape, nugget, sill) with a bounded
/// Nelder-Mead search over transformed parameters and random multistarts.
/// Data are centred column-wise before fitting.
CovFit fit_cov_params(const SampleMatrix& data, const SiteSet& sites, CovKind kind,
                      const OptimizerConfig& opt = {}, std::uint64_t seed = 1);

/// r_i^2 = x_i' Sigma^{-1} x_i through triangular solves with the Cholesky factor.
Eigen::VectorXd mahalanobis_r2(const Eigen::MatrixXd& data, const CholeskyFactor& chol);
Eigen::VectorXd mahalanobis_r2(const Eigen::MatrixXd& data, const Eigen::MatrixXd& sigma);

struct MomentEstimate {
    MomentVector m_hat;
    /// Raw moment estimates (1/n) sum (r_i^2)^k before the unit-mean rescaling.
    std::vector<double> raw_vartheta;
    /// Factor applied to r^2 so that the first moment estimate is exactly 1
    /// (J / mean(r^2)).
    double r2_scale = 1.0;
    /// m_1 implied by the unscaled r^2 values.
    double unscaled_m1 = 1.0;
};

/// m_k = Gamma(J/2) / (2^k Gamma(k + J/2)) * mean((r^2)^k) after rescaling r^2
/// by J / mean(r^2), so m_1 = 1 exactly.
MomentEstimate estimate_m(const Eigen::VectorXd& r2, std::size_t J, std::size_t K);

struct MixtureFit {
    GammaMixture mix;
    double residual = 0.0;
    std::size_t best_start = 0;
    int evaluations = 0;
};

/// Constrained method of moments:
///   min sum_{k=2..K} (m_k - sum_s w_s beta_s^k Gamma(alpha_s + k) / Gamma(alpha_s))^2
/// subject to E(V) = 1 and ordered simplex weights. Throws SolverError when no
/// start yields a finite objective.
MixtureFit fit_mixture_moments(const MomentVector& m_hat, std::size_t S, const EstimationConfig& cfg);

/// Objective value of the moment-matching problem for a given mixture.
double moment_residual(const MomentVector& m_hat, const GammaMixture& mix);

struct EstimationResult {
    CovModel cov;
    GammaMixture mix;
    MomentVector m_hat;
    CumulantVector c_hat;
    double residual = 0.0;
    double r2_scale = 1.0;
    double cov_log_likelihood = 0.0;
    std::vector<std::string> diagnostics;
};

EstimationResult estimate_all(const SampleMatrix& data, const SiteSet& sites, const EstimationConfig& cfg);

}  // namespace smf
