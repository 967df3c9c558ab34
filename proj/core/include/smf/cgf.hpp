#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "smf/covmodel.hpp"
#include "smf/mixture.hpp"

namespace smf {

/// Full field model: sites, mean, covariance (with cached Cholesky factor)
/// and the scaling variable V with E(V) = 1.
///
/// The cumulant generating function of the centred field is
///   K_X(t) = delta(t' Sigma t / 2),   delta = log M_V,
/// i.e. the series sum_r c_r (t' Sigma t / 2)^r / r! summed in closed form.
class DependenceSpec {
public:
    DependenceSpec(SiteSet sites, CovModel cov, GammaMixture mix,
                   std::optional<Eigen::VectorXd> mean = std::nullopt);

    /// Spec over an explicit covariance matrix (no geometry attached).
    static DependenceSpec from_matrix(Eigen::MatrixXd sigma, GammaMixture mix,
                                      std::optional<Eigen::VectorXd> mean = std::nullopt);

    std::size_t dim() const noexcept { return static_cast<std::size_t>(sigma_.rows()); }
    const std::optional<SiteSet>& sites() const noexcept { return sites_; }
    const std::optional<CovModel>& cov_model() const noexcept { return cov_; }
    const Eigen::MatrixXd& sigma() const noexcept { return sigma_; }
    const CholeskyFactor& chol() const noexcept { return chol_; }
    const GammaMixture& mix() const noexcept { return mix_; }
    const Eigen::VectorXd& mean() const noexcept { return mean_; }

    /// Cumulants and moments of V up to kMaxCumulantOrder / 2.
    const CumulantVector& v_cumulants() const noexcept { return cumulants_; }
    const MomentVector& v_moments() const noexcept { return moments_; }

    /// Same sites, covariance and mean; different scaling variable.
    DependenceSpec with_mixture(GammaMixture mix) const;

private:
    DependenceSpec(std::optional<SiteSet> sites, std::optional<CovModel> cov, Eigen::MatrixXd sigma,
                   GammaMixture mix, std::optional<Eigen::VectorXd> mean);

    std::optional<SiteSet> sites_;
    std::optional<CovModel> cov_;
    Eigen::MatrixXd sigma_;
    CholeskyFactor chol_;
    GammaMixture mix_;
    Eigen::VectorXd mean_;
    CumulantVector cumulants_;
    MomentVector moments_;
};

inline constexpr std::size_t kMaxCumulantOrder = 10;

/// K_X(t). Throws DomainError when t' Sigma t / 2 leaves the m.g.f. strip.
double cgf_eval(const DependenceSpec& spec, const Eigen::VectorXd& t);
/// grad K = delta'(y) Sigma t.
Eigen::VectorXd cgf_grad(const DependenceSpec& spec, const Eigen::VectorXd& t);
/// K'' = delta'(y) Sigma + delta''(y) (Sigma t)(Sigma t)'.
Eigen::MatrixXd cgf_hessian(const DependenceSpec& spec, const Eigen::VectorXd& t);

/// Calls `visit` once for every perfect matching of {0, .., k-1}; each
/// matching is passed as k/2 index pairs. Pairs are formed by matching the
/// smallest unpaired element with each remaining one in turn.
void for_each_pair_partition(std::size_t k,
                             const std::function<void(std::span<const std::pair<std::size_t, std::size_t>>)>& visit);

std::size_t pair_partition_count(std::size_t k);

/// Covariance interdependence factor: sum over pair partitions P of the index
/// tuple of prod_{(a,b) in P} Sigma(i_a, i_b). Odd length gives 0.
double rho_factor(const Eigen::MatrixXd& sigma, std::span<const std::size_t> indices);

/// Joint cumulant of X_{i_1}, .., X_{i_k}: c_{k/2} * rho_factor. Odd orders are
/// exactly zero; k > 10 throws SizeError.
double joint_cumulant(const DependenceSpec& spec, std::span<const std::size_t> indices);

/// Centred product moment E(prod X_{i_a}): m_{k/2} * rho_factor.
double product_moment(const DependenceSpec& spec, std::span<const std::size_t> indices);

/// E((R^2)^k) = m_k 2^k Gamma(k + J/2) / Gamma(J/2), for R^2 = V * chi^2_J.
double r2_moment(const MomentVector& m, std::size_t J, std::size_t k);

}  // namespace smf
