#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace smf {

enum class CovKind { PoweredExponential, Matern };

std::string_view to_string(CovKind kind);
CovKind cov_kind_from_string(std::string_view name);

/// Isotropic covariance function with nugget:
///   C(d) = nugget * 1{d == 0} + sill * rho(d / range; shape)
/// where rho is the powered exponential exp(-x^shape) or the Matern
/// correlation with smoothness `shape`.
class CovModel {
public:
    /// Throws DomainError when a parameter is outside its domain
    /// (range > 0, shape > 0 and <= 2 for PoweredExponential, shape <= 50 for
    /// Matern, nugget >= 0, sill > 0).
    CovModel(CovKind kind, double range, double shape, double nugget, double sill);

    CovKind kind() const noexcept { return kind_; }
    double range() const noexcept { return range_; }
    double shape() const noexcept { return shape_; }
    double nugget() const noexcept { return nugget_; }
    double sill() const noexcept { return sill_; }
    double total_variance() const noexcept { return nugget_ + sill_; }

    static constexpr double kMaxMaternShape = 50.0;

private:
    CovKind kind_;
    double range_;
    double shape_;
    double nugget_;
    double sill_;
};

struct Point2 {
    double x = 0.0;
    double y = 0.0;
};

double distance(const Point2& a, const Point2& b) noexcept;

/// Ordered set of J >= 1 planar sites. Coincident sites are rejected unless
/// explicitly allowed.
class SiteSet {
public:
    explicit SiteSet(std::vector<Point2> coords, bool allow_coincident = false);

    std::size_t size() const noexcept { return coords_.size(); }
    const Point2& operator[](std::size_t i) const { return coords_[i]; }
    std::span<const Point2> coords() const noexcept { return coords_; }
    bool allows_coincident() const noexcept { return allow_coincident_; }

    SiteSet subset(std::span<const std::size_t> indices) const;
    /// Sites of `this` followed by those of `other`.
    SiteSet concat(const SiteSet& other, bool allow_coincident) const;

private:
    std::vector<Point2> coords_;
    bool allow_coincident_;
};

/// Linear mean model mu_j = intercept + sum_p coeff_p * covariate_{j,p}.
struct MeanModel {
    double intercept = 0.0;
    std::vector<double> drift_coeffs;
};

/// J x P table of per-site covariates (rows aligned with a SiteSet).
using CovariateTable = Eigen::MatrixXd;

double cov_value(const CovModel& model, double d);

/// Sigma_ij = C(|s_i - s_j|). The upper triangle is assembled and mirrored so
/// the result is exactly symmetric.
Eigen::MatrixXd cov_matrix(const CovModel& model, const SiteSet& sites);

/// Rectangular cross-covariance block C(|a_i - b_j|).
Eigen::MatrixXd cross_cov(const CovModel& model, const SiteSet& a, const SiteSet& b);

Eigen::VectorXd mean_vector(const MeanModel& mean, const SiteSet& sites,
                            const CovariateTable& covariates);

/// Lower Cholesky factor of a symmetric positive definite matrix. No jitter is
/// ever added; a non-positive pivot raises FactorizationError.
class CholeskyFactor {
public:
    CholeskyFactor() = default;
    explicit CholeskyFactor(const Eigen::MatrixXd& matrix);

    std::size_t size() const noexcept { return static_cast<std::size_t>(lower_.rows()); }
    const Eigen::MatrixXd& lower() const noexcept { return lower_; }

    /// Solves L y = b.
    Eigen::VectorXd solve_lower(const Eigen::VectorXd& b) const;
    /// Solves (L L^T) x = b.
    Eigen::VectorXd solve(const Eigen::VectorXd& b) const;
    Eigen::MatrixXd solve(const Eigen::MatrixXd& b) const;
    /// b^T (L L^T)^{-1} b.
    double quadratic_form(const Eigen::VectorXd& b) const;
    double log_det() const;
    Eigen::MatrixXd reconstruct() const;

private:
    Eigen::MatrixXd lower_;
};

CholeskyFactor cholesky_factor(const Eigen::MatrixXd& matrix);

}  // namespace smf
