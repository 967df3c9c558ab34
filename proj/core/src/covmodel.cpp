#include "smf/covmodel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "smf/errors.hpp"

namespace smf {

std::string_view to_string(CovKind kind) {
    switch (kind) {
    case CovKind::PoweredExponential: return "powered_exponential";
    case CovKind::Matern: return "matern";
    }
    return "unknown";
}

CovKind cov_kind_from_string(std::string_view name) {
    if (name == "powered_exponential" || name == "exponential") return CovKind::PoweredExponential;
    if (name == "matern") return CovKind::Matern;
    throw InputError("unknown covariance kind '" + std::string(name) + "'");
}

CovModel::CovModel(CovKind kind, double range, double shape, double nugget, double sill)
    : kind_(kind), range_(range), shape_(shape), nugget_(nugget), sill_(sill) {
    if (!(range > 0.0) || !std::isfinite(range))
        throw DomainError("covariance range must be positive and finite");
    if (!(shape > 0.0) || !std::isfinite(shape))
        throw DomainError("covariance shape must be positive and finite");
    if (kind == CovKind::PoweredExponential && shape > 2.0)
        throw DomainError("powered exponential shape must lie in (0, 2]");
    if (kind == CovKind::Matern && shape > kMaxMaternShape)
        throw DomainError("Matern smoothness must lie in (0, 50]");
    if (!(nugget >= 0.0) || !std::isfinite(nugget))
        throw DomainError("nugget must be non-negative and finite");
    if (!(sill > 0.0) || !std::isfinite(sill))
        throw DomainError("partial sill must be positive and finite");
}

double distance(const Point2& a, const Point2& b) noexcept {
    return std::hypot(a.x - b.x, a.y - b.y);
}

SiteSet::SiteSet(std::vector<Point2> coords, bool allow_coincident)
    : coords_(std::move(coords)), allow_coincident_(allow_coincident) {
    if (coords_.empty()) throw InputError("site set must contain at least one site");
    for (std::size_t i = 0; i < coords_.size(); ++i) {
        if (!std::isfinite(coords_[i].x) || !std::isfinite(coords_[i].y))
            throw InputError("site " + std::to_string(i) + " has non-finite coordinates");
    }
    if (!allow_coincident_) {
        // Sort a permutation by coordinates; duplicates become neighbours.
        std::vector<std::size_t> order(coords_.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            if (coords_[a].x != coords_[b].x) return coords_[a].x < coords_[b].x;
            return coords_[a].y < coords_[b].y;
        });
        for (std::size_t k = 1; k < order.size(); ++k) {
            const auto& p = coords_[order[k - 1]];
            const auto& q = coords_[order[k]];
            if (p.x == q.x && p.y == q.y)
                throw InputError("sites " + std::to_string(order[k - 1]) + " and " +
                                 std::to_string(order[k]) + " coincide");
        }
    }
}

SiteSet SiteSet::subset(std::span<const std::size_t> indices) const {
    std::vector<Point2> out;
    out.reserve(indices.size());
    for (auto i : indices) {
        if (i >= coords_.size())
            throw InputError("site index " + std::to_string(i) + " out of range");
        out.push_back(coords_[i]);
    }
    return SiteSet(std::move(out), allow_coincident_);
}

SiteSet SiteSet::concat(const SiteSet& other, bool allow_coincident) const {
    std::vector<Point2> out(coords_.begin(), coords_.end());
    out.insert(out.end(), other.coords_.begin(), other.coords_.end());
    return SiteSet(std::move(out), allow_coincident);
}

namespace {

double matern_correlation(double x, double nu) {
    if (x == 0.0) return 1.0;
    if (std::abs(nu - 0.5) < 1e-12) return std::exp(-x);
    if (x > 700.0) return 0.0;
    const double k = std::cyl_bessel_k(nu, x);
    if (k == 0.0) return 0.0;
    const double log_c = (1.0 - nu) * std::log(2.0) - std::lgamma(nu) + nu * std::log(x) + std::log(k);
    return std::min(1.0, std::exp(log_c));
}

}  // namespace

double cov_value(const CovModel& model, double d) {
    if (!(d >= 0.0) || !std::isfinite(d)) throw DomainError("distance must be finite and non-negative");
    const double x = d / model.range();
    double rho = 0.0;
    switch (model.kind()) {
    case CovKind::PoweredExponential: rho = std::exp(-std::pow(x, model.shape())); break;
    case CovKind::Matern: rho = matern_correlation(x, model.shape()); break;
    }
    return (d == 0.0 ? model.nugget() : 0.0) + model.sill() * rho;
}

Eigen::MatrixXd cov_matrix(const CovModel& model, const SiteSet& sites) {
    const auto n = static_cast<Eigen::Index>(sites.size());
    Eigen::MatrixXd sigma(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        sigma(j, j) = cov_value(model, 0.0);
        for (Eigen::Index i = 0; i < j; ++i) {
            const double d = distance(sites[static_cast<std::size_t>(i)], sites[static_cast<std::size_t>(j)]);
            if (!std::isfinite(d)) throw InputError("non-finite inter-site distance");
            sigma(i, j) = cov_value(model, d);
        }
    }
    sigma.triangularView<Eigen::StrictlyLower>() = sigma.transpose();
    return sigma;
}

Eigen::MatrixXd cross_cov(const CovModel& model, const SiteSet& a, const SiteSet& b) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(a.size()), static_cast<Eigen::Index>(b.size()));
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j)
            out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = cov_value(model, distance(a[i], b[j]));
    return out;
}

Eigen::VectorXd mean_vector(const MeanModel& mean, const SiteSet& sites,
                            const CovariateTable& covariates) {
    const auto n = static_cast<Eigen::Index>(sites.size());
    const auto p = static_cast<Eigen::Index>(mean.drift_coeffs.size());
    Eigen::VectorXd mu = Eigen::VectorXd::Constant(n, mean.intercept);
    if (p == 0) return mu;
    if (covariates.rows() != n)
        throw InputError("covariate table has " + std::to_string(covariates.rows()) +
                         " rows but there are " + std::to_string(n) + " sites");
    if (covariates.cols() != p)
        throw InputError("covariate table has " + std::to_string(covariates.cols()) +
                         " columns but the mean model has " + std::to_string(p) + " coefficients");
    const Eigen::Map<const Eigen::VectorXd> coeffs(mean.drift_coeffs.data(), p);
    mu += covariates * coeffs;
    return mu;
}

CholeskyFactor::CholeskyFactor(const Eigen::MatrixXd& matrix) {
    if (matrix.rows() != matrix.cols()) throw InputError("Cholesky input must be square");
    const auto n = matrix.rows();
    if (!matrix.allFinite()) throw InputError("Cholesky input contains non-finite values");
    const double scale = matrix.cwiseAbs().maxCoeff();
    if ((matrix - matrix.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(scale, 1.0))
        throw InputError("Cholesky input is not symmetric");

    Eigen::LLT<Eigen::MatrixXd> llt(matrix);
    if (llt.info() == Eigen::Success) {
        lower_ = llt.matrixL();
        return;
    }
    // Locate the failing pivot with the unblocked column algorithm.
    Eigen::MatrixXd l = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        const double d = matrix(j, j) - l.row(j).head(j).squaredNorm();
        if (!(d > 0.0)) throw FactorizationError(static_cast<std::size_t>(j), d);
        l(j, j) = std::sqrt(d);
        for (Eigen::Index i = j + 1; i < n; ++i)
            l(i, j) = (matrix(i, j) - l.row(i).head(j).dot(l.row(j).head(j))) / l(j, j);
    }
    // Blocked and unblocked paths disagree only on near-singular input.
    throw FactorizationError(static_cast<std::size_t>(n - 1), 0.0);
}

Eigen::VectorXd CholeskyFactor::solve_lower(const Eigen::VectorXd& b) const {
    return lower_.triangularView<Eigen::Lower>().solve(b);
}

Eigen::VectorXd CholeskyFactor::solve(const Eigen::VectorXd& b) const {
    Eigen::VectorXd y = lower_.triangularView<Eigen::Lower>().solve(b);
    return lower_.transpose().triangularView<Eigen::Upper>().solve(y);
}

Eigen::MatrixXd CholeskyFactor::solve(const Eigen::MatrixXd& b) const {
    Eigen::MatrixXd y = lower_.triangularView<Eigen::Lower>().solve(b);
    return lower_.transpose().triangularView<Eigen::Upper>().solve(y);
}

double CholeskyFactor::quadratic_form(const Eigen::VectorXd& b) const {
    return solve_lower(b).squaredNorm();
}

double CholeskyFactor::log_det() const {
    return 2.0 * lower_.diagonal().array().log().sum();
}

Eigen::MatrixXd CholeskyFactor::reconstruct() const {
    return lower_ * lower_.transpose();
}

CholeskyFactor cholesky_factor(const Eigen::MatrixXd& matrix) {
    return CholeskyFactor(matrix);
}

}  // namespace smf
