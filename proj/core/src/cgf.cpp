#include "smf/cgf.hpp"

#include <cmath>
#include <string>

#include "smf/errors.hpp"

namespace smf {

namespace {

constexpr std::size_t kSpecMomentOrder = kMaxCumulantOrder / 2;

Eigen::VectorXd resolve_mean(const std::optional<Eigen::VectorXd>& mean, Eigen::Index n) {
    if (!mean) return Eigen::VectorXd::Zero(n);
    if (mean->size() != n)
        throw InputError("mean vector has length " + std::to_string(mean->size()) + ", expected " +
                         std::to_string(n));
    return *mean;
}

}  // namespace

DependenceSpec::DependenceSpec(std::optional<SiteSet> sites, std::optional<CovModel> cov,
                               Eigen::MatrixXd sigma, GammaMixture mix,
                               std::optional<Eigen::VectorXd> mean)
    : sites_(std::move(sites)),
      cov_(std::move(cov)),
      sigma_(std::move(sigma)),
      chol_(sigma_),
      mix_(std::move(mix)),
      mean_(resolve_mean(mean, sigma_.rows())),
      cumulants_(mixture_cumulants(mix_, kSpecMomentOrder)),
      moments_(mixture_moments(mix_, kSpecMomentOrder)) {
    if (std::abs(mix_.mean() - 1.0) > GammaMixture::kUnitMeanTolerance)
        throw DomainError("dependence spec requires E(V) = 1");
}

DependenceSpec::DependenceSpec(SiteSet sites, CovModel cov, GammaMixture mix,
                               std::optional<Eigen::VectorXd> mean)
    : DependenceSpec(std::optional<SiteSet>(sites), std::optional<CovModel>(cov), cov_matrix(cov, sites),
                     std::move(mix), std::move(mean)) {}

DependenceSpec DependenceSpec::from_matrix(Eigen::MatrixXd sigma, GammaMixture mix,
                                           std::optional<Eigen::VectorXd> mean) {
    return DependenceSpec(std::nullopt, std::nullopt, std::move(sigma), std::move(mix), std::move(mean));
}

DependenceSpec DependenceSpec::with_mixture(GammaMixture mix) const {
    return DependenceSpec(sites_, cov_, sigma_, std::move(mix), mean_);
}

namespace {

void check_dim(const DependenceSpec& spec, const Eigen::VectorXd& t) {
    if (static_cast<std::size_t>(t.size()) != spec.dim())
        throw InputError("argument has length " + std::to_string(t.size()) + ", expected " +
                         std::to_string(spec.dim()));
}

}  // namespace

double cgf_eval(const DependenceSpec& spec, const Eigen::VectorXd& t) {
    check_dim(spec, t);
    const double y = 0.5 * t.dot(spec.sigma() * t);
    return mixture_log_mgf(spec.mix(), y).value;
}

Eigen::VectorXd cgf_grad(const DependenceSpec& spec, const Eigen::VectorXd& t) {
    check_dim(spec, t);
    const Eigen::VectorXd st = spec.sigma() * t;
    const double y = 0.5 * t.dot(st);
    return mixture_log_mgf(spec.mix(), y).d1 * st;
}

Eigen::MatrixXd cgf_hessian(const DependenceSpec& spec, const Eigen::VectorXd& t) {
    check_dim(spec, t);
    const Eigen::VectorXd st = spec.sigma() * t;
    const double y = 0.5 * t.dot(st);
    const auto d = mixture_log_mgf(spec.mix(), y);
    Eigen::MatrixXd h = d.d1 * spec.sigma();
    h.noalias() += d.d2 * st * st.transpose();
    return h;
}

namespace {

void pair_recurse(std::vector<bool>& used, std::vector<std::pair<std::size_t, std::size_t>>& pairs,
                  const std::function<void(std::span<const std::pair<std::size_t, std::size_t>>)>& visit) {
    const std::size_t k = used.size();
    std::size_t first = 0;
    while (first < k && used[first]) ++first;
    if (first == k) {
        visit(pairs);
        return;
    }
    used[first] = true;
    for (std::size_t j = first + 1; j < k; ++j) {
        if (used[j]) continue;
        used[j] = true;
        pairs.emplace_back(first, j);
        pair_recurse(used, pairs, visit);
        pairs.pop_back();
        used[j] = false;
    }
    used[first] = false;
}

}  // namespace

void for_each_pair_partition(std::size_t k,
                             const std::function<void(std::span<const std::pair<std::size_t, std::size_t>>)>& visit) {
    if (k % 2 != 0) return;
    std::vector<bool> used(k, false);
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    pairs.reserve(k / 2);
    pair_recurse(used, pairs, visit);
}

std::size_t pair_partition_count(std::size_t k) {
    if (k % 2 != 0) return 0;
    std::size_t n = 1;
    for (std::size_t i = k - 1; i > 1; i -= 2) n *= i;
    return n;
}

double rho_factor(const Eigen::MatrixXd& sigma, std::span<const std::size_t> indices) {
    const std::size_t k = indices.size();
    if (k > kMaxCumulantOrder)
        throw SizeError("interdependence factors are limited to order 10, got " + std::to_string(k));
    if (k % 2 != 0) return 0.0;
    for (auto i : indices)
        if (i >= static_cast<std::size_t>(sigma.rows()))
            throw InputError("site index " + std::to_string(i) + " out of range");
    double total = 0.0;
    for_each_pair_partition(k, [&](std::span<const std::pair<std::size_t, std::size_t>> pairs) {
        double prod = 1.0;
        for (const auto& [a, b] : pairs)
            prod *= sigma(static_cast<Eigen::Index>(indices[a]), static_cast<Eigen::Index>(indices[b]));
        total += prod;
    });
    return total;
}

double joint_cumulant(const DependenceSpec& spec, std::span<const std::size_t> indices) {
    const std::size_t k = indices.size();
    if (k > kMaxCumulantOrder)
        throw SizeError("joint cumulants are limited to order 10, got " + std::to_string(k));
    if (k == 0 || k % 2 != 0) return 0.0;
    return spec.v_cumulants()(k / 2) * rho_factor(spec.sigma(), indices);
}

double product_moment(const DependenceSpec& spec, std::span<const std::size_t> indices) {
    const std::size_t k = indices.size();
    if (k > kMaxCumulantOrder)
        throw SizeError("product moments are limited to order 10, got " + std::to_string(k));
    if (k == 0) return 1.0;
    if (k % 2 != 0) return 0.0;
    return spec.v_moments()(k / 2) * rho_factor(spec.sigma(), indices);
}

double r2_moment(const MomentVector& m, std::size_t J, std::size_t k) {
    if (J == 0) throw DomainError("dimension J must be positive");
    if (k == 0 || k > m.order())
        throw DomainError("moment order " + std::to_string(k) + " not available");
    const double half_j = 0.5 * static_cast<double>(J);
    const double log_ratio = static_cast<double>(k) * std::log(2.0) +
                             std::lgamma(static_cast<double>(k) + half_j) - std::lgamma(half_j);
    return m(k) * std::exp(log_ratio);
}

}  // namespace smf
