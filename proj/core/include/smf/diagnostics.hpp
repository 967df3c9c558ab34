#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace smf {

/// Number of components strictly above a.
std::size_t threshold_count(const Eigen::Ref<const Eigen::VectorXd>& row, double a);

/// Sum of the components strictly above a.
double exceedance_sum(const Eigen::Ref<const Eigen::VectorXd>& row, double a);

/// Row-wise versions over an n x J matrix.
Eigen::VectorXd threshold_counts(const Eigen::MatrixXd& data, double a);
Eigen::VectorXd exceedance_sums(const Eigen::MatrixXd& data, double a);

/// #{x_i <= x_k} / (n + 1) for each entry of a column.
Eigen::VectorXd empirical_cdf(const Eigen::Ref<const Eigen::VectorXd>& column);

inline constexpr std::size_t kMaxCongregationDims = 16;

/// Plug-in entropy (nats) of the 2^K cells of the indicators F_j(X_j) > b over
/// the selected columns, F_j the empirical CDF above. K > 16 throws SizeError.
/// A warning is appended when n < 50.
double congregation_entropy(const Eigen::MatrixXd& data, std::span<const std::size_t> indices, double b,
                            std::vector<std::string>* warnings = nullptr);

struct DiagnosticsReport {
    std::string statistic;
    std::vector<double> thresholds;
    std::vector<double> values;
    std::vector<double> lower;  // empty without a band
    std::vector<double> upper;
    std::vector<bool> flagged;  // e.g. zero denominators
    std::size_t reps = 0;
    std::vector<std::string> warnings;
};

/// r_b = congr_b(A) / congr_b(B) for each b. A zero denominator gives +inf
/// and sets the flag for that b.
DiagnosticsReport congregation_ratio(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                                     std::span<const std::size_t> indices, std::span<const double> b_list);

/// Sample mean and (n - 1)-normalized covariance of the columns.
struct GaussianFit {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
};
GaussianFit fit_gaussian(const Eigen::MatrixXd& data);

using VectorStatistic = std::function<Eigen::VectorXd(const Eigen::MatrixXd&)>;

struct BootstrapOptions {
    std::size_t reps = 1000;
    double lower_q = 0.05;
    double upper_q = 0.95;
    std::uint64_t seed = 1;
    std::size_t threads = 1;
};

struct Band {
    Eigen::VectorXd lower;
    Eigen::VectorXd upper;
    std::size_t reps = 0;
};

/// Parametric bootstrap: reps Gaussian data sets of n rows from the fit, the
/// statistic evaluated on each, and pointwise nearest-rank quantiles.
Band bootstrap_band(const GaussianFit& fit, std::size_t n, const VectorStatistic& statistic,
                    const BootstrapOptions& opts = {});

/// Nearest-rank quantile: the value of rank ceil(p n), the minimum for p = 0.
double nearest_rank_quantile(std::vector<double> values, double p);

struct QuantileTable {
    std::vector<double> probs;
    std::vector<double> values;
    /// Percentage increase over the baseline, 100 (q - q0) / |q0|.
    std::vector<double> relative_increase;
};

QuantileTable quantile_table(const Eigen::Ref<const Eigen::VectorXd>& values, std::span<const double> probs,
                             const std::optional<QuantileTable>& baseline = std::nullopt);

/// W_ij = F_{Z_j}^{-1}(F_{X_j}(X_ij)) with empirical distributions: each column
/// of x is replaced by the sorted values of the matching column of z, placed by
/// the ranks of x. Ties in x are ranked by row order.
Eigen::MatrixXd quantile_match(const Eigen::MatrixXd& x, const Eigen::MatrixXd& z);

}  // namespace smf
