#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "smf/diagnostics.hpp"
#include "smf/estimate.hpp"
#include "smf/mixture.hpp"
#include "smf/simulate.hpp"

namespace smf {

/// Five-component gamma mixture of the synthetic study, E(V) = 0.99856.
GammaMixture reference_mixture();
/// Same mixture with scales divided by its mean so E(V) = 1.
GammaMixture reference_field_mixture();

/// 1-based station numbers: the target first, then conditioning stations in order.
inline constexpr std::array<std::size_t, 7> kConditioningStations{3, 28, 19, 16, 25, 9, 21};
/// First realization of the Gaussian field at those stations.
inline constexpr std::array<double, 7> kConditioningValues{-1.489, -0.626, -0.050, 0.068, 0.491, 0.832, -0.666};

inline constexpr std::uint64_t kDefaultLayoutSeed = 30;

/// `count` distinct grid indices drawn uniformly without replacement; station
/// k (1-based) is element k - 1.
std::vector<std::size_t> station_layout(std::size_t grid_sites, std::size_t count, std::uint64_t seed);

struct SyntheticConfig {
    GridSpec grid{64, 64, 1.0, {0.0, 0.0}};
    std::size_t grid_cap = kDefaultGridCap;
    std::size_t n = 2000;
    std::size_t stations = 30;
    std::uint64_t layout_seed = kDefaultLayoutSeed;
    double range = 20.0;
    double nugget = 0.0;
    double sill = 1.0;
    std::vector<double> thresholds{1.28, 2.5};
    double sum_threshold = 0.0;
    std::vector<double> sum_probs{0.8, 0.9, 0.95, 0.99, 0.995, 0.999, 1.0};
    std::vector<double> cond_probs{0.8, 0.9, 0.95, 0.99, 0.995, 0.999, 0.9999, 0.99999};
    std::vector<double> scalings{0.64, 1.0, 2.0};
    std::vector<std::size_t> cond_counts{1, 2, 4, 6};
    EstimationConfig estimation{};
    std::uint64_t seed = 1;
    std::size_t threads = 1;

    void validate() const;
};

/// Field order in the report: Gaussian, scale mixture, quantile matched.
inline constexpr std::array<const char*, 3> kFieldNames{"gauss", "scalemix", "scalemix_qq"};

struct ConditionalCurveRow {
    double scaling = 0.0;
    std::size_t count = 0;
    double prob = 0.0;
    double gaussian = 0.0;
    double scalemix = 0.0;
};

struct SyntheticReport {
    std::vector<std::size_t> stations;  // 0-based grid indices
    std::array<QuantileTable, 3> sums;
    std::vector<double> thresholds;
    std::vector<Eigen::MatrixXd> counts;  // per threshold, n x 3
    std::vector<MomentVector> m_hat;  // per field
    std::vector<CumulantVector> c_hat;
    std::vector<double> residuals;
    std::vector<ConditionalCurveRow> conditional;
    std::vector<std::string> diagnostics;
};

/// Upper conditional quantiles of the target station given the first `count`
/// conditioning stations, valued at scaling * kConditioningValues, under the
/// Gaussian and the scale-mixture models.
std::vector<ConditionalCurveRow> conditional_curves(const SiteSet& station_sites, const CovModel& cov,
                                                    const GammaMixture& mix, std::span<const double> scalings,
                                                    std::span<const std::size_t> counts,
                                                    std::span<const double> probs);

/// Standard normal quantile.
double normal_quantile(double p);

SyntheticReport run_synthetic(const SyntheticConfig& cfg);

}  // namespace smf
