#pragma once

#include <cstddef>
#include <cstdint>

#include <Eigen/Dense>

#include "smf/cgf.hpp"
#include "smf/sample_matrix.hpp"

namespace smf {

/// Regular rectangular grid of nx * ny sites.
struct GridSpec {
    std::size_t nx = 1;
    std::size_t ny = 1;
    double spacing = 1.0;
    Point2 origin{};
};

/// Dense Cholesky limits simulation to this many sites unless overridden.
inline constexpr std::size_t kDefaultGridCap = 10000;

/// Row-major enumeration: site index = iy * nx + ix, x varying fastest.
SiteSet grid_spec_to_sites(const GridSpec& grid, std::size_t cap = kDefaultGridCap);

/// n realizations mu + L eps. Row i uses the generator derived from
/// (seed, Stream::Gaussian, i), so results do not depend on scheduling.
SampleMatrix sample_gaussian(const DependenceSpec& spec, std::size_t n, std::uint64_t seed,
                             std::size_t threads = 1);

/// v_i for realization i from the generator (seed, Stream::Scaling, i).
Eigen::VectorXd sample_scalings(const GammaMixture& mix, std::size_t n, std::uint64_t seed);

/// n realizations mu + sqrt(v_i) L eps with one v_i per realization. The eps
/// draws are identical to sample_gaussian for the same seed.
SampleMatrix sample_field(const DependenceSpec& spec, std::size_t n, std::uint64_t seed,
                          std::size_t threads = 1);

struct ConsistencyReport {
    std::size_t n = 0;
    std::size_t shared_dims = 0;
    /// max |mean_a - mean_b| / sqrt(se_a^2 + se_b^2) over all second-order
    /// products X_i X_j and fourth-order products X_i^2 X_j^2 of shared columns.
    double max_order2_z = 0.0;
    double max_order4_z = 0.0;
    double max_z() const { return max_order2_z > max_order4_z ? max_order2_z : max_order4_z; }
};

/// Simulates the J-site field and, independently, a (J+1)-site field with one
/// extra site appended, and compares moments of the shared J columns.
/// Requires a spec with sites and a covariance model.
ConsistencyReport marginalize_check(const DependenceSpec& spec, std::size_t n, std::uint64_t seed,
                                    std::size_t threads = 1);

}  // namespace smf
