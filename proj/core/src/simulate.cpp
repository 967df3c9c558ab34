#include "smf/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "parallel.hpp"
#include "smf/errors.hpp"

namespace smf {

std::string_view to_string(FieldKind kind) {
    switch (kind) {
    case FieldKind::Gaussian: return "gaussian";
    case FieldKind::ScaleMixture: return "scalemix";
    case FieldKind::Observed: return "observed";
    }
    return "unknown";
}

FieldKind field_kind_from_string(std::string_view name) {
    if (name == "gaussian") return FieldKind::Gaussian;
    if (name == "scalemix") return FieldKind::ScaleMixture;
    if (name == "observed") return FieldKind::Observed;
    throw InputError("unknown field kind '" + std::string(name) + "'");
}

SampleMatrix::SampleMatrix(Eigen::MatrixXd values, FieldKind kind, std::optional<Eigen::VectorXd> v_draws)
    : values_(std::move(values)), kind_(kind), v_draws_(std::move(v_draws)) {
    if ((kind_ == FieldKind::ScaleMixture) != v_draws_.has_value())
        throw InputError("scaling draws must be present exactly for scale-mixture samples");
    if (v_draws_ && v_draws_->size() != values_.rows())
        throw InputError("scaling draws do not match the number of realizations");
}

SiteSet grid_spec_to_sites(const GridSpec& grid, std::size_t cap) {
    if (grid.nx == 0 || grid.ny == 0) throw InputError("grid dimensions must be positive");
    if (!(grid.spacing > 0.0)) throw InputError("grid spacing must be positive");
    if (grid.nx > cap || grid.ny > cap || grid.nx * grid.ny > cap)
        throw SizeError("grid of " + std::to_string(grid.nx) + "x" + std::to_string(grid.ny) +
                        " sites exceeds the cap of " + std::to_string(cap) + " (raise it with --grid-cap)");
    std::vector<Point2> pts;
    pts.reserve(grid.nx * grid.ny);
    for (std::size_t iy = 0; iy < grid.ny; ++iy)
        for (std::size_t ix = 0; ix < grid.nx; ++ix)
            pts.push_back({grid.origin.x + grid.spacing * static_cast<double>(ix),
                           grid.origin.y + grid.spacing * static_cast<double>(iy)});
    return SiteSet(std::move(pts));
}

namespace {

/// J x n matrix of correlated zero-mean Gaussian draws, column i from its own stream.
Eigen::MatrixXd correlated_draws(const DependenceSpec& spec, std::size_t n, std::uint64_t seed,
                                 std::size_t threads) {
    const auto J = static_cast<Eigen::Index>(spec.dim());
    Eigen::MatrixXd eps(J, static_cast<Eigen::Index>(n));
    detail::parallel_for(n, threads, [&](std::size_t begin, std::size_t end) {
        std::normal_distribution<double> normal(0.0, 1.0);
        for (std::size_t i = begin; i < end; ++i) {
            Rng rng = make_rng(seed, Stream::Gaussian, i);
            normal.reset();
            for (Eigen::Index j = 0; j < J; ++j) eps(j, static_cast<Eigen::Index>(i)) = normal(rng);
        }
    });
    return spec.chol().lower().triangularView<Eigen::Lower>() * eps;
}

}  // namespace

SampleMatrix sample_gaussian(const DependenceSpec& spec, std::size_t n, std::uint64_t seed,
                             std::size_t threads) {
    Eigen::MatrixXd x = correlated_draws(spec, n, seed, threads).transpose();
    x.rowwise() += spec.mean().transpose();
    return SampleMatrix(std::move(x), FieldKind::Gaussian);
}

Eigen::VectorXd sample_scalings(const GammaMixture& mix, std::size_t n, std::uint64_t seed) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        Rng rng = make_rng(seed, Stream::Scaling, i);
        v(static_cast<Eigen::Index>(i)) = sample_mixture(mix, rng);
    }
    return v;
}

SampleMatrix sample_field(const DependenceSpec& spec, std::size_t n, std::uint64_t seed,
                          std::size_t threads) {
    Eigen::MatrixXd x = correlated_draws(spec, n, seed, threads).transpose();
    Eigen::VectorXd v = sample_scalings(spec.mix(), n, seed);
    x.array().colwise() *= v.array().sqrt();
    x.rowwise() += spec.mean().transpose();
    return SampleMatrix(std::move(x), FieldKind::ScaleMixture, std::move(v));
}

namespace {

struct MomentStats {
    Eigen::VectorXd mean;
    Eigen::VectorXd var;
};

/// Means and variances of the products X_i X_j (order 2) or X_i^2 X_j^2
/// (order 4), i <= j < shared, after removing the model mean.
MomentStats product_stats(const Eigen::MatrixXd& x, const Eigen::VectorXd& mu, Eigen::Index shared, int order) {
    const Eigen::Index n = x.rows();
    const Eigen::Index pairs = shared * (shared + 1) / 2;
    MomentStats st{Eigen::VectorXd::Zero(pairs), Eigen::VectorXd::Zero(pairs)};
    Eigen::VectorXd sum2 = Eigen::VectorXd::Zero(pairs);
    for (Eigen::Index r = 0; r < n; ++r) {
        Eigen::Index p = 0;
        for (Eigen::Index i = 0; i < shared; ++i) {
            for (Eigen::Index j = i; j < shared; ++j, ++p) {
                const double a = x(r, i) - mu(i), b = x(r, j) - mu(j);
                const double v = order == 2 ? a * b : a * a * b * b;
                st.mean(p) += v;
                sum2(p) += v * v;
            }
        }
    }
    const double dn = static_cast<double>(n);
    st.mean /= dn;
    st.var = (sum2 / dn - st.mean.cwiseAbs2()) * (dn / (dn - 1.0));
    return st;
}

Point2 extension_site(const SiteSet& sites) {
    const Point2 a = sites[0];
    double nearest = 0.0;
    for (std::size_t i = 1; i < sites.size(); ++i) {
        const double d = distance(a, sites[i]);
        if (nearest == 0.0 || (d > 0.0 && d < nearest)) nearest = d;
    }
    if (nearest == 0.0) nearest = 1.0;
    return {a.x + 0.37 * nearest, a.y + 0.61 * nearest};
}

}  // namespace

ConsistencyReport marginalize_check(const DependenceSpec& spec, std::size_t n, std::uint64_t seed,
                                    std::size_t threads) {
    if (spec.dim() < 2) throw InputError("consistency check needs at least two sites");
    if (n < 2) throw InputError("consistency check needs at least two realizations");
    if (!spec.sites() || !spec.cov_model())
        throw InputError("consistency check needs a spec built from sites and a covariance model");
    const SiteSet& sites = *spec.sites();
    const SiteSet extra({extension_site(sites)});
    const SiteSet extended_sites = sites.concat(extra, sites.allows_coincident());
    Eigen::VectorXd extended_mean(static_cast<Eigen::Index>(extended_sites.size()));
    extended_mean << spec.mean(), spec.mean().mean();
    const DependenceSpec extended(extended_sites, *spec.cov_model(), spec.mix(), extended_mean);

    const SampleMatrix a = sample_field(spec, n, seed, threads);
    const SampleMatrix b = sample_field(extended, n, mix64(seed) + 1, threads);

    const auto shared = static_cast<Eigen::Index>(spec.dim());
    ConsistencyReport rep;
    rep.n = n;
    rep.shared_dims = spec.dim();
    for (int order : {2, 4}) {
        const auto sa = product_stats(a.values(), spec.mean(), shared, order);
        const auto sb = product_stats(b.values(), extended_mean, shared, order);
        double worst = 0.0;
        for (Eigen::Index p = 0; p < sa.mean.size(); ++p) {
            const double se = std::sqrt((sa.var(p) + sb.var(p)) / static_cast<double>(n));
            const double z = se > 0.0 ? std::abs(sa.mean(p) - sb.mean(p)) / se : 0.0;
            worst = std::max(worst, z);
        }
        (order == 2 ? rep.max_order2_z : rep.max_order4_z) = worst;
    }
    return rep;
}

}  // namespace smf
