#include "smf/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "parallel.hpp"
#include "smf/errors.hpp"
#include "smf/random.hpp"

namespace smf {

std::size_t threshold_count(const Eigen::Ref<const Eigen::VectorXd>& row, double a) {
    std::size_t c = 0;
    for (Eigen::Index j = 0; j < row.size(); ++j)
        if (row(j) > a) ++c;
    return c;
}

double exceedance_sum(const Eigen::Ref<const Eigen::VectorXd>& row, double a) {
    double s = 0.0;
    for (Eigen::Index j = 0; j < row.size(); ++j)
        if (row(j) > a) s += row(j);
    return s;
}

Eigen::VectorXd threshold_counts(const Eigen::MatrixXd& data, double a) {
    Eigen::VectorXd out(data.rows());
    for (Eigen::Index i = 0; i < data.rows(); ++i)
        out(i) = static_cast<double>(threshold_count(data.row(i).transpose(), a));
    return out;
}

Eigen::VectorXd exceedance_sums(const Eigen::MatrixXd& data, double a) {
    Eigen::VectorXd out(data.rows());
    for (Eigen::Index i = 0; i < data.rows(); ++i) out(i) = exceedance_sum(data.row(i).transpose(), a);
    return out;
}

Eigen::VectorXd empirical_cdf(const Eigen::Ref<const Eigen::VectorXd>& column) {
    std::vector<double> sorted(column.data(), column.data() + column.size());
    std::sort(sorted.begin(), sorted.end());
    const double denom = static_cast<double>(sorted.size()) + 1.0;
    Eigen::VectorXd out(column.size());
    for (Eigen::Index i = 0; i < column.size(); ++i) {
        const auto le = std::upper_bound(sorted.begin(), sorted.end(), column(i)) - sorted.begin();
        out(i) = static_cast<double>(le) / denom;
    }
    return out;
}

double congregation_entropy(const Eigen::MatrixXd& data, std::span<const std::size_t> indices, double b,
                            std::vector<std::string>* warnings) {
    if (indices.size() > kMaxCongregationDims)
        throw SizeError("congregation entropy supports at most 16 columns, got " + std::to_string(indices.size()));
    if (indices.empty()) throw InputError("congregation entropy needs at least one column");
    if (!(b > 0.0 && b < 1.0)) throw DomainError("congregation percentile must lie in (0, 1)");
    for (auto j : indices)
        if (j >= static_cast<std::size_t>(data.cols()))
            throw InputError("column index " + std::to_string(j) + " out of range");
    const auto n = static_cast<std::size_t>(data.rows());
    if (n == 0) throw InputError("congregation entropy needs data");
    if (n < 50 && warnings) warnings->push_back("congregation entropy on fewer than 50 realizations");

    std::vector<std::uint32_t> cell(n, 0);
    for (std::size_t k = 0; k < indices.size(); ++k) {
        const Eigen::VectorXd f = empirical_cdf(data.col(static_cast<Eigen::Index>(indices[k])));
        for (std::size_t i = 0; i < n; ++i)
            if (f(static_cast<Eigen::Index>(i)) > b) cell[i] |= (1u << k);
    }
    std::sort(cell.begin(), cell.end());
    double h = 0.0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && cell[j] == cell[i]) ++j;
        const double p = static_cast<double>(j - i) / static_cast<double>(n);
        h -= p * std::log(p);
        i = j;
    }
    return std::max(h, 0.0);
}

DiagnosticsReport congregation_ratio(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                                     std::span<const std::size_t> indices, std::span<const double> b_list) {
    DiagnosticsReport rep;
    rep.statistic = "congregation_ratio";
    for (double level : b_list) {
        const double num = congregation_entropy(a, indices, level, &rep.warnings);
        const double den = congregation_entropy(b, indices, level, &rep.warnings);
        rep.thresholds.push_back(level);
        if (den == 0.0) {
            rep.values.push_back(std::numeric_limits<double>::infinity());
            rep.flagged.push_back(true);
        } else {
            rep.values.push_back(num / den);
            rep.flagged.push_back(false);
        }
    }
    std::sort(rep.warnings.begin(), rep.warnings.end());
    rep.warnings.erase(std::unique(rep.warnings.begin(), rep.warnings.end()), rep.warnings.end());
    return rep;
}

GaussianFit fit_gaussian(const Eigen::MatrixXd& data) {
    if (data.rows() < 2) throw InputError("Gaussian fit needs at least two realizations");
    GaussianFit fit;
    fit.mean = data.colwise().mean().transpose();
    const Eigen::MatrixXd centred = data.rowwise() - fit.mean.transpose();
    fit.cov = centred.transpose() * centred / static_cast<double>(data.rows() - 1);
    return fit;
}

double nearest_rank_quantile(std::vector<double> values, double p) {
    if (values.empty()) throw InputError("quantile of an empty sample");
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError("quantile level must lie in [0, 1]");
    const auto n = values.size();
    auto rank = static_cast<std::size_t>(std::ceil(p * static_cast<double>(n)));
    rank = std::clamp<std::size_t>(rank, 1, n);
    std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(rank - 1), values.end());
    return values[rank - 1];
}

Band bootstrap_band(const GaussianFit& fit, std::size_t n, const VectorStatistic& statistic,
                    const BootstrapOptions& opts) {
    if (opts.reps < 1) throw InputError("bootstrap needs at least one replicate");
    if (n < 1) throw InputError("bootstrap needs n >= 1");
    const auto J = fit.mean.size();
    if (fit.cov.rows() != J || fit.cov.cols() != J) throw InputError("bootstrap fit has inconsistent sizes");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(fit.cov);
    const Eigen::MatrixXd root = eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();

    std::vector<Eigen::VectorXd> stats(opts.reps);
    detail::parallel_for(opts.reps, opts.threads, [&](std::size_t begin, std::size_t end) {
        std::normal_distribution<double> normal(0.0, 1.0);
        for (std::size_t r = begin; r < end; ++r) {
            Rng rng = make_rng(opts.seed, Stream::Bootstrap, r);
            normal.reset();
            Eigen::MatrixXd eps(J, static_cast<Eigen::Index>(n));
            for (Eigen::Index i = 0; i < eps.cols(); ++i)
                for (Eigen::Index j = 0; j < J; ++j) eps(j, i) = normal(rng);
            Eigen::MatrixXd sample = (root * eps).transpose();
            sample.rowwise() += fit.mean.transpose();
            stats[r] = statistic(sample);
        }
    });
    const auto m = stats.front().size();
    for (const auto& s : stats)
        if (s.size() != m) throw InputError("bootstrap statistic changed length between replicates");
    Band band{Eigen::VectorXd(m), Eigen::VectorXd(m), opts.reps};
    std::vector<double> col(opts.reps);
    for (Eigen::Index k = 0; k < m; ++k) {
        for (std::size_t r = 0; r < opts.reps; ++r) col[r] = stats[r](k);
        band.lower(k) = nearest_rank_quantile(col, opts.lower_q);
        band.upper(k) = nearest_rank_quantile(col, opts.upper_q);
    }
    return band;
}

QuantileTable quantile_table(const Eigen::Ref<const Eigen::VectorXd>& values, std::span<const double> probs,
                             const std::optional<QuantileTable>& baseline) {
    if (values.size() < 1) throw InputError("quantile table needs at least one value");
    std::vector<double> v(values.data(), values.data() + values.size());
    std::sort(v.begin(), v.end());
    QuantileTable t;
    for (double p : probs) {
        t.probs.push_back(p);
        t.values.push_back(nearest_rank_quantile(v, p));
    }
    if (baseline) {
        if (baseline->values.size() != t.values.size()) throw InputError("baseline table has a different length");
        for (std::size_t i = 0; i < t.values.size(); ++i) {
            const double q0 = baseline->values[i];
            t.relative_increase.push_back(q0 == 0.0 ? std::numeric_limits<double>::quiet_NaN()
                                                    : 100.0 * (t.values[i] - q0) / std::abs(q0));
        }
    }
    return t;
}

Eigen::MatrixXd quantile_match(const Eigen::MatrixXd& x, const Eigen::MatrixXd& z) {
    if (x.rows() != z.rows() || x.cols() != z.cols()) throw InputError("quantile matching needs equal shapes");
    const auto n = static_cast<std::size_t>(x.rows());
    Eigen::MatrixXd w(x.rows(), x.cols());
    std::vector<std::size_t> order(n);
    std::vector<double> zs(n);
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return x(static_cast<Eigen::Index>(a), j) < x(static_cast<Eigen::Index>(b), j);
        });
        for (std::size_t i = 0; i < n; ++i) zs[i] = z(static_cast<Eigen::Index>(i), j);
        std::sort(zs.begin(), zs.end());
        for (std::size_t r = 0; r < n; ++r) w(static_cast<Eigen::Index>(order[r]), j) = zs[r];
    }
    return w;
}

}  // namespace smf
