#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "smf/diagnostics.hpp"
#include "smf/errors.hpp"

using namespace smf;

namespace {

Eigen::MatrixXd gaussian_data(Eigen::Index n, Eigen::Index J, double rho, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    Eigen::MatrixXd x(n, J);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double common = nd(rng);
        for (Eigen::Index j = 0; j < J; ++j) x(i, j) = std::sqrt(rho) * common + std::sqrt(1.0 - rho) * nd(rng);
    }
    return x;
}

std::vector<std::size_t> all_columns(Eigen::Index J) {
    std::vector<std::size_t> idx(static_cast<std::size_t>(J));
    for (std::size_t j = 0; j < idx.size(); ++j) idx[j] = j;
    return idx;
}

}  // namespace

TEST(Threshold, Examples) {
    Eigen::VectorXd row(4);
    row << 0.5, 2.0, -1.0, 3.0;
    EXPECT_EQ(threshold_count(row, 1.0), 2u);
    EXPECT_DOUBLE_EQ(exceedance_sum(row, 1.0), 5.0);
    EXPECT_EQ(threshold_count(row, 3.0), 0u);
    EXPECT_DOUBLE_EQ(exceedance_sum(row, 3.0), 0.0);
    EXPECT_EQ(threshold_count(row, -5.0), 4u);
    EXPECT_DOUBLE_EQ(exceedance_sum(row, -5.0), row.sum());
}

TEST(Threshold, RowwiseAndTranslation) {
    const Eigen::MatrixXd x = gaussian_data(200, 6, 0.3, 1);
    const Eigen::VectorXd c = threshold_counts(x, 0.4), s = exceedance_sums(x, 0.4);
    const Eigen::MatrixXd shifted = x.array() + 2.0;
    const Eigen::VectorXd c2 = threshold_counts(shifted, 2.4), s2 = exceedance_sums(shifted, 2.4);
    for (Eigen::Index i = 0; i < 200; ++i) {
        EXPECT_EQ(c(i), static_cast<double>(threshold_count(x.row(i).transpose(), 0.4)));
        EXPECT_EQ(c(i), c2(i));
        EXPECT_NEAR(s2(i), s(i) + 2.0 * c(i), 1e-12);
    }
}

TEST(EmpiricalCdf, RankOverNPlusOne) {
    Eigen::VectorXd x(4);
    x << 3.0, 1.0, 2.0, 2.0;
    const Eigen::VectorXd f = empirical_cdf(x);
    EXPECT_DOUBLE_EQ(f(0), 4.0 / 5.0);
    EXPECT_DOUBLE_EQ(f(1), 1.0 / 5.0);
    EXPECT_DOUBLE_EQ(f(2), 3.0 / 5.0);
    EXPECT_DOUBLE_EQ(f(3), 3.0 / 5.0);
}

TEST(CongregationEntropy, MatchesCountingOracle) {
    const Eigen::MatrixXd x = gaussian_data(500, 5, 0.4, 2);
    const auto idx = all_columns(5);
    for (double b : {0.5, 0.8, 0.95}) {
        EXPECT_NEAR(congregation_entropy(x, idx, b), oracle::counting_entropy(x, idx, b), 1e-12) << b;
    }
}

TEST(CongregationEntropy, BoundsAndInvariance) {
    const Eigen::MatrixXd x = gaussian_data(400, 8, 0.2, 3);
    const auto idx = all_columns(8);
    const double h = congregation_entropy(x, idx, 0.7);
    EXPECT_GE(h, 0.0);
    EXPECT_LE(h, 8.0 * std::log(2.0) + 1e-12);
    EXPECT_LE(h, std::log(400.0) + 1e-12);
    const Eigen::MatrixXd cubed = x.array().cube();
    EXPECT_DOUBLE_EQ(congregation_entropy(cubed, idx, 0.7), h);
    Eigen::MatrixXd mono = x;
    for (Eigen::Index j = 0; j < 8; ++j) mono.col(j) = (2.0 * x.col(j).array() + static_cast<double>(j)).exp();
    EXPECT_DOUBLE_EQ(congregation_entropy(mono, idx, 0.7), h);
}

TEST(CongregationEntropy, LimitsAndErrors) {
    const Eigen::MatrixXd x = gaussian_data(300, 17, 0.0, 4);
    EXPECT_THROW(congregation_entropy(x, all_columns(17), 0.5), SizeError);
    EXPECT_NO_THROW(congregation_entropy(x, all_columns(16), 0.5));
    const std::vector<std::size_t> bad{0, 40};
    EXPECT_THROW(congregation_entropy(x, bad, 0.5), InputError);
    EXPECT_THROW(congregation_entropy(x, all_columns(3), 1.0), DomainError);

    std::vector<std::string> warnings;
    congregation_entropy(x.topRows(20), all_columns(3), 0.5, &warnings);
    EXPECT_EQ(warnings.size(), 1u);
}

TEST(CongregationEntropy, ComonotoneAndIndependent) {
    Eigen::MatrixXd same(1000, 4);
    const Eigen::MatrixXd base = gaussian_data(1000, 1, 0.0, 5);
    for (Eigen::Index j = 0; j < 4; ++j) same.col(j) = base.col(0);
    const double b = 0.75;
    const double p = 1.0 - 750.0 / 1000.0;  // fraction of ranks with F > b
    const double binary = -(p * std::log(p) + (1.0 - p) * std::log(1.0 - p));
    EXPECT_NEAR(congregation_entropy(same, all_columns(4), b), binary, 2e-3);

    const Eigen::MatrixXd ind = gaussian_data(200000, 4, 0.0, 6);
    EXPECT_NEAR(congregation_entropy(ind, all_columns(4), b), 4.0 * binary, 5e-3);
}

TEST(CongregationRatio, EqualDataAndZeroDenominator) {
    const Eigen::MatrixXd x = gaussian_data(300, 4, 0.3, 7);
    const auto idx = all_columns(4);
    const std::vector<double> bs{0.5, 0.9};
    const DiagnosticsReport r = congregation_ratio(x, x, idx, bs);
    ASSERT_EQ(r.values.size(), 2u);
    for (std::size_t k = 0; k < 2; ++k) {
        EXPECT_DOUBLE_EQ(r.values[k], 1.0);
        EXPECT_FALSE(r.flagged[k]);
    }
    // A single row puts every realization in one cell.
    const Eigen::MatrixXd one = x.topRows(1);
    const DiagnosticsReport z = congregation_ratio(one, one, idx, bs);
    EXPECT_TRUE(std::isinf(z.values[0]));
    EXPECT_TRUE(z.flagged[0]);
    EXPECT_FALSE(z.warnings.empty());
}

TEST(FitGaussian, MeanAndUnbiasedCovariance) {
    Eigen::MatrixXd x(3, 2);
    x << 1, 2, 3, 2, 5, 8;
    const GaussianFit fit = fit_gaussian(x);
    EXPECT_DOUBLE_EQ(fit.mean(0), 3.0);
    EXPECT_DOUBLE_EQ(fit.mean(1), 4.0);
    EXPECT_DOUBLE_EQ(fit.cov(0, 0), 4.0);
    EXPECT_DOUBLE_EQ(fit.cov(0, 1), 6.0);
    EXPECT_DOUBLE_EQ(fit.cov(1, 1), 12.0);
    EXPECT_THROW(fit_gaussian(x.topRows(1)), InputError);
}

TEST(BootstrapBand, MeanStatisticFollowsClt) {
    GaussianFit fit{Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(2, 2)};
    fit.cov(1, 1) = 4.0;
    BootstrapOptions opts;
    opts.reps = 2000;
    opts.lower_q = 0.025;
    opts.upper_q = 0.975;
    const std::size_t n = 100;
    const Band band = bootstrap_band(fit, n, [](const Eigen::MatrixXd& d) { return Eigen::VectorXd(d.colwise().mean().transpose()); },
                                     opts);
    EXPECT_EQ(band.reps, 2000u);
    EXPECT_NEAR(band.upper(0), 1.96 * 0.1, 0.02);
    EXPECT_NEAR(band.lower(0), -1.96 * 0.1, 0.02);
    EXPECT_NEAR(band.upper(1), 1.96 * 0.2, 0.04);

    opts.threads = 3;
    const Band again = bootstrap_band(fit, n, [](const Eigen::MatrixXd& d) { return Eigen::VectorXd(d.colwise().mean().transpose()); },
                                      opts);
    EXPECT_TRUE(again.lower.isApprox(band.lower) && again.upper.isApprox(band.upper));
}

TEST(BootstrapBand, TwoRepsGiveMinAndMax) {
    const GaussianFit fit{Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Identity(1, 1)};
    BootstrapOptions opts;
    opts.reps = 2;
    opts.lower_q = 0.0;
    opts.upper_q = 1.0;
    const auto stat = [&](const Eigen::MatrixXd& d) {
        Eigen::VectorXd v(1);
        v(0) = d.mean();
        return v;
    };
    const Band band = bootstrap_band(fit, 10, stat, opts);
    EXPECT_LE(band.lower(0), band.upper(0));
    opts.reps = 1;
    const Band first = bootstrap_band(fit, 10, stat, opts);
    EXPECT_TRUE(first.lower(0) == band.lower(0) || first.lower(0) == band.upper(0));
}

TEST(NearestRankQuantile, Examples) {
    const std::vector<double> v{5, 1, 4, 2, 3};
    EXPECT_DOUBLE_EQ(nearest_rank_quantile(v, 0.0), 1.0);
    EXPECT_DOUBLE_EQ(nearest_rank_quantile(v, 0.2), 1.0);
    EXPECT_DOUBLE_EQ(nearest_rank_quantile(v, 0.21), 2.0);
    EXPECT_DOUBLE_EQ(nearest_rank_quantile(v, 0.5), 3.0);
    EXPECT_DOUBLE_EQ(nearest_rank_quantile(v, 1.0), 5.0);
    EXPECT_THROW(nearest_rank_quantile({}, 0.5), InputError);
    EXPECT_THROW(nearest_rank_quantile(v, 1.5), DomainError);
}

TEST(QuantileTable, MonotoneWithBaseline) {
    const Eigen::MatrixXd x = gaussian_data(1000, 1, 0.0, 8);
    const std::vector<double> probs{0.1, 0.5, 0.9, 0.99};
    const QuantileTable base = quantile_table(x.col(0), probs);
    for (std::size_t i = 1; i < probs.size(); ++i) EXPECT_LE(base.values[i - 1], base.values[i]);
    EXPECT_TRUE(base.relative_increase.empty());
    const Eigen::VectorXd scaled = 1.5 * x.col(0);
    const QuantileTable t = quantile_table(scaled, probs, base);
    for (std::size_t i = 0; i < probs.size(); ++i) EXPECT_NEAR(t.relative_increase[i], 50.0 * (base.values[i] > 0 ? 1 : -1), 1e-9);
}

TEST(QuantileMatch, KeepsRanksAndTargetMarginal) {
    const Eigen::MatrixXd x = gaussian_data(500, 3, 0.5, 9);
    const Eigen::MatrixXd z = gaussian_data(500, 3, 0.0, 10).array().exp();
    const Eigen::MatrixXd w = quantile_match(x, z);
    for (Eigen::Index j = 0; j < 3; ++j) {
        std::vector<double> a(w.col(j).data(), w.col(j).data() + 500), b(z.col(j).data(), z.col(j).data() + 500);
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        EXPECT_EQ(a, b);
        EXPECT_TRUE(empirical_cdf(w.col(j)).isApprox(empirical_cdf(x.col(j))));
    }
    EXPECT_THROW(quantile_match(x, z.topRows(10)), InputError);
}

TEST(QuantileMatch, TiesRankedByRowOrder) {
    Eigen::MatrixXd x(3, 1), z(3, 1);
    x << 1.0, 1.0, 0.0;
    z << 30.0, 10.0, 20.0;
    const Eigen::MatrixXd w = quantile_match(x, z);
    EXPECT_DOUBLE_EQ(w(2, 0), 10.0);
    EXPECT_DOUBLE_EQ(w(0, 0), 20.0);
    EXPECT_DOUBLE_EQ(w(1, 0), 30.0);
}
