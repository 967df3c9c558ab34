#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "smf/covmodel.hpp"
#include "smf/errors.hpp"
#include "smf/simulate.hpp"
#include "smf/synthetic.hpp"

using namespace smf;

namespace {

CovModel exp_model(double range = 20.0) { return CovModel(CovKind::PoweredExponential, range, 1.0, 0.0, 1.0); }

}  // namespace

TEST(CovValue, StudyModelAtZeroAndRange) {
    EXPECT_DOUBLE_EQ(cov_value(exp_model(), 0.0), 1.0);
    EXPECT_NEAR(cov_value(exp_model(), 20.0), 0.3678794, 1e-7);
}

TEST(CovValue, NuggetOnlyAtZeroDistance) {
    const CovModel m(CovKind::PoweredExponential, 5.0, 1.5, 0.3, 2.0);
    EXPECT_DOUBLE_EQ(cov_value(m, 0.0), 2.3);
    EXPECT_NEAR(cov_value(m, 1e-12), 2.0, 1e-9);
}

TEST(CovValue, MaternHalfIsExponential) {
    const CovModel matern(CovKind::Matern, 10.0, 0.5, 0.0, 1.0);
    EXPECT_NEAR(cov_value(matern, 7.3), cov_value(exp_model(10.0), 7.3), 1e-10);
    for (double d = 1e-6; d <= 100.0; d *= 1.37)
        EXPECT_NEAR(cov_value(matern, d), cov_value(exp_model(10.0), d), 1e-10) << d;
}

TEST(CovValue, MaternThreeHalvesClosedForm) {
    const CovModel m(CovKind::Matern, 3.0, 1.5, 0.0, 1.0);
    for (double d : {0.1, 1.0, 2.5, 9.0}) {
        const double x = d / 3.0;
        EXPECT_NEAR(cov_value(m, d), (1.0 + x) * std::exp(-x), 1e-10) << d;
    }
}

TEST(CovValue, NonIncreasingAndVanishing) {
    for (const CovModel& m : {CovModel(CovKind::PoweredExponential, 4.0, 0.7, 0.0, 1.0),
                              CovModel(CovKind::PoweredExponential, 4.0, 2.0, 0.1, 1.0),
                              CovModel(CovKind::Matern, 4.0, 2.5, 0.0, 1.0), CovModel(CovKind::Matern, 4.0, 40.0, 0.0, 1.0)}) {
        double prev = cov_value(m, 1e-3);
        for (int i = 1; i <= 1000; ++i) {
            const double d = 1e-3 + 0.1 * i;
            const double c = cov_value(m, d);
            EXPECT_LE(c, prev + 1e-15) << d;
            prev = c;
        }
        EXPECT_LT(cov_value(m, 1e4), 1e-12);
    }
}

TEST(CovModel, RejectsInvalidParameters) {
    EXPECT_THROW(CovModel(CovKind::PoweredExponential, 0.0, 1.0, 0.0, 1.0), DomainError);
    EXPECT_THROW(CovModel(CovKind::PoweredExponential, 1.0, 2.5, 0.0, 1.0), DomainError);
    EXPECT_THROW(CovModel(CovKind::Matern, 1.0, 51.0, 0.0, 1.0), DomainError);
    EXPECT_THROW(CovModel(CovKind::Matern, 1.0, 1.0, -0.1, 1.0), DomainError);
    EXPECT_THROW(CovModel(CovKind::Matern, 1.0, 1.0, 0.0, 0.0), DomainError);
    EXPECT_THROW(cov_value(exp_model(), -1.0), DomainError);
}

TEST(CovModel, KindNames) {
    EXPECT_EQ(cov_kind_from_string("exponential"), CovKind::PoweredExponential);
    EXPECT_EQ(cov_kind_from_string(to_string(CovKind::Matern)), CovKind::Matern);
    EXPECT_THROW(cov_kind_from_string("spherical"), InputError);
}

TEST(SiteSet, RejectsCoincidentUnlessAllowed) {
    EXPECT_THROW(SiteSet({{0, 0}, {1, 1}, {0, 0}}), InputError);
    EXPECT_NO_THROW(SiteSet({{0, 0}, {0, 0}}, true));
    EXPECT_THROW(SiteSet(std::vector<Point2>{}), InputError);
}

TEST(CovMatrix, SingleSiteAndPair) {
    const CovModel m(CovKind::PoweredExponential, 2.0, 1.0, 0.25, 1.0);
    const Eigen::MatrixXd one = cov_matrix(m, SiteSet({{3, 4}}));
    ASSERT_EQ(one.rows(), 1);
    EXPECT_DOUBLE_EQ(one(0, 0), 1.25);
    const Eigen::MatrixXd two = cov_matrix(m, SiteSet({{0, 0}, {3, 4}}));
    EXPECT_DOUBLE_EQ(two(0, 1), cov_value(m, 5.0));
    EXPECT_DOUBLE_EQ(two(1, 0), two(0, 1));
}

TEST(CovMatrix, StudyLayoutFactorizes) {
    const SiteSet grid = grid_spec_to_sites(GridSpec{64, 64, 1.0, {0.0, 0.0}});
    const SiteSet st = grid.subset(station_layout(grid.size(), 30, kDefaultLayoutSeed));
    const Eigen::MatrixXd s = cov_matrix(exp_model(), st);
    EXPECT_NO_THROW(cholesky_factor(s));
}

TEST(CovMatrix, ExactlySymmetricAndPdForRandomModels) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 40; ++trial) {
        std::vector<Point2> pts;
        for (int i = 0; i < 12; ++i) pts.push_back({10.0 * u(rng), 10.0 * u(rng)});
        const bool matern = trial % 2 == 1;
        const CovModel m(matern ? CovKind::Matern : CovKind::PoweredExponential, 0.5 + 5.0 * u(rng),
                         matern ? 0.2 + 3.0 * u(rng) : 0.1 + 1.8 * u(rng), 0.05 + 0.5 * u(rng), 0.5 + u(rng));
        const Eigen::MatrixXd s = cov_matrix(m, SiteSet(pts));
        EXPECT_TRUE((s.array() == s.transpose().array()).all());
        EXPECT_NO_THROW(cholesky_factor(s));
    }
}

TEST(CrossCov, MatchesUnionAssembly) {
    const CovModel m(CovKind::Matern, 3.0, 1.2, 0.0, 1.0);
    const SiteSet a({{0, 0}, {1, 2}}), b({{4, 1}, {-2, 3}, {0.5, 0.5}});
    const Eigen::MatrixXd full = cov_matrix(m, a.concat(b, false));
    EXPECT_TRUE(cross_cov(m, a, b).isApprox(full.topRightCorner(2, 3), 1e-15));
}

TEST(Cholesky, HandExamples) {
    EXPECT_TRUE(cholesky_factor(Eigen::MatrixXd::Identity(3, 3)).lower().isIdentity());
    Eigen::MatrixXd a(2, 2);
    a << 4, 2, 2, 3;
    const Eigen::MatrixXd l = cholesky_factor(a).lower();
    EXPECT_DOUBLE_EQ(l(0, 0), 2.0);
    EXPECT_DOUBLE_EQ(l(1, 0), 1.0);
    EXPECT_DOUBLE_EQ(l(0, 1), 0.0);
    EXPECT_NEAR(l(1, 1), std::sqrt(2.0), 1e-15);
}

TEST(Cholesky, RandomSpdReconstruction) {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> n(0.0, 1.0);
    Eigen::MatrixXd a(20, 20);
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = n(rng);
    const Eigen::MatrixXd s = a.transpose() * a + 1e-3 * Eigen::MatrixXd::Identity(20, 20);
    const CholeskyFactor f(s);
    EXPECT_LE((f.reconstruct() - s).norm() / s.norm(), 1e-10);
    const Eigen::VectorXd b = Eigen::VectorXd::LinSpaced(20, -1.0, 1.0);
    EXPECT_LE((s * f.solve(b) - b).norm(), 1e-8);
    EXPECT_NEAR(f.quadratic_form(b), b.dot(s.ldlt().solve(b)), 1e-8 * std::abs(f.quadratic_form(b)));
    EXPECT_NEAR(f.log_det(), std::log(s.determinant()), 1e-8);
}

TEST(Cholesky, NonPdReportsPivot) {
    Eigen::MatrixXd a(3, 3);
    a << 1, 0, 0, 0, 1, 2, 0, 2, 1;
    try {
        cholesky_factor(a);
        FAIL() << "expected FactorizationError";
    } catch (const FactorizationError& e) {
        EXPECT_EQ(e.pivot(), 2u);
        EXPECT_LT(e.pivot_value(), 0.0);
    }
}

TEST(MeanVector, Examples) {
    const SiteSet s({{0, 0}, {1, 0}});
    EXPECT_TRUE(mean_vector(MeanModel{}, s, CovariateTable(2, 0)).isZero());
    CovariateTable h(2, 1);
    h << 3, 5;
    const Eigen::VectorXd mu = mean_vector(MeanModel{2.0, {1.0}}, s, h);
    EXPECT_DOUBLE_EQ(mu(0), 5.0);
    EXPECT_DOUBLE_EQ(mu(1), 7.0);
    const Eigen::VectorXd flat = mean_vector(MeanModel{1.5, {0.0}}, s, h);
    EXPECT_TRUE(flat.isConstant(1.5));
    EXPECT_THROW(mean_vector(MeanModel{0.0, {1.0}}, s, CovariateTable(3, 1)), InputError);
}
