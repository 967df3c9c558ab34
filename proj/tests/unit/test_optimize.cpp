#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "smf/optimize.hpp"

using namespace smf;

TEST(NelderMead, Quadratic) {
    const auto f = [](std::span<const double> x) { return (x[0] - 1.0) * (x[0] - 1.0) + 4.0 * (x[1] + 2.0) * (x[1] + 2.0); };
    const OptimResult r = nelder_mead(f, {0.0, 0.0});
    EXPECT_TRUE(r.converged);
    EXPECT_NEAR(r.x[0], 1.0, 1e-6);
    EXPECT_NEAR(r.x[1], -2.0, 1e-6);
    EXPECT_LE(r.f, 1e-12);
}

TEST(NelderMead, Rosenbrock) {
    const auto f = [](std::span<const double> x) {
        return 100.0 * (x[1] - x[0] * x[0]) * (x[1] - x[0] * x[0]) + (1.0 - x[0]) * (1.0 - x[0]);
    };
    const OptimResult r = nelder_mead(f, {-1.2, 1.0});
    EXPECT_NEAR(r.x[0], 1.0, 1e-5);
    EXPECT_NEAR(r.x[1], 1.0, 1e-5);
}

TEST(NelderMead, NonFiniteActsAsBarrier) {
    // Minimum of (x - 3)^2 restricted to x <= 2.
    const auto f = [](std::span<const double> x) {
        return x[0] > 2.0 ? std::numeric_limits<double>::quiet_NaN() : (x[0] - 3.0) * (x[0] - 3.0);
    };
    const OptimResult r = nelder_mead(f, {0.0});
    EXPECT_LE(r.x[0], 2.0);
    EXPECT_NEAR(r.x[0], 2.0, 1e-6);
}

TEST(NelderMead, RespectsEvaluationBudget) {
    NelderMeadOptions opts;
    opts.max_evals = 50;
    opts.restarts = 0;
    const auto f = [](std::span<const double> x) {
        double s = 0.0;
        for (double v : x) s += std::cos(3.0 * v) + v * v;
        return s;
    };
    const OptimResult r = nelder_mead(f, std::vector<double>(6, 2.0), opts);
    EXPECT_LE(r.evals, 60);
}
