#include <numeric>
#include <random>

#include <benchmark/benchmark.h>

#include "smf/cgf.hpp"
#include "smf/conditional.hpp"
#include "smf/diagnostics.hpp"
#include "smf/simulate.hpp"
#include "smf/synthetic.hpp"

using namespace smf;

namespace {

const CovModel kStudy(CovKind::PoweredExponential, 20.0, 1.0, 0.0, 1.0);

SiteSet stations(std::size_t count) {
    const SiteSet grid = grid_spec_to_sites(GridSpec{64, 64, 1.0, {0.0, 0.0}});
    return grid.subset(station_layout(grid.size(), count, kDefaultLayoutSeed));
}

}  // namespace

static void BM_CovCholesky(benchmark::State& state) {
    const auto side = static_cast<std::size_t>(state.range(0));
    const SiteSet s = grid_spec_to_sites(GridSpec{side, side, 1.0, {0.0, 0.0}});
    for (auto _ : state) {
        const CholeskyFactor f = cholesky_factor(cov_matrix(kStudy, s));
        benchmark::DoNotOptimize(f.lower().data());
    }
    state.SetComplexityN(static_cast<std::int64_t>(side * side));
}
BENCHMARK(BM_CovCholesky)->Arg(8)->Arg(16)->Arg(24)->Unit(benchmark::kMillisecond);

static void BM_CgfHessian(benchmark::State& state) {
    const DependenceSpec spec(stations(static_cast<std::size_t>(state.range(0))), kStudy, reference_field_mixture());
    const Eigen::VectorXd t = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(spec.dim()), 0.05);
    for (auto _ : state) benchmark::DoNotOptimize(cgf_hessian(spec, t).data());
}
BENCHMARK(BM_CgfHessian)->Arg(7)->Arg(30);

static void BM_JointCumulant(benchmark::State& state) {
    const DependenceSpec spec(stations(8), kStudy, reference_field_mixture());
    std::vector<std::size_t> idx(static_cast<std::size_t>(state.range(0)));
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (auto _ : state) benchmark::DoNotOptimize(joint_cumulant(spec, idx));
}
BENCHMARK(BM_JointCumulant)->Arg(4)->Arg(6)->Arg(8);

static void BM_SaddlepointCdf(benchmark::State& state) {
    const auto J = static_cast<std::size_t>(state.range(0));
    const DependenceSpec spec(stations(30), kStudy, reference_field_mixture());
    std::vector<std::size_t> idx(J);
    std::iota(idx.begin(), idx.end(), std::size_t{1});
    const ConditioningSet cond{idx, Eigen::VectorXd::LinSpaced(static_cast<Eigen::Index>(J), -0.6, 0.8),
                               SiteSet({(*spec.sites())[0]})};
    double a = 0.5;
    for (auto _ : state) {
        benchmark::DoNotOptimize(saddlepoint_cdf(spec, cond, a).probability);
        a = a > 3.0 ? 0.5 : a + 0.01;
    }
}
BENCHMARK(BM_SaddlepointCdf)->Arg(1)->Arg(6)->Arg(20);

static void BM_SampleField(benchmark::State& state) {
    const DependenceSpec spec(stations(30), kStudy, reference_field_mixture());
    const auto n = static_cast<std::size_t>(state.range(0));
    std::uint64_t seed = 1;
    for (auto _ : state) benchmark::DoNotOptimize(sample_field(spec, n, seed++).values().data());
    state.SetItemsProcessed(static_cast<std::int64_t>(n) * state.iterations());
}
BENCHMARK(BM_SampleField)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

static void BM_CongregationEntropy(benchmark::State& state) {
    const auto K = static_cast<std::size_t>(state.range(0));
    std::mt19937_64 rng(1);
    std::normal_distribution<double> nd(0.0, 1.0);
    Eigen::MatrixXd x(3650, static_cast<Eigen::Index>(K));
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = nd(rng);
    std::vector<std::size_t> idx(K);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (auto _ : state) benchmark::DoNotOptimize(congregation_entropy(x, idx, 0.9));
}
BENCHMARK(BM_CongregationEntropy)->Arg(4)->Arg(16);
BENCHMARK_MAIN();
