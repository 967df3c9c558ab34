#include "smf/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace smf {

namespace {

struct Simplex {
    std::vector<std::vector<double>> x;
    std::vector<double> f;
};

double safe_eval(const Objective& f, const std::vector<double>& x, int& evals) {
    ++evals;
    const double v = f(x);
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
}

OptimResult run_once(const Objective& f, const std::vector<double>& x0, const NelderMeadOptions& opts,
                     int eval_budget) {
    const std::size_t n = x0.size();
    int evals = 0;
    Simplex s;
    s.x.assign(n + 1, x0);
    s.f.assign(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        s.x[i + 1][i] += opts.initial_step * std::max(1.0, std::abs(x0[i]));
    }
    for (std::size_t i = 0; i <= n; ++i) s.f[i] = safe_eval(f, s.x[i], evals);

    std::vector<std::size_t> order(n + 1);
    std::vector<double> centroid(n), trial(n), trial2(n);
    bool converged = false;
    while (evals < eval_budget) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return s.f[a] < s.f[b]; });
        const std::size_t best = order.front(), worst = order.back(), second = order[n - 1];

        double diameter = 0.0;
        for (std::size_t i = 0; i <= n; ++i)
            for (std::size_t d = 0; d < n; ++d) diameter = std::max(diameter, std::abs(s.x[i][d] - s.x[best][d]));
        const double spread = s.f[worst] - s.f[best];
        if (std::isfinite(spread) &&
            spread <= opts.ftol_abs + opts.ftol_rel * std::abs(s.f[best]) && diameter <= opts.xtol) {
            converged = true;
            break;
        }
        if (diameter == 0.0) break;

        std::fill(centroid.begin(), centroid.end(), 0.0);
        for (std::size_t i = 0; i <= n; ++i) {
            if (i == worst) continue;
            for (std::size_t d = 0; d < n; ++d) centroid[d] += s.x[i][d] / static_cast<double>(n);
        }
        auto along = [&](double coef, std::vector<double>& out) {
            for (std::size_t d = 0; d < n; ++d) out[d] = centroid[d] + coef * (s.x[worst][d] - centroid[d]);
        };

        along(-1.0, trial);
        const double fr = safe_eval(f, trial, evals);
        if (fr < s.f[best]) {
            along(-2.0, trial2);
            const double fe = safe_eval(f, trial2, evals);
            if (fe < fr) {
                s.x[worst] = trial2;
                s.f[worst] = fe;
            } else {
                s.x[worst] = trial;
                s.f[worst] = fr;
            }
            continue;
        }
        if (fr < s.f[second]) {
            s.x[worst] = trial;
            s.f[worst] = fr;
            continue;
        }
        const bool outside = fr < s.f[worst];
        along(outside ? -0.5 : 0.5, trial2);
        const double fc = safe_eval(f, trial2, evals);
        if (fc < (outside ? fr : s.f[worst])) {
            s.x[worst] = trial2;
            s.f[worst] = fc;
            continue;
        }
        for (std::size_t i = 0; i <= n; ++i) {
            if (i == best) continue;
            for (std::size_t d = 0; d < n; ++d) s.x[i][d] = s.x[best][d] + 0.5 * (s.x[i][d] - s.x[best][d]);
            s.f[i] = safe_eval(f, s.x[i], evals);
        }
    }
    const auto it = std::min_element(s.f.begin(), s.f.end());
    const auto idx = static_cast<std::size_t>(it - s.f.begin());
    return {s.x[idx], *it, evals, converged};
}

}  // namespace

OptimResult nelder_mead(const Objective& f, std::vector<double> x0, const NelderMeadOptions& opts) {
    OptimResult result = run_once(f, x0, opts, opts.max_evals);
    for (int r = 0; r < opts.restarts && result.evals < opts.max_evals; ++r) {
        NelderMeadOptions again = opts;
        again.initial_step = opts.initial_step * 0.25;
        OptimResult next = run_once(f, result.x, again, opts.max_evals - result.evals);
        const bool improved = next.f < result.f;
        next.evals += result.evals;
        if (!improved) {
            result.evals = next.evals;
            result.converged = result.converged && next.converged;
            break;
        }
        result = std::move(next);
    }
    return result;
}

}  // namespace smf
