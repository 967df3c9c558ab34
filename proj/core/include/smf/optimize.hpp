#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace smf {

struct NelderMeadOptions {
    int max_evals = 20000;
    /// Stop when the spread of simplex function values falls below
    /// ftol_abs + ftol_rel * |f_best| and the simplex diameter below xtol.
    double ftol_abs = 1e-14;
    double ftol_rel = 1e-12;
    double xtol = 1e-10;
    double initial_step = 0.5;
    /// Number of times the search is restarted from the best vertex with a
    /// fresh simplex once it has converged.
    int restarts = 2;
};

struct OptimResult {
    std::vector<double> x;
    double f = 0.0;
    int evals = 0;
    bool converged = false;
};

using Objective = std::function<double(std::span<const double>)>;

/// Derivative-free Nelder-Mead simplex search (standard reflection,
/// expansion, contraction and shrink coefficients 1, 2, 1/2, 1/2).
/// Non-finite objective values are treated as +infinity, which lets callers
/// encode box or strip constraints by returning NaN/inf outside.
OptimResult nelder_mead(const Objective& f, std::vector<double> x0, const NelderMeadOptions& opts = {});

}  // namespace smf
