#pragma once

// Independent reference computations used by the unit and acceptance tests.
// None of these call into the library's cumulant or density code.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <random>
#include <vector>

#include <boost/math/distributions/gamma.hpp>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <Eigen/Dense>

namespace oracle {

/// Calls visit(blocks) for every set partition of {0, .., n-1}.
inline void for_each_set_partition(std::size_t n,
                                   const std::function<void(const std::vector<std::vector<std::size_t>>&)>& visit) {
    std::vector<std::size_t> label(n, 0);
    std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t i, std::size_t used) {
        if (i == n) {
            std::vector<std::vector<std::size_t>> blocks(used);
            for (std::size_t a = 0; a < n; ++a) blocks[label[a]].push_back(a);
            visit(blocks);
            return;
        }
        for (std::size_t b = 0; b <= used && b < n; ++b) {
            label[i] = b;
            rec(i + 1, std::max(used, b + 1));
        }
    };
    if (n == 0) {
        visit({});
        return;
    }
    rec(0, 0);
}

/// Joint cumulant of X_{idx[0]}, .., X_{idx[k-1]} from raw moments,
/// moment(exponents) = E prod_d X_d^{exponents[d]}.
template <std::size_t D>
double cumulant_from_moments(const std::vector<std::size_t>& idx,
                             const std::function<double(const std::array<int, D>&)>& moment) {
    double total = 0.0;
    for_each_set_partition(idx.size(), [&](const std::vector<std::vector<std::size_t>>& blocks) {
        const auto q = blocks.size();
        double term = std::tgamma(static_cast<double>(q)) * ((q - 1) % 2 == 0 ? 1.0 : -1.0);
        for (const auto& b : blocks) {
            std::array<int, D> e{};
            for (auto a : b) ++e[idx[a]];
            term *= moment(e);
        }
        total += term;
    });
    return total;
}

/// Central stencil weights for derivative order 0..6 (O(h^2)), offsets -p..p.
inline std::vector<double> stencil(int order) {
    switch (order) {
    case 0: return {1.0};
    case 1: return {-0.5, 0.0, 0.5};
    case 2: return {1.0, -2.0, 1.0};
    case 3: return {-0.5, 1.0, 0.0, -1.0, 0.5};
    case 4: return {1.0, -4.0, 6.0, -4.0, 1.0};
    case 5: return {-0.5, 2.0, -2.5, 0.0, 2.5, -2.0, 0.5};
    case 6: return {1.0, -6.0, 15.0, -20.0, 15.0, -6.0, 1.0};
    default: return {};
    }
}

/// Mixed partial derivative of f at 0 with orders[d] along axis d, by a
/// tensor-product central stencil at step h. Evaluated in long double so the
/// sixth-order stencils stay clear of round-off at small h.
inline long double mixed_partial(const std::function<long double(const std::vector<long double>&)>& f,
                                 const std::vector<int>& orders, long double h) {
    const std::size_t D = orders.size();
    std::vector<std::vector<double>> w(D);
    std::vector<int> half(D);
    int k = 0;
    for (std::size_t d = 0; d < D; ++d) {
        w[d] = stencil(orders[d]);
        half[d] = static_cast<int>(w[d].size() / 2);
        k += orders[d];
    }
    std::vector<int> pos(D, 0);
    long double total = 0.0L;
    std::vector<long double> t(D);
    while (true) {
        long double weight = 1.0L;
        for (std::size_t d = 0; d < D; ++d) {
            weight *= w[d][static_cast<std::size_t>(pos[d])];
            t[d] = h * (pos[d] - half[d]);
        }
        if (weight != 0.0L) total += weight * f(t);
        std::size_t d = 0;
        while (d < D && ++pos[d] == static_cast<int>(w[d].size())) pos[d++] = 0;
        if (d == D) break;
    }
    return total / std::pow(h, static_cast<long double>(k));
}

/// Two Richardson levels over steps 2h, h, h/2: O(h^6).
inline double mixed_partial_richardson(const std::function<long double(const std::vector<long double>&)>& f,
                                       const std::vector<int>& orders, long double h) {
    const long double d0 = mixed_partial(f, orders, 2.0L * h);
    const long double d1 = mixed_partial(f, orders, h);
    const long double d2 = mixed_partial(f, orders, 0.5L * h);
    const long double r0 = (4.0L * d1 - d0) / 3.0L;
    const long double r1 = (4.0L * d2 - d1) / 3.0L;
    return static_cast<double>((16.0L * r1 - r0) / 15.0L);
}

struct Gamma {
    double weight, shape, scale;
};

/// Gamma-mixture density through boost distributions.
inline double mixture_pdf(const std::vector<Gamma>& mix, double v) {
    double p = 0.0;
    for (const auto& c : mix)
        if (c.weight > 0.0) p += c.weight * boost::math::pdf(boost::math::gamma_distribution<double>(c.shape, c.scale), v);
    return p;
}

/// log E exp(t'X) for X = sqrt(V) Sigma^{1/2} Z with V a gamma mixture,
/// written out directly in long double.
inline long double scale_mixture_cgf(const std::vector<Gamma>& mix, const Eigen::MatrixXd& sigma,
                                     const std::vector<long double>& t) {
    long double q = 0.0L;
    for (Eigen::Index i = 0; i < sigma.rows(); ++i)
        for (Eigen::Index j = 0; j < sigma.cols(); ++j)
            q += t[static_cast<std::size_t>(i)] * static_cast<long double>(sigma(i, j)) * t[static_cast<std::size_t>(j)];
    q *= 0.5L;
    long double m = 0.0L;
    for (const auto& c : mix)
        m += static_cast<long double>(c.weight) *
             std::pow(1.0L - static_cast<long double>(c.scale) * q, -static_cast<long double>(c.shape));
    return std::log(m);
}

struct PosteriorMoments {
    double mean, sd;
};

/// Moments of p(v) ~ v^{-J/2} exp(-r2 / (2 v)) f(v) by Gauss-Kronrod on a
/// partition of (0, upper].
inline PosteriorMoments v_posterior_moments(const std::vector<Gamma>& mix, double r2, std::size_t J,
                                            double upper = 60.0, int panels = 3000) {
    auto log_kernel = [&](double v) {
        const double p = mixture_pdf(mix, v);
        if (!(p > 0.0)) return -1e300;
        return -0.5 * static_cast<double>(J) * std::log(v) - 0.5 * r2 / v + std::log(p);
    };
    double peak = -1e300;
    for (int i = 1; i <= 20000; ++i) peak = std::max(peak, log_kernel(upper * i / 20000.0));
    double z = 0.0, m1 = 0.0, m2 = 0.0;
    for (int i = 0; i < panels; ++i) {
        const double a = upper * i / panels, b = upper * (i + 1) / panels;
        auto k = [&](double v) { return v <= 0.0 ? 0.0 : std::exp(log_kernel(v) - peak); };
        z += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(k, a, b, 0);
        m1 += boost::math::quadrature::gauss_kronrod<double, 31>::integrate([&](double v) { return v * k(v); }, a, b, 0);
        m2 += boost::math::quadrature::gauss_kronrod<double, 31>::integrate([&](double v) { return v * v * k(v); }, a, b,
                                                                             0);
    }
    const double mean = m1 / z;
    return {mean, std::sqrt(std::max(0.0, m2 / z - mean * mean))};
}

/// Standard normal CDF.
inline double phi_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

/// Exact conditional CDF of a scale-mixture target given J observations:
///   int Phi((a - mean) / sqrt(v var)) p(v | r2) dv
/// with p(v | r2) ~ v^{-J/2} exp(-r2 / (2 v)) f(v), on a fixed Gauss-Legendre
/// grid over (0, upper].
class ScaleMixtureConditional {
public:
    ScaleMixtureConditional(const std::vector<Gamma>& mix, std::size_t J, double r2, double mean, double var,
                            double upper = 80.0, int panels = 4000)
        : mean_(mean), var_(var) {
        using GL = boost::math::quadrature::gauss<double, 20>;
        const auto& x = GL::abscissa();
        const auto& w = GL::weights();
        std::vector<double> logk;
        double peak = -1e300;
        for (int i = 0; i < panels; ++i) {
            const double a = upper * i / panels, b = upper * (i + 1) / panels;
            const double c = 0.5 * (a + b), h = 0.5 * (b - a);
            for (std::size_t j = 0; j < x.size(); ++j)
                for (double sgn : {-1.0, 1.0}) {
                    if (j == 0 && sgn > 0.0 && x[0] == 0.0) continue;
                    const double v = c + sgn * h * x[j];
                    const double p = mixture_pdf(mix, v);
                    const double lk = p > 0.0 ? -0.5 * static_cast<double>(J) * std::log(v) - 0.5 * r2 / v + std::log(p)
                                              : -1e300;
                    nodes_.push_back(v);
                    weights_.push_back(h * w[j]);
                    logk.push_back(lk);
                    peak = std::max(peak, lk);
                }
        }
        double z = 0.0;
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            weights_[i] *= std::exp(logk[i] - peak);
            z += weights_[i];
        }
        for (auto& w_i : weights_) w_i /= z;
    }

    double cdf(double a) const {
        double p = 0.0;
        for (std::size_t i = 0; i < nodes_.size(); ++i) p += weights_[i] * phi_cdf((a - mean_) / std::sqrt(nodes_[i] * var_));
        return p;
    }

private:
    double mean_, var_;
    std::vector<double> nodes_, weights_;
};

/// Entropy by explicit cell counting with a map over indicator tuples.
inline double counting_entropy(const Eigen::MatrixXd& data, const std::vector<std::size_t>& cols, double b) {
    const auto n = data.rows();
    std::vector<std::vector<int>> ind(static_cast<std::size_t>(n), std::vector<int>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k) {
        const auto c = data.col(static_cast<Eigen::Index>(cols[k]));
        for (Eigen::Index i = 0; i < n; ++i) {
            Eigen::Index le = 0;
            for (Eigen::Index j = 0; j < n; ++j)
                if (c(j) <= c(i)) ++le;
            // Last column first so tuples sort like little-endian cell codes.
            ind[static_cast<std::size_t>(i)][cols.size() - 1 - k] =
                static_cast<double>(le) / static_cast<double>(n + 1) > b ? 1 : 0;
        }
    }
    std::sort(ind.begin(), ind.end());
    double h = 0.0;
    for (std::size_t i = 0; i < ind.size();) {
        std::size_t j = i;
        while (j < ind.size() && ind[j] == ind[i]) ++j;
        const double p = static_cast<double>(j - i) / static_cast<double>(n);
        h -= p * std::log(p);
        i = j;
    }
    return h;
}

}  // namespace oracle
