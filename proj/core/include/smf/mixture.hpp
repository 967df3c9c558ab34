#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "smf/random.hpp"

namespace smf {

struct GammaComponent {
    double weight = 0.0;
    double shape = 0.0;  // alpha
    double scale = 0.0;  // beta
};

enum class MeanPolicy {
    RequireUnit,        // E(V) = 1 within kUnitMeanTolerance
    AllowUnnormalized,  // optimizer internals and reported parameter sets
};

/// Scaling variable V of the field: a finite mixture of gamma distributions
///   f_V(v) = sum_s w_s beta_s^{-alpha_s} / Gamma(alpha_s) v^{alpha_s - 1} e^{-v / beta_s}.
///
/// Components are stored sorted by weight (descending), which removes the
/// label-switching ambiguity of the mixture.
class GammaMixture {
public:
    static constexpr double kUnitMeanTolerance = 1e-6;
    static constexpr double kWeightSumTolerance = 1e-12;
    static constexpr double kMaxShape = 1e9;
    static constexpr double kMinScale = 1e-12;

    explicit GammaMixture(std::vector<GammaComponent> components,
                          MeanPolicy policy = MeanPolicy::RequireUnit);

    /// Single gamma with shape alpha and scale 1/alpha: E(V) = 1, Var(V) = 1/alpha.
    /// Large alpha gives a near-Gaussian field.
    static GammaMixture near_constant(double alpha = 1e9);

    std::size_t size() const noexcept { return components_.size(); }
    std::span<const GammaComponent> components() const noexcept { return components_; }
    double mean() const;
    double max_scale() const;
    /// Upper end of the m.g.f. convergence strip, 1 / max(beta_s).
    double mgf_bound() const { return 1.0 / max_scale(); }

    /// Copy with all scales divided by mean(), so that E(V) = 1.
    GammaMixture normalized() const;

private:
    std::vector<GammaComponent> components_;
};

/// E(V^k) for k = 1..K, stored 0-based (values[k-1] = m_k).
class MomentVector {
public:
    explicit MomentVector(std::vector<double> values);

    std::size_t order() const noexcept { return values_.size(); }
    /// m_k, 1-based.
    double operator()(std::size_t k) const { return values_.at(k - 1); }
    std::span<const double> values() const noexcept { return values_; }

    /// Lyapunov log-convexity m_k^2 <= m_{k-1} m_{k+1} (with m_0 = 1).
    bool is_log_convex(double rel_tol = 1e-12) const;

private:
    std::vector<double> values_;
};

/// Cumulants c_1..c_K of V, stored 0-based.
class CumulantVector {
public:
    explicit CumulantVector(std::vector<double> values);

    std::size_t order() const noexcept { return values_.size(); }
    double operator()(std::size_t k) const { return values_.at(k - 1); }
    std::span<const double> values() const noexcept { return values_; }

private:
    std::vector<double> values_;
};

/// Conversions are limited to K <= 12.
inline constexpr std::size_t kMaxConversionOrder = 12;

CumulantVector moments_to_cumulants(const MomentVector& m);
MomentVector cumulants_to_moments(const CumulantVector& c);

double mixture_density(const GammaMixture& mix, double v);
double mixture_log_density(const GammaMixture& mix, double v);
double mixture_moment(const GammaMixture& mix, int k);
MomentVector mixture_moments(const GammaMixture& mix, std::size_t K);
CumulantVector mixture_cumulants(const GammaMixture& mix, std::size_t K);

double sample_mixture(const GammaMixture& mix, Rng& rng);

/// Value and first two derivatives of a scalar function of y.
struct Derivs {
    double value = 0.0;
    double d1 = 0.0;
    double d2 = 0.0;
};

/// M_V(y) = E(e^{yV}) = sum_s w_s (1 - beta_s y)^{-alpha_s}, with derivatives.
/// Throws DomainError when y >= 1 / max(beta_s).
Derivs mixture_mgf(const GammaMixture& mix, double y);

/// delta(y) = log M_V(y) with delta' and delta''. Evaluated through a
/// log-sum-exp over components, which stays accurate for near-constant V.
Derivs mixture_log_mgf(const GammaMixture& mix, double y);

}  // namespace smf
