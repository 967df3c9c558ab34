#include "smf/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <string>

#include "smf/errors.hpp"

namespace smf {

GammaMixture::GammaMixture(std::vector<GammaComponent> components, MeanPolicy policy)
    : components_(std::move(components)) {
    if (components_.empty()) throw DomainError("gamma mixture needs at least one component");
    double total = 0.0;
    for (std::size_t s = 0; s < components_.size(); ++s) {
        const auto& c = components_[s];
        const std::string where = "component " + std::to_string(s) + ": ";
        if (!(c.weight >= 0.0) || !std::isfinite(c.weight))
            throw DomainError(where + "weight must be non-negative");
        if (!(c.shape > 0.0) || !(c.shape <= kMaxShape))
            throw DomainError(where + "shape must lie in (0, 1e9]");
        if (!(c.scale >= kMinScale) || !std::isfinite(c.scale))
            throw DomainError(where + "scale must be finite and >= 1e-12");
        total += c.weight;
    }
    if (std::abs(total - 1.0) > kWeightSumTolerance) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.17g", total);
        throw DomainError(std::string("mixture weights sum to ") + buf + ", expected 1");
    }
    std::stable_sort(components_.begin(), components_.end(),
                     [](const GammaComponent& a, const GammaComponent& b) { return a.weight > b.weight; });
    if (policy == MeanPolicy::RequireUnit && std::abs(mean() - 1.0) > kUnitMeanTolerance)
        throw DomainError("mixture mean is " + std::to_string(mean()) + ", expected E(V) = 1");
}

GammaMixture GammaMixture::near_constant(double alpha) {
    return GammaMixture({{1.0, alpha, 1.0 / alpha}});
}

double GammaMixture::mean() const {
    double m = 0.0;
    for (const auto& c : components_) m += c.weight * c.shape * c.scale;
    return m;
}

double GammaMixture::max_scale() const {
    double b = 0.0;
    for (const auto& c : components_)
        if (c.weight > 0.0) b = std::max(b, c.scale);
    return b;
}

GammaMixture GammaMixture::normalized() const {
    const double m = mean();
    auto comps = components_;
    for (auto& c : comps) c.scale /= m;
    return GammaMixture(std::move(comps), MeanPolicy::RequireUnit);
}

MomentVector::MomentVector(std::vector<double> values) : values_(std::move(values)) {
    if (values_.empty()) throw InputError("moment vector must be non-empty");
    for (double v : values_)
        if (!std::isfinite(v)) throw InputError("moment vector contains non-finite values");
}

bool MomentVector::is_log_convex(double rel_tol) const {
    for (std::size_t k = 1; k <= values_.size(); ++k) {
        const double prev = k == 1 ? 1.0 : values_[k - 2];
        if (k == values_.size()) break;
        const double cur = values_[k - 1];
        const double next = values_[k];
        if (cur * cur > prev * next * (1.0 + rel_tol)) return false;
    }
    return true;
}

CumulantVector::CumulantVector(std::vector<double> values) : values_(std::move(values)) {
    if (values_.empty()) throw InputError("cumulant vector must be non-empty");
    for (double v : values_)
        if (!std::isfinite(v)) throw InputError("cumulant vector contains non-finite values");
}

namespace {

double binomial(std::size_t n, std::size_t k) {
    double r = 1.0;
    for (std::size_t i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
    return r;
}

void check_conversion_order(std::size_t K) {
    if (K > kMaxConversionOrder)
        throw SizeError("moment/cumulant conversion supports K <= 12, got " + std::to_string(K));
}

}  // namespace

// Both directions use m_n = sum_{i=1}^{n} C(n-1, i-1) c_i m_{n-i}, m_0 = 1.
CumulantVector moments_to_cumulants(const MomentVector& m) {
    const std::size_t K = m.order();
    check_conversion_order(K);
    std::vector<double> mm(K + 1), c(K + 1, 0.0);
    mm[0] = 1.0;
    for (std::size_t k = 1; k <= K; ++k) mm[k] = m(k);
    for (std::size_t n = 1; n <= K; ++n) {
        double acc = mm[n];
        for (std::size_t i = 1; i < n; ++i) acc -= binomial(n - 1, i - 1) * c[i] * mm[n - i];
        c[n] = acc;
    }
    return CumulantVector(std::vector<double>(c.begin() + 1, c.end()));
}

MomentVector cumulants_to_moments(const CumulantVector& c) {
    const std::size_t K = c.order();
    check_conversion_order(K);
    std::vector<double> mm(K + 1, 0.0);
    mm[0] = 1.0;
    for (std::size_t n = 1; n <= K; ++n) {
        double acc = 0.0;
        for (std::size_t i = 1; i <= n; ++i) acc += binomial(n - 1, i - 1) * c(i) * mm[n - i];
        mm[n] = acc;
    }
    return MomentVector(std::vector<double>(mm.begin() + 1, mm.end()));
}

double mixture_log_density(const GammaMixture& mix, double v) {
    if (!(v > 0.0) || !std::isfinite(v)) throw DomainError("mixture density requires v > 0");
    double best = -std::numeric_limits<double>::infinity();
    std::vector<double> terms;
    terms.reserve(mix.size());
    for (const auto& c : mix.components()) {
        if (c.weight == 0.0) continue;
        const double t = std::log(c.weight) - c.shape * std::log(c.scale) - std::lgamma(c.shape) +
                         (c.shape - 1.0) * std::log(v) - v / c.scale;
        terms.push_back(t);
        best = std::max(best, t);
    }
    if (!std::isfinite(best)) return best;
    double sum = 0.0;
    for (double t : terms) sum += std::exp(t - best);
    return best + std::log(sum);
}

double mixture_density(const GammaMixture& mix, double v) {
    return std::exp(mixture_log_density(mix, v));
}

double mixture_moment(const GammaMixture& mix, int k) {
    if (k < 1) throw DomainError("moment order must be >= 1");
    double m = 0.0;
    for (const auto& c : mix.components()) {
        // beta^k Gamma(alpha + k) / Gamma(alpha) as a rising product.
        double t = c.weight;
        for (int i = 0; i < k; ++i) t *= c.scale * (c.shape + i);
        m += t;
    }
    return m;
}

MomentVector mixture_moments(const GammaMixture& mix, std::size_t K) {
    std::vector<double> m(K);
    for (std::size_t k = 1; k <= K; ++k) m[k - 1] = mixture_moment(mix, static_cast<int>(k));
    return MomentVector(std::move(m));
}

CumulantVector mixture_cumulants(const GammaMixture& mix, std::size_t K) {
    return moments_to_cumulants(mixture_moments(mix, K));
}

double sample_mixture(const GammaMixture& mix, Rng& rng) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const double u = unif(rng);
    const auto comps = mix.components();
    std::size_t s = 0;
    double cum = comps[0].weight;
    while (u >= cum && s + 1 < comps.size()) {
        ++s;
        cum += comps[s].weight;
    }
    // Skip trailing zero-weight components reached by rounding.
    while (comps[s].weight == 0.0 && s > 0) --s;
    std::gamma_distribution<double> gamma(comps[s].shape, comps[s].scale);
    return gamma(rng);
}

namespace {

void check_strip(const GammaMixture& mix, double y) {
    if (!std::isfinite(y) || y >= mix.mgf_bound())
        throw DomainError("m.g.f. argument " + std::to_string(y) +
                          " outside convergence strip y < " + std::to_string(mix.mgf_bound()));
}

}  // namespace

Derivs mixture_mgf(const GammaMixture& mix, double y) {
    check_strip(mix, y);
    Derivs out;
    for (const auto& c : mix.components()) {
        if (c.weight == 0.0) continue;
        const double base = 1.0 - c.scale * y;
        const double m = c.weight * std::exp(-c.shape * std::log1p(-c.scale * y));
        out.value += m;
        out.d1 += m * c.shape * c.scale / base;
        out.d2 += m * c.shape * (c.shape + 1.0) * c.scale * c.scale / (base * base);
    }
    return out;
}

Derivs mixture_log_mgf(const GammaMixture& mix, double y) {
    check_strip(mix, y);
    const auto comps = mix.components();
    std::vector<double> logs(comps.size(), -std::numeric_limits<double>::infinity());
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < comps.size(); ++s) {
        if (comps[s].weight == 0.0) continue;
        logs[s] = std::log(comps[s].weight) - comps[s].shape * std::log1p(-comps[s].scale * y);
        best = std::max(best, logs[s]);
    }
    double z = 0.0;
    for (double l : logs) z += std::exp(l - best);
    Derivs out;
    out.value = best + std::log(z);
    double d2_within = 0.0;
    for (std::size_t s = 0; s < comps.size(); ++s) {
        if (comps[s].weight == 0.0) continue;
        const double p = std::exp(logs[s] - out.value);
        const double base = 1.0 - comps[s].scale * y;
        const double g = comps[s].shape * comps[s].scale / base;
        out.d1 += p * g;
        d2_within += p * g * comps[s].scale / base;
    }
    double spread = 0.0;
    for (std::size_t s = 0; s < comps.size(); ++s) {
        if (comps[s].weight == 0.0) continue;
        const double p = std::exp(logs[s] - out.value);
        const double g = comps[s].shape * comps[s].scale / (1.0 - comps[s].scale * y);
        spread += p * (g - out.d1) * (g - out.d1);
    }
    out.d2 = d2_within + spread;
    return out;
}

}  // namespace smf
