#include "cstk/rng.hpp"
#include "cstk/error.hpp"
#include "cstk/prob.hpp"

#include <cmath>

namespace cstk {

std::uint64_t RngStream::next_below(std::uint64_t n) {
    if (n == 0) throw DomainError("next_below: n must be positive");
    // Rejection against the largest multiple of n to avoid modulo bias.
    const std::uint64_t limit = n * ((~0ULL) / n);
    for (;;) {
        const std::uint64_t u = next_u64();
        if (u < limit) return u % n;
    }
}

double RngStream::next_normal() {
    return normal_quantile(next_double());
}

namespace {

std::int64_t poisson_inversion(RngStream& rng, double mu) {
    const double u = rng.next_double();
    double p = std::exp(-mu);
    double cdf = p;
    std::int64_t k = 0;
    while (u > cdf) {
        ++k;
        p *= mu / static_cast<double>(k);
        cdf += p;
        if (p < 1e-320) break; // numerically exhausted tail
    }
    return k;
}

// PTRS transformed rejection (Hormann 1993); valid for mu >= 10.
std::int64_t poisson_ptrs(RngStream& rng, double mu) {
    const double log_mu = std::log(mu);
    const double b = 0.931 + 2.53 * std::sqrt(mu);
    const double a = -0.059 + 0.02483 * b;
    const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    const double v_r = 0.9277 - 3.6224 / (b - 2.0);
    for (;;) {
        const double u = rng.next_double() - 0.5;
        const double v = rng.next_double();
        const double us = 0.5 - std::fabs(u);
        const double kf = std::floor((2.0 * a / us + b) * u + mu + 0.43);
        if (us >= 0.07 && v <= v_r) return static_cast<std::int64_t>(kf);
        if (kf < 0.0 || (us < 0.013 && v > us)) continue;
        const double k = kf;
        if (std::log(v * inv_alpha / (a / (us * us) + b)) <=
            k * log_mu - mu - std::lgamma(k + 1.0)) {
            return static_cast<std::int64_t>(kf);
        }
    }
}

} // namespace

std::int64_t RngStream::next_poisson(double mu) {
    if (mu < 0.0) throw DomainError("next_poisson: negative mean");
    if (mu == 0.0) return 0;
    if (mu < 60.0) return poisson_inversion(*this, mu);
    return poisson_ptrs(*this, mu);
}

} // namespace cstk
