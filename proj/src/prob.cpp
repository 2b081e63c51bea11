#include "cstk/prob.hpp"
#include "cstk/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cstk {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kSqrt2 = 1.4142135623730951;
constexpr double kLogSqrt2Pi = 0.9189385332046727;
} // namespace

double log_add_exp(double a, double b) {
    if (a == -kInf) return b;
    if (b == -kInf) return a;
    const double m = std::max(a, b);
    return m + std::log1p(std::exp(-std::fabs(a - b)));
}

double poisson_log_pmf(std::int64_t n, double mu) {
    if (n < 0) throw DomainError("poisson_pmf: negative count");
    if (mu < 0.0) throw DomainError("poisson_pmf: negative mean");
    if (mu == 0.0) return n == 0 ? 0.0 : -kInf;
    return -mu + static_cast<double>(n) * std::log(mu) - std::lgamma(static_cast<double>(n) + 1.0);
}

double poisson_pmf(std::int64_t n, double mu) {
    return std::exp(poisson_log_pmf(n, mu));
}

double poisson_cdf(std::int64_t n, double mu) {
    if (n < 0) return 0.0;
    if (mu < 0.0) throw DomainError("poisson_cdf: negative mean");
    if (mu == 0.0) return 1.0;
    // Sum whichever side is shorter; the complement comes from the tail sum.
    if (static_cast<double>(n) < mu) {
        double log_sum = -kInf;
        double log_term = -mu; // n = 0 term
        for (std::int64_t k = 0; k <= n; ++k) {
            if (k > 0) log_term += std::log(mu) - std::log(static_cast<double>(k));
            log_sum = log_add_exp(log_sum, log_term);
        }
        return std::exp(log_sum);
    }
    return 1.0 - poisson_tail_ge(n + 1, mu);
}

double poisson_tail_ge(std::int64_t n, double mu) {
    if (n <= 0) return 1.0;
    if (mu < 0.0) throw DomainError("poisson_tail_ge: negative mean");
    if (mu == 0.0) return 0.0;
    if (static_cast<double>(n) <= mu) return 1.0 - poisson_cdf(n - 1, mu);
    // Upper tail: terms decay by a factor mu/k < 1, sum until negligible.
    double log_term = poisson_log_pmf(n, mu);
    double log_sum = log_term;
    for (std::int64_t k = n + 1;; ++k) {
        log_term += std::log(mu) - std::log(static_cast<double>(k));
        log_sum = log_add_exp(log_sum, log_term);
        if (log_term < log_sum - 40.0) break; // remaining tail < 1e-16 of sum
    }
    return std::exp(log_sum);
}

double normal_cdf(double x) {
    return 0.5 * std::erfc(-x / kSqrt2);
}

double normal_sf(double x) {
    return 0.5 * std::erfc(x / kSqrt2);
}

namespace {

// Rational approximation for the normal quantile (Acklam), |rel err| < 1.2e-9,
// then two Newton corrections against erfc push it to machine precision.
double normal_quantile_approx(double p) {
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const double p_low = 0.02425;
    if (p < p_low) {
        const double q = std::sqrt(-2.0 * std::log(p));
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    if (p <= 1.0 - p_low) {
        const double q = p - 0.5;
        const double r = q * q;
        return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
               (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    }
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
}

double normal_pdf(double x) {
    return std::exp(-0.5 * x * x - kLogSqrt2Pi);
}

} // namespace

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw DomainError("normal_quantile: p must be in (0,1)");
    double x = normal_quantile_approx(p);
    // Newton steps against whichever side of the CDF avoids cancellation.
    for (int it = 0; it < 3; ++it) {
        const double f = (x < 0.0) ? normal_cdf(x) - p : (1.0 - p) - normal_sf(x);
        const double dpdx = normal_pdf(x);
        if (dpdx <= 0.0) break;
        const double step = f / dpdx;
        x -= step;
        if (std::fabs(step) < 1e-15 * std::max(1.0, std::fabs(x))) break;
    }
    return x;
}

double sigma_to_p(double z) {
    return normal_sf(z);
}

double p_to_sigma(double p) {
    if (!(p > 0.0) || p > 1.0) throw DomainError("p_to_sigma: p must be in (0,1]");
    if (p == 1.0) return -kInf;
    if (p == 0.5) return 0.0;
    // z with normal_sf(z) = p, i.e. the quantile of 1-p.
    double z = -normal_quantile_approx(p);
    for (int it = 0; it < 3; ++it) {
        const double f = normal_sf(z) - p;
        const double dpdz = -normal_pdf(z);
        const double step = f / dpdz;
        z -= step;
        if (std::fabs(step) < 1e-15 * std::max(1.0, std::fabs(z))) break;
    }
    return z;
}

namespace {

// Regularized incomplete gamma by series (x < a+1) or continued fraction.
double gamma_p_series(double a, double x) {
    double ap = a;
    double sum = 1.0 / a;
    double del = sum;
    for (int n = 0; n < 500; ++n) {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if (std::fabs(del) < std::fabs(sum) * 1e-16) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

double gamma_q_contfrac(double a, double x) {
    const double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < 500; ++i) {
        const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < 1e-16) break;
    }
    return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

} // namespace

double gamma_p(double a, double x) {
    if (a <= 0.0) throw DomainError("gamma_p: a must be positive");
    if (x < 0.0) throw DomainError("gamma_p: x must be non-negative");
    if (x == 0.0) return 0.0;
    if (x < a + 1.0) return gamma_p_series(a, x);
    return 1.0 - gamma_q_contfrac(a, x);
}

double gamma_q(double a, double x) {
    if (a <= 0.0) throw DomainError("gamma_q: a must be positive");
    if (x < 0.0) throw DomainError("gamma_q: x must be non-negative");
    if (x == 0.0) return 1.0;
    if (x < a + 1.0) return 1.0 - gamma_p_series(a, x);
    return gamma_q_contfrac(a, x);
}

namespace {

double inc_beta_contfrac(double x, double a, double b) {
    const double tiny = 1e-300;
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= 500; ++m) {
        const double dm = static_cast<double>(m);
        const double m2 = 2.0 * dm;
        double aa = dm * (b - dm) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + dm) * (qab + dm) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < 1e-16) break;
    }
    return h;
}

} // namespace

double inc_beta(double x, double a, double b) {
    if (a <= 0.0 || b <= 0.0) throw DomainError("inc_beta: a, b must be positive");
    if (x < 0.0 || x > 1.0) throw DomainError("inc_beta: x must be in [0,1]");
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;
    const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                             a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(log_front);
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return front * inc_beta_contfrac(x, a, b) / a;
    }
    return 1.0 - std::exp(std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                          a * std::log(x) + b * std::log1p(-x)) *
                     inc_beta_contfrac(1.0 - x, b, a) / b;
}

double chi2_cdf(double x, double ndof) {
    if (ndof <= 0.0) throw DomainError("chi2_cdf: ndof must be positive");
    if (x <= 0.0) return 0.0;
    return gamma_p(0.5 * ndof, 0.5 * x);
}

double chi2_sf(double x, double ndof) {
    if (ndof <= 0.0) throw DomainError("chi2_sf: ndof must be positive");
    if (x <= 0.0) return 1.0;
    return gamma_q(0.5 * ndof, 0.5 * x);
}

double chi2_quantile(double p, double ndof) {
    if (!(p > 0.0 && p < 1.0)) throw DomainError("chi2_quantile: p must be in (0,1)");
    if (ndof <= 0.0) throw DomainError("chi2_quantile: ndof must be positive");
    double lo = 0.0, hi = ndof + 10.0 * std::sqrt(2.0 * ndof) + 10.0;
    while (chi2_cdf(hi, ndof) < p) hi *= 2.0;
    for (int it = 0; it < 200 && hi - lo > 1e-12 * std::max(1.0, hi); ++it) {
        const double mid = 0.5 * (lo + hi);
        (chi2_cdf(mid, ndof) < p ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

double binomial_tail_ge(std::int64_t k, std::int64_t n, double p) {
    if (n < 0) throw DomainError("binomial_tail_ge: n must be non-negative");
    if (p < 0.0 || p > 1.0) throw DomainError("binomial_tail_ge: p must be in [0,1]");
    if (k <= 0) return 1.0;
    if (k > n) return 0.0;
    if (p == 0.0) return 0.0;
    if (p == 1.0) return 1.0;
    const double lp = std::log(p);
    const double lq = std::log1p(-p);
    double log_sum = -kInf;
    for (std::int64_t j = k; j <= n; ++j) {
        const double lterm = std::lgamma(static_cast<double>(n) + 1.0) -
                             std::lgamma(static_cast<double>(j) + 1.0) -
                             std::lgamma(static_cast<double>(n - j) + 1.0) +
                             static_cast<double>(j) * lp + static_cast<double>(n - j) * lq;
        log_sum = log_add_exp(log_sum, lterm);
    }
    return std::min(1.0, std::exp(log_sum));
}

double kolmogorov_sf(double lambda) {
    // Below ~0.2 the CDF is < 1e-12; the alternating series converges too
    // slowly there, so short-circuit.
    if (lambda < 0.2) return 1.0;
    double sum = 0.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * k * k * lambda * lambda);
        sum += (k % 2 == 1 ? term : -term);
        if (term < 1e-18) break;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

double ks_distance_uniform(std::vector<double> pit) {
    if (pit.empty()) throw DomainError("ks_distance_uniform: empty sample");
    std::sort(pit.begin(), pit.end());
    const double n = static_cast<double>(pit.size());
    double d = 0.0;
    for (std::size_t i = 0; i < pit.size(); ++i) {
        const double hi = (static_cast<double>(i) + 1.0) / n - pit[i];
        const double lo = pit[i] - static_cast<double>(i) / n;
        d = std::max({d, hi, lo});
    }
    return d;
}

double ks_pvalue(double d, std::size_t n) {
    const double sn = std::sqrt(static_cast<double>(n));
    return kolmogorov_sf(d * (sn + 0.12 + 0.11 / sn));
}

} // namespace cstk
