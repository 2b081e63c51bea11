#ifndef CSTK_PROB_HPP
#define CSTK_PROB_HPP

#include <cstdint>
#include <vector>

// Probability building blocks shared by every module: Poisson pmf and tails
// in log space, one-sided Gaussian tail conversions, regularized incomplete
// gamma/beta, chi-square tails and the Kolmogorov distribution.
//
// Everything here is a pure function of its arguments.

namespace cstk {

// ---- log-space helpers ----

/// log(exp(a) + exp(b)) without overflow; handles -inf operands.
double log_add_exp(double a, double b);

// ---- Poisson ----

/// log P(N = n | mu).  mu = 0 is legal: returns 0 for n = 0, -inf otherwise.
double poisson_log_pmf(std::int64_t n, double mu);

/// P(N = n | mu) = exp(-mu) mu^n / n!, evaluated in log space so n up to 1e6
/// stays finite.
double poisson_pmf(std::int64_t n, double mu);

/// P(N <= n | mu), exact sum in log space. n < 0 gives 0.
double poisson_cdf(std::int64_t n, double mu);

/// P(N >= n | mu), exact tail sum in log space (stable down past 5 sigma).
double poisson_tail_ge(std::int64_t n, double mu);

// ---- Gaussian tail conventions (one-sided) ----

/// Standard normal CDF.
double normal_cdf(double x);

/// Standard normal survival function P(Z >= x) = 0.5 erfc(x / sqrt2).
double normal_sf(double x);

/// Standard normal quantile, accurate to ~1e-15 relative over (0,1)
/// (rational initial guess refined with Newton steps on erfc).
double normal_quantile(double p);

/// One-sided tail probability of a z-score: p = P(Z >= z).
/// sigma_to_p(5) = 2.8665e-7.
double sigma_to_p(double z);

/// Inverse of sigma_to_p: the z with one-sided tail p.  For p in (0.5, 1]
/// the result is negative (p = 1 maps to -inf).  p outside (0, 1] throws.
double p_to_sigma(double p);

// ---- incomplete gamma / beta ----

/// Regularized lower incomplete gamma P(a, x).
double gamma_p(double a, double x);

/// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x).
double gamma_q(double a, double x);

/// Regularized incomplete beta I_x(a, b).
double inc_beta(double x, double a, double b);

// ---- chi-square ----

double chi2_cdf(double x, double ndof);
double chi2_sf(double x, double ndof);
double chi2_quantile(double p, double ndof);

// ---- binomial ----

/// P(X >= k | X ~ Binomial(n, p)), exact sum in log space.
double binomial_tail_ge(std::int64_t k, std::int64_t n, double p);

// ---- Kolmogorov-Smirnov ----

/// Asymptotic Kolmogorov tail Q_KS(lambda) = 2 sum (-1)^{k-1} exp(-2 k^2 lambda^2).
double kolmogorov_sf(double lambda);

/// Two-sided KS distance of a sample against a CDF given as sorted values of
/// F evaluated at the sample points (i.e. PIT values). Returns D.
double ks_distance_uniform(std::vector<double> pit_values);

/// p-value for a one-sample KS distance D at sample size n (Stephens'
/// finite-n correction applied to the asymptotic tail).
double ks_pvalue(double d, std::size_t n);

} // namespace cstk

#endif
