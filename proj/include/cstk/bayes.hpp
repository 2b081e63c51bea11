#ifndef CSTK_BAYES_HPP
#define CSTK_BAYES_HPP

#include "cstk/interval.hpp"
#include "cstk/model.hpp"

#include <vector>

// Bayesian upper limits with a flat (improper) prior on the non-negative
// signal strength and nuisance parameters integrated out. Gamma-from-count
// subsidiaries marginalize in closed form (the marginal likelihood is a
// Poisson convolved with negative-binomial terms); truncated-Gaussian ones
// go through adaptive Gauss-Legendre quadrature and are the documented
// divergent-posterior combination, which the tail check flags instead of
// quietly returning a cutoff-dependent number.

namespace cstk {

struct PosteriorDensity {
    std::vector<double> s_grid;
    std::vector<double> density;
    bool normalized = false;
    bool divergent = false;

    /// Trapezoid CDF at s (normalized posteriors only).
    double cdf(double s) const;
    /// Smallest s with CDF(s) = q. Throws ComputationError when divergent.
    double quantile(double q) const;
};

/// Marginal likelihood m(s) = E_{eps,b}[ Poisson(n; eps*s + b) ] under the
/// model's subsidiary densities. Exposed for tests and the profile oracle.
double marginal_likelihood(const CountingModel& model, const Observation& obs, double s);

/// Posterior density of s on an adaptive grid, with the divergence check
/// (integral over the last decade must fall below 1e-4 of the total after
/// at most two range doublings).
PosteriorDensity posterior(const CountingModel& model, const Observation& obs);

/// Bayesian upper limit: smallest s_up with posterior mass cl below it.
/// Divergent posteriors raise a ComputationError naming the prior
/// combination.
IntervalResult bayes_upper_limit(const CountingModel& model, const Observation& obs, double cl);

/// Closed-form posterior CDF for the exact-background, gamma-efficiency
/// counting model (subsidiary count m at exposure tau):
///   CDF(S) = sum_j pmf(n-j; b) I_T(j+1, m-1) / sum_j pmf(n-j; b),
/// with T = S/(tau+S). Requires m >= 2.
double bayes_cdf_gamma_eff(std::int64_t n, double b, std::int64_t m, double tau, double s);

/// Upper limit via the closed-form CDF; the hot path for coverage scans.
double bayes_upper_limit_gamma_eff(std::int64_t n, double b, std::int64_t m, double tau,
                                   double cl);

} // namespace cstk

#endif
