#ifndef CSTK_LIKELIHOOD_HPP
#define CSTK_LIKELIHOOD_HPP

#include "cstk/model.hpp"

namespace cstk {

/// Candidate nuisance values at which the likelihood is evaluated.
struct NuisanceValues {
    double b;
    double eff;
};

NuisanceValues nominal_nuisances(const CountingModel& model);

/// Joint log-likelihood of the main count and the subsidiary measurements at
/// signal strength s and nuisance values nv:
///
///   log Poisson(n; eff*s + b) + subsidiary terms
///
/// Gamma-from-count subsidiaries contribute log Poisson(m; tau * value);
/// truncated-Gaussian ones contribute the Gaussian log density of the quoted
/// estimate. Exact nuisances contribute nothing (their value is pinned).
/// Returns -inf (not an error) when the data are impossible, i.e. a zero
/// mean with a positive count.
double log_likelihood(const CountingModel& model, const Observation& obs, double s,
                      const NuisanceValues& nv);

/// Convenience overload at the model's nominal nuisance values.
double log_likelihood(const CountingModel& model, const Observation& obs, double s);

} // namespace cstk

#endif
