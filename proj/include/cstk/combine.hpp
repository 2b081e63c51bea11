#ifndef CSTK_COMBINE_HPP
#define CSTK_COMBINE_HPP

#include <cstdint>
#include <string>
#include <vector>

// Combination of N measurements of one quantity: inverse-variance weighted
// averages, the correlated generalization with its outside-the-range
// pathology, the scale factor for discrepant inputs, and a demonstration of
// the bias introduced by estimate-dependent Poisson weights.

namespace cstk {

struct Measurement {
    double value = 0.0;
    double sigma = 0.0;
};

/// N measurements with a full covariance. Diagonal entries are sigma_i^2.
struct MeasurementSet {
    std::vector<double> values;
    std::vector<std::vector<double>> covariance;
    std::vector<std::string> labels;

    MeasurementSet(std::vector<double> values, std::vector<std::vector<double>> covariance,
                   std::vector<std::string> labels = {});

    /// Two measurements with correlation coefficient rho.
    static MeasurementSet pair(const Measurement& a, const Measurement& b, double rho);
};

struct CombinedResult {
    double a_best = 0.0;
    double sigma_best = 0.0;
    double s_min = 0.0;        ///< weighted sum of squares at the minimum
    double scale_factor = 1.0; ///< max(1, sqrt(S/(N-1)))
    double scaled_sigma = 0.0; ///< sigma_best inflated only when S/(N-1) > 1
    bool outside_range = false; ///< a_best outside [min value, max value]
};

/// Uncorrelated weighted average with w_i = 1/sigma_i^2. Needs N >= 2.
CombinedResult weighted_average(const std::vector<Measurement>& ms);

/// Correlated combination minimizing (a - v)^T H (a - v) with H the inverse
/// covariance. A singular covariance (|rho| = 1) is an error: select one of
/// the analyses instead of combining them.
CombinedResult correlated_average(const MeasurementSet& mset);

enum class PoissonWeighting {
    Observed,           ///< sigma_i^2 = observed count (downward bias)
    ExpectedAtEstimate, ///< sigma_i^2 = fitted mean (upward bias)
    Iterated,           ///< weights re-derived from the combined estimate
};

std::string to_string(PoissonWeighting w);
PoissonWeighting poisson_weighting_from_string(const std::string& s);

struct BiasEstimate {
    double bias = 0.0;
    double mc_error = 0.0;
    std::int64_t n_repeats = 0;
};

/// Combines pairs of Poisson draws n_repeats times under the chosen
/// weighting and reports mean(combined) - true_mean. Observed weighting
/// guards zero counts with weight 1/max(n,1); demo-only behaviour.
BiasEstimate poisson_weight_bias(double true_mean, std::int64_t n_repeats,
                                 PoissonWeighting weighting, std::uint64_t seed);

} // namespace cstk

#endif
