#ifndef CSTK_SIGNIFICANCE_HPP
#define CSTK_SIGNIFICANCE_HPP

#include "cstk/model.hpp"
#include "cstk/pvalue.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

// Discovery and exclusion machinery: counting p-values under several
// nuisance-handling strategies, p-value combination rules, the CLs ratio,
// and the Punzi / median definitions of sensitivity.

namespace cstk {

/// p = P(N >= n_obs | b), the exact Poisson tail.
PValueReport pvalue_counting(std::int64_t n_obs, double b);

enum class NuisanceStrategy {
    PlugIn,              ///< tail at the null best estimate of b
    PriorPredictive,     ///< tail averaged over the subsidiary density of b
    PosteriorPredictive, ///< tail averaged over the posterior of b given all data
    Supremum,            ///< largest tail over a bounded b range
    CiAdjusted,          ///< largest tail over a (1-gamma) region, plus gamma
    Conditioning,        ///< binomial test conditioned on the total count
};

std::string to_string(NuisanceStrategy s);
NuisanceStrategy nuisance_strategy_from_string(const std::string& s);

struct PValueNuisanceOptions {
    /// Bounded background range for Supremum, or the (1-gamma) confidence
    /// region for CiAdjusted.
    std::optional<std::pair<double, double>> b_range;
    /// CiAdjusted addend; keep well below any discovery threshold.
    double gamma = 1e-8;
};

/// Discovery p-value for the observed count under H0 (s = 0) with the
/// background uncertainty handled per the chosen strategy. The efficiency
/// does not enter under H0.
PValueReport pvalue_nuisance(const Observation& obs, const CountingModel& model,
                             NuisanceStrategy strategy,
                             const PValueNuisanceOptions& opts = {});

enum class CombineRule { Min, Product };

/// Combines k >= 2 independent p-values. Min rule: 1 - (1 - p_min)^k.
/// Product rule: P(prod of k uniforms <= prod p_i), via the closed form
/// x * sum_{j<k} (-ln x)^j / j!. There is deliberately no default rule: the
/// choice belongs in the analysis plan, not in the toolkit.
PValueReport combine_pvalues(const std::vector<double>& ps, CombineRule rule);

struct CLsResult {
    double cls = 1.0;
    double p0 = 0.0;       ///< P(T > t_obs | H0)
    double one_minus_p1 = 1.0; ///< P(T <= t_obs | H1)
    bool excluded_at_5pct = false;
};

/// CLs = (1 - p1) / (1 - p0). Throws when 1 - p0 = 0 ("no H0 sensitivity").
CLsResult cls(double p0, double p1);

/// Count-statistic CLs: 1-p1 = P(N <= n | s+b), 1-p0 = P(N <= n | b).
CLsResult cls_counting(std::int64_t n, double b, double s);

/// Smallest s excluded at confidence cl: solves CLs(n, b, s) = 1 - cl.
double cls_upper_limit(std::int64_t n, double b, double cl);

/// Expected count distributions under H0 (s = 0) and H1 (signal s), or a
/// pair of empirical statistic samples. Construction checks normalization.
struct HypoStatDist {
    std::vector<double> pmf_h0;
    std::vector<double> pmf_h1;
    std::vector<double> samples_h0; // empirical variant
    std::vector<double> samples_h1;
    bool count_based = true;
    std::string label;

    static HypoStatDist counting(const CountingModel& model, double s);
    static HypoStatDist empirical(std::vector<double> h0, std::vector<double> h1,
                                  std::string label);

    double tail_h0_ge(double t) const;
    double tail_h1_ge(double t) const;
};

/// Punzi sensitivity: t_crit is the smallest count with
/// P(N >= t_crit | b) <= alpha, and s_min the smallest signal with
/// P(N >= t_crit | b + eff*s) >= cl. Both tail conditions are re-verified
/// with exact sums at construction. alpha_actual stores the realized
/// (conservative) tail at t_crit.
struct SensitivityResult {
    std::int64_t t_crit = 0;
    double alpha_requested = 0.0;
    double alpha_actual = 0.0;
    double cl = 0.0;
    double s_min = 0.0;
};

SensitivityResult punzi_sensitivity(const CountingModel& model, double alpha, double cl);

enum class LimitMethod { FeldmanCousins, Classical, Bayes, Profile };

std::string to_string(LimitMethod m);
LimitMethod limit_method_from_string(const std::string& s);

/// Median upper limit over toy experiments generated at s = 0. n_toys must
/// be odd so the sample median is an order statistic (and monotone maps of
/// the limit commute with taking the median).
double median_sensitivity(const CountingModel& model, LimitMethod method, double cl,
                          std::int64_t n_toys, std::uint64_t seed);

} // namespace cstk

#endif
