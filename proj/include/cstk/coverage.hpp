#ifndef CSTK_COVERAGE_HPP
#define CSTK_COVERAGE_HPP

#include "cstk/interval.hpp"
#include "cstk/model.hpp"
#include "cstk/rng.hpp"
#include "cstk/significance.hpp"

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

// Toy-experiment engine and coverage scanners. Coverage(s_true) is the
// fraction of repeated experiments whose reported interval contains s_true
// (closed-interval containment; empty intervals never cover). Toys use
// counter-based streams keyed by (seed, grid index, toy index), so results
// are independent of thread count and scheduling.

namespace cstk {

enum class CoverageMethod { FeldmanCousins, Classical, Bayes, Profile, FlipFlop };

std::string to_string(CoverageMethod m);
CoverageMethod coverage_method_from_string(const std::string& s);

/// Unit-variance Gaussian measurement of a non-negative mean, the model
/// behind the flip-flop policy study.
struct GaussianUnitModel {
    double switch_sigma = 3.0;
};

using ExperimentModel = std::variant<CountingModel, GaussianUnitModel>;

struct CoverageCurve {
    std::vector<double> s_true;
    std::vector<double> coverage;
    std::vector<double> stderr_;
    std::int64_t n_toys = 0;
    std::string method;
    std::uint64_t seed = 0;
};

/// Draws one toy: subsidiary counts from their sampling distributions, then
/// n ~ Poisson(eff_true * s_true + b_true) at the model's true values.
/// Truncated-Gaussian subsidiaries have no count to draw and are rejected.
Observation generate_toy(const CountingModel& model, double s_true, RngStream& rng);

/// Interval for one observation under the given limit method; the common
/// dispatch used by coverage scans, median sensitivity and the CLI.
IntervalResult limit_interval(const CountingModel& model, const Observation& obs,
                              LimitMethod method, double cl);

/// Monte-Carlo coverage scan. Requires n_toys >= 10^4 (the quoted binomial
/// stderr is meaningless below that). Method and model must match:
/// FlipFlop needs the Gaussian model, everything else the counting model.
CoverageCurve coverage_scan(CoverageMethod method, const ExperimentModel& model,
                            const std::vector<double>& s_grid, double cl,
                            std::int64_t n_toys, std::uint64_t seed);

/// Deterministic coverage by summing the exact outcome distribution
/// (over n, and over subsidiary counts where present). No Monte Carlo.
CoverageCurve coverage_exact(CoverageMethod method, const ExperimentModel& model,
                             const std::vector<double>& s_grid, double cl);

} // namespace cstk

#endif
