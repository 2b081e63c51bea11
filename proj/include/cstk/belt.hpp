#ifndef CSTK_BELT_HPP
#define CSTK_BELT_HPP

#include "cstk/interval.hpp"

#include <cstdint>
#include <string>
#include <vector>

// Neyman constructions for the nuisance-free counting experiment
// n ~ Poisson(s + b): acceptance sets in count space for each signal value,
// inverted into confidence intervals. Three ordering rules are provided;
// the likelihood-ratio rule is the Feldman-Cousins unified construction.

namespace cstk {

enum class Ordering {
    Upper,           ///< excludes low counts first: upper-limit belts
    Central,         ///< equal excluded tail probability on each side
    LikelihoodRatio, ///< Feldman-Cousins R = P(n|s) / P(n|s_hat(n))
};

std::string to_string(Ordering o);
Ordering ordering_from_string(const std::string& s);

/// Contiguous accepted count range [n_lo, n_hi] for one signal value.
struct Acceptance {
    std::int64_t n_lo;
    std::int64_t n_hi;
    bool contains(std::int64_t n) const { return n >= n_lo && n <= n_hi; }
};

/// Acceptance set at a single signal value (no grid required).
/// By construction sum of pmf over the set is >= cl.
/// Ties in the likelihood-ratio ordering admit the larger count first.
Acceptance acceptance_at(double s, double b, double cl, Ordering ordering);

struct ConfidenceBelt {
    std::vector<double> s_grid;
    std::vector<Acceptance> acceptance;
    Ordering ordering;
    double b = 0.0;
    double cl = 0.0;

    /// Belt inversion: [min, max] grid s whose acceptance contains n.
    /// Throws ComputationError("belt truncated...") if the belt does not
    /// close over the grid for this count.
    IntervalResult invert(std::int64_t n) const;
};

/// Builds the belt over s in [0, s_max] with step ds.
ConfidenceBelt build_belt(double b, double cl, Ordering ordering, double s_max, double ds);

/// Feldman-Cousins unified interval by likelihood-ratio belt inversion with
/// an automatically grown signal range; endpoints refined by bisection on
/// the acceptance boundary. Never empty.
IntervalResult fc_interval(std::int64_t n, double b, double cl, double ds = 0.005);

/// Classical upper limit: s_up solves P(N <= n | s_up + b) = 1 - cl.
/// Returns an empty interval when no non-negative s solves it (a strong
/// downward fluctuation, n well below b).
IntervalResult classical_upper_limit(std::int64_t n, double b, double cl);

/// The "flip-flop" policy for a unit-Gaussian measurement x of a
/// non-negative mean: quote an upper limit when x is less than switch_sigma,
/// a central interval otherwise. Reproduces the undercoverage this
/// data-dependent choice causes.
IntervalResult flip_flop_interval(double x, double cl, double switch_sigma = 3.0);

} // namespace cstk

#endif
