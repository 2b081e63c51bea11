#ifndef CSTK_ENERGY_HPP
#define CSTK_ENERGY_HPP

#include <cstdint>
#include <vector>

// Binning-free two-sample test: assign charge +1/|A| to the first sample
// and -1/|B| to the second, and compute the "electrostatic energy"
//   E = sum_{i<j} q_i q_j f(d_ij),  f(d) = -ln(d + eps),
// with Euclidean distances after per-dimension scaling. Similar samples
// give small E; the p-value comes from random relabelings of the pooled
// points (exhaustively enumerated for tiny samples).

namespace cstk {

struct TwoSample {
    std::vector<std::vector<double>> a;
    std::vector<std::vector<double>> b;
    /// Per-dimension metric scales; mandatory because no default choice is
    /// defensible across heterogeneous observables.
    std::vector<double> scales;

    std::size_t dim() const { return scales.size(); }
    void check() const;
};

struct EnergyResult {
    double e = 0.0;
    double p = 1.0;
    std::int64_t n_perm = 0;
    bool exhaustive = false;
    double epsilon = 0.0; ///< the distance floor actually used
};

/// epsilon <= 0 selects the default floor of 1e-6 times the median pairwise
/// distance. n_perm >= 99 required; pooled samples of at most 12 points are
/// enumerated exhaustively instead.
EnergyResult energy_test(const TwoSample& ts, double epsilon, std::int64_t n_perm,
                         std::uint64_t seed);

} // namespace cstk

#endif
