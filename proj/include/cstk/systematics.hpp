#ifndef CSTK_SYSTEMATICS_HPP
#define CSTK_SYSTEMATICS_HPP

#include <cstdint>
#include <functional>
#include <vector>

// One-factor-at-a-time ("unisim") versus jointly-sampled ("multisim")
// systematic-error estimation for a parameter estimate T(nu).

namespace cstk {

struct SystematicsReport {
    std::vector<double> unisim_shifts; ///< per-nuisance symmetric shifts
    double unisim_quadrature = 0.0;    ///< quadrature sum of the shifts
    double multisim_spread = 0.0;      ///< sample sd of T over joint draws
    double multisim_stderr = 0.0;      ///< MC error of the spread estimate
    std::vector<std::vector<double>> covariance;
    std::int64_t n_multisim = 0;
};

/// response: T as a function of the nuisance vector. center: the nominal
/// nuisance point. covariance must be symmetric positive semi-definite
/// (checked via pivoted Cholesky; an indefinite matrix is an error).
SystematicsReport systematics_compare(const std::function<double(const std::vector<double>&)>& response,
                                      const std::vector<double>& center,
                                      const std::vector<std::vector<double>>& covariance,
                                      std::int64_t n_multisim, std::uint64_t seed);

} // namespace cstk

#endif
