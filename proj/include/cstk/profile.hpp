#ifndef CSTK_PROFILE_HPP
#define CSTK_PROFILE_HPP

#include "cstk/interval.hpp"
#include "cstk/model.hpp"

#include <functional>
#include <vector>

// Profile likelihood: the full likelihood maximized over the nuisance
// parameters at each fixed signal value, and the Delta(ln L) threshold rule
// for intervals on the profiled curve.

namespace cstk {

struct ProfileCurve {
    std::vector<double> s_grid;
    std::vector<double> lnl_prof;
    double s_hat = 0.0;
    double lnl_max = 0.0;
    /// Profiled log-likelihood at arbitrary s (used to refine endpoints
    /// beyond the tabulated grid).
    std::function<double(double)> eval;
};

/// Default signal grid for profiling an observation.
std::vector<double> default_profile_grid(const CountingModel& model, const Observation& obs);

/// Profiles the likelihood over the model's uncertain nuisances (0, 1 or 2
/// of background and efficiency). The inner maximization runs in log-eff
/// coordinates; non-convergence after bounded restarts raises a
/// ComputationError carrying the offending s.
ProfileCurve profile(const CountingModel& model, const Observation& obs,
                     const std::vector<double>& s_grid);

ProfileCurve profile(const CountingModel& model, const Observation& obs);

/// Interval {s : lnL_prof(s) >= lnL_max - delta}. delta = 0.5 gives the
/// conventional 68% rule; 1.3529 the 90% analogue. A point exactly at the
/// threshold is inside. Endpoints located by bisection to 1e-6; the grid is
/// extended at most twice when the upper crossing lies beyond it.
IntervalResult delta_lnl_interval(const ProfileCurve& curve, double delta = 0.5,
                                  const std::string& cl_tag = "delta-lnl-0.5");

} // namespace cstk

#endif
