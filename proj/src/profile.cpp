#include "cstk/profile.hpp"
#include "cstk/error.hpp"
#include "cstk/likelihood.hpp"
#include "cstk/parallel.hpp"
#include "cstk/prob.hpp"
#include "optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cstk {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct InnerMax {
    // Owns its data: the curve's evaluator outlives the profile() call.
    CountingModel model;
    Observation obs;
    bool b_free;
    bool eff_free;
    double b_hi;
    double log_eff_lo, log_eff_hi;

    double operator()(double s) const {
        if (!b_free && !eff_free) {
            return log_likelihood(model, obs, s, nominal_nuisances(model));
        }
        NuisanceValues nv = nominal_nuisances(model);
        const auto ll_at = [&](double b, double log_eff) {
            return log_likelihood(model, obs, s, NuisanceValues{b, std::exp(log_eff)});
        };
        if (b_free && !eff_free) {
            const double le = std::log(nv.eff);
            return detail::brent_max([&](double b) { return ll_at(b, le); }, 0.0, b_hi).second;
        }
        if (eff_free && !b_free) {
            return detail::brent_max([&](double le) { return ll_at(nv.b, le); }, log_eff_lo,
                                     log_eff_hi)
                .second;
        }
        // Two free nuisances: alternating coordinate sweeps with restarts.
        const double starts[3][2] = {{nv.b, std::log(nv.eff)},
                                     {0.5 * nv.b, std::log(nv.eff) + 0.5},
                                     {std::min(b_hi, 2.0 * nv.b + 1.0), std::log(nv.eff) - 0.5}};
        double best = -kInf;
        for (const auto& start : starts) {
            double b = start[0], le = start[1];
            double prev = ll_at(b, le);
            bool converged = false;
            for (int sweep = 0; sweep < 200; ++sweep) {
                b = detail::brent_max([&](double x) { return ll_at(x, le); }, 0.0, b_hi).first;
                auto [le_new, val] =
                    detail::brent_max([&](double x) { return ll_at(b, x); }, log_eff_lo,
                                      log_eff_hi);
                le = le_new;
                if (std::fabs(val - prev) < 1e-10 * (std::fabs(val) + 1.0)) {
                    converged = true;
                    best = std::max(best, val);
                    break;
                }
                prev = val;
            }
            if (converged) return best;
        }
        throw ComputationError("profile: inner maximization did not converge at s=" +
                               std::to_string(s));
    }
};

InnerMax make_inner(const CountingModel& model, const Observation& obs) {
    InnerMax inner{model, obs, false, false, 0.0, 0.0, 0.0};
    inner.b_free = !model.background.exact();
    inner.eff_free = !model.efficiency.exact();
    const double n = static_cast<double>(obs.n);
    inner.b_hi = model.background.mean + 10.0 * model.background.abs_sigma() + n +
                 10.0 * std::sqrt(n + 1.0) + 1.0;
    const double spread = 30.0 * model.efficiency.rel_sigma + 3.0;
    inner.log_eff_lo = std::log(model.efficiency.mean) - spread;
    inner.log_eff_hi = std::log(model.efficiency.mean) + spread;
    return inner;
}

} // namespace

std::vector<double> default_profile_grid(const CountingModel& model, const Observation& obs) {
    const double n = static_cast<double>(obs.n);
    const double s_max =
        (n + 10.0 * std::sqrt(n + 1.0) + 10.0) / model.efficiency.mean + 1.0;
    std::vector<double> grid;
    const int points = 400;
    grid.reserve(points + 1);
    for (int i = 0; i <= points; ++i) grid.push_back(s_max * i / points);
    return grid;
}

ProfileCurve profile(const CountingModel& model, const Observation& obs,
                     const std::vector<double>& s_grid) {
    validate(model, obs);
    if (s_grid.empty()) throw DomainError("profile: empty signal grid");
    if (!std::is_sorted(s_grid.begin(), s_grid.end())) {
        throw DomainError("profile: signal grid must be ascending");
    }
    if (s_grid.front() < 0.0) throw DomainError("profile: signal grid must be non-negative");

    const InnerMax inner = make_inner(model, obs);
    ProfileCurve curve;
    curve.s_grid = s_grid;
    curve.lnl_prof.resize(s_grid.size());
    parallel_for(s_grid.size(), [&](std::size_t i) { curve.lnl_prof[i] = inner(s_grid[i]); });
    std::size_t best = 0;
    for (std::size_t i = 0; i < s_grid.size(); ++i) {
        if (curve.lnl_prof[i] > curve.lnl_prof[best]) best = i;
    }
    // Refine the maximizer between its grid neighbours.
    const double lo = best > 0 ? s_grid[best - 1] : s_grid[best];
    const double hi = best + 1 < s_grid.size() ? s_grid[best + 1] : s_grid[best];
    if (hi > lo) {
        auto [s_hat, lnl] = detail::brent_max(inner, lo, hi);
        curve.s_hat = s_hat;
        curve.lnl_max = lnl;
    } else {
        curve.s_hat = s_grid[best];
        curve.lnl_max = curve.lnl_prof[best];
    }
    if (curve.lnl_max < curve.lnl_prof[best]) {
        curve.s_hat = s_grid[best];
        curve.lnl_max = curve.lnl_prof[best];
    }
    curve.eval = [inner](double s) { return inner(s); };
    return curve;
}

ProfileCurve profile(const CountingModel& model, const Observation& obs) {
    return profile(model, obs, default_profile_grid(model, obs));
}

namespace {

// Crossing of eval(s) = threshold between s_in (>= threshold) and s_out.
double bisect_crossing(const std::function<double(double)>& eval, double s_in, double s_out,
                       double threshold) {
    for (int it = 0; it < 100 && std::fabs(s_out - s_in) > 1e-6; ++it) {
        const double mid = 0.5 * (s_in + s_out);
        (eval(mid) >= threshold ? s_in : s_out) = mid;
    }
    return 0.5 * (s_in + s_out);
}

} // namespace

IntervalResult delta_lnl_interval(const ProfileCurve& curve, double delta,
                                  const std::string& cl_tag) {
    if (!(delta > 0.0)) throw DomainError("delta_lnl_interval: delta must be positive");
    if (!curve.eval) throw DomainError("delta_lnl_interval: curve has no evaluator");
    const double threshold = curve.lnl_max - delta;

    double lower = 0.0;
    if (curve.eval(0.0) < threshold) {
        lower = bisect_crossing(curve.eval, curve.s_hat, 0.0, threshold);
    }

    // Upper crossing: first scan the tabulated curve, then extend twice.
    double span = curve.s_grid.back() - curve.s_hat;
    if (span <= 0.0) span = std::max(1.0, curve.s_grid.back());
    double s_in = curve.s_hat;
    double s_out = -1.0;
    for (std::size_t i = 0; i < curve.s_grid.size(); ++i) {
        if (curve.s_grid[i] <= curve.s_hat) continue;
        if (curve.lnl_prof[i] >= threshold) {
            s_in = curve.s_grid[i];
        } else {
            s_out = curve.s_grid[i];
            break;
        }
    }
    for (int ext = 0; s_out < 0.0 && ext < 2; ++ext) {
        const double probe_end = s_in + (ext + 1) * 2.0 * std::max(span, 1.0);
        const int steps = 64;
        for (int i = 1; i <= steps && s_out < 0.0; ++i) {
            const double s = s_in + (probe_end - s_in) * i / steps;
            if (curve.eval(s) >= threshold) s_in = s; else s_out = s;
        }
    }
    if (s_out < 0.0) {
        throw ComputationError(
            "delta_lnl_interval: upper crossing not found after two grid extensions");
    }
    const double upper = bisect_crossing(curve.eval, s_in, s_out, threshold);
    // Equivalent Gaussian confidence level of the threshold rule.
    const double cl_equiv = chi2_cdf(2.0 * delta, 1.0);
    return IntervalResult::make(lower, upper, cl_equiv, cl_tag);
}

} // namespace cstk
