#ifndef CSTK_INTERVAL_HPP
#define CSTK_INTERVAL_HPP

#include <optional>
#include <string>

namespace cstk {

/// A confidence or credible interval for the signal strength. Frequentist
/// constructions can legitimately produce an empty interval; that is a
/// representable outcome here, not an error.
struct IntervalResult {
    std::optional<double> lower;
    std::optional<double> upper;
    double cl = 0.0;
    std::string method;
    bool empty = false;

    static IntervalResult make(double lo, double hi, double cl, std::string method);
    static IntervalResult make_empty(double cl, std::string method);

    /// Closed-interval containment; empty intervals contain nothing.
    bool contains(double s) const {
        return !empty && s >= *lower && s <= *upper;
    }
    double width() const { return empty ? 0.0 : *upper - *lower; }
};

} // namespace cstk

#endif
