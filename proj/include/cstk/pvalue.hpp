#ifndef CSTK_PVALUE_HPP
#define CSTK_PVALUE_HPP

#include <string>

namespace cstk {

/// A p-value with its one-sided Gaussian sigma equivalent and the strategy
/// that produced it. sigma_equiv is clamped at 0 for p > 0.5 so trivially
/// compatible data never report a negative significance.
struct PValueReport {
    double p = 1.0;
    std::string sided = "one-sided-upper";
    double sigma_equiv = 0.0;
    std::string method;

    static PValueReport make(double p, std::string method);
};

} // namespace cstk

#endif
