#ifndef CSTK_MODEL_HPP
#define CSTK_MODEL_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

// The canonical counting experiment: an observed count n that is Poisson
// distributed with mean eff * s + b, where s is the signal strength of
// interest and the background b and conversion factor eff may themselves be
// known only from subsidiary measurements.

namespace cstk {

/// How a nuisance parameter's uncertainty is realized.
enum class SubsidiaryForm {
    /// No uncertainty; the parameter is pinned at its quoted value.
    Exact,
    /// A relative accuracy r = 1/sqrt(k) realized as a subsidiary count of
    /// k = round(1/r^2) events at exposure tau = k / mean. The estimate is
    /// count / tau.  Yields a gamma density that vanishes at zero, so the
    /// flat-signal-prior posterior stays integrable.
    GammaFromCount,
    /// Gaussian measurement of the parameter, truncated to physical values.
    /// Combined with a flat signal prior this is the documented divergent
    /// case for Bayesian upper limits.
    TruncatedGaussian,
};

std::string to_string(SubsidiaryForm f);
SubsidiaryForm subsidiary_form_from_string(const std::string& s);

/// One nuisance parameter: quoted value, relative uncertainty, and the
/// subsidiary-measurement form behind it.
struct Nuisance {
    double mean = 0.0;
    double rel_sigma = 0.0;
    SubsidiaryForm form = SubsidiaryForm::Exact;

    bool exact() const { return form == SubsidiaryForm::Exact; }
    double abs_sigma() const { return rel_sigma * mean; }

    /// Subsidiary count k = round(1/rel_sigma^2) for GammaFromCount.
    std::int64_t count() const;
    /// Subsidiary exposure tau = k / mean for GammaFromCount.
    double exposure() const;
};

struct CountingModel {
    Nuisance background;   // b
    Nuisance efficiency;   // eff
    /// Optional override of the subsidiary-to-main exposure ratio used by
    /// the conditioning p-value; defaults to background.exposure().
    std::optional<double> tau_override;

    /// Validates all invariants; throws DomainError on violation.
    CountingModel(Nuisance b, Nuisance eff, std::optional<double> tau = std::nullopt);

    /// Exact model shorthand: known b, known eff.
    static CountingModel exact(double b_mean, double eff_mean = 1.0);

    double conditioning_tau() const;
    bool has_gamma_subsidiary() const;
    /// Number of GammaFromCount nuisances, in (background, efficiency) order.
    std::size_t gamma_subsidiary_count() const;
};

/// One experimental outcome: the main count plus the subsidiary counts that
/// back any GammaFromCount nuisance estimates (background first, then
/// efficiency, matching the model's declaration order).
struct Observation {
    std::int64_t n = 0;
    std::vector<std::int64_t> subsidiary_counts;

    explicit Observation(std::int64_t count) : n(count) {}
    Observation(std::int64_t count, std::vector<std::int64_t> subsidiaries)
        : n(count), subsidiary_counts(std::move(subsidiaries)) {}
};

/// Checks that an observation is consistent with a model (counts
/// non-negative, subsidiary counts present iff declared). Throws DomainError.
void validate(const CountingModel& model, const Observation& obs);

/// The observation whose subsidiary counts reproduce the model's quoted
/// nuisance estimates exactly (count = round(tau * mean) = k).
Observation nominal_observation(const CountingModel& model, std::int64_t n);

} // namespace cstk

#endif
