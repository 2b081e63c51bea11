#include "cstk/likelihood.hpp"
#include "cstk/error.hpp"
#include "cstk/prob.hpp"

#include <cmath>
#include <limits>

namespace cstk {

namespace {
constexpr double kLogSqrt2Pi = 0.9189385332046727;
}

NuisanceValues nominal_nuisances(const CountingModel& model) {
    return NuisanceValues{model.background.mean, model.efficiency.mean};
}

double log_likelihood(const CountingModel& model, const Observation& obs, double s,
                      const NuisanceValues& nv) {
    validate(model, obs);
    if (s < 0.0) throw DomainError("log_likelihood: signal must be non-negative");
    if (nv.b < 0.0) throw DomainError("log_likelihood: background value must be non-negative");
    if (!(nv.eff > 0.0)) throw DomainError("log_likelihood: efficiency value must be positive");

    double ll = poisson_log_pmf(obs.n, nv.eff * s + nv.b);

    std::size_t sub = 0;
    const auto gamma_term = [&](const Nuisance& nu, double value) {
        const std::int64_t m = obs.subsidiary_counts[sub++];
        return poisson_log_pmf(m, nu.exposure() * value);
    };
    const auto gauss_term = [&](const Nuisance& nu, double value) {
        const double sigma = nu.abs_sigma();
        const double z = (value - nu.mean) / sigma;
        return -0.5 * z * z - std::log(sigma) - kLogSqrt2Pi;
    };

    if (model.background.form == SubsidiaryForm::GammaFromCount) {
        ll += gamma_term(model.background, nv.b);
    } else if (model.background.form == SubsidiaryForm::TruncatedGaussian) {
        ll += gauss_term(model.background, nv.b);
    }
    if (model.efficiency.form == SubsidiaryForm::GammaFromCount) {
        ll += gamma_term(model.efficiency, nv.eff);
    } else if (model.efficiency.form == SubsidiaryForm::TruncatedGaussian) {
        ll += gauss_term(model.efficiency, nv.eff);
    }
    return ll;
}

double log_likelihood(const CountingModel& model, const Observation& obs, double s) {
    return log_likelihood(model, obs, s, nominal_nuisances(model));
}

} // namespace cstk
