#include "cstk/model.hpp"
#include "cstk/error.hpp"

#include <cmath>

namespace cstk {

std::string to_string(SubsidiaryForm f) {
    switch (f) {
    case SubsidiaryForm::Exact: return "exact";
    case SubsidiaryForm::GammaFromCount: return "gamma-from-count";
    case SubsidiaryForm::TruncatedGaussian: return "truncated-gaussian";
    }
    return "?";
}

SubsidiaryForm subsidiary_form_from_string(const std::string& s) {
    if (s == "exact") return SubsidiaryForm::Exact;
    if (s == "gamma-from-count") return SubsidiaryForm::GammaFromCount;
    if (s == "truncated-gaussian") return SubsidiaryForm::TruncatedGaussian;
    throw DomainError("unknown subsidiary form '" + s +
                      "' (expected exact, gamma-from-count or truncated-gaussian)");
}

std::int64_t Nuisance::count() const {
    if (form != SubsidiaryForm::GammaFromCount) {
        throw DomainError("Nuisance::count: not a gamma-from-count nuisance");
    }
    return static_cast<std::int64_t>(std::llround(1.0 / (rel_sigma * rel_sigma)));
}

double Nuisance::exposure() const {
    return static_cast<double>(count()) / mean;
}

namespace {

void check_nuisance(const Nuisance& nu, const char* name, bool positive_mean) {
    if (positive_mean ? !(nu.mean > 0.0) : nu.mean < 0.0) {
        throw DomainError(std::string("CountingModel: ") + name +
                          (positive_mean ? " mean must be > 0" : " mean must be >= 0"));
    }
    if (nu.rel_sigma < 0.0) {
        throw DomainError(std::string("CountingModel: ") + name + " rel_sigma must be >= 0");
    }
    const bool zero_sigma = nu.rel_sigma == 0.0;
    if (zero_sigma != (nu.form == SubsidiaryForm::Exact)) {
        throw DomainError(std::string("CountingModel: ") + name +
                          " must be exact iff rel_sigma == 0");
    }
    if (nu.form == SubsidiaryForm::GammaFromCount) {
        const double k_real = 1.0 / (nu.rel_sigma * nu.rel_sigma);
        const double k = std::round(k_real);
        if (k < 1.0 || std::fabs(k_real - k) > 1e-6 * k) {
            throw DomainError(std::string("CountingModel: ") + name +
                              " gamma-from-count needs rel_sigma = 1/sqrt(k) for integer k >= 1");
        }
    }
}

} // namespace

CountingModel::CountingModel(Nuisance b, Nuisance eff, std::optional<double> tau)
    : background(b), efficiency(eff), tau_override(tau) {
    check_nuisance(background, "background", /*positive_mean=*/false);
    check_nuisance(efficiency, "efficiency", /*positive_mean=*/true);
    if (background.form == SubsidiaryForm::GammaFromCount && background.mean == 0.0) {
        throw DomainError("CountingModel: gamma-from-count background needs mean > 0");
    }
    if (tau_override && !(*tau_override > 0.0)) {
        throw DomainError("CountingModel: tau must be > 0");
    }
}

CountingModel CountingModel::exact(double b_mean, double eff_mean) {
    return CountingModel{Nuisance{b_mean, 0.0, SubsidiaryForm::Exact},
                         Nuisance{eff_mean, 0.0, SubsidiaryForm::Exact}};
}

double CountingModel::conditioning_tau() const {
    if (tau_override) return *tau_override;
    if (background.form != SubsidiaryForm::GammaFromCount) {
        throw DomainError("conditioning tau undefined: background has no "
                          "gamma-from-count subsidiary and no tau override");
    }
    return background.exposure();
}

bool CountingModel::has_gamma_subsidiary() const {
    return background.form == SubsidiaryForm::GammaFromCount ||
           efficiency.form == SubsidiaryForm::GammaFromCount;
}

std::size_t CountingModel::gamma_subsidiary_count() const {
    std::size_t c = 0;
    if (background.form == SubsidiaryForm::GammaFromCount) ++c;
    if (efficiency.form == SubsidiaryForm::GammaFromCount) ++c;
    return c;
}

void validate(const CountingModel& model, const Observation& obs) {
    if (obs.n < 0) throw DomainError("Observation: count must be non-negative");
    const std::size_t want = model.gamma_subsidiary_count();
    if (obs.subsidiary_counts.size() != want) {
        throw DomainError("Observation: expected " + std::to_string(want) +
                          " subsidiary count(s), got " +
                          std::to_string(obs.subsidiary_counts.size()));
    }
    for (auto c : obs.subsidiary_counts) {
        if (c < 0) throw DomainError("Observation: subsidiary counts must be non-negative");
    }
}

Observation nominal_observation(const CountingModel& model, std::int64_t n) {
    Observation obs(n);
    if (model.background.form == SubsidiaryForm::GammaFromCount) {
        obs.subsidiary_counts.push_back(model.background.count());
    }
    if (model.efficiency.form == SubsidiaryForm::GammaFromCount) {
        obs.subsidiary_counts.push_back(model.efficiency.count());
    }
    return obs;
}

} // namespace cstk
