#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "cstk/error.hpp"
#include "cstk/likelihood.hpp"
#include "cstk/model.hpp"
#include "cstk/prob.hpp"

#include <cmath>
#include <limits>

using namespace cstk;

namespace {
CountingModel table2_model(double b, double eff_rel) {
    return CountingModel{Nuisance{b, 0.0, SubsidiaryForm::Exact},
                         Nuisance{1.0, eff_rel, SubsidiaryForm::GammaFromCount}};
}
} // namespace

TEST_CASE("model invariant checks") {
    CHECK_NOTHROW(CountingModel::exact(3.0));
    CHECK_THROWS_AS(CountingModel::exact(-1.0), DomainError);
    CHECK_THROWS_AS(CountingModel::exact(3.0, 0.0), DomainError);
    // exact form requires rel_sigma == 0 and vice versa
    CHECK_THROWS_AS(CountingModel(Nuisance{3.0, 0.1, SubsidiaryForm::Exact},
                                  Nuisance{1.0, 0.0, SubsidiaryForm::Exact}),
                    DomainError);
    CHECK_THROWS_AS(CountingModel(Nuisance{3.0, 0.0, SubsidiaryForm::GammaFromCount},
                                  Nuisance{1.0, 0.0, SubsidiaryForm::Exact}),
                    DomainError);
    // gamma-from-count needs rel = 1/sqrt(k) for integer k
    CHECK_NOTHROW(table2_model(3.0, 0.1));  // k = 100
    CHECK_NOTHROW(table2_model(3.0, 0.2));  // k = 25
    CHECK_THROWS_AS(table2_model(3.0, 0.13), DomainError); // 1/0.0169 = 59.17
    CHECK(table2_model(0.0, 0.1).efficiency.count() == 100);
    CHECK(table2_model(0.0, 0.2).efficiency.count() == 25);
    CHECK(table2_model(0.0, 0.1).efficiency.exposure() == doctest::Approx(100.0));
}

TEST_CASE("observation validation") {
    const CountingModel m = table2_model(3.0, 0.1);
    CHECK_NOTHROW(validate(m, Observation(4, {100})));
    CHECK_THROWS_AS(validate(m, Observation(4)), DomainError);
    CHECK_THROWS_AS(validate(m, Observation(4, {100, 7})), DomainError);
    CHECK_THROWS_AS(validate(m, Observation(-1, {100})), DomainError);
    CHECK_THROWS_AS(validate(m, Observation(4, {-2})), DomainError);
    CHECK(nominal_observation(m, 6).subsidiary_counts == std::vector<std::int64_t>{100});
    // exact model carries no subsidiary counts
    CHECK(nominal_observation(CountingModel::exact(3.0), 6).subsidiary_counts.empty());
}

TEST_CASE("conditioning tau") {
    // b = 10 with 1/sqrt(10) accuracy: subsidiary count 10 at exposure 1.
    CountingModel m{Nuisance{10.0, 1.0 / std::sqrt(10.0), SubsidiaryForm::GammaFromCount},
                    Nuisance{1.0, 0.0, SubsidiaryForm::Exact}};
    CHECK(m.conditioning_tau() == doctest::Approx(1.0));
    CHECK_THROWS_AS(CountingModel::exact(3.0).conditioning_tau(), DomainError);
    CountingModel with_override{Nuisance{3.0, 0.0, SubsidiaryForm::Exact},
                                Nuisance{1.0, 0.0, SubsidiaryForm::Exact}, 2.5};
    CHECK(with_override.conditioning_tau() == doctest::Approx(2.5));
}

TEST_CASE("log likelihood exact cases") {
    CHECK(log_likelihood(CountingModel::exact(0.0), Observation(0), 0.0) == doctest::Approx(0.0));
    CHECK(log_likelihood(CountingModel::exact(3.0), Observation(0), 0.0) ==
          doctest::Approx(-3.0).epsilon(1e-14));
    CHECK(log_likelihood(CountingModel::exact(3.0), Observation(10), 7.0) ==
          doctest::Approx(poisson_log_pmf(10, 10.0)).epsilon(1e-14));
    CHECK(std::exp(log_likelihood(CountingModel::exact(3.0), Observation(10), 7.0)) ==
          doctest::Approx(0.12511).epsilon(1e-4));
}

TEST_CASE("impossible data gives -inf, not a crash") {
    const double ll = log_likelihood(CountingModel::exact(0.0), Observation(3), 0.0);
    CHECK(ll == -std::numeric_limits<double>::infinity());
}

TEST_CASE("subsidiary terms enter the likelihood") {
    const CountingModel m = table2_model(3.0, 0.1);
    const Observation obs(10, {100});
    const double at_nominal = log_likelihood(m, obs, 7.0, NuisanceValues{3.0, 1.0});
    const double expected =
        poisson_log_pmf(10, 10.0) + poisson_log_pmf(100, 100.0);
    CHECK(at_nominal == doctest::Approx(expected).epsilon(1e-13));
    // moving eff off its estimate must cost likelihood
    CHECK(log_likelihood(m, obs, 7.0, NuisanceValues{3.0, 1.3}) < at_nominal);
}

TEST_CASE("log likelihood strictly concave in s for n > 0") {
    const CountingModel m = CountingModel::exact(2.0);
    const Observation obs(6);
    double prev = log_likelihood(m, obs, 0.5);
    double prev_diff = 0.0;
    bool first = true;
    for (double s = 1.0; s < 15.0; s += 0.5) {
        const double cur = log_likelihood(m, obs, s);
        const double diff = cur - prev;
        if (!first) CHECK(diff < prev_diff); // second difference negative
        prev_diff = diff;
        prev = cur;
        first = false;
    }
}
