#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "cstk/coverage.hpp"
#include "cstk/error.hpp"
#include "cstk/prob.hpp"
#include "cstk/rng.hpp"
#include "cstk/significance.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

using namespace cstk;

namespace {
CountingModel onoff_model(double b_mean, std::int64_t k) {
    // background known to 1/sqrt(k) from a subsidiary count
    return CountingModel{Nuisance{b_mean, 1.0 / std::sqrt(static_cast<double>(k)),
                                  SubsidiaryForm::GammaFromCount},
                         Nuisance{1.0, 0.0, SubsidiaryForm::Exact}};
}
} // namespace

TEST_CASE("counting p-value basics") {
    CHECK(pvalue_counting(0, 3.0).p == 1.0);
    CHECK(pvalue_counting(0, 3.0).sigma_equiv == 0.0);
    CHECK(pvalue_counting(10, 3.0).p == doctest::Approx(1.1025e-3).epsilon(1e-3));
    CHECK(pvalue_counting(16, 3.0).p == doctest::Approx(1.24e-7).epsilon(5e-3));
    CHECK(pvalue_counting(16, 3.0).sigma_equiv > 5.0); // past 5 sigma
    CHECK(pvalue_counting(16, 3.0).sided == "one-sided-upper");
}

TEST_CASE("conditioning p-value: binomial on/off") {
    // n = 10, m = 10, tau = 1
    const CountingModel m = onoff_model(10.0, 10);
    const PValueReport rep =
        pvalue_nuisance(Observation(10, {10}), m, NuisanceStrategy::Conditioning);
    CHECK(rep.p == doctest::Approx(0.5881).epsilon(1e-3));
    CHECK(rep.method == "conditioning");
    // missing subsidiary: conditioning impossible
    CHECK_THROWS_AS(pvalue_nuisance(Observation(10), CountingModel::exact(10.0),
                                    NuisanceStrategy::Conditioning),
                    ComputationError);
}

TEST_CASE("plug-in with exact background reduces to counting") {
    const CountingModel m = CountingModel::exact(3.0);
    for (std::int64_t n : {0L, 5L, 12L}) {
        CHECK(pvalue_nuisance(Observation(n), m, NuisanceStrategy::PlugIn).p ==
              doctest::Approx(pvalue_counting(n, 3.0).p).epsilon(1e-12));
    }
}

TEST_CASE("all strategies collapse to counting as uncertainty -> 0") {
    const CountingModel exact = CountingModel::exact(3.0);
    const double p_count = pvalue_counting(9, 3.0).p;
    PValueNuisanceOptions opts;
    opts.b_range = {{3.0, 3.0}};
    opts.gamma = 1e-12;
    for (NuisanceStrategy s :
         {NuisanceStrategy::PlugIn, NuisanceStrategy::PriorPredictive,
          NuisanceStrategy::PosteriorPredictive, NuisanceStrategy::Supremum,
          NuisanceStrategy::CiAdjusted}) {
        CHECK(pvalue_nuisance(Observation(9), exact, s, opts).p ==
              doctest::Approx(p_count).epsilon(1e-9));
    }
    // conditioning approaches counting as the subsidiary sharpens
    const double p_k100 =
        pvalue_nuisance(Observation(9, {100}), onoff_model(3.0, 100), NuisanceStrategy::Conditioning).p;
    const double p_k10000 =
        pvalue_nuisance(Observation(9, {10000}), onoff_model(3.0, 10000), NuisanceStrategy::Conditioning).p;
    CHECK(std::fabs(p_k10000 - p_count) < std::fabs(p_k100 - p_count));
    CHECK(p_k10000 == doctest::Approx(p_count).epsilon(0.05));
}

TEST_CASE("prior-predictive averages the tail (negative binomial route)") {
    const CountingModel m = onoff_model(3.0, 9); // 33% background uncertainty
    const double p = pvalue_nuisance(nominal_observation(m, 10), m,
                                     NuisanceStrategy::PriorPredictive).p;
    // Monte-Carlo oracle: draw b from Gamma(9, 3), average the exact tail.
    RngStream rng(7777, 0);
    double mc = 0.0;
    const int draws = 200000;
    for (int i = 0; i < draws; ++i) {
        // Gamma(9) as a sum of 9 exponentials, scaled by rate 3.
        double g = 0.0;
        for (int j = 0; j < 9; ++j) g += -std::log(rng.next_double());
        mc += poisson_tail_ge(10, g / 3.0);
    }
    mc /= draws;
    CHECK(p == doctest::Approx(mc).epsilon(0.02));
    // averaging over an uncertain background weakens small p-values
    CHECK(p > pvalue_counting(10, 3.0).p);
}

TEST_CASE("posterior-predictive tightens relative to prior-predictive at low n") {
    const CountingModel m = onoff_model(3.0, 9);
    const Observation obs(10, {9});
    const double prior = pvalue_nuisance(obs, m, NuisanceStrategy::PriorPredictive).p;
    const double post = pvalue_nuisance(obs, m, NuisanceStrategy::PosteriorPredictive).p;
    // the main count pulls the posterior for b upward here, so p grows
    CHECK(post != doctest::Approx(prior).epsilon(1e-6));
}

TEST_CASE("truncated-gaussian background: predictive strategies against MC oracles") {
    const CountingModel m{Nuisance{3.0, 0.3, SubsidiaryForm::TruncatedGaussian},
                          Nuisance{1.0, 0.0, SubsidiaryForm::Exact}};
    const Observation obs(9);
    const double prior = pvalue_nuisance(obs, m, NuisanceStrategy::PriorPredictive).p;
    const double post = pvalue_nuisance(obs, m, NuisanceStrategy::PosteriorPredictive).p;

    // MC oracle: sample b from the truncated Gaussian (rejection), average
    // the exact tail; posterior version reweights by the main likelihood.
    RngStream rng(31415, 0);
    double num_prior = 0.0, den_prior = 0.0, num_post = 0.0, den_post = 0.0;
    for (int i = 0; i < 400000; ++i) {
        const double b = 3.0 + 0.9 * rng.next_normal();
        if (b < 0.0) continue;
        const double tail = poisson_tail_ge(9, b);
        num_prior += tail;
        den_prior += 1.0;
        const double w = poisson_pmf(9, b);
        num_post += w * tail;
        den_post += w;
    }
    CHECK(prior == doctest::Approx(num_prior / den_prior).epsilon(5e-3));
    CHECK(post == doctest::Approx(num_post / den_post).epsilon(5e-3));
    // the n=9 observation pulls the background posterior up, raising p
    CHECK(post > prior);

    // plug-in at the joint mode
    const double plug = pvalue_nuisance(obs, m, NuisanceStrategy::PlugIn).p;
    CHECK(plug > pvalue_counting(9, 3.0).p); // b_hat above 3 for n = 9
}

TEST_CASE("supremum and ci-adjusted") {
    PValueNuisanceOptions opts;
    opts.b_range = {{2.5, 3.5}};
    opts.gamma = 1e-8;
    const CountingModel m = CountingModel::exact(3.0);
    const Observation obs(16);
    const double sup = pvalue_nuisance(obs, m, NuisanceStrategy::Supremum, opts).p;
    // tail is increasing in b, so the supremum sits at b = 3.5
    CHECK(sup == doctest::Approx(poisson_tail_ge(16, 3.5)).epsilon(1e-9));
    const double adj = pvalue_nuisance(obs, m, NuisanceStrategy::CiAdjusted, opts).p;
    CHECK(adj == doctest::Approx(sup + 1e-8).epsilon(1e-12));
    CHECK(adj > pvalue_nuisance(obs, m, NuisanceStrategy::PlugIn).p);
    // unbounded range refused
    CHECK_THROWS_AS(pvalue_nuisance(obs, m, NuisanceStrategy::Supremum, {}), ComputationError);
}

TEST_CASE("combine p-values: closed forms against the MC oracle") {
    // product rule, {0.5, 0.5}
    const PValueReport prod = combine_pvalues({0.5, 0.5}, CombineRule::Product);
    CHECK(prod.p == doctest::Approx(0.25 * (1.0 - std::log(0.25))).epsilon(1e-12));
    CHECK(prod.p == doctest::Approx(0.5966).epsilon(1e-3));
    // MC oracle over uniform pairs (product rule, and min rule at an
    // MC-reachable level)
    RngStream rng(2468, 0);
    const int draws = 400000;
    int prod_hits = 0, min_hits = 0;
    for (int i = 0; i < draws; ++i) {
        const double u1 = rng.next_double(), u2 = rng.next_double();
        if (u1 * u2 <= 0.25) ++prod_hits;
        if (std::min(u1, u2) <= 0.2) ++min_hits;
    }
    CHECK(prod.p == doctest::Approx(static_cast<double>(prod_hits) / draws).epsilon(5e-3));
    CHECK(combine_pvalues({0.2, 0.9}, CombineRule::Min).p ==
          doctest::Approx(static_cast<double>(min_hits) / draws).epsilon(5e-3));

    // min rule in the deep tail: 1 - (1 - 1e-6)^2
    const PValueReport mn = combine_pvalues({1e-6, 0.1}, CombineRule::Min);
    CHECK(mn.p == doctest::Approx(2.0e-6).epsilon(1e-3));

    // combining with a null result weakens significance
    for (double p : {0.001, 0.05, 0.3}) {
        const double combined = combine_pvalues({p, 1.0}, CombineRule::Product).p;
        CHECK(combined == doctest::Approx(p * (1.0 - std::log(p))).epsilon(1e-12));
        CHECK(combined > p);
    }

    CHECK_THROWS_AS(combine_pvalues({}, CombineRule::Min), DomainError);
    CHECK_THROWS_AS(combine_pvalues({0.5}, CombineRule::Min), DomainError);
    CHECK_THROWS_AS(combine_pvalues({0.0, 0.5}, CombineRule::Product), DomainError);
}

TEST_CASE("product rule is not associative") {
    const double a = 0.01, b = 0.05, c = 0.5;
    const double two_step =
        combine_pvalues({combine_pvalues({a, b}, CombineRule::Product).p, c},
                        CombineRule::Product)
            .p;
    const double direct = combine_pvalues({a, b, c}, CombineRule::Product).p;
    CHECK(std::fabs(two_step - direct) > 1e-4);
}

TEST_CASE("cls basics and counting form") {
    CHECK(cls(0.3, 0.3).cls == doctest::Approx(1.0));
    CHECK_THROWS_AS(cls(1.0, 0.5), ComputationError);

    const CLsResult r = cls_counting(0, 3.0, 3.0);
    CHECK(r.cls == doctest::Approx(std::exp(-3.0)).epsilon(1e-10));
    CHECK(r.excluded_at_5pct); // 0.0498 <= 0.05, marginal exclusion

    // CLs upper limit at n=0 is b-independent: e^-s = 0.10
    for (double b : {0.0, 1.0, 3.0}) {
        CHECK(cls_upper_limit(0, b, 0.90) == doctest::Approx(2.302585).epsilon(1e-5));
    }
}

TEST_CASE("cls >= 1 - p1 over a broad sweep, and converges to it when separated") {
    int cases = 0;
    for (std::int64_t n = 0; n <= 9; ++n) {
        for (double b : {0.5, 1.0, 2.0, 3.0, 5.0, 8.0, 12.0, 20.0, 30.0, 50.0}) {
            for (double s : {0.1, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0}) {
                const CLsResult r = cls_counting(n, b, s);
                CHECK(r.cls >= r.one_minus_p1 - 1e-12);
                ++cases;
            }
        }
    }
    CHECK(cases == 1000);
    // CLs -> 1 - p1 once the observed count sits above the H0 bulk (then
    // 1 - p0 -> 1). Note that at n = 0 the ratio CLs/(1-p1) is e^b exactly,
    // however large s gets: separation requires n above background, not a
    // large signal hypothesis alone.
    const CLsResult sep = cls_counting(10, 3.0, 20.0);
    CHECK(std::fabs(sep.cls - sep.one_minus_p1) < 1e-2 * sep.one_minus_p1);
    const CLsResult n0 = cls_counting(0, 3.0, 20.0);
    CHECK(n0.cls == doctest::Approx(std::exp(3.0) * n0.one_minus_p1).epsilon(1e-9));
}

TEST_CASE("hypothesis statistic distributions") {
    const HypoStatDist d = HypoStatDist::counting(CountingModel::exact(3.0), 5.0);
    double s0 = 0.0, s1 = 0.0;
    for (double v : d.pmf_h0) s0 += v;
    for (double v : d.pmf_h1) s1 += v;
    CHECK(s0 == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(s1 == doctest::Approx(1.0).epsilon(1e-8));
    // H1 stochastically dominates H0 for s > 0
    for (double t = 0.0; t < 25.0; t += 1.0) {
        CHECK(d.tail_h1_ge(t) >= d.tail_h0_ge(t) - 1e-12);
    }
    const HypoStatDist e = HypoStatDist::empirical({1.0, 2.0, 3.0}, {2.0, 3.0, 4.0}, "toy");
    CHECK(e.tail_h0_ge(2.5) == doctest::Approx(1.0 / 3.0));
    CHECK(e.tail_h1_ge(2.5) == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("punzi sensitivity at the 5-sigma working point") {
    const CountingModel m = CountingModel::exact(3.0);
    const double alpha = sigma_to_p(5.0);
    const SensitivityResult r = punzi_sensitivity(m, alpha, 0.95);
    CHECK(r.t_crit == 16);
    CHECK(poisson_tail_ge(15, 3.0) > alpha);
    CHECK(r.alpha_actual <= alpha);
    // independent exact-tail bisection oracle for s_min
    double lo = 0.0, hi = 60.0;
    for (int i = 0; i < 100; ++i) {
        const double mid = 0.5 * (lo + hi);
        (poisson_tail_ge(16, 3.0 + mid) < 0.95 ? lo : hi) = mid;
    }
    CHECK(r.s_min == doctest::Approx(hi).epsilon(1e-3));
    // monotonicity: tighter alpha raises both the critical count and s_min
    const SensitivityResult tighter = punzi_sensitivity(m, alpha / 100.0, 0.95);
    CHECK(tighter.t_crit > r.t_crit);
    CHECK(tighter.s_min > r.s_min);
    // degenerate b = 0 case
    CHECK(punzi_sensitivity(CountingModel::exact(0.0), alpha, 0.95).t_crit == 1);
}

TEST_CASE("median sensitivity: reproducible, correct for degenerate models") {
    // no fluctuation possible: b = 0 means every toy sees n = 0
    const CountingModel zero = CountingModel::exact(0.0);
    const double med = median_sensitivity(zero, LimitMethod::Bayes, 0.90, 101, 42);
    const double n0_limit = *limit_interval(zero, Observation(0), LimitMethod::Bayes, 0.90).upper;
    CHECK(med == doctest::Approx(n0_limit).epsilon(1e-9));

    const CountingModel m = CountingModel::exact(3.0);
    const double med1 = median_sensitivity(m, LimitMethod::Bayes, 0.90, 101, 7);
    const double med2 = median_sensitivity(m, LimitMethod::Bayes, 0.90, 101, 7);
    CHECK(med1 == med2); // bit-identical rerun

    // independent toy oracle: same seed path, explicit median
    RngStream root(7);
    std::vector<double> limits;
    for (std::int64_t t = 0; t < 101; ++t) {
        RngStream rng = root.substream(static_cast<std::uint64_t>(t));
        const Observation obs = generate_toy(m, 0.0, rng);
        limits.push_back(*limit_interval(m, obs, LimitMethod::Bayes, 0.90).upper);
    }
    std::sort(limits.begin(), limits.end());
    CHECK(med1 == doctest::Approx(limits[50]).epsilon(1e-12));

    // odd toy count: order statistics commute with monotone maps
    std::vector<double> inverted;
    for (double u : limits) inverted.push_back(1.0 / u);
    std::sort(inverted.begin(), inverted.end());
    CHECK(inverted[50] == doctest::Approx(1.0 / med1).epsilon(1e-12));

    CHECK_THROWS_AS(median_sensitivity(m, LimitMethod::Bayes, 0.90, 100, 7), DomainError);
}
