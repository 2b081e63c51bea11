#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "cstk/blind.hpp"
#include "cstk/combine.hpp"
#include "cstk/error.hpp"
#include "cstk/rng.hpp"

#include <cmath>

using namespace cstk;

// Brute-force minimizer of S(a) = sum (a_i - a)^2 / sigma_i^2 (and its
// correlated quadratic-form generalization), independent of the closed form.
namespace oracle {
double argmin_s(const std::vector<Measurement>& ms) {
    auto s_of = [&](double a) {
        double s = 0.0;
        for (const auto& m : ms) {
            const double d = (m.value - a) / m.sigma;
            s += d * d;
        }
        return s;
    };
    double lo = -100.0, hi = 100.0;
    for (int i = 0; i < 200; ++i) {
        const double m1 = lo + (hi - lo) / 3.0, m2 = hi - (hi - lo) / 3.0;
        (s_of(m1) < s_of(m2) ? hi : lo) = (s_of(m1) < s_of(m2) ? m2 : m1);
    }
    return 0.5 * (lo + hi);
}

double argmin_quadform(const MeasurementSet& mset) {
    // scan the quadratic form on a fine grid
    const auto& cov = mset.covariance;
    const double det = cov[0][0] * cov[1][1] - cov[0][1] * cov[1][0];
    const double h00 = cov[1][1] / det, h01 = -cov[0][1] / det, h11 = cov[0][0] / det;
    auto s_of = [&](double a) {
        const double r0 = mset.values[0] - a, r1 = mset.values[1] - a;
        return r0 * r0 * h00 + 2.0 * r0 * r1 * h01 + r1 * r1 * h11;
    };
    double best_a = 0.0, best = 1e300;
    for (double a = -5.0; a <= 5.0; a += 1e-5) {
        const double s = s_of(a);
        if (s < best) {
            best = s;
            best_a = a;
        }
    }
    return best_a;
}
} // namespace oracle

TEST_CASE("weighted average closed form") {
    const CombinedResult r = weighted_average({{1.0, 1.0}, {3.0, 1.0}});
    CHECK(r.a_best == doctest::Approx(2.0));
    CHECK(r.sigma_best == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
    CHECK(r.s_min == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(r.scale_factor == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));

    const CombinedResult r2 = weighted_average({{0.0, 1.0}, {2.0, 2.0}});
    CHECK(r2.a_best == doctest::Approx(0.4).epsilon(1e-12));
    CHECK(r2.sigma_best == doctest::Approx(0.8944).epsilon(1e-4));
    // ternary-search oracle resolves the flat quadratic bottom to ~1e-7
    CHECK(r2.a_best == doctest::Approx(oracle::argmin_s({{0.0, 1.0}, {2.0, 2.0}})).epsilon(1e-6));

    CHECK_THROWS_AS(weighted_average({{1.0, 1.0}}), DomainError);
    CHECK_THROWS_AS(weighted_average({{1.0, 0.0}, {2.0, 1.0}}), DomainError);
}

TEST_CASE("scale factor applies only to discrepant inputs") {
    // {0 +- 1, 4 +- 1}: S/(N-1) = 8, scaled sigma exactly 2.
    const CombinedResult r = weighted_average({{0.0, 1.0}, {4.0, 1.0}});
    CHECK(r.s_min == doctest::Approx(8.0).epsilon(1e-12));
    CHECK(r.scaled_sigma == 2.0); // exact by construction
    // compatible inputs are never shrunk
    const CombinedResult ok = weighted_average({{1.0, 1.0}, {1.2, 1.0}});
    CHECK(ok.scale_factor == 1.0);
    CHECK(ok.scaled_sigma == ok.sigma_best);
}

TEST_CASE("translation and scale equivariance") {
    const std::vector<Measurement> ms = {{0.3, 0.7}, {1.9, 1.2}, {-0.5, 2.0}};
    const CombinedResult base = weighted_average(ms);
    std::vector<Measurement> shifted, scaled;
    for (const auto& m : ms) {
        shifted.push_back({m.value + 10.0, m.sigma});
        scaled.push_back({m.value * 3.0, m.sigma * 3.0});
    }
    CHECK(weighted_average(shifted).a_best == doctest::Approx(base.a_best + 10.0).epsilon(1e-12));
    CHECK(weighted_average(scaled).a_best == doctest::Approx(base.a_best * 3.0).epsilon(1e-12));
    CHECK(weighted_average(scaled).sigma_best ==
          doctest::Approx(base.sigma_best * 3.0).epsilon(1e-12));
}

TEST_CASE("uncorrelated combination stays inside the input range") {
    RngStream rng(55, 0);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<Measurement> ms;
        double lo = 1e300, hi = -1e300;
        const int n = 2 + static_cast<int>(rng.next_below(4));
        for (int i = 0; i < n; ++i) {
            Measurement m{rng.next_normal() * 3.0, 0.1 + rng.next_double() * 2.0};
            lo = std::min(lo, m.value);
            hi = std::max(hi, m.value);
            ms.push_back(m);
        }
        const CombinedResult r = weighted_average(ms);
        CHECK(r.a_best >= lo - 1e-12);
        CHECK(r.a_best <= hi + 1e-12);
        CHECK_FALSE(r.outside_range);
        CHECK(r.sigma_best <= 2.11); // never above the best single input
    }
}

TEST_CASE("correlated average: outside-range pathology") {
    const MeasurementSet mset = MeasurementSet::pair({0.0, 1.0}, {2.0, 2.0}, 0.8);
    const CombinedResult r = correlated_average(mset);
    CHECK(r.a_best == doctest::Approx(-2.0 / 3.0).epsilon(1e-6));
    CHECK(r.outside_range);
    CHECK(r.a_best == doctest::Approx(oracle::argmin_quadform(mset)).epsilon(1e-3));

    // rho = 0 reduces exactly to the uncorrelated form
    const CombinedResult indep = correlated_average(MeasurementSet::pair({0.0, 1.0}, {2.0, 2.0}, 0.0));
    const CombinedResult plain = weighted_average({{0.0, 1.0}, {2.0, 2.0}});
    CHECK(indep.a_best == doctest::Approx(plain.a_best).epsilon(1e-12));
    CHECK(indep.sigma_best == doctest::Approx(plain.sigma_best).epsilon(1e-12));
    CHECK_FALSE(indep.outside_range);
}

TEST_CASE("outside-range threshold at rho = sigma1/sigma2") {
    // threshold here is 0.5
    CHECK_FALSE(correlated_average(MeasurementSet::pair({0.0, 1.0}, {2.0, 2.0}, 0.45)).outside_range);
    CHECK(correlated_average(MeasurementSet::pair({0.0, 1.0}, {2.0, 2.0}, 0.55)).outside_range);
}

TEST_CASE("sigma_best shrinks toward zero as rho -> 1") {
    const double s99 = correlated_average(MeasurementSet::pair({0.0, 1.0}, {2.0, 2.0}, 0.99)).sigma_best;
    const double s80 = correlated_average(MeasurementSet::pair({0.0, 1.0}, {2.0, 2.0}, 0.80)).sigma_best;
    const double s50 = correlated_average(MeasurementSet::pair({0.0, 1.0}, {2.0, 2.0}, 0.50)).sigma_best;
    CHECK(s99 < s80);
    CHECK(s80 < s50);
}

TEST_CASE("singular covariance is refused with advice") {
    const MeasurementSet degenerate = MeasurementSet::pair({0.0, 1.0}, {2.0, 2.0}, 1.0);
    CHECK_THROWS_WITH_AS(correlated_average(degenerate),
                         doctest::Contains("select"), ComputationError);
}

TEST_CASE("poisson weight bias: signs and vanishing at large mean") {
    const BiasEstimate down = poisson_weight_bias(100.0, 100000, PoissonWeighting::Observed, 1);
    CHECK(down.bias < -5.0 * down.mc_error);

    const BiasEstimate up =
        poisson_weight_bias(100.0, 100000, PoissonWeighting::ExpectedAtEstimate, 1);
    CHECK(up.bias > 5.0 * up.mc_error);

    const BiasEstimate fixed = poisson_weight_bias(100.0, 100000, PoissonWeighting::Iterated, 1);
    CHECK(std::fabs(fixed.bias) < std::fabs(down.bias));
    CHECK(std::fabs(fixed.bias) < std::fabs(up.bias));
    CHECK(std::fabs(fixed.bias) < 3.0 * fixed.mc_error);

    // relative bias melts away as the mean grows
    const BiasEstimate big = poisson_weight_bias(1e4, 100000, PoissonWeighting::Observed, 2);
    CHECK(std::fabs(big.bias) / 1e4 < 1e-3);

    CHECK_THROWS_AS(poisson_weight_bias(2.0, 1000, PoissonWeighting::Observed, 1), DomainError);
}

TEST_CASE("blinding round-trips exactly for any value") {
    RngStream rng(8, 0);
    for (int i = 0; i < 2000; ++i) {
        double v;
        switch (i % 4) {
        case 0: v = rng.next_normal() * 1e3; break;
        case 1: v = rng.next_normal() * 1e-12; break;
        case 2: v = (rng.next_double() - 0.5) * 1e300; break;
        default: v = 0.1 * static_cast<double>(i); break;
        }
        const double blinded = blind_offset(v, "secret-key");
        CHECK(unblind(blinded, "secret-key") == v); // bit-exact
        CHECK(std::isfinite(blinded));
    }
    CHECK(unblind(blind_offset(0.0, "k"), "k") == 0.0);
    CHECK(unblind(blind_offset(-0.0, "k"), "k") == -0.0);
}

TEST_CASE("blinding determinism and key separation") {
    const double v = 137.036;
    CHECK(blind_offset(v, "alpha") == blind_offset(v, "alpha")); // same key, same offset
    CHECK(blind_offset(v, "alpha") != blind_offset(v, "beta"));  // different keys differ
    CHECK(blind_offset(v, "alpha") != v);                        // actually hides
    // wrong key does not reveal the value
    CHECK(unblind(blind_offset(v, "alpha"), "beta") != v);
    CHECK_THROWS_AS(blind_offset(std::nan(""), "k"), DomainError);
}
