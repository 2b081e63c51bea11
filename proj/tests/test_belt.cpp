#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "cstk/belt.hpp"
#include "cstk/error.hpp"
#include "cstk/prob.hpp"

#include <cmath>

using namespace cstk;

TEST_CASE("upper ordering: n=0 accepted iff e^-s > 0.10") {
    // b = 0, cl = 0.90: the belt keeps n = 0 until s = -ln 0.1 = 2.3026.
    CHECK(acceptance_at(2.29, 0.0, 0.90, Ordering::Upper).contains(0));
    CHECK_FALSE(acceptance_at(2.31, 0.0, 0.90, Ordering::Upper).contains(0));
}

TEST_CASE("degenerate belt point at s=0, b=0") {
    for (Ordering o : {Ordering::Upper, Ordering::Central, Ordering::LikelihoodRatio}) {
        const Acceptance a = acceptance_at(0.0, 0.0, 0.77, o);
        CHECK(a.contains(0));
        CHECK(a.n_lo == 0);
        CHECK(a.n_hi == 0); // nothing else has probability
    }
}

TEST_CASE("belt coverage >= cl at every grid point, all orderings") {
    for (Ordering o : {Ordering::Upper, Ordering::Central, Ordering::LikelihoodRatio}) {
        const ConfidenceBelt belt = build_belt(3.0, 0.90, o, 10.0, 0.25);
        for (std::size_t i = 0; i < belt.s_grid.size(); ++i) {
            const double mu = belt.s_grid[i] + belt.b;
            double cov = 0.0;
            for (std::int64_t n = belt.acceptance[i].n_lo; n <= belt.acceptance[i].n_hi; ++n) {
                cov += poisson_pmf(n, mu);
            }
            CHECK(cov >= 0.90);
        }
    }
}

TEST_CASE("belt inversion and truncation error") {
    const ConfidenceBelt belt = build_belt(3.0, 0.90, Ordering::LikelihoodRatio, 12.0, 0.05);
    const IntervalResult iv = belt.invert(0);
    CHECK_FALSE(iv.empty);
    CHECK(*iv.lower == 0.0);
    CHECK(*iv.upper == doctest::Approx(0.95).epsilon(0.1));
    // a belt that is too short to close for large n
    CHECK_THROWS_AS(belt.invert(30), ComputationError);
}

TEST_CASE("fc interval golden and derived values") {
    const IntervalResult b0 = fc_interval(0, 0.0, 0.90);
    CHECK(*b0.lower == 0.0);
    CHECK(*b0.upper == doctest::Approx(2.44).epsilon(0.01));

    const IntervalResult b1 = fc_interval(0, 1.0, 0.90);
    CHECK(*b1.upper > *fc_interval(0, 3.0, 0.90).upper);
    CHECK(*b1.upper < *b0.upper);
}

TEST_CASE("fc two-sided cells match the published unified-interval tables") {
    // b = 3.0, 90% CL, counts in the regime where the interval is two-sided;
    // the published Feldman-Cousins values are quoted to 0.01.
    const struct {
        std::int64_t n;
        double lo, hi;
    } cells[] = {{6, 0.15, 8.47}, {7, 0.89, 9.53}, {10, 2.63, 13.50}};
    for (const auto& cell : cells) {
        const IntervalResult iv = fc_interval(cell.n, 3.0, 0.90);
        CHECK(std::fabs(*iv.lower - cell.lo) < 0.01);
        CHECK(std::fabs(*iv.upper - cell.hi) < 0.01);
    }
}

TEST_CASE("fc anomaly: n=0 upper limit strictly decreases with b") {
    double prev = 1e9;
    for (double b : {0.0, 1.0, 2.0, 3.0}) {
        const double u = *fc_interval(0, b, 0.90).upper;
        CHECK(u < prev);
        prev = u;
    }
}

TEST_CASE("fc unification: lower bound turns on smoothly, upper limit has no jump") {
    double prev_upper = 0.0;
    bool seen_positive_lower = false;
    for (std::int64_t n = 0; n <= 30; ++n) {
        const IntervalResult iv = fc_interval(n, 3.0, 0.90);
        CHECK_FALSE(iv.empty);
        if (n <= 3) CHECK(*iv.lower == 0.0);       // small n: upper limit regime
        if (*iv.lower > 0.0) seen_positive_lower = true;
        if (seen_positive_lower) CHECK(*iv.lower > 0.0); // once two-sided, stays two-sided
        if (n > 0) {
            CHECK(*iv.upper > prev_upper);          // monotone in n
            CHECK(*iv.upper - prev_upper < 2.5);    // no flip-flop-style jump
        }
        prev_upper = *iv.upper;
    }
    CHECK(seen_positive_lower);
}

TEST_CASE("central-ordering belt inverts to a two-sided interval") {
    const ConfidenceBelt belt = build_belt(0.0, 0.90, Ordering::Central, 30.0, 0.05);
    const IntervalResult iv = belt.invert(10);
    CHECK_FALSE(iv.empty);
    CHECK(*iv.lower > 0.0);
    CHECK(*iv.upper > *iv.lower);
    // equal-tail bounds: P(N >= 10 | lower) = P(N <= 10 | upper) = 0.05
    CHECK(poisson_tail_ge(10, *iv.lower) == doctest::Approx(0.05).epsilon(0.05));
    CHECK(poisson_cdf(10, *iv.upper) == doctest::Approx(0.05).epsilon(0.05));
}

TEST_CASE("classical upper limit analytic cases") {
    const IntervalResult iv = classical_upper_limit(0, 0.0, 0.90);
    CHECK_FALSE(iv.empty);
    CHECK(*iv.upper == doctest::Approx(-std::log(0.1)).epsilon(1e-6));

    // strong downward fluctuation: no s >= 0 is compatible
    CHECK(classical_upper_limit(0, 3.0, 0.90).empty);
    // e^-(s+3) = 0.1 would need s = -0.70
    CHECK_FALSE(classical_upper_limit(0, 2.2, 0.90).empty);

    // upper limit grows without bound as cl -> 1
    const double u1 = *classical_upper_limit(10, 0.0, 0.90).upper;
    const double u2 = *classical_upper_limit(10, 0.0, 0.99).upper;
    const double u3 = *classical_upper_limit(10, 0.0, 0.9999).upper;
    CHECK(u1 < u2);
    CHECK(u2 < u3);
}

TEST_CASE("classical upper limit is the exact tail root") {
    const IntervalResult iv = classical_upper_limit(5, 1.5, 0.90);
    CHECK(poisson_cdf(5, *iv.upper + 1.5) == doctest::Approx(0.10).epsilon(1e-6));
}

TEST_CASE("flip-flop policy intervals") {
    const IntervalResult low = flip_flop_interval(0.0, 0.90);
    CHECK(low.method == "flip-flop-upper");
    CHECK(*low.lower == 0.0);
    CHECK(*low.upper == doctest::Approx(1.2816).epsilon(1e-4));

    const IntervalResult high = flip_flop_interval(5.0, 0.90);
    CHECK(high.method == "flip-flop-central");
    CHECK(*high.lower == doctest::Approx(5.0 - 1.6449).epsilon(1e-4));
    CHECK(*high.upper == doctest::Approx(5.0 + 1.6449).epsilon(1e-4));

    // discontinuous switch at the 3 sigma threshold
    const IntervalResult just_below = flip_flop_interval(2.999999, 0.90);
    const IntervalResult just_above = flip_flop_interval(3.000001, 0.90);
    CHECK(just_below.method != just_above.method);
    CHECK(std::fabs(*just_above.upper - *just_below.upper) > 0.3);
}

TEST_CASE("classical matches flat-prior bayes at b=0 (footnote-4 coincidence)") {
    // Flat-prior Bayes at b=0: 1 - cl quantile of Gamma(n+1); classical solves
    // the same tail equation. Checked here analytically via gamma_q.
    for (std::int64_t n : {0L, 2L, 7L}) {
        const double u = *classical_upper_limit(n, 0.0, 0.90).upper;
        CHECK(gamma_q(static_cast<double>(n) + 1.0, u) == doctest::Approx(0.10).epsilon(1e-6));
    }
}
