#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "cstk/rng.hpp"

#include <cmath>
#include <set>
#include <vector>

using namespace cstk;

TEST_CASE("streams reproduce bit-identically") {
    RngStream a(42, 7);
    RngStream b(42, 7);
    for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("substreams are independent of draw order") {
    RngStream root(123);
    // Draw from substream 5 before and after exercising substream 4.
    RngStream s5 = root.substream(5);
    const double first = s5.next_double();
    RngStream s4 = root.substream(4);
    (void)s4.next_double();
    RngStream s5_again = root.substream(5);
    CHECK(s5_again.next_double() == first);
}

TEST_CASE("different seeds decorrelate") {
    RngStream a(1, 0), b(2, 0);
    int same = 0;
    for (int i = 0; i < 64; ++i) same += a.next_u64() == b.next_u64();
    CHECK(same == 0);
}

TEST_CASE("uniforms are in (0,1) and roughly uniform") {
    RngStream r(999, 0);
    const int n = 200000;
    double sum = 0.0, sum2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double u = r.next_double();
        CHECK(u > 0.0);
        CHECK(u < 1.0);
        sum += u;
        sum2 += u * u;
    }
    const double mean = sum / n;
    const double var = sum2 / n - mean * mean;
    CHECK(mean == doctest::Approx(0.5).epsilon(0.01));
    CHECK(var == doctest::Approx(1.0 / 12.0).epsilon(0.02));
}

TEST_CASE("poisson sampler matches moments in both regimes") {
    for (double mu : {0.7, 8.0, 45.0, 250.0}) {
        RngStream r(31337, static_cast<std::uint64_t>(mu * 100));
        const int n = 200000;
        double sum = 0.0, sum2 = 0.0;
        for (int i = 0; i < n; ++i) {
            const double k = static_cast<double>(r.next_poisson(mu));
            sum += k;
            sum2 += k * k;
        }
        const double mean = sum / n;
        const double var = sum2 / n - mean * mean;
        const double se_mean = std::sqrt(mu / n);
        CHECK(std::fabs(mean - mu) < 5.0 * se_mean);
        CHECK(var == doctest::Approx(mu).epsilon(0.03));
    }
}

TEST_CASE("normal draws match moments and tails") {
    RngStream r(2024, 0);
    const int n = 200000;
    double sum = 0.0, sum2 = 0.0;
    int beyond2 = 0;
    for (int i = 0; i < n; ++i) {
        const double z = r.next_normal();
        sum += z;
        sum2 += z * z;
        if (std::fabs(z) > 2.0) ++beyond2;
    }
    CHECK(sum / n == doctest::Approx(0.0).epsilon(1.0).scale(0.01));
    CHECK(sum2 / n == doctest::Approx(1.0).epsilon(0.02));
    CHECK(static_cast<double>(beyond2) / n == doctest::Approx(0.0455).epsilon(0.1));
}

TEST_CASE("next_below covers its range without obvious bias") {
    RngStream r(5, 0);
    std::vector<int> counts(13, 0);
    for (int i = 0; i < 130000; ++i) ++counts[static_cast<std::size_t>(r.next_below(13))];
    for (int c : counts) CHECK(std::fabs(c - 10000.0) < 500.0);
}
