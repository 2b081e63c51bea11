#include "cstk/belt.hpp"
#include "cstk/error.hpp"
#include "cstk/parallel.hpp"
#include "cstk/prob.hpp"

#include <algorithm>
#include <cmath>

namespace cstk {

std::string to_string(Ordering o) {
    switch (o) {
    case Ordering::Upper: return "upper";
    case Ordering::Central: return "central";
    case Ordering::LikelihoodRatio: return "likelihood-ratio";
    }
    return "?";
}

Ordering ordering_from_string(const std::string& s) {
    if (s == "upper") return Ordering::Upper;
    if (s == "central") return Ordering::Central;
    if (s == "likelihood-ratio") return Ordering::LikelihoodRatio;
    throw DomainError("unknown ordering '" + s + "'");
}

namespace {

std::int64_t count_ceiling(double mu) {
    return static_cast<std::int64_t>(std::ceil(mu + 12.0 * std::sqrt(mu + 1.0) + 25.0));
}

Acceptance acceptance_upper(double mu, double cl) {
    // Exclude low counts while the excluded probability stays <= 1 - cl.
    const double alpha = 1.0 - cl;
    std::int64_t n_lo = 0;
    double excluded = 0.0;
    for (;;) {
        const double p = poisson_pmf(n_lo, mu);
        if (excluded + p > alpha) break;
        excluded += p;
        ++n_lo;
    }
    return Acceptance{n_lo, count_ceiling(mu)};
}

Acceptance acceptance_central(double mu, double cl) {
    const double half = 0.5 * (1.0 - cl);
    std::int64_t n_lo = 0;
    double excluded = 0.0;
    for (;;) {
        const double p = poisson_pmf(n_lo, mu);
        if (excluded + p > half) break;
        excluded += p;
        ++n_lo;
    }
    std::int64_t n_hi = count_ceiling(mu);
    excluded = poisson_tail_ge(n_hi + 1, mu);
    while (n_hi > n_lo) {
        const double p = poisson_pmf(n_hi, mu);
        if (excluded + p > half) break;
        excluded += p;
        --n_hi;
    }
    return Acceptance{n_lo, n_hi};
}

// Feldman-Cousins: rank counts by R(n) = P(n|s) / P(n|s_hat(n)) with
// s_hat(n) = max(0, n - b), and grow a contiguous set from the best-ranked
// count until it holds probability >= cl. Ties admit the larger count.
Acceptance acceptance_lr(double s, double b, double cl) {
    const double mu = s + b;
    const std::int64_t n_top = count_ceiling(mu);
    std::vector<double> log_r(static_cast<std::size_t>(n_top) + 1);
    std::vector<double> pmf(static_cast<std::size_t>(n_top) + 1);
    std::int64_t best = 0;
    for (std::int64_t n = 0; n <= n_top; ++n) {
        const double mu_best = std::max(static_cast<double>(n), b);
        const double lr = poisson_log_pmf(n, mu) - poisson_log_pmf(n, mu_best);
        log_r[static_cast<std::size_t>(n)] = lr;
        pmf[static_cast<std::size_t>(n)] = poisson_pmf(n, mu);
        if (lr > log_r[static_cast<std::size_t>(best)]) best = n;
    }
    std::int64_t lo = best, hi = best;
    double prob = pmf[static_cast<std::size_t>(best)];
    while (prob < cl) {
        const bool can_lo = lo > 0;
        const bool can_hi = hi < n_top;
        if (!can_lo && !can_hi) {
            throw ComputationError("belt truncated: acceptance cannot reach cl at s=" +
                                   std::to_string(s));
        }
        bool take_hi;
        if (!can_lo) {
            take_hi = true;
        } else if (!can_hi) {
            take_hi = false;
        } else {
            take_hi = log_r[static_cast<std::size_t>(hi + 1)] >=
                      log_r[static_cast<std::size_t>(lo - 1)];
        }
        if (take_hi) {
            ++hi;
            prob += pmf[static_cast<std::size_t>(hi)];
        } else {
            --lo;
            prob += pmf[static_cast<std::size_t>(lo)];
        }
    }
    return Acceptance{lo, hi};
}

} // namespace

Acceptance acceptance_at(double s, double b, double cl, Ordering ordering) {
    if (s < 0.0 || b < 0.0) throw DomainError("acceptance_at: s and b must be non-negative");
    if (!(cl > 0.0 && cl < 1.0)) throw DomainError("acceptance_at: cl must be in (0,1)");
    const double mu = s + b;
    if (mu == 0.0) return Acceptance{0, 0};
    switch (ordering) {
    case Ordering::Upper: return acceptance_upper(mu, cl);
    case Ordering::Central: return acceptance_central(mu, cl);
    case Ordering::LikelihoodRatio: return acceptance_lr(s, b, cl);
    }
    throw DomainError("acceptance_at: bad ordering");
}

ConfidenceBelt build_belt(double b, double cl, Ordering ordering, double s_max, double ds) {
    if (!(ds > 0.0)) throw DomainError("build_belt: ds must be positive");
    if (!(s_max > 0.0)) throw DomainError("build_belt: s_max must be positive");
    ConfidenceBelt belt;
    belt.ordering = ordering;
    belt.b = b;
    belt.cl = cl;
    const auto n_points = static_cast<std::size_t>(std::floor(s_max / ds)) + 1;
    belt.s_grid.resize(n_points);
    belt.acceptance.resize(n_points);
    // Grid points are independent; assembly into preallocated slots keeps
    // the result identical for any thread count.
    parallel_for(n_points, [&](std::size_t i) {
        const double s = static_cast<double>(i) * ds;
        belt.s_grid[i] = s;
        belt.acceptance[i] = acceptance_at(s, b, cl, ordering);
    });
    return belt;
}

IntervalResult ConfidenceBelt::invert(std::int64_t n) const {
    const std::string method = "neyman-" + cstk::to_string(ordering);
    std::size_t first = s_grid.size(), last = 0;
    bool any = false;
    for (std::size_t i = 0; i < s_grid.size(); ++i) {
        if (acceptance[i].contains(n)) {
            if (!any) first = i;
            last = i;
            any = true;
        }
    }
    if (!any) {
        // Distinguish a genuine empty interval (count below every acceptance
        // set: a strong downward fluctuation) from a grid that simply does
        // not reach high enough signals for this count.
        if (n > acceptance.back().n_hi) {
            throw ComputationError("belt truncated: s_max=" + std::to_string(s_grid.back()) +
                                   " is too small to close the belt for n=" +
                                   std::to_string(n) + "; increase s_max");
        }
        return IntervalResult::make_empty(cl, method);
    }
    if (last + 1 == s_grid.size()) {
        throw ComputationError("belt truncated: acceptance still contains n=" +
                               std::to_string(n) + " at s_max=" +
                               std::to_string(s_grid.back()) + "; increase s_max");
    }
    return IntervalResult::make(s_grid[first], s_grid[last], cl, method);
}

namespace {

// Refine the s where `inside` flips between s_in (inside) and s_out (outside).
template <typename Pred>
double bisect_edge(double s_in, double s_out, const Pred& inside, double tol = 1e-6) {
    for (int it = 0; it < 80 && std::fabs(s_out - s_in) > tol; ++it) {
        const double mid = 0.5 * (s_in + s_out);
        (inside(mid) ? s_in : s_out) = mid;
    }
    return 0.5 * (s_in + s_out);
}

} // namespace

IntervalResult fc_interval(std::int64_t n, double b, double cl, double ds) {
    if (n < 0) throw DomainError("fc_interval: n must be non-negative");
    if (b < 0.0) throw DomainError("fc_interval: b must be non-negative");
    if (!(cl > 0.0 && cl < 1.0)) throw DomainError("fc_interval: cl must be in (0,1)");

    const auto inside = [&](double s) {
        return acceptance_at(s, b, cl, Ordering::LikelihoodRatio).contains(n);
    };

    double s_max = std::max(5.0, static_cast<double>(n) - b +
                                     10.0 * std::sqrt(static_cast<double>(n) + 1.0) + 10.0);
    int grow = 0;
    while (inside(s_max)) {
        s_max *= 2.0;
        if (++grow > 20) {
            throw ComputationError("belt truncated: could not close Feldman-Cousins belt for n=" +
                                   std::to_string(n));
        }
    }

    // Grid scan for the in-acceptance range (contiguous for the unified
    // ordering), then bisect the two edges.
    double first_in = 0.0, last_in = 0.0;
    bool found = false;
    for (double s = 0.0; s <= s_max + 0.5 * ds; s += ds) {
        if (inside(s)) {
            if (!found) {
                first_in = s;
                found = true;
            }
            last_in = s;
        } else if (found) {
            break;
        }
    }
    if (!found) {
        // Cannot happen for the unified ordering; guard anyway.
        throw ComputationError("fc_interval: no accepted signal value found for n=" +
                               std::to_string(n));
    }
    double lower = 0.0;
    if (first_in > 0.0) {
        lower = bisect_edge(first_in, std::max(0.0, first_in - ds), inside);
    }
    const double upper = bisect_edge(last_in, last_in + ds, inside);
    return IntervalResult::make(lower, upper, cl, "feldman-cousins");
}

IntervalResult classical_upper_limit(std::int64_t n, double b, double cl) {
    if (n < 0) throw DomainError("classical_upper_limit: n must be non-negative");
    if (b < 0.0) throw DomainError("classical_upper_limit: b must be non-negative");
    if (!(cl > 0.0 && cl < 1.0)) throw DomainError("classical_upper_limit: cl must be in (0,1)");
    const double alpha = 1.0 - cl;
    // P(N <= n | s + b) decreases in s; at s = 0 it may already sit below
    // alpha, in which case no non-negative s solves the equation.
    const double at_zero = poisson_cdf(n, b);
    if (at_zero < alpha) return IntervalResult::make_empty(cl, "classical-ul");
    double lo = 0.0, hi = std::max(1.0, static_cast<double>(n) - b + 1.0);
    while (poisson_cdf(n, hi + b) > alpha) hi *= 2.0;
    for (int it = 0; it < 200 && hi - lo > 1e-10 * std::max(1.0, hi); ++it) {
        const double mid = 0.5 * (lo + hi);
        (poisson_cdf(n, mid + b) > alpha ? lo : hi) = mid;
    }
    return IntervalResult::make(0.0, 0.5 * (lo + hi), cl, "classical-ul");
}

IntervalResult flip_flop_interval(double x, double cl, double switch_sigma) {
    if (!(cl > 0.0 && cl < 1.0)) throw DomainError("flip_flop_interval: cl must be in (0,1)");
    if (x < switch_sigma) {
        const double z = -normal_quantile(1.0 - cl); // one-sided quantile
        return IntervalResult::make(0.0, std::max(0.0, x) + z, cl, "flip-flop-upper");
    }
    const double z = normal_quantile(0.5 * (1.0 + cl));
    return IntervalResult::make(std::max(0.0, x - z), x + z, cl, "flip-flop-central");
}

IntervalResult IntervalResult::make(double lo, double hi, double cl, std::string method) {
    if (lo > hi) throw DomainError("IntervalResult: lower > upper");
    IntervalResult r;
    r.lower = lo;
    r.upper = hi;
    r.cl = cl;
    r.method = std::move(method);
    r.empty = false;
    return r;
}

IntervalResult IntervalResult::make_empty(double cl, std::string method) {
    IntervalResult r;
    r.cl = cl;
    r.method = std::move(method);
    r.empty = true;
    return r;
}

} // namespace cstk
