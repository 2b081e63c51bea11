#ifndef CSTK_OPTIMIZE_HPP
#define CSTK_OPTIMIZE_HPP

#include <cmath>
#include <utility>

// Internal 1-D optimization helper (Brent's method, bounded).

namespace cstk::detail {

/// Maximizes f on [lo, hi]; returns {argmax, max}. xtol is absolute.
template <typename F>
std::pair<double, double> brent_max(const F& f, double lo, double hi, double xtol = 1e-11,
                                    int max_iter = 200) {
    const double gold = 0.3819660112501051;
    double a = lo, b = hi;
    double x = a + gold * (b - a);
    double w = x, v = x;
    double fx = f(x), fw = fx, fv = fx;
    double d = 0.0, e = 0.0;
    for (int it = 0; it < max_iter; ++it) {
        const double m = 0.5 * (a + b);
        const double tol = xtol * (std::fabs(x) + 1.0) * 0.5;
        if (std::fabs(x - m) <= 2.0 * tol - 0.5 * (b - a)) break;
        bool parabolic = false;
        if (std::fabs(e) > tol) {
            // Parabola through x, v, w (maximization: flip signs).
            const double r = (x - w) * (fx - fv);
            double q = (x - v) * (fx - fw);
            double p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if (q > 0.0) p = -p;
            q = std::fabs(q);
            const double e_old = e;
            e = d;
            if (std::fabs(p) < std::fabs(0.5 * q * e_old) && p > q * (a - x) &&
                p < q * (b - x)) {
                d = p / q;
                const double u = x + d;
                if (u - a < 2.0 * tol || b - u < 2.0 * tol) d = (m > x ? tol : -tol);
                parabolic = true;
            }
        }
        if (!parabolic) {
            e = (x < m ? b - x : a - x);
            d = gold * e;
        }
        const double u = (std::fabs(d) >= tol ? x + d : x + (d > 0 ? tol : -tol));
        const double fu = f(u);
        if (fu >= fx) {
            if (u < x) b = x; else a = x;
            v = w; fv = fw;
            w = x; fw = fx;
            x = u; fx = fu;
        } else {
            if (u < x) a = u; else b = u;
            if (fu >= fw || w == x) {
                v = w; fv = fw;
                w = u; fw = fu;
            } else if (fu >= fv || v == x || v == w) {
                v = u; fv = fu;
            }
        }
    }
    return {x, fx};
}

/// Minimizes f on [lo, hi].
template <typename F>
std::pair<double, double> brent_min(const F& f, double lo, double hi, double xtol = 1e-11,
                                    int max_iter = 200) {
    auto [x, fneg] = brent_max([&](double t) { return -f(t); }, lo, hi, xtol, max_iter);
    return {x, -fneg};
}

} // namespace cstk::detail

#endif
