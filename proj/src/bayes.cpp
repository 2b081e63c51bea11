#include "cstk/bayes.hpp"
#include "cstk/error.hpp"
#include "cstk/parallel.hpp"
#include "cstk/prob.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace cstk {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// ---- Gauss-Legendre nodes (computed once, 32 points) ----

struct GlRule {
    std::array<double, 32> x{}; // nodes on (-1, 1)
    std::array<double, 32> w{};
};

const GlRule& gl32() {
    static const GlRule rule = [] {
        GlRule r;
        const int n = 32;
        for (int i = 0; i < n; ++i) {
            // Newton from the Chebyshev-like initial guess.
            double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
            double pp = 0.0;
            for (int it = 0; it < 100; ++it) {
                double p0 = 1.0, p1 = 0.0;
                for (int j = 0; j < n; ++j) {
                    const double p2 = p1;
                    p1 = p0;
                    p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1.0);
                }
                pp = n * (x * p0 - p1) / (x * x - 1.0);
                const double dx = p0 / pp;
                x -= dx;
                if (std::fabs(dx) < 1e-15) break;
            }
            r.x[static_cast<std::size_t>(i)] = x;
            r.w[static_cast<std::size_t>(i)] = 2.0 / ((1.0 - x * x) * pp * pp);
        }
        return r;
    }();
    return rule;
}

template <typename F>
double gl_panel(const F& f, double a, double b) {
    const GlRule& r = gl32();
    const double c = 0.5 * (a + b), h = 0.5 * (b - a);
    double sum = 0.0;
    for (std::size_t i = 0; i < 32; ++i) sum += r.w[i] * f(c + h * r.x[i]);
    return h * sum;
}

// Composite quadrature with panel widths adapted to the exp(-rate * x)
// decay of the integrand.
template <typename F>
double gl_composite(const F& f, double a, double b, double rate) {
    const double width = std::max(1e-300, b - a);
    const double scale = rate > 0.0 ? 30.0 / rate : width;
    const int panels = std::clamp(static_cast<int>(std::ceil(width / scale)), 1, 256);
    double sum = 0.0;
    for (int i = 0; i < panels; ++i) {
        const double lo = a + width * i / panels;
        const double hi = a + width * (i + 1) / panels;
        sum += gl_panel(f, lo, hi);
    }
    return sum;
}

// ---- marginal likelihood ----
//
// Split Poisson(n; eps*s + b) as the convolution of Poisson(j; eps*s) and
// Poisson(n-j; b); each factor averages over its subsidiary density in
// closed form when that density is a gamma (negative binomial) or a point
// mass, leaving a single sum over j.

struct MarginalSide {
    enum Kind { Point, Gamma } kind = Point;
    double value = 0.0; // Point
    double shape = 0.0; // Gamma
    double rate = 0.0;  // Gamma
};

// log E[ pmf(j; x * s) ] for x ~ side, where s >= 0 is the scale.
double log_avg_pmf(const MarginalSide& side, std::int64_t j, double s) {
    if (side.kind == MarginalSide::Point) return poisson_log_pmf(j, side.value * s);
    if (s == 0.0) return j == 0 ? 0.0 : -kInf;
    const double m = side.shape, tau = side.rate;
    return std::lgamma(m + static_cast<double>(j)) - std::lgamma(m) -
           std::lgamma(static_cast<double>(j) + 1.0) + m * std::log(tau / (tau + s)) +
           static_cast<double>(j) * std::log(s / (tau + s));
}

MarginalSide gamma_side(const Nuisance& nu, std::int64_t observed_count) {
    // Subsidiary posterior from count m at exposure tau (1/x reference
    // measure): Gamma(shape m, rate tau). An observed zero count would make
    // that improper; fall back to the flat-prior shape of 1.
    MarginalSide side;
    side.kind = MarginalSide::Gamma;
    side.shape = observed_count > 0 ? static_cast<double>(observed_count) : 1.0;
    side.rate = nu.exposure();
    return side;
}

double jsum_marginal(std::int64_t n, const MarginalSide& eps, const MarginalSide& b, double s) {
    double log_sum = -kInf;
    for (std::int64_t j = 0; j <= n; ++j) {
        const double lt = log_avg_pmf(eps, j, s) + log_avg_pmf(b, n - j, 1.0);
        log_sum = log_add_exp(log_sum, lt);
    }
    return std::exp(log_sum);
}

double gauss_pdf(double x, double mean, double sigma) {
    const double z = (x - mean) / sigma;
    return std::exp(-0.5 * z * z) / (sigma * 2.5066282746310002);
}

} // namespace

double marginal_likelihood(const CountingModel& model, const Observation& obs, double s) {
    validate(model, obs);
    if (s < 0.0) throw DomainError("marginal_likelihood: signal must be non-negative");

    std::size_t sub = 0;
    std::int64_t m_b = 0, m_eps = 0;
    if (model.background.form == SubsidiaryForm::GammaFromCount) {
        m_b = obs.subsidiary_counts[sub++];
    }
    if (model.efficiency.form == SubsidiaryForm::GammaFromCount) {
        m_eps = obs.subsidiary_counts[sub++];
    }

    const bool eps_gauss = model.efficiency.form == SubsidiaryForm::TruncatedGaussian;
    const bool b_gauss = model.background.form == SubsidiaryForm::TruncatedGaussian;

    const auto fixed_side = [](double v) {
        MarginalSide side;
        side.kind = MarginalSide::Point;
        side.value = v;
        return side;
    };

    const auto b_side = [&]() {
        return model.background.form == SubsidiaryForm::GammaFromCount
                   ? gamma_side(model.background, m_b)
                   : fixed_side(model.background.mean);
    };
    const auto eps_side = [&]() {
        return model.efficiency.form == SubsidiaryForm::GammaFromCount
                   ? gamma_side(model.efficiency, m_eps)
                   : fixed_side(model.efficiency.mean);
    };

    if (!eps_gauss && !b_gauss) {
        return jsum_marginal(obs.n, eps_side(), b_side(), s);
    }

    // Integrate any truncated-Gaussian side numerically (support clipped to
    // the physical region, central +- 8 sigma), keeping the other side
    // analytic underneath.
    if (eps_gauss && !b_gauss) {
        const double mean = model.efficiency.mean, sig = model.efficiency.abs_sigma();
        const double lo = std::max(1e-12, mean - 8.0 * sig), hi = mean + 8.0 * sig;
        return gl_composite(
            [&](double e) {
                return jsum_marginal(obs.n, fixed_side(e), b_side(), s) *
                       gauss_pdf(e, mean, sig);
            },
            lo, hi, s);
    }
    if (b_gauss && !eps_gauss) {
        const double mean = model.background.mean, sig = model.background.abs_sigma();
        const double lo = std::max(0.0, mean - 8.0 * sig), hi = mean + 8.0 * sig;
        return gl_composite(
            [&](double bb) {
                return jsum_marginal(obs.n, eps_side(), fixed_side(bb), s) *
                       gauss_pdf(bb, mean, sig);
            },
            lo, hi, 1.0);
    }
    // Both truncated Gaussian.
    const double em = model.efficiency.mean, es = model.efficiency.abs_sigma();
    const double bm = model.background.mean, bs = model.background.abs_sigma();
    return gl_composite(
        [&](double e) {
            return gl_composite(
                       [&](double bb) {
                           return jsum_marginal(obs.n, fixed_side(e), fixed_side(bb), s) *
                                  gauss_pdf(bb, bm, bs);
                       },
                       std::max(0.0, bm - 8.0 * bs), bm + 8.0 * bs, 1.0) *
                   gauss_pdf(e, em, es);
        },
        std::max(1e-12, em - 8.0 * es), em + 8.0 * es, s);
}

namespace {

std::vector<double> hybrid_grid(double s_max) {
    std::vector<double> g;
    g.push_back(0.0);
    const double knee = s_max * 0.02;
    const double lo = s_max * 1e-6;
    const int n_geom = 64;
    for (int i = 0; i <= n_geom; ++i) {
        g.push_back(lo * std::pow(knee / lo, static_cast<double>(i) / n_geom));
    }
    const int n_lin = 2600;
    for (int i = 1; i <= n_lin; ++i) {
        g.push_back(knee + (s_max - knee) * static_cast<double>(i) / n_lin);
    }
    return g;
}

double trapz(const std::vector<double>& x, const std::vector<double>& y, double from, double to) {
    double sum = 0.0;
    for (std::size_t i = 1; i < x.size(); ++i) {
        const double a = std::max(x[i - 1], from), b = std::min(x[i], to);
        if (b <= a) continue;
        // Linear density within the cell.
        const double t0 = (a - x[i - 1]) / (x[i] - x[i - 1]);
        const double t1 = (b - x[i - 1]) / (x[i] - x[i - 1]);
        const double y0 = y[i - 1] + (y[i] - y[i - 1]) * t0;
        const double y1 = y[i - 1] + (y[i] - y[i - 1]) * t1;
        sum += 0.5 * (y0 + y1) * (b - a);
    }
    return sum;
}

} // namespace

PosteriorDensity posterior(const CountingModel& model, const Observation& obs) {
    validate(model, obs);
    const double n = static_cast<double>(obs.n);
    double s_max = std::max(50.0, n + 10.0 * std::sqrt(n) +
                                      10.0 * (1.0 + model.efficiency.rel_sigma));

    PosteriorDensity post;

    // A truncated-Gaussian efficiency density is positive at eps = 0, so the
    // marginal falls off only like 1/s and the flat-prior posterior is never
    // normalizable. The tail check below cannot see this when sigma_eff is
    // small (the offending mass sits beyond any clipped quadrature support),
    // so the combination is flagged outright.
    if (model.efficiency.form == SubsidiaryForm::TruncatedGaussian) {
        post.s_grid = hybrid_grid(s_max);
        post.density.resize(post.s_grid.size());
        for (std::size_t i = 0; i < post.s_grid.size(); ++i) {
            post.density[i] = marginal_likelihood(model, obs, post.s_grid[i]);
        }
        post.divergent = true;
        post.normalized = false;
        return post;
    }

    // Divergence check: the mass in the last decade of the grid must fall
    // below 1e-4 of the total. Convergent posteriors push their bulk below
    // s_max/10 within a few range doublings and the fraction collapses
    // geometrically; a 1/s-type tail keeps a constant mass per decade, so
    // the fraction stalls. Doubling stops once the fraction passes, stalls,
    // or a generous cap is hit.
    double prev_fraction = 2.0;
    for (int attempt = 0;; ++attempt) {
        post.s_grid = hybrid_grid(s_max);
        post.density.resize(post.s_grid.size());
        parallel_for(post.s_grid.size(), [&](std::size_t i) {
            post.density[i] = marginal_likelihood(model, obs, post.s_grid[i]);
        });
        const double total = trapz(post.s_grid, post.density, 0.0, s_max);
        if (!(total > 0.0)) {
            throw ComputationError("posterior: zero marginal likelihood everywhere");
        }
        const double fraction = trapz(post.s_grid, post.density, s_max / 10.0, s_max) / total;
        if (fraction <= 1e-4) {
            post.divergent = false;
            for (auto& d : post.density) d /= total;
            post.normalized = true;
            return post;
        }
        const bool stalled = attempt >= 2 && fraction > 0.25 * prev_fraction;
        if (stalled || attempt >= 8) {
            post.divergent = true;
            post.normalized = false;
            return post;
        }
        prev_fraction = fraction;
        s_max *= 2.0;
    }
}

double PosteriorDensity::cdf(double s) const {
    if (divergent || !normalized) {
        throw ComputationError("posterior CDF undefined: density is not normalized");
    }
    return trapz(s_grid, density, 0.0, s);
}

double PosteriorDensity::quantile(double q) const {
    if (divergent) {
        throw ComputationError("posterior quantile undefined: divergent posterior");
    }
    if (!(q > 0.0 && q < 1.0)) throw DomainError("posterior quantile: q must be in (0,1)");
    double acc = 0.0;
    for (std::size_t i = 1; i < s_grid.size(); ++i) {
        const double cell = 0.5 * (density[i - 1] + density[i]) * (s_grid[i] - s_grid[i - 1]);
        if (acc + cell >= q) {
            // Solve the quadratic cumulative within the trapezoid cell.
            const double h = s_grid[i] - s_grid[i - 1];
            const double y0 = density[i - 1], y1 = density[i];
            const double need = q - acc;
            double t;
            const double slope = (y1 - y0) / h;
            if (std::fabs(slope) < 1e-300) {
                t = y0 > 0.0 ? need / y0 : h;
            } else {
                const double disc = y0 * y0 + 2.0 * slope * need;
                t = (std::sqrt(std::max(0.0, disc)) - y0) / slope;
            }
            return s_grid[i - 1] + std::clamp(t, 0.0, h);
        }
        acc += cell;
    }
    return s_grid.back();
}

IntervalResult bayes_upper_limit(const CountingModel& model, const Observation& obs, double cl) {
    if (!(cl > 0.0 && cl < 1.0)) throw DomainError("bayes_upper_limit: cl must be in (0,1)");
    const PosteriorDensity post = posterior(model, obs);
    if (post.divergent) {
        std::string which;
        if (model.efficiency.form == SubsidiaryForm::TruncatedGaussian) which = "efficiency";
        else if (model.background.form == SubsidiaryForm::TruncatedGaussian) which = "background";
        else which = "nuisance";
        throw ComputationError(
            "divergent posterior: truncated-gaussian " + which +
            " prior combined with a flat signal prior is not normalizable; "
            "use a gamma-from-count subsidiary instead");
    }
    return IntervalResult::make(0.0, post.quantile(cl), cl, "bayes-flat-prior");
}

double bayes_cdf_gamma_eff(std::int64_t n, double b, std::int64_t m, double tau, double s) {
    if (m < 2) throw DomainError("bayes_cdf_gamma_eff: subsidiary count must be >= 2");
    if (s <= 0.0) return 0.0;
    const double t = s / (tau + s);
    const double mm = static_cast<double>(m);
    // A_j = I_t(j+1, m-1) by downward recurrence from A_0 = 1 - (1-t)^(m-1);
    // weights are Poisson(n - j; b).
    const double log_t = std::log(t);
    const double log_1mt = std::log1p(-t);
    double a_j = -std::expm1((mm - 1.0) * log_1mt);
    double num = 0.0, den = 0.0;
    for (std::int64_t j = 0; j <= n; ++j) {
        if (j > 0) {
            const double jj = static_cast<double>(j);
            const double lf = jj * log_t + (mm - 1.0) * log_1mt + std::lgamma(jj + mm - 1.0) -
                              std::lgamma(jj + 1.0) - std::lgamma(mm - 1.0);
            a_j = std::max(0.0, a_j - std::exp(lf));
        }
        const double w = poisson_pmf(n - j, b);
        num += w * a_j;
        den += w;
    }
    return den > 0.0 ? num / den : 0.0;
}

double bayes_upper_limit_gamma_eff(std::int64_t n, double b, std::int64_t m, double tau,
                                   double cl) {
    if (!(cl > 0.0 && cl < 1.0)) throw DomainError("bayes_upper_limit_gamma_eff: bad cl");
    double lo = 0.0;
    double hi = std::max(2.0, (static_cast<double>(n) + 10.0 * std::sqrt(static_cast<double>(n)) +
                               10.0) *
                                  std::max(1.0, tau / static_cast<double>(m)));
    while (bayes_cdf_gamma_eff(n, b, m, tau, hi) < cl) hi *= 2.0;
    for (int it = 0; it < 200 && hi - lo > 1e-9 * std::max(1.0, hi); ++it) {
        const double mid = 0.5 * (lo + hi);
        (bayes_cdf_gamma_eff(n, b, m, tau, mid) < cl ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

} // namespace cstk
