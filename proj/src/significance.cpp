#include "cstk/significance.hpp"
#include "cstk/coverage.hpp"
#include "cstk/error.hpp"
#include "cstk/likelihood.hpp"
#include "cstk/prob.hpp"
#include "optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace cstk {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

PValueReport PValueReport::make(double p, std::string method) {
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError("PValueReport: p must be in [0,1]");
    PValueReport r;
    r.p = p;
    r.method = std::move(method);
    r.sigma_equiv = p > 0.0 ? std::max(0.0, p_to_sigma(p)) : kInf;
    return r;
}

PValueReport pvalue_counting(std::int64_t n_obs, double b) {
    if (n_obs < 0) throw DomainError("pvalue_counting: n must be non-negative");
    if (b < 0.0) throw DomainError("pvalue_counting: b must be non-negative");
    return PValueReport::make(poisson_tail_ge(n_obs, b), "counting");
}

std::string to_string(NuisanceStrategy s) {
    switch (s) {
    case NuisanceStrategy::PlugIn: return "plug-in";
    case NuisanceStrategy::PriorPredictive: return "prior-predictive";
    case NuisanceStrategy::PosteriorPredictive: return "posterior-predictive";
    case NuisanceStrategy::Supremum: return "supremum";
    case NuisanceStrategy::CiAdjusted: return "ci-adjusted";
    case NuisanceStrategy::Conditioning: return "conditioning";
    }
    return "?";
}

NuisanceStrategy nuisance_strategy_from_string(const std::string& s) {
    if (s == "plug-in") return NuisanceStrategy::PlugIn;
    if (s == "prior-predictive") return NuisanceStrategy::PriorPredictive;
    if (s == "posterior-predictive") return NuisanceStrategy::PosteriorPredictive;
    if (s == "supremum") return NuisanceStrategy::Supremum;
    if (s == "ci-adjusted") return NuisanceStrategy::CiAdjusted;
    if (s == "conditioning") return NuisanceStrategy::Conditioning;
    throw DomainError("unknown nuisance strategy '" + s + "'");
}

namespace {

// P(N >= n) when b ~ Gamma(shape, rate): a negative-binomial tail.
double negbin_tail_ge(std::int64_t n, double shape, double rate) {
    if (n <= 0) return 1.0;
    const double q = 1.0 / (1.0 + rate); // per-count factor
    const double lq = std::log(q);
    const double lp = std::log(rate / (1.0 + rate));
    double log_sum = -kInf;
    double log_term = std::lgamma(shape + static_cast<double>(n)) - std::lgamma(shape) -
                      std::lgamma(static_cast<double>(n) + 1.0) + shape * lp +
                      static_cast<double>(n) * lq;
    for (std::int64_t k = n;; ++k) {
        log_sum = log_add_exp(log_sum, log_term);
        const double ratio = (shape + static_cast<double>(k)) / (static_cast<double>(k) + 1.0);
        log_term += std::log(ratio) + lq;
        if (log_term < log_sum - 42.0 && ratio * q < 0.999) break;
        if (k > n + 100000000) break;
    }
    return std::min(1.0, std::exp(log_sum));
}

double trunc_gauss_weighted_tail(std::int64_t n, double mean, double sigma,
                                 bool posterior_weighting) {
    // Average the exact tail over the (truncated) Gaussian density of b,
    // optionally reweighted by the main-measurement likelihood.
    const double lo = std::max(0.0, mean - 8.0 * sigma);
    const double hi = mean + 8.0 * sigma + (posterior_weighting ? 2.0 * std::sqrt(1.0 + n) : 0.0);
    const int steps = 4000;
    double num = 0.0, den = 0.0;
    for (int i = 0; i <= steps; ++i) {
        const double b = lo + (hi - lo) * i / steps;
        const double z = (b - mean) / sigma;
        double w = std::exp(-0.5 * z * z);
        if (posterior_weighting) w *= poisson_pmf(n, b);
        const double trap = (i == 0 || i == steps) ? 0.5 : 1.0;
        num += trap * w * poisson_tail_ge(n, b);
        den += trap * w;
    }
    if (den <= 0.0) throw ComputationError("pvalue_nuisance: degenerate nuisance weighting");
    return num / den;
}

double range_max_tail(std::int64_t n, double lo, double hi) {
    double best = 0.0;
    const int steps = 512;
    for (int i = 0; i <= steps; ++i) {
        const double b = lo + (hi - lo) * i / steps;
        best = std::max(best, poisson_tail_ge(n, b));
    }
    if (hi > lo) {
        best = std::max(best,
                        detail::brent_max([&](double b) { return poisson_tail_ge(n, b); }, lo, hi)
                            .second);
    }
    return best;
}

} // namespace

PValueReport pvalue_nuisance(const Observation& obs, const CountingModel& model,
                             NuisanceStrategy strategy, const PValueNuisanceOptions& opts) {
    validate(model, obs);
    const Nuisance& bg = model.background;
    const std::int64_t n = obs.n;
    const bool gamma_b = bg.form == SubsidiaryForm::GammaFromCount;
    const std::int64_t m = gamma_b ? obs.subsidiary_counts.front() : 0;
    const double tau = gamma_b ? bg.exposure() : 0.0;
    const std::string tag = to_string(strategy);

    switch (strategy) {
    case NuisanceStrategy::PlugIn: {
        double b_hat = bg.mean;
        if (gamma_b) {
            b_hat = static_cast<double>(n + m) / (1.0 + tau); // joint null MLE
        } else if (bg.form == SubsidiaryForm::TruncatedGaussian) {
            const double sig = bg.abs_sigma();
            const double hi = bg.mean + 8.0 * sig + static_cast<double>(n);
            b_hat = detail::brent_max(
                        [&](double b) {
                            const double z = (b - bg.mean) / sig;
                            return poisson_log_pmf(n, b) - 0.5 * z * z;
                        },
                        0.0, hi)
                        .first;
        }
        return PValueReport::make(poisson_tail_ge(n, b_hat), tag);
    }
    case NuisanceStrategy::PriorPredictive: {
        if (gamma_b) {
            const double shape = m > 0 ? static_cast<double>(m) : 1.0;
            return PValueReport::make(negbin_tail_ge(n, shape, tau), tag);
        }
        if (bg.form == SubsidiaryForm::TruncatedGaussian) {
            return PValueReport::make(
                trunc_gauss_weighted_tail(n, bg.mean, bg.abs_sigma(), false), tag);
        }
        return PValueReport::make(poisson_tail_ge(n, bg.mean), tag);
    }
    case NuisanceStrategy::PosteriorPredictive: {
        if (gamma_b) {
            const double shape = static_cast<double>(m > 0 ? m : 1) + static_cast<double>(n);
            return PValueReport::make(negbin_tail_ge(n, shape, tau + 1.0), tag);
        }
        if (bg.form == SubsidiaryForm::TruncatedGaussian) {
            return PValueReport::make(
                trunc_gauss_weighted_tail(n, bg.mean, bg.abs_sigma(), true), tag);
        }
        return PValueReport::make(poisson_tail_ge(n, bg.mean), tag);
    }
    case NuisanceStrategy::Supremum: {
        if (!opts.b_range) {
            throw ComputationError("supremum p-value requires a bounded nuisance range");
        }
        const auto [lo, hi] = *opts.b_range;
        if (!(lo >= 0.0 && hi >= lo)) throw DomainError("supremum: bad nuisance range");
        return PValueReport::make(range_max_tail(n, lo, hi), tag);
    }
    case NuisanceStrategy::CiAdjusted: {
        if (!opts.b_range) {
            throw ComputationError(
                "ci-adjusted p-value requires the nuisance confidence region");
        }
        if (!(opts.gamma > 0.0 && opts.gamma < 1.0)) {
            throw DomainError("ci-adjusted: gamma must be in (0,1)");
        }
        const auto [lo, hi] = *opts.b_range;
        if (!(lo >= 0.0 && hi >= lo)) throw DomainError("ci-adjusted: bad nuisance range");
        return PValueReport::make(std::min(1.0, range_max_tail(n, lo, hi) + opts.gamma), tag);
    }
    case NuisanceStrategy::Conditioning: {
        if (!gamma_b) {
            throw ComputationError(
                "conditioning p-value requires a gamma-from-count background subsidiary");
        }
        const double tau_cond = model.conditioning_tau();
        const double p_binom = 1.0 / (1.0 + tau_cond);
        return PValueReport::make(binomial_tail_ge(n, n + m, p_binom), tag);
    }
    }
    throw DomainError("pvalue_nuisance: bad strategy");
}

PValueReport combine_pvalues(const std::vector<double>& ps, CombineRule rule) {
    if (ps.size() < 2) {
        throw DomainError("combine_pvalues: need at least two p-values");
    }
    for (double p : ps) {
        if (!(p > 0.0 && p <= 1.0)) {
            throw DomainError("combine_pvalues: p-values must be in (0,1]");
        }
    }
    const double k = static_cast<double>(ps.size());
    if (rule == CombineRule::Min) {
        const double p_min = *std::min_element(ps.begin(), ps.end());
        return PValueReport::make(-std::expm1(k * std::log1p(-p_min)), "combine-min");
    }
    // Product rule: x = prod p_i; P = x sum_{j<k} (-ln x)^j / j!.
    double lx = 0.0;
    for (double p : ps) lx += std::log(p);
    const double neg_lx = -lx;
    double log_sum = -kInf;
    for (std::size_t j = 0; j < ps.size(); ++j) {
        const double jj = static_cast<double>(j);
        const double lt = (neg_lx > 0.0 ? jj * std::log(neg_lx) : (j == 0 ? 0.0 : -kInf)) -
                          std::lgamma(jj + 1.0);
        log_sum = log_add_exp(log_sum, lt);
    }
    return PValueReport::make(std::min(1.0, std::exp(lx + log_sum)), "combine-product");
}

CLsResult cls(double p0, double p1) {
    if (!(p0 >= 0.0 && p0 <= 1.0 && p1 >= 0.0 && p1 <= 1.0)) {
        throw DomainError("cls: p-values must be in [0,1]");
    }
    if (p0 >= 1.0) {
        throw ComputationError("cls: no H0 sensitivity (1 - p0 = 0)");
    }
    CLsResult r;
    r.p0 = p0;
    r.one_minus_p1 = 1.0 - p1;
    r.cls = r.one_minus_p1 / (1.0 - p0);
    r.excluded_at_5pct = r.cls <= 0.05;
    return r;
}

CLsResult cls_counting(std::int64_t n, double b, double s) {
    if (n < 0) throw DomainError("cls_counting: n must be non-negative");
    if (b < 0.0 || s < 0.0) throw DomainError("cls_counting: b, s must be non-negative");
    const double one_minus_p1 = poisson_cdf(n, s + b);
    const double one_minus_p0 = poisson_cdf(n, b);
    if (one_minus_p0 <= 0.0) {
        throw ComputationError("cls: no H0 sensitivity (1 - p0 = 0)");
    }
    CLsResult r;
    r.p0 = 1.0 - one_minus_p0;
    r.one_minus_p1 = one_minus_p1;
    r.cls = one_minus_p1 / one_minus_p0;
    r.excluded_at_5pct = r.cls <= 0.05;
    return r;
}

double cls_upper_limit(std::int64_t n, double b, double cl) {
    if (!(cl > 0.0 && cl < 1.0)) throw DomainError("cls_upper_limit: cl must be in (0,1)");
    const double alpha = 1.0 - cl;
    double lo = 0.0, hi = static_cast<double>(n) + 10.0 * std::sqrt(static_cast<double>(n)) + 5.0;
    while (cls_counting(n, b, hi).cls > alpha) hi *= 2.0;
    for (int it = 0; it < 200 && hi - lo > 1e-10 * std::max(1.0, hi); ++it) {
        const double mid = 0.5 * (lo + hi);
        (cls_counting(n, b, mid).cls > alpha ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

HypoStatDist HypoStatDist::counting(const CountingModel& model, double s) {
    if (s < 0.0) throw DomainError("HypoStatDist: s must be non-negative");
    const double mu0 = model.background.mean;
    const double mu1 = model.background.mean + model.efficiency.mean * s;
    const auto top = static_cast<std::int64_t>(std::ceil(mu1 + 12.0 * std::sqrt(mu1 + 1.0) + 30.0));
    HypoStatDist d;
    d.count_based = true;
    d.label = "counting";
    d.pmf_h0.reserve(static_cast<std::size_t>(top) + 1);
    d.pmf_h1.reserve(static_cast<std::size_t>(top) + 1);
    for (std::int64_t k = 0; k <= top; ++k) {
        d.pmf_h0.push_back(poisson_pmf(k, mu0));
        d.pmf_h1.push_back(poisson_pmf(k, mu1));
    }
    double s0 = 0.0, s1 = 0.0;
    for (double v : d.pmf_h0) s0 += v;
    for (double v : d.pmf_h1) s1 += v;
    if (std::fabs(s0 - 1.0) > 1e-8 || std::fabs(s1 - 1.0) > 1e-8) {
        throw ComputationError("HypoStatDist: distributions failed normalization check");
    }
    return d;
}

HypoStatDist HypoStatDist::empirical(std::vector<double> h0, std::vector<double> h1,
                                     std::string label) {
    if (h0.empty() || h1.empty()) throw DomainError("HypoStatDist: empty samples");
    HypoStatDist d;
    d.count_based = false;
    d.label = std::move(label);
    d.samples_h0 = std::move(h0);
    d.samples_h1 = std::move(h1);
    std::sort(d.samples_h0.begin(), d.samples_h0.end());
    std::sort(d.samples_h1.begin(), d.samples_h1.end());
    return d;
}

namespace {
double empirical_tail(const std::vector<double>& sorted, double t) {
    const auto it = std::lower_bound(sorted.begin(), sorted.end(), t);
    return static_cast<double>(sorted.end() - it) / static_cast<double>(sorted.size());
}
} // namespace

double HypoStatDist::tail_h0_ge(double t) const {
    if (!count_based) return empirical_tail(samples_h0, t);
    double sum = 0.0;
    for (std::size_t k = static_cast<std::size_t>(std::max<double>(0.0, std::ceil(t)));
         k < pmf_h0.size(); ++k) {
        sum += pmf_h0[k];
    }
    return std::min(1.0, sum);
}

double HypoStatDist::tail_h1_ge(double t) const {
    if (!count_based) return empirical_tail(samples_h1, t);
    double sum = 0.0;
    for (std::size_t k = static_cast<std::size_t>(std::max<double>(0.0, std::ceil(t)));
         k < pmf_h1.size(); ++k) {
        sum += pmf_h1[k];
    }
    return std::min(1.0, sum);
}

SensitivityResult punzi_sensitivity(const CountingModel& model, double alpha, double cl) {
    if (!(alpha > 0.0 && alpha <= 0.1)) throw DomainError("punzi: alpha must be in (0, 0.1]");
    if (!(cl > 0.5 && cl < 1.0)) throw DomainError("punzi: cl must be in (0.5, 1)");
    if (!model.background.exact() || !model.efficiency.exact()) {
        throw DomainError("punzi: requires exact background and efficiency");
    }
    const double b = model.background.mean;
    const double eff = model.efficiency.mean;

    std::int64_t t_crit = 0;
    while (poisson_tail_ge(t_crit, b) > alpha) ++t_crit;

    // Smallest s with P(N >= t_crit | b + eff*s) >= cl (tail is increasing
    // in s, so plain bisection on the exact tail).
    const auto power = [&](double s) { return poisson_tail_ge(t_crit, b + eff * s); };
    double lo = 0.0;
    double hi = (static_cast<double>(t_crit) + 10.0 * std::sqrt(static_cast<double>(t_crit) + 1.0) +
                 10.0 - b) /
                eff;
    hi = std::max(hi, 1.0);
    while (power(hi) < cl) hi *= 2.0;
    for (int it = 0; it < 200 && hi - lo > 1e-10 * std::max(1.0, hi); ++it) {
        const double mid = 0.5 * (lo + hi);
        (power(mid) < cl ? lo : hi) = mid;
    }

    SensitivityResult r;
    r.t_crit = t_crit;
    r.alpha_requested = alpha;
    r.alpha_actual = poisson_tail_ge(t_crit, b);
    r.cl = cl;
    r.s_min = hi; // the verified side of the bracket
    if (r.alpha_actual > alpha) {
        throw ComputationError("punzi: critical count fails its tail condition");
    }
    if (power(r.s_min) < cl) {
        throw ComputationError("punzi: sensitivity fails its power condition");
    }
    return r;
}

std::string to_string(LimitMethod m) {
    switch (m) {
    case LimitMethod::FeldmanCousins: return "fc";
    case LimitMethod::Classical: return "classical";
    case LimitMethod::Bayes: return "bayes";
    case LimitMethod::Profile: return "profile";
    }
    return "?";
}

LimitMethod limit_method_from_string(const std::string& s) {
    if (s == "fc" || s == "feldman-cousins") return LimitMethod::FeldmanCousins;
    if (s == "classical") return LimitMethod::Classical;
    if (s == "bayes") return LimitMethod::Bayes;
    if (s == "profile") return LimitMethod::Profile;
    throw DomainError("unknown limit method '" + s + "'");
}

double median_sensitivity(const CountingModel& model, LimitMethod method, double cl,
                          std::int64_t n_toys, std::uint64_t seed) {
    if (n_toys < 1 || n_toys % 2 == 0) {
        throw DomainError("median_sensitivity: n_toys must be odd and positive");
    }
    RngStream root(seed);
    std::map<std::vector<std::int64_t>, double> cache;
    std::vector<double> limits;
    limits.reserve(static_cast<std::size_t>(n_toys));
    for (std::int64_t t = 0; t < n_toys; ++t) {
        RngStream rng = root.substream(static_cast<std::uint64_t>(t));
        const Observation obs = generate_toy(model, 0.0, rng);
        std::vector<std::int64_t> key = obs.subsidiary_counts;
        key.push_back(obs.n);
        auto it = cache.find(key);
        if (it == cache.end()) {
            const IntervalResult iv = limit_interval(model, obs, method, cl);
            // An empty interval ranks below every real limit.
            const double u = iv.empty ? 0.0 : *iv.upper;
            it = cache.emplace(std::move(key), u).first;
        }
        limits.push_back(it->second);
    }
    const auto mid = limits.begin() + static_cast<std::ptrdiff_t>(limits.size() / 2);
    std::nth_element(limits.begin(), mid, limits.end());
    return *mid;
}

} // namespace cstk
