#include "cstk/coverage.hpp"
#include "cstk/bayes.hpp"
#include "cstk/belt.hpp"
#include "cstk/error.hpp"
#include "cstk/parallel.hpp"
#include "cstk/prob.hpp"
#include "cstk/profile.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <mutex>

namespace cstk {

std::string to_string(CoverageMethod m) {
    switch (m) {
    case CoverageMethod::FeldmanCousins: return "fc";
    case CoverageMethod::Classical: return "classical";
    case CoverageMethod::Bayes: return "bayes";
    case CoverageMethod::Profile: return "profile";
    case CoverageMethod::FlipFlop: return "flip-flop";
    }
    return "?";
}

CoverageMethod coverage_method_from_string(const std::string& s) {
    if (s == "fc" || s == "feldman-cousins") return CoverageMethod::FeldmanCousins;
    if (s == "classical") return CoverageMethod::Classical;
    if (s == "bayes") return CoverageMethod::Bayes;
    if (s == "profile") return CoverageMethod::Profile;
    if (s == "flip-flop") return CoverageMethod::FlipFlop;
    throw DomainError("unknown coverage method '" + s + "'");
}

Observation generate_toy(const CountingModel& model, double s_true, RngStream& rng) {
    if (s_true < 0.0) throw DomainError("generate_toy: s_true must be non-negative");
    if (model.background.form == SubsidiaryForm::TruncatedGaussian ||
        model.efficiency.form == SubsidiaryForm::TruncatedGaussian) {
        throw ComputationError("generate_toy: truncated-gaussian subsidiaries have no count "
                               "to sample; use exact or gamma-from-count forms");
    }
    const double b_true = model.background.mean;
    const double eff_true = model.efficiency.mean;
    Observation obs(0);
    if (model.background.form == SubsidiaryForm::GammaFromCount) {
        obs.subsidiary_counts.push_back(rng.next_poisson(model.background.exposure() * b_true));
    }
    if (model.efficiency.form == SubsidiaryForm::GammaFromCount) {
        obs.subsidiary_counts.push_back(rng.next_poisson(model.efficiency.exposure() * eff_true));
    }
    obs.n = rng.next_poisson(eff_true * s_true + b_true);
    return obs;
}

namespace {

// Scale a counts-space interval into signal units for eff != 1.
IntervalResult scale_interval(IntervalResult iv, double eff) {
    if (!iv.empty) {
        iv.lower = *iv.lower / eff;
        iv.upper = *iv.upper / eff;
    }
    return iv;
}

void require_exact_for(const char* method, const CountingModel& model, bool eff_too) {
    if (!model.background.exact()) {
        throw ComputationError(std::string(method) +
                               ": nuisance-free construction requires an exact background");
    }
    if (eff_too && !model.efficiency.exact()) {
        throw ComputationError(std::string(method) +
                               ": nuisance-free construction requires an exact efficiency");
    }
}

} // namespace

IntervalResult limit_interval(const CountingModel& model, const Observation& obs,
                              LimitMethod method, double cl) {
    validate(model, obs);
    switch (method) {
    case LimitMethod::FeldmanCousins:
        require_exact_for("fc", model, true);
        return scale_interval(fc_interval(obs.n, model.background.mean, cl),
                              model.efficiency.mean);
    case LimitMethod::Classical:
        require_exact_for("classical", model, true);
        return scale_interval(classical_upper_limit(obs.n, model.background.mean, cl),
                              model.efficiency.mean);
    case LimitMethod::Bayes: {
        // Closed-form fast path for the exact-b, gamma-eff model.
        if (model.background.exact() &&
            model.efficiency.form == SubsidiaryForm::GammaFromCount &&
            obs.subsidiary_counts.front() >= 2) {
            const double tau = model.efficiency.exposure();
            const double u = bayes_upper_limit_gamma_eff(obs.n, model.background.mean,
                                                         obs.subsidiary_counts.front(), tau, cl);
            return IntervalResult::make(0.0, u, cl, "bayes-flat-prior");
        }
        return bayes_upper_limit(model, obs, cl);
    }
    case LimitMethod::Profile: {
        const double delta = 0.5 * chi2_quantile(cl, 1.0);
        const ProfileCurve curve = profile(model, obs);
        IntervalResult iv = delta_lnl_interval(curve, delta, "profile-delta-lnl");
        iv.cl = cl;
        return iv;
    }
    }
    throw DomainError("limit_interval: bad method");
}

namespace {

// Intervals depend on the observation only; memoize them across toys.
class LimitCache {
public:
    LimitCache(const CountingModel& model, LimitMethod method, double cl)
        : model_(model), method_(method), cl_(cl) {}

    const IntervalResult& get(const Observation& obs) {
        std::vector<std::int64_t> key = obs.subsidiary_counts;
        key.push_back(obs.n);
        {
            std::lock_guard<std::mutex> lock(mutex_);
            auto it = cache_.find(key);
            if (it != cache_.end()) return it->second;
        }
        IntervalResult iv = compute(obs);
        std::lock_guard<std::mutex> lock(mutex_);
        return cache_.emplace(std::move(key), std::move(iv)).first->second;
    }

private:
    IntervalResult compute(const Observation& obs) const {
        if (method_ == LimitMethod::Bayes &&
            model_.efficiency.form == SubsidiaryForm::GammaFromCount &&
            !obs.subsidiary_counts.empty() && obs.subsidiary_counts.front() < 2) {
            // Subsidiary count 0 or 1 makes the reference-prior posterior
            // improper (probability ~ e^-k of ever happening); score it as
            // a failed, non-covering measurement.
            return IntervalResult::make_empty(cl_, "bayes-flat-prior");
        }
        return limit_interval(model_, obs, method_, cl_);
    }

    const CountingModel& model_;
    LimitMethod method_;
    double cl_;
    std::map<std::vector<std::int64_t>, IntervalResult> cache_;
    std::mutex mutex_;
};

LimitMethod to_limit_method(CoverageMethod m) {
    switch (m) {
    case CoverageMethod::FeldmanCousins: return LimitMethod::FeldmanCousins;
    case CoverageMethod::Classical: return LimitMethod::Classical;
    case CoverageMethod::Bayes: return LimitMethod::Bayes;
    case CoverageMethod::Profile: return LimitMethod::Profile;
    case CoverageMethod::FlipFlop: break;
    }
    throw DomainError("not a limit method");
}

} // namespace

CoverageCurve coverage_scan(CoverageMethod method, const ExperimentModel& model,
                            const std::vector<double>& s_grid, double cl,
                            std::int64_t n_toys, std::uint64_t seed) {
    if (s_grid.empty()) throw DomainError("coverage_scan: empty grid");
    if (n_toys < 10000) {
        throw DomainError("coverage_scan: need at least 10^4 toys per grid point");
    }
    const bool is_flip_flop = method == CoverageMethod::FlipFlop;
    if (is_flip_flop != std::holds_alternative<GaussianUnitModel>(model)) {
        throw ComputationError(
            "coverage_scan: method/model mismatch (flip-flop needs the Gaussian measurement "
            "model; counting methods need the counting model)");
    }

    CoverageCurve curve;
    curve.s_true = s_grid;
    curve.coverage.resize(s_grid.size());
    curve.stderr_.resize(s_grid.size());
    curve.n_toys = n_toys;
    curve.method = to_string(method);
    curve.seed = seed;

    const RngStream root(seed);

    if (is_flip_flop) {
        const auto& gm = std::get<GaussianUnitModel>(model);
        for (std::size_t gi = 0; gi < s_grid.size(); ++gi) {
            const double s_true = s_grid[gi];
            std::vector<std::uint8_t> hit(static_cast<std::size_t>(n_toys));
            RngStream point_stream = root.substream(gi);
            parallel_for(static_cast<std::size_t>(n_toys), [&](std::size_t t) {
                RngStream rng = point_stream.substream(t);
                const double x = s_true + rng.next_normal();
                hit[t] = flip_flop_interval(x, cl, gm.switch_sigma).contains(s_true) ? 1 : 0;
            });
            std::int64_t covered = 0;
            for (auto h : hit) covered += h;
            const double c = static_cast<double>(covered) / static_cast<double>(n_toys);
            curve.coverage[gi] = c;
            curve.stderr_[gi] = std::sqrt(c * (1.0 - c) / static_cast<double>(n_toys));
        }
        return curve;
    }

    const auto& cm = std::get<CountingModel>(model);
    LimitCache cache(cm, to_limit_method(method), cl);
    for (std::size_t gi = 0; gi < s_grid.size(); ++gi) {
        const double s_true = s_grid[gi];
        std::vector<std::uint8_t> hit(static_cast<std::size_t>(n_toys));
        RngStream point_stream = root.substream(gi);
        parallel_for(static_cast<std::size_t>(n_toys), [&](std::size_t t) {
            RngStream rng = point_stream.substream(t);
            const Observation obs = generate_toy(cm, s_true, rng);
            hit[t] = cache.get(obs).contains(s_true) ? 1 : 0;
        });
        std::int64_t covered = 0;
        for (auto h : hit) covered += h;
        const double c = static_cast<double>(covered) / static_cast<double>(n_toys);
        curve.coverage[gi] = c;
        curve.stderr_[gi] = std::sqrt(c * (1.0 - c) / static_cast<double>(n_toys));
    }
    return curve;
}

namespace {

double flip_flop_exact_coverage(double s, double cl, double switch_sigma) {
    // P(s covered) for x ~ N(s, 1) under the two-branch policy.
    const double z_up = normal_quantile(cl);
    const double z_c = normal_quantile(0.5 * (1.0 + cl));
    // Upper-limit branch: x < switch and s <= max(0,x) + z_up.
    const double lo_up = s - z_up; // x >= lo_up covers (max(0,x) >= x)
    double p = 0.0;
    if (s <= z_up) {
        // Even x <= 0 covers via the max(0, x) clamp.
        p += normal_cdf(switch_sigma - s);
    } else if (lo_up < switch_sigma) {
        p += normal_cdf(switch_sigma - s) - normal_cdf(lo_up - s);
    }
    // Central branch: x >= switch and |x - s| <= z_c.
    const double lo_c = std::max(switch_sigma, s - z_c);
    const double hi_c = s + z_c;
    if (hi_c > lo_c) p += normal_cdf(hi_c - s) - normal_cdf(lo_c - s);
    return p;
}

} // namespace

CoverageCurve coverage_exact(CoverageMethod method, const ExperimentModel& model,
                             const std::vector<double>& s_grid, double cl) {
    if (s_grid.empty()) throw DomainError("coverage_exact: empty grid");
    const bool is_flip_flop = method == CoverageMethod::FlipFlop;
    if (is_flip_flop != std::holds_alternative<GaussianUnitModel>(model)) {
        throw ComputationError("coverage_exact: method/model mismatch");
    }

    CoverageCurve curve;
    curve.s_true = s_grid;
    curve.coverage.resize(s_grid.size());
    curve.stderr_.assign(s_grid.size(), 0.0);
    curve.n_toys = 0;
    curve.method = to_string(method) + "-exact";
    curve.seed = 0;

    if (is_flip_flop) {
        const auto& gm = std::get<GaussianUnitModel>(model);
        for (std::size_t i = 0; i < s_grid.size(); ++i) {
            curve.coverage[i] = flip_flop_exact_coverage(s_grid[i], cl, gm.switch_sigma);
        }
        return curve;
    }

    const auto& cm = std::get<CountingModel>(model);
    LimitCache cache(cm, to_limit_method(method), cl);

    // Enumerate subsidiary-count outcomes (if any) and main counts, summing
    // probability over every observation whose interval covers s_true.
    struct SubDist {
        std::vector<double> pmf; // index = count
        std::int64_t lo = 0;
    };
    std::vector<SubDist> subs;
    const auto add_sub = [&](const Nuisance& nu) {
        if (nu.form != SubsidiaryForm::GammaFromCount) return;
        const double mean = nu.exposure() * nu.mean;
        SubDist d;
        d.lo = std::max<std::int64_t>(
            0, static_cast<std::int64_t>(std::floor(mean - 10.0 * std::sqrt(mean) - 10.0)));
        const auto hi =
            static_cast<std::int64_t>(std::ceil(mean + 10.0 * std::sqrt(mean) + 10.0));
        for (std::int64_t k = d.lo; k <= hi; ++k) d.pmf.push_back(poisson_pmf(k, mean));
        subs.push_back(std::move(d));
    };
    add_sub(cm.background);
    add_sub(cm.efficiency);

    for (std::size_t gi = 0; gi < s_grid.size(); ++gi) {
        const double s_true = s_grid[gi];
        const double mu = cm.efficiency.mean * s_true + cm.background.mean;
        const auto n_hi =
            static_cast<std::int64_t>(std::ceil(mu + 10.0 * std::sqrt(mu + 1.0) + 25.0));
        double covered = 0.0;
        const auto accumulate = [&](auto&& self, std::size_t level,
                                    std::vector<std::int64_t>& sub_counts,
                                    double weight) -> void {
            if (weight < 1e-14) return;
            if (level < subs.size()) {
                const SubDist& d = subs[level];
                for (std::size_t k = 0; k < d.pmf.size(); ++k) {
                    sub_counts.push_back(d.lo + static_cast<std::int64_t>(k));
                    self(self, level + 1, sub_counts, weight * d.pmf[k]);
                    sub_counts.pop_back();
                }
                return;
            }
            for (std::int64_t n = 0; n <= n_hi; ++n) {
                const double w = weight * poisson_pmf(n, mu);
                if (w < 1e-16) continue;
                const Observation obs(n, sub_counts);
                if (cache.get(obs).contains(s_true)) covered += w;
            }
        };
        std::vector<std::int64_t> sub_counts;
        accumulate(accumulate, 0, sub_counts, 1.0);
        curve.coverage[gi] = std::min(1.0, covered);
    }
    return curve;
}

} // namespace cstk
