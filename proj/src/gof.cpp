#include "cstk/gof.hpp"
#include "cstk/error.hpp"
#include "cstk/prob.hpp"
#include "optimize.hpp"

#include <algorithm>
#include <cmath>

namespace cstk {

void BinnedData::check() const {
    if (counts.empty()) throw DomainError("BinnedData: no bins");
    if (edges.size() != counts.size() + 1) {
        throw DomainError("BinnedData: need bins+1 edges");
    }
    for (std::size_t i = 1; i < edges.size(); ++i) {
        if (!(edges[i] > edges[i - 1])) {
            throw DomainError("BinnedData: edges must be strictly ascending");
        }
    }
    for (double c : counts) {
        if (c < 0.0) throw DomainError("BinnedData: counts must be non-negative");
    }
    if (!variance.empty() && variance.size() != counts.size()) {
        throw DomainError("BinnedData: variance override size mismatch");
    }
}

Chi2Result chi2_binned(const BinnedData& data, const std::vector<double>& prediction,
                       std::size_t n_fitted) {
    data.check();
    if (prediction.size() != data.bins()) {
        throw DomainError("chi2_binned: prediction size mismatch");
    }
    Chi2Result r;
    for (std::size_t i = 0; i < data.bins(); ++i) {
        if (!(prediction[i] > 0.0)) {
            throw DomainError("chi2_binned: prediction must be positive in every bin");
        }
        if (prediction[i] < 5.0) r.low_count_caveat = true;
        const double var = data.variance.empty() ? prediction[i] : data.variance[i];
        if (!(var > 0.0)) throw DomainError("chi2_binned: variance must be positive");
        const double d = data.counts[i] - prediction[i];
        r.s += d * d / var;
    }
    if (n_fitted >= data.bins()) throw DomainError("chi2_binned: n_fitted >= bins");
    r.ndof = static_cast<double>(data.bins() - n_fitted);
    r.p = chi2_sf(r.s, r.ndof);
    return r;
}

BinnedData generate_binned_toy(const BinnedData& shape, const std::vector<double>& means,
                               RngStream& rng) {
    if (means.size() != shape.bins()) throw DomainError("generate_binned_toy: size mismatch");
    BinnedData toy = shape;
    for (std::size_t i = 0; i < means.size(); ++i) {
        if (shape.variance.empty()) {
            toy.counts[i] = static_cast<double>(rng.next_poisson(means[i]));
        } else {
            toy.counts[i] =
                means[i] + std::sqrt(shape.variance[i]) * rng.next_normal();
        }
    }
    return toy;
}

namespace {

std::vector<double> fit_weights(const BinnedData& data) {
    std::vector<double> w(data.bins());
    for (std::size_t i = 0; i < data.bins(); ++i) {
        const double var = data.variance.empty() ? std::max(data.counts[i], 1.0)
                                                 : data.variance[i];
        w[i] = 1.0 / var;
    }
    return w;
}

// Weighted linear least squares: minimizes sum w (y - X beta)^2.
std::vector<double> wls(const std::vector<std::vector<double>>& cols,
                        const std::vector<double>& y, const std::vector<double>& w) {
    const std::size_t p = cols.size(), n = y.size();
    std::vector<std::vector<double>> ata(p, std::vector<double>(p, 0.0));
    std::vector<double> atb(p, 0.0);
    for (std::size_t a = 0; a < p; ++a) {
        for (std::size_t b = a; b < p; ++b) {
            double s = 0.0;
            for (std::size_t i = 0; i < n; ++i) s += w[i] * cols[a][i] * cols[b][i];
            ata[a][b] = ata[b][a] = s;
        }
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += w[i] * cols[a][i] * y[i];
        atb[a] = s;
    }
    // Gaussian elimination with partial pivoting (tiny systems).
    for (std::size_t k = 0; k < p; ++k) {
        std::size_t piv = k;
        for (std::size_t i = k + 1; i < p; ++i) {
            if (std::fabs(ata[i][k]) > std::fabs(ata[piv][k])) piv = i;
        }
        std::swap(ata[k], ata[piv]);
        std::swap(atb[k], atb[piv]);
        if (std::fabs(ata[k][k]) < 1e-300) {
            throw ComputationError("wls: singular normal equations");
        }
        for (std::size_t i = k + 1; i < p; ++i) {
            const double f = ata[i][k] / ata[k][k];
            for (std::size_t j = k; j < p; ++j) ata[i][j] -= f * ata[k][j];
            atb[i] -= f * atb[k];
        }
    }
    std::vector<double> beta(p);
    for (std::size_t ii = p; ii-- > 0;) {
        double s = atb[ii];
        for (std::size_t j = ii + 1; j < p; ++j) s -= ata[ii][j] * beta[j];
        beta[ii] = s / ata[ii][ii];
    }
    return beta;
}

double weighted_chi2(const BinnedData& data, const std::vector<double>& pred,
                     const std::vector<double>& w) {
    double s = 0.0;
    for (std::size_t i = 0; i < data.bins(); ++i) {
        const double d = data.counts[i] - pred[i];
        s += d * d * w[i];
    }
    return s;
}

} // namespace

std::vector<double> PolynomialModel::predict(const BinnedData& shape,
                                             const std::vector<double>& params) const {
    if (params.size() != n_params()) throw DomainError("PolynomialModel: bad parameter count");
    std::vector<double> pred(shape.bins());
    for (std::size_t i = 0; i < shape.bins(); ++i) {
        const double x = shape.center(i);
        double v = 0.0;
        for (std::size_t k = params.size(); k-- > 0;) v = v * x + params[k];
        pred[i] = v;
    }
    return pred;
}

FitResult PolynomialModel::fit(const BinnedData& data, int) const {
    data.check();
    const auto w = fit_weights(data);
    std::vector<std::vector<double>> cols(degree_ + 1, std::vector<double>(data.bins()));
    for (std::size_t i = 0; i < data.bins(); ++i) {
        const double x = data.center(i);
        double v = 1.0;
        for (std::size_t k = 0; k <= degree_; ++k) {
            cols[k][i] = v;
            v *= x;
        }
    }
    FitResult r;
    r.params = wls(cols, data.counts, w);
    r.chi2 = weighted_chi2(data, predict(data, r.params), w);
    r.converged = true;
    return r;
}

PeakModel::PeakModel(std::size_t bg_degree, double x0_lo, double x0_hi, double sigma_lo,
                     double sigma_hi, bool allow_negative)
    : bg_degree_(bg_degree), x0_lo_(x0_lo), x0_hi_(x0_hi), sigma_lo_(sigma_lo),
      sigma_hi_(sigma_hi), allow_negative_(allow_negative) {
    if (!(x0_hi > x0_lo) || !(sigma_hi > sigma_lo) || !(sigma_lo > 0.0)) {
        throw DomainError("PeakModel: bad search ranges");
    }
}

std::vector<double> PeakModel::predict(const BinnedData& shape,
                                       const std::vector<double>& params) const {
    if (params.size() != n_params()) throw DomainError("PeakModel: bad parameter count");
    const double amp = params[bg_degree_ + 1];
    const double x0 = params[bg_degree_ + 2];
    const double sig = params[bg_degree_ + 3];
    std::vector<double> pred(shape.bins());
    for (std::size_t i = 0; i < shape.bins(); ++i) {
        const double x = shape.center(i);
        double bg = 0.0;
        for (std::size_t k = bg_degree_ + 1; k-- > 0;) bg = bg * x + params[k];
        const double z = (x - x0) / sig;
        pred[i] = bg + amp * std::exp(-0.5 * z * z);
    }
    return pred;
}

FitResult PeakModel::fit(const BinnedData& data, int effort) const {
    data.check();
    const auto w = fit_weights(data);
    const std::size_t nb = data.bins();

    // Background basis columns are fixed; the peak column depends on
    // (x0, sigma), with all linear coefficients profiled per grid cell.
    std::vector<std::vector<double>> cols(bg_degree_ + 2, std::vector<double>(nb));
    for (std::size_t i = 0; i < nb; ++i) {
        const double x = data.center(i);
        double v = 1.0;
        for (std::size_t k = 0; k <= bg_degree_; ++k) {
            cols[k][i] = v;
            v *= x;
        }
    }

    std::vector<std::vector<double>> bg_cols(cols.begin(), cols.end() - 1);
    const std::vector<double> bg_beta = wls(bg_cols, data.counts, w);
    std::vector<double> bg_params(bg_beta);
    bg_params.resize(n_params(), 0.0);
    bg_params[bg_degree_ + 2] = 0.5 * (x0_lo_ + x0_hi_);
    bg_params[bg_degree_ + 3] = sigma_lo_;
    const double chi2_bg = weighted_chi2(data, predict(data, bg_params), w);

    const auto chi2_at = [&](double x0, double sig, std::vector<double>* out_params) {
        for (std::size_t i = 0; i < nb; ++i) {
            const double z = (data.center(i) - x0) / sig;
            cols[bg_degree_ + 1][i] = std::exp(-0.5 * z * z);
        }
        std::vector<double> beta = wls(cols, data.counts, w);
        if (!allow_negative_ && beta[bg_degree_ + 1] < 0.0) {
            // Boundary: zero amplitude reduces to the background fit.
            if (out_params) {
                *out_params = bg_beta;
                out_params->push_back(0.0);
                out_params->push_back(x0);
                out_params->push_back(sig);
            }
            return chi2_bg;
        }
        std::vector<double> full(beta);
        full.push_back(x0);
        full.push_back(sig);
        const double c = weighted_chi2(data, predict(data, full), w);
        if (out_params) *out_params = std::move(full);
        return c;
    };

    const int nx = 24 * (1 + effort);
    const int ns = 8 * (1 + effort);
    double best_x0 = x0_lo_, best_sig = sigma_lo_, best_chi2 = chi2_bg + 1.0;
    for (int ix = 0; ix <= nx; ++ix) {
        const double x0 = x0_lo_ + (x0_hi_ - x0_lo_) * ix / nx;
        for (int is = 0; is <= ns; ++is) {
            const double sig =
                sigma_lo_ * std::pow(sigma_hi_ / sigma_lo_, static_cast<double>(is) / ns);
            const double c = chi2_at(x0, sig, nullptr);
            if (c < best_chi2) {
                best_chi2 = c;
                best_x0 = x0;
                best_sig = sig;
            }
        }
    }
    // Polish the winning cell, alternating the two shape coordinates.
    for (int sweep = 0; sweep < 2; ++sweep) {
        best_x0 = detail::brent_min([&](double x0) { return chi2_at(x0, best_sig, nullptr); },
                                    std::max(x0_lo_, best_x0 - (x0_hi_ - x0_lo_) / nx),
                                    std::min(x0_hi_, best_x0 + (x0_hi_ - x0_lo_) / nx), 1e-8)
                      .first;
        const double lsig = std::log(best_sig);
        const double step = std::log(sigma_hi_ / sigma_lo_) / ns;
        best_sig = std::exp(detail::brent_min(
                                [&](double ls) {
                                    return chi2_at(best_x0, std::exp(ls), nullptr);
                                },
                                std::max(std::log(sigma_lo_), lsig - step),
                                std::min(std::log(sigma_hi_), lsig + step), 1e-8)
                                .first);
    }
    FitResult r;
    r.chi2 = chi2_at(best_x0, best_sig, &r.params);
    r.converged = true;
    return r;
}

DeltaChi2Result delta_chi2_report(double chi2_restricted, double chi2_extended,
                                  std::size_t k_extra) {
    if (k_extra == 0) throw DomainError("delta_chi2_report: k_extra must be >= 1");
    DeltaChi2Result r;
    r.chi2_restricted = chi2_restricted;
    r.chi2_extended = chi2_extended;
    r.delta_chi2 = chi2_restricted - chi2_extended;
    if (r.delta_chi2 < 0.0) throw DomainError("delta_chi2_report: negative difference");
    r.p = chi2_sf(r.delta_chi2, static_cast<double>(k_extra));
    r.sigma = k_extra == 1 ? std::sqrt(r.delta_chi2) : std::max(0.0, p_to_sigma(r.p));
    return r;
}

DeltaChi2Result chi2_difference(const BinnedData& data, const FitModel& restricted,
                                const FitModel& extended, std::size_t k_extra,
                                DeltaChi2Regime regime, std::int64_t n_toys,
                                std::uint64_t seed) {
    data.check();
    if (k_extra == 0) throw DomainError("chi2_difference: k_extra must be >= 1");
    const FitResult fit_r = restricted.fit(data);
    FitResult fit_e = extended.fit(data);
    if (fit_r.chi2 - fit_e.chi2 < -1e-6) {
        fit_e = extended.fit(data, /*effort=*/2);
        if (fit_r.chi2 - fit_e.chi2 < -1e-6) {
            throw ComputationError(
                "chi2_difference: extended fit worse than restricted (optimizer failure)");
        }
    }
    const double delta = std::max(0.0, fit_r.chi2 - fit_e.chi2);

    DeltaChi2Result r;
    r.chi2_restricted = fit_r.chi2;
    r.chi2_extended = fit_e.chi2;
    r.delta_chi2 = delta;

    if (regime == DeltaChi2Regime::Wilks) {
        r.p = chi2_sf(delta, static_cast<double>(k_extra));
        r.sigma = k_extra == 1 ? std::sqrt(delta) : std::max(0.0, p_to_sigma(r.p));
        return r;
    }

    if (n_toys < 99) throw DomainError("chi2_difference: mc-null needs n_toys >= 99");
    const std::vector<double> null_means = restricted.predict(data, fit_r.params);
    RngStream root(seed);
    std::int64_t at_least = 0;
    for (std::int64_t t = 0; t < n_toys; ++t) {
        RngStream rng = root.substream(static_cast<std::uint64_t>(t));
        const BinnedData toy = generate_binned_toy(data, null_means, rng);
        const FitResult tr = restricted.fit(toy);
        FitResult te = extended.fit(toy);
        if (tr.chi2 - te.chi2 < -1e-6) te = extended.fit(toy, 2);
        if (std::max(0.0, tr.chi2 - te.chi2) >= delta) ++at_least;
    }
    r.n_toys = n_toys;
    r.p = static_cast<double>(1 + at_least) / static_cast<double>(n_toys + 1);
    r.sigma = std::max(0.0, p_to_sigma(r.p));
    return r;
}

EffectiveDofReport effective_dof_scan(const DofScanFamily& family, std::int64_t n_toys,
                                      std::uint64_t seed) {
    if (n_toys < 10) throw DomainError("effective_dof_scan: need at least 10 toys");
    RngStream root(seed);
    double sum = 0.0, sum2 = 0.0;
    std::int64_t failures = 0, used = 0;
    for (std::int64_t t = 0; t < n_toys; ++t) {
        RngStream rng = root.substream(static_cast<std::uint64_t>(t));
        const BinnedData toy = family.generate(rng);
        const FitResult fr = family.fit(toy);
        if (!fr.converged) {
            ++failures;
            continue;
        }
        sum += fr.chi2;
        sum2 += fr.chi2 * fr.chi2;
        ++used;
    }
    if (failures * 100 > n_toys) {
        throw ComputationError("effective_dof_scan: more than 1% of fits failed");
    }
    EffectiveDofReport rep;
    rep.n_toys = n_toys;
    rep.fit_failures = failures;
    rep.mean_s = sum / static_cast<double>(used);
    rep.var_s = std::max(0.0, (sum2 - static_cast<double>(used) * rep.mean_s * rep.mean_s) /
                                  (static_cast<double>(used) - 1.0));
    double best_gap = 1e300;
    for (std::size_t f = 0; f <= family.n_params; ++f) {
        const double gap =
            std::fabs(rep.mean_s - (static_cast<double>(family.n_bins) - static_cast<double>(f)));
        if (gap < best_gap) {
            best_gap = gap;
            rep.effective_params = f;
        }
    }
    return rep;
}

DofScanFamily make_polynomial_family(std::size_t n_bins, double intercept, double slope,
                                     double gauss_sigma) {
    DofScanFamily fam;
    fam.name = "linear";
    fam.n_bins = n_bins;
    fam.n_params = 2;
    BinnedData shape;
    for (std::size_t i = 0; i <= n_bins; ++i) shape.edges.push_back(static_cast<double>(i));
    shape.counts.assign(n_bins, 0.0);
    shape.variance.assign(n_bins, gauss_sigma * gauss_sigma);
    std::vector<double> means(n_bins);
    for (std::size_t i = 0; i < n_bins; ++i) means[i] = intercept + slope * shape.center(i);
    fam.generate = [shape, means](RngStream& rng) {
        return generate_binned_toy(shape, means, rng);
    };
    fam.fit = [](const BinnedData& d) { return PolynomialModel(1).fit(d); };
    return fam;
}

DofScanFamily make_cosine_wiggle_family(std::size_t n_bins, double norm, double amp) {
    DofScanFamily fam;
    fam.name = "cosine-wiggle";
    fam.n_bins = n_bins;
    fam.n_params = 2;
    BinnedData shape;
    const double two_pi = 6.283185307179586;
    for (std::size_t i = 0; i <= n_bins; ++i) {
        shape.edges.push_back(two_pi * static_cast<double>(i) / static_cast<double>(n_bins));
    }
    shape.counts.assign(n_bins, 0.0);
    std::vector<double> means(n_bins);
    for (std::size_t i = 0; i < n_bins; ++i) means[i] = norm * (1.0 + amp * std::cos(shape.center(i)));
    fam.generate = [shape, means](RngStream& rng) {
        return generate_binned_toy(shape, means, rng);
    };
    fam.fit = [amp](const BinnedData& d) {
        const auto w = fit_weights(d);
        // Template 1 + amp cos(x - x0): the normalization is linear, the
        // phase is scanned (it has almost no handle on the data when amp is
        // tiny, which is the point of the fixture).
        const auto chi2_at = [&](double x0) {
            double num = 0.0, den = 0.0;
            for (std::size_t i = 0; i < d.bins(); ++i) {
                const double t = 1.0 + amp * std::cos(d.center(i) - x0);
                num += w[i] * d.counts[i] * t;
                den += w[i] * t * t;
            }
            const double norm_hat = num / den;
            double s = 0.0;
            for (std::size_t i = 0; i < d.bins(); ++i) {
                const double t = 1.0 + amp * std::cos(d.center(i) - x0);
                const double diff = d.counts[i] - norm_hat * t;
                s += w[i] * diff * diff;
            }
            return s;
        };
        double best_x0 = 0.0, best = chi2_at(0.0);
        const double two_pi = 6.283185307179586;
        for (int k = 1; k < 16; ++k) {
            const double x0 = two_pi * k / 16.0;
            const double c = chi2_at(x0);
            if (c < best) {
                best = c;
                best_x0 = x0;
            }
        }
        auto [x0_min, chi2_min] =
            detail::brent_min(chi2_at, best_x0 - two_pi / 16.0, best_x0 + two_pi / 16.0, 1e-9);
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < d.bins(); ++i) {
            const double t = 1.0 + amp * std::cos(d.center(i) - x0_min);
            num += w[i] * d.counts[i] * t;
            den += w[i] * t * t;
        }
        FitResult r;
        r.params = {num / den, x0_min};
        r.chi2 = chi2_min;
        r.converged = true;
        return r;
    };
    return fam;
}

DofScanFamily make_oscillation_family(std::size_t n_bins, double flux, double a_true,
                                      double dm2_true, double c_scale) {
    DofScanFamily fam;
    fam.name = "oscillation";
    fam.n_bins = n_bins;
    fam.n_params = 2;
    BinnedData shape;
    const double e_lo = 1.0, e_hi = 6.0;
    for (std::size_t i = 0; i <= n_bins; ++i) {
        shape.edges.push_back(e_lo + (e_hi - e_lo) * static_cast<double>(i) /
                                         static_cast<double>(n_bins));
    }
    shape.counts.assign(n_bins, 0.0);
    std::vector<double> c_bins(n_bins), means(n_bins);
    for (std::size_t i = 0; i < n_bins; ++i) {
        c_bins[i] = c_scale / shape.center(i);
        const double sn = std::sin(c_bins[i] * dm2_true);
        means[i] = flux * (1.0 - a_true * sn * sn);
    }
    fam.generate = [shape, means](RngStream& rng) {
        return generate_binned_toy(shape, means, rng);
    };
    // The fixture lives in the small-C*dm2 regime, where only A*(dm2)^2 is
    // identified; cap the search so C*dm2 stays below ~0.5 everywhere and
    // the fit cannot wander into the fast-oscillation region.
    const double dm2_cap = 0.5 * e_lo / c_scale;
    fam.fit = [flux, c_bins, dm2_cap](const BinnedData& d) {
        const auto w = fit_weights(d);
        // Survival 1 - A sin^2(C dm2): A is linear at fixed dm2 (clamped to
        // [0,1]); dm2 is scanned then polished.
        const auto chi2_at = [&](double dm2) {
            double num = 0.0, den = 0.0;
            for (std::size_t i = 0; i < d.bins(); ++i) {
                const double sn = std::sin(c_bins[i] * dm2);
                const double g = flux * sn * sn;
                num += w[i] * (flux - d.counts[i]) * g;
                den += w[i] * g * g;
            }
            double a_hat = den > 0.0 ? num / den : 0.0;
            a_hat = std::clamp(a_hat, 0.0, 1.0);
            double s = 0.0;
            for (std::size_t i = 0; i < d.bins(); ++i) {
                const double sn = std::sin(c_bins[i] * dm2);
                const double diff = d.counts[i] - flux * (1.0 - a_hat * sn * sn);
                s += w[i] * diff * diff;
            }
            return s;
        };
        double best_dm2 = 1e-3, best = chi2_at(best_dm2);
        for (int k = 0; k <= 40; ++k) {
            const double dm2 = 1e-3 * std::pow(dm2_cap / 1e-3, k / 40.0);
            const double c = chi2_at(dm2);
            if (c < best) {
                best = c;
                best_dm2 = dm2;
            }
        }
        auto [dm2_min, chi2_min] = detail::brent_min(
            chi2_at, best_dm2 * 0.5, std::min(dm2_cap, best_dm2 * 2.0), 1e-10);
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < d.bins(); ++i) {
            const double sn = std::sin(c_bins[i] * dm2_min);
            const double g = flux * sn * sn;
            num += w[i] * (flux - d.counts[i]) * g;
            den += w[i] * g * g;
        }
        FitResult r;
        r.params = {den > 0.0 ? std::clamp(num / den, 0.0, 1.0) : 0.0, dm2_min};
        r.chi2 = chi2_min;
        r.converged = true;
        return r;
    };
    return fam;
}

} // namespace cstk
