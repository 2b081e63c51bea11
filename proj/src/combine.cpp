#include "cstk/combine.hpp"
#include "cstk/error.hpp"
#include "cstk/rng.hpp"

#include <algorithm>
#include <cmath>

namespace cstk {

MeasurementSet::MeasurementSet(std::vector<double> v, std::vector<std::vector<double>> cov,
                               std::vector<std::string> l)
    : values(std::move(v)), covariance(std::move(cov)), labels(std::move(l)) {
    const std::size_t n = values.size();
    if (n < 2) throw DomainError("MeasurementSet: need at least two measurements");
    if (covariance.size() != n) throw DomainError("MeasurementSet: covariance size mismatch");
    for (std::size_t i = 0; i < n; ++i) {
        if (covariance[i].size() != n) {
            throw DomainError("MeasurementSet: covariance must be square");
        }
        if (!(covariance[i][i] > 0.0)) {
            throw DomainError("MeasurementSet: variances must be positive");
        }
        for (std::size_t j = 0; j < i; ++j) {
            if (std::fabs(covariance[i][j] - covariance[j][i]) >
                1e-12 * (1.0 + std::fabs(covariance[i][j]))) {
                throw DomainError("MeasurementSet: covariance must be symmetric");
            }
        }
    }
    if (!labels.empty() && labels.size() != n) {
        throw DomainError("MeasurementSet: label count mismatch");
    }
}

MeasurementSet MeasurementSet::pair(const Measurement& a, const Measurement& b, double rho) {
    if (!(a.sigma > 0.0 && b.sigma > 0.0)) throw DomainError("Measurement: sigma must be > 0");
    if (!(rho >= -1.0 && rho <= 1.0)) throw DomainError("correlation must be in [-1,1]");
    const double c = rho * a.sigma * b.sigma;
    return MeasurementSet({a.value, b.value},
                          {{a.sigma * a.sigma, c}, {c, b.sigma * b.sigma}});
}

CombinedResult weighted_average(const std::vector<Measurement>& ms) {
    if (ms.size() < 2) throw DomainError("weighted_average: need at least two measurements");
    double sum_w = 0.0, sum_aw = 0.0;
    for (const auto& m : ms) {
        if (!(m.sigma > 0.0)) throw DomainError("weighted_average: sigma must be > 0");
        const double w = 1.0 / (m.sigma * m.sigma);
        sum_w += w;
        sum_aw += m.value * w;
    }
    CombinedResult r;
    r.a_best = sum_aw / sum_w;
    r.sigma_best = 1.0 / std::sqrt(sum_w);
    for (const auto& m : ms) {
        const double d = (m.value - r.a_best) / m.sigma;
        r.s_min += d * d;
    }
    const double ndof = static_cast<double>(ms.size()) - 1.0;
    const double ratio = r.s_min / ndof;
    r.scale_factor = ratio > 1.0 ? std::sqrt(ratio) : 1.0;
    r.scaled_sigma = ratio > 1.0 ? std::sqrt(r.s_min / (ndof * sum_w)) : r.sigma_best;
    r.outside_range = false; // convex combination for uncorrelated weights
    return r;
}

namespace {

// Solves cov * x = rhs by Cholesky; throws on a singular matrix.
std::vector<double> solve_spd(const std::vector<std::vector<double>>& cov,
                              std::vector<double> rhs) {
    const std::size_t n = cov.size();
    std::vector<std::vector<double>> chol(n, std::vector<double>(n, 0.0));
    for (std::size_t j = 0; j < n; ++j) {
        double diag = cov[j][j];
        for (std::size_t k = 0; k < j; ++k) diag -= chol[j][k] * chol[j][k];
        if (diag <= 1e-12 * cov[j][j]) {
            throw ComputationError(
                "correlated_average: covariance is singular (|rho| = 1); combining adds no "
                "information, select one of the analyses instead");
        }
        chol[j][j] = std::sqrt(diag);
        for (std::size_t i = j + 1; i < n; ++i) {
            double sum = cov[i][j];
            for (std::size_t k = 0; k < j; ++k) sum -= chol[i][k] * chol[j][k];
            chol[i][j] = sum / chol[j][j];
        }
    }
    // Forward then back substitution.
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < i; ++k) rhs[i] -= chol[i][k] * rhs[k];
        rhs[i] /= chol[i][i];
    }
    for (std::size_t ii = n; ii-- > 0;) {
        for (std::size_t k = ii + 1; k < n; ++k) rhs[ii] -= chol[k][ii] * rhs[k];
        rhs[ii] /= chol[ii][ii];
    }
    return rhs;
}

} // namespace

CombinedResult correlated_average(const MeasurementSet& mset) {
    const std::size_t n = mset.values.size();
    // a_best = (1^T H a) / (1^T H 1) with H = cov^-1, via x = cov^-1 1.
    const std::vector<double> x = solve_spd(mset.covariance, std::vector<double>(n, 1.0));
    double sum_x = 0.0, dot_ax = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sum_x += x[i];
        dot_ax += mset.values[i] * x[i];
    }
    if (!(sum_x > 0.0)) {
        throw ComputationError("correlated_average: combined weight is not positive");
    }
    CombinedResult r;
    r.a_best = dot_ax / sum_x;
    r.sigma_best = 1.0 / std::sqrt(sum_x);
    std::vector<double> resid(n);
    for (std::size_t i = 0; i < n; ++i) resid[i] = mset.values[i] - r.a_best;
    const std::vector<double> y = solve_spd(mset.covariance, resid);
    for (std::size_t i = 0; i < n; ++i) r.s_min += resid[i] * y[i];
    r.s_min = std::max(0.0, r.s_min);
    const double ndof = static_cast<double>(n) - 1.0;
    const double ratio = r.s_min / ndof;
    r.scale_factor = ratio > 1.0 ? std::sqrt(ratio) : 1.0;
    r.scaled_sigma = ratio > 1.0 ? std::sqrt(r.s_min / (ndof * sum_x)) : r.sigma_best;
    const auto [lo, hi] = std::minmax_element(mset.values.begin(), mset.values.end());
    r.outside_range = r.a_best < *lo || r.a_best > *hi;
    return r;
}

std::string to_string(PoissonWeighting w) {
    switch (w) {
    case PoissonWeighting::Observed: return "observed";
    case PoissonWeighting::ExpectedAtEstimate: return "expected-at-estimate";
    case PoissonWeighting::Iterated: return "iterated";
    }
    return "?";
}

PoissonWeighting poisson_weighting_from_string(const std::string& s) {
    if (s == "observed") return PoissonWeighting::Observed;
    if (s == "expected-at-estimate") return PoissonWeighting::ExpectedAtEstimate;
    if (s == "iterated") return PoissonWeighting::Iterated;
    throw DomainError("unknown poisson weighting '" + s + "'");
}

namespace {

double combine_pair(double n1, double n2, PoissonWeighting weighting) {
    switch (weighting) {
    case PoissonWeighting::Observed: {
        const double w1 = 1.0 / std::max(n1, 1.0);
        const double w2 = 1.0 / std::max(n2, 1.0);
        return (n1 * w1 + n2 * w2) / (w1 + w2);
    }
    case PoissonWeighting::ExpectedAtEstimate:
        // argmin_a sum (n_i - a)^2 / a  ==>  a = rms(n_i).
        return std::sqrt(0.5 * (n1 * n1 + n2 * n2));
    case PoissonWeighting::Iterated: {
        double a = std::max(0.5 * (n1 + n2), 1.0);
        for (int it = 0; it < 200; ++it) {
            const double var = std::max(a, 1e-9);
            const double a_new = (n1 / var + n2 / var) / (2.0 / var);
            if (std::fabs(a_new - a) < 1e-9 * (1.0 + std::fabs(a_new))) return a_new;
            a = a_new;
        }
        return a;
    }
    }
    throw DomainError("combine_pair: bad weighting");
}

} // namespace

BiasEstimate poisson_weight_bias(double true_mean, std::int64_t n_repeats,
                                 PoissonWeighting weighting, std::uint64_t seed) {
    if (!(true_mean >= 5.0)) {
        throw DomainError("poisson_weight_bias: true_mean must be >= 5");
    }
    if (n_repeats < 2) throw DomainError("poisson_weight_bias: need at least 2 repeats");
    RngStream root(seed);
    double sum = 0.0, sum2 = 0.0;
    for (std::int64_t t = 0; t < n_repeats; ++t) {
        RngStream rng = root.substream(static_cast<std::uint64_t>(t));
        const double n1 = static_cast<double>(rng.next_poisson(true_mean));
        const double n2 = static_cast<double>(rng.next_poisson(true_mean));
        const double a = combine_pair(n1, n2, weighting);
        sum += a;
        sum2 += a * a;
    }
    const double nn = static_cast<double>(n_repeats);
    const double mean = sum / nn;
    const double var = std::max(0.0, (sum2 - nn * mean * mean) / (nn - 1.0));
    BiasEstimate est;
    est.bias = mean - true_mean;
    est.mc_error = std::sqrt(var / nn);
    est.n_repeats = n_repeats;
    return est;
}

} // namespace cstk
