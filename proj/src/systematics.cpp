#include "cstk/systematics.hpp"
#include "cstk/error.hpp"
#include "cstk/rng.hpp"

#include <cmath>

namespace cstk {

namespace {

// Pivot-free Cholesky that tolerates exact semi-definiteness (zero pivots
// zero out their column) but rejects indefinite input.
std::vector<std::vector<double>> psd_cholesky(const std::vector<std::vector<double>>& cov) {
    const std::size_t d = cov.size();
    for (std::size_t i = 0; i < d; ++i) {
        if (cov[i].size() != d) throw DomainError("systematics: covariance must be square");
        for (std::size_t j = 0; j < i; ++j) {
            if (std::fabs(cov[i][j] - cov[j][i]) >
                1e-12 * (1.0 + std::fabs(cov[i][j]))) {
                throw DomainError("systematics: covariance must be symmetric");
            }
        }
    }
    std::vector<std::vector<double>> chol(d, std::vector<double>(d, 0.0));
    for (std::size_t j = 0; j < d; ++j) {
        double diag = cov[j][j];
        for (std::size_t k = 0; k < j; ++k) diag -= chol[j][k] * chol[j][k];
        const double scale = std::fabs(cov[j][j]) + 1.0;
        if (diag < -1e-10 * scale) {
            throw ComputationError("systematics: covariance is not positive semi-definite");
        }
        if (diag <= 1e-14 * scale) {
            // Semi-definite direction: its column must be reproducible as 0.
            chol[j][j] = 0.0;
            continue;
        }
        chol[j][j] = std::sqrt(diag);
        for (std::size_t i = j + 1; i < d; ++i) {
            double sum = cov[i][j];
            for (std::size_t k = 0; k < j; ++k) sum -= chol[i][k] * chol[j][k];
            chol[i][j] = sum / chol[j][j];
        }
    }
    return chol;
}

} // namespace

SystematicsReport systematics_compare(
    const std::function<double(const std::vector<double>&)>& response,
    const std::vector<double>& center, const std::vector<std::vector<double>>& covariance,
    std::int64_t n_multisim, std::uint64_t seed) {
    const std::size_t d = center.size();
    if (d == 0) throw DomainError("systematics: empty nuisance vector");
    if (covariance.size() != d) {
        throw DomainError("systematics: covariance dimension mismatch");
    }
    if (n_multisim < 2) throw DomainError("systematics: need at least 2 multisim draws");

    const auto chol = psd_cholesky(covariance);

    SystematicsReport report;
    report.covariance = covariance;
    report.n_multisim = n_multisim;

    // Unisim: one factor at a time, symmetric two-point shift.
    double quad = 0.0;
    std::vector<double> point(center);
    for (std::size_t i = 0; i < d; ++i) {
        const double sigma = std::sqrt(covariance[i][i]);
        point = center;
        point[i] = center[i] + sigma;
        const double up = response(point);
        point[i] = center[i] - sigma;
        const double down = response(point);
        const double shift = 0.5 * std::fabs(up - down);
        report.unisim_shifts.push_back(shift);
        quad += shift * shift;
    }
    report.unisim_quadrature = std::sqrt(quad);

    // Multisim: joint draws from the full covariance.
    RngStream root(seed);
    double sum = 0.0, sum2 = 0.0;
    std::vector<double> z(d), nu(d);
    for (std::int64_t t = 0; t < n_multisim; ++t) {
        RngStream rng = root.substream(static_cast<std::uint64_t>(t));
        for (std::size_t i = 0; i < d; ++i) z[i] = rng.next_normal();
        for (std::size_t i = 0; i < d; ++i) {
            double v = center[i];
            for (std::size_t k = 0; k <= i; ++k) v += chol[i][k] * z[k];
            nu[i] = v;
        }
        const double value = response(nu);
        sum += value;
        sum2 += value * value;
    }
    const double nn = static_cast<double>(n_multisim);
    const double mean = sum / nn;
    const double var = std::max(0.0, (sum2 - nn * mean * mean) / (nn - 1.0));
    report.multisim_spread = std::sqrt(var);
    report.multisim_stderr = report.multisim_spread / std::sqrt(2.0 * (nn - 1.0));
    return report;
}

} // namespace cstk
