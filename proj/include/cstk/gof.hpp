#ifndef CSTK_GOF_HPP
#define CSTK_GOF_HPP

#include "cstk/rng.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

// Binned goodness-of-fit and hypothesis comparison: the weighted sum of
// squares S, chi-square differences between nested fits (with the Wilks
// shortcut where it applies and a Monte-Carlo null where it does not), and
// effective-degrees-of-freedom scans for fits whose free parameters are not
// all active.

namespace cstk {

struct BinnedData {
    std::vector<double> edges;    ///< strictly ascending, size bins()+1
    std::vector<double> counts;   ///< observed, >= 0
    std::vector<double> variance; ///< optional per-bin override; empty = use prediction

    std::size_t bins() const { return counts.size(); }
    double center(std::size_t i) const { return 0.5 * (edges[i] + edges[i + 1]); }
    void check() const;
};

struct Chi2Result {
    double s = 0.0;
    double ndof = 0.0;
    double p = 1.0;
    /// Some prediction is below 5: the chi-square approximation to the
    /// Poisson is questionable there.
    bool low_count_caveat = false;
};

/// S = sum (obs - pred)^2 / var with var = pred unless overridden;
/// ndof = bins - n_fitted; p from the chi-square tail.
Chi2Result chi2_binned(const BinnedData& data, const std::vector<double>& prediction,
                       std::size_t n_fitted);

struct FitResult {
    std::vector<double> params;
    double chi2 = 0.0;
    bool converged = false;
};

/// A fittable binned model: predictions from parameters, a chi-square fit,
/// and toy generation from fitted parameters (Poisson bins, or Gaussian
/// when the data carry a variance override).
class FitModel {
public:
    virtual ~FitModel() = default;
    virtual std::size_t n_params() const = 0;
    virtual std::vector<double> predict(const BinnedData& shape,
                                        const std::vector<double>& params) const = 0;
    /// effort > 0 asks for a more thorough (slower) optimization.
    virtual FitResult fit(const BinnedData& data, int effort = 0) const = 0;
};

BinnedData generate_binned_toy(const BinnedData& shape, const std::vector<double>& means,
                               RngStream& rng);

/// Polynomial of the given degree in the bin center; the chi-square is
/// linear least squares (weights from the variance override when present,
/// otherwise max(count, 1)).
class PolynomialModel : public FitModel {
public:
    explicit PolynomialModel(std::size_t degree) : degree_(degree) {}
    std::size_t n_params() const override { return degree_ + 1; }
    std::vector<double> predict(const BinnedData& shape,
                                const std::vector<double>& params) const override;
    FitResult fit(const BinnedData& data, int effort = 0) const override;

private:
    std::size_t degree_;
};

/// Gaussian peak over a polynomial background:
///   pred(x) = poly(x) + A exp(-0.5 (x - x0)^2 / sigma^2).
/// The amplitude is constrained non-negative unless allow_negative is set
/// (that changes the null distribution of any chi-square difference, so it
/// is an explicit choice). The fit scans a (x0, sigma) grid with the linear
/// parameters profiled, then polishes the best cell.
class PeakModel : public FitModel {
public:
    PeakModel(std::size_t bg_degree, double x0_lo, double x0_hi, double sigma_lo,
              double sigma_hi, bool allow_negative = false);
    std::size_t n_params() const override { return bg_degree_ + 1 + 3; }
    std::vector<double> predict(const BinnedData& shape,
                                const std::vector<double>& params) const override;
    FitResult fit(const BinnedData& data, int effort = 0) const override;

private:
    std::size_t bg_degree_;
    double x0_lo_, x0_hi_, sigma_lo_, sigma_hi_;
    bool allow_negative_;
};

enum class DeltaChi2Regime { Wilks, McNull };

struct DeltaChi2Result {
    double chi2_restricted = 0.0;
    double chi2_extended = 0.0;
    double delta_chi2 = 0.0;
    double p = 1.0;
    /// Gaussian sigma equivalent. For one extra parameter the difference is
    /// the square of a z-score, so sigma = sqrt(delta chi2).
    double sigma = 0.0;
    std::int64_t n_toys = 0;
};

/// Chi-square difference between a restricted and an extended (nested)
/// model. Wilks regime: p from chi-square with k_extra degrees of freedom
/// (caller asserts the regularity conditions). McNull regime: toys are
/// generated from the restricted fit and the difference is ranked against
/// its empirical null with the (tail+1)/(toys+1) estimator.
DeltaChi2Result chi2_difference(const BinnedData& data, const FitModel& restricted,
                                const FitModel& extended, std::size_t k_extra,
                                DeltaChi2Regime regime, std::int64_t n_toys = 0,
                                std::uint64_t seed = 0);

/// Sigma and p for an already-computed chi-square difference (the
/// quote-a-result path: no refitting).
DeltaChi2Result delta_chi2_report(double chi2_restricted, double chi2_extended,
                                  std::size_t k_extra);

// ---- effective degrees of freedom ----

struct DofScanFamily {
    std::string name;
    std::size_t n_bins = 0;
    std::size_t n_params = 0;
    std::function<BinnedData(RngStream&)> generate;
    std::function<FitResult(const BinnedData&)> fit;
};

struct EffectiveDofReport {
    double mean_s = 0.0;
    double var_s = 0.0;
    std::size_t effective_params = 0; ///< f minimizing |mean S - (bins - f)|
    std::int64_t n_toys = 0;
    std::int64_t fit_failures = 0;
};

/// Mean of S over toys, compared against bins - f for each candidate f.
/// More than 1% fit failures is an error.
EffectiveDofReport effective_dof_scan(const DofScanFamily& family, std::int64_t n_toys,
                                      std::uint64_t seed);

/// Fixture: straight-line truth with both parameters active.
DofScanFamily make_polynomial_family(std::size_t n_bins, double intercept, double slope,
                                     double gauss_sigma);

/// Fixture: N (1 + amp cos(x - x0)) with a negligible amplitude, so x0 is
/// free in the fit but carries no information.
DofScanFamily make_cosine_wiggle_family(std::size_t n_bins, double norm, double amp);

/// Fixture: survival probability 1 - A sin^2(C dm2) in the small-C*dm2
/// regime, where only the combination A (dm2)^2 is identified.
DofScanFamily make_oscillation_family(std::size_t n_bins, double flux, double a_true,
                                      double dm2_true, double c_scale);

} // namespace cstk

#endif
