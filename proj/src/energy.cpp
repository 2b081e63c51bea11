#include "cstk/energy.hpp"
#include "cstk/error.hpp"
#include "cstk/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace cstk {

void TwoSample::check() const {
    if (a.empty() || b.empty()) throw DomainError("TwoSample: both samples must be non-empty");
    if (scales.empty()) throw DomainError("TwoSample: per-dimension metric scales required");
    for (double s : scales) {
        if (!(s > 0.0)) throw DomainError("TwoSample: metric scales must be positive");
    }
    for (const auto& p : a) {
        if (p.size() != scales.size()) throw DomainError("TwoSample: dimension mismatch in A");
    }
    for (const auto& p : b) {
        if (p.size() != scales.size()) throw DomainError("TwoSample: dimension mismatch in B");
    }
}

namespace {

// Upper-triangular pairwise kernel matrix over the pooled sample.
struct PairKernel {
    std::size_t n;
    std::vector<double> f; // index i*n + j for i < j

    double operator()(std::size_t i, std::size_t j) const {
        return i < j ? f[i * n + j] : f[j * n + i];
    }
};

double energy_for_labels(const PairKernel& k, const std::vector<std::uint8_t>& is_a,
                         std::size_t na, std::size_t nb) {
    const double qa = 1.0 / static_cast<double>(na);
    const double qb = 1.0 / static_cast<double>(nb);
    double e = 0.0;
    for (std::size_t i = 0; i < k.n; ++i) {
        for (std::size_t j = i + 1; j < k.n; ++j) {
            const double q = (is_a[i] ? qa : -qb) * (is_a[j] ? qa : -qb);
            e += q * k.f[i * k.n + j];
        }
    }
    return e;
}

} // namespace

EnergyResult energy_test(const TwoSample& ts, double epsilon, std::int64_t n_perm,
                         std::uint64_t seed) {
    ts.check();
    const std::size_t na = ts.a.size(), nb = ts.b.size();
    const std::size_t n = na + nb;
    const std::size_t d = ts.dim();

    // Pooled, scaled coordinates.
    std::vector<std::vector<double>> pts;
    pts.reserve(n);
    for (const auto& p : ts.a) pts.push_back(p);
    for (const auto& p : ts.b) pts.push_back(p);
    for (auto& p : pts) {
        for (std::size_t k = 0; k < d; ++k) p[k] /= ts.scales[k];
    }

    std::vector<double> dist(n * n, 0.0);
    std::vector<double> all_d;
    all_d.reserve(n * (n - 1) / 2);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            double r2 = 0.0;
            for (std::size_t k = 0; k < d; ++k) {
                const double diff = pts[i][k] - pts[j][k];
                r2 += diff * diff;
            }
            const double r = std::sqrt(r2);
            dist[i * n + j] = r;
            all_d.push_back(r);
        }
    }

    double eps = epsilon;
    if (!(eps > 0.0)) {
        std::nth_element(all_d.begin(), all_d.begin() + static_cast<std::ptrdiff_t>(all_d.size() / 2),
                         all_d.end());
        const double median = all_d[all_d.size() / 2];
        eps = 1e-6 * (median > 0.0 ? median : 1.0);
    }

    PairKernel kern;
    kern.n = n;
    kern.f.assign(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            kern.f[i * n + j] = -std::log(dist[i * n + j] + eps);
        }
    }

    std::vector<std::uint8_t> labels(n, 0);
    for (std::size_t i = 0; i < na; ++i) labels[i] = 1;
    const double e_obs = energy_for_labels(kern, labels, na, nb);

    EnergyResult res;
    res.e = e_obs;
    res.epsilon = eps;

    if (n <= 12) {
        // Exhaustive enumeration of all C(n, na) relabelings (the observed
        // one is among them, so p can never be zero).
        std::vector<std::uint8_t> lab(n, 0);
        for (std::size_t i = 0; i < na; ++i) lab[i] = 1;
        std::int64_t total = 0, at_least = 0;
        do {
            ++total;
            if (energy_for_labels(kern, lab, na, nb) >= e_obs) ++at_least;
        } while (std::prev_permutation(lab.begin(), lab.end()));
        res.exhaustive = true;
        res.n_perm = total;
        res.p = static_cast<double>(at_least) / static_cast<double>(total);
        return res;
    }

    if (n_perm < 99) throw DomainError("energy_test: need at least 99 permutations");
    RngStream root(seed);
    std::int64_t at_least = 0;
    std::vector<std::size_t> order(n);
    for (std::int64_t t = 0; t < n_perm; ++t) {
        RngStream rng = root.substream(static_cast<std::uint64_t>(t));
        std::iota(order.begin(), order.end(), 0);
        // Partial Fisher-Yates: the first na slots become the A labels.
        std::vector<std::uint8_t> lab(n, 0);
        for (std::size_t i = 0; i < na; ++i) {
            const std::size_t j = i + static_cast<std::size_t>(rng.next_below(n - i));
            std::swap(order[i], order[j]);
            lab[order[i]] = 1;
        }
        if (energy_for_labels(kern, lab, na, nb) >= e_obs) ++at_least;
    }
    res.n_perm = n_perm;
    res.p = static_cast<double>(1 + at_least) / static_cast<double>(n_perm + 1);
    return res;
}

} // namespace cstk
