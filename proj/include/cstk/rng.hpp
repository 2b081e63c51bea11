#ifndef CSTK_RNG_HPP
#define CSTK_RNG_HPP

#include <cstdint>

// Counter-based random streams. A stream is a pure function of
// (seed, stream path, counter), so toy ensembles reproduce bit-identically
// regardless of thread count or scheduling order. Substreams are derived by
// chaining the mix function, which is a bijection per stage: distinct
// counters within a stream can never collide.

namespace cstk {

namespace detail {
/// splitmix64 finalizer: full-avalanche 64-bit bijection.
constexpr std::uint64_t mix64(std::uint64_t x) {
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebULL;
    x ^= x >> 31;
    return x;
}
} // namespace detail

class RngStream {
public:
    explicit RngStream(std::uint64_t seed)
        : state_(detail::mix64(seed ^ 0x9e3779b97f4a7c15ULL)), counter_(0) {}

    RngStream(std::uint64_t seed, std::uint64_t stream) : RngStream(seed) {
        *this = substream(stream);
    }

    /// Derive an independent child stream (e.g. one per toy index).
    RngStream substream(std::uint64_t id) const {
        RngStream r(*this);
        r.state_ = detail::mix64(state_ ^ (id + 0x632be59bd9b4e019ULL));
        r.counter_ = 0;
        return r;
    }

    std::uint64_t next_u64() { return detail::mix64(state_ ^ counter_++); }

    /// Uniform on (0,1), 53-bit resolution, never exactly 0 or 1.
    double next_double() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Uniform integer in [0, n).
    std::uint64_t next_below(std::uint64_t n);

    /// Standard normal draw (inverse-CDF method; one uniform per draw).
    double next_normal();

    /// Poisson draw: sequential inversion for small means, PTRS transformed
    /// rejection for large ones. Deterministic per stream.
    std::int64_t next_poisson(double mu);

private:
    std::uint64_t state_;
    std::uint64_t counter_;
};

} // namespace cstk

#endif
