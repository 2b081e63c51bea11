#include "cstk/blind.hpp"
#include "cstk/error.hpp"
#include "cstk/rng.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>

namespace cstk {

namespace {

// Monotone bijection between doubles and unsigned 64-bit integers.
std::uint64_t to_ordered(double x) {
    const auto bits = std::bit_cast<std::uint64_t>(x);
    return (bits & 0x8000000000000000ULL) ? ~bits : (bits | 0x8000000000000000ULL);
}

double from_ordered(std::uint64_t ord) {
    const std::uint64_t bits =
        (ord & 0x8000000000000000ULL) ? (ord & 0x7fffffffffffffffULL) : ~ord;
    return std::bit_cast<double>(bits);
}

// Ordered-space range of finite doubles.
const std::uint64_t kFiniteLo = to_ordered(-std::numeric_limits<double>::max());
const std::uint64_t kFiniteHi = to_ordered(std::numeric_limits<double>::max());

std::uint64_t key_to_seed(std::string_view key) {
    std::uint64_t h = 0xcbf29ce484222325ULL; // FNV-1a
    for (const char c : key) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Key-derived offset in lattice steps, folded into [0, span) so that both
// directions are single modular additions. The underlying draw is uniform
// on [-half, +half] with half = binades * 2^52 steps.
std::uint64_t key_offset(std::string_view key, const BlindConfig& cfg, std::uint64_t span) {
    if (!(cfg.magnitude_binades > 0.0 && cfg.magnitude_binades < 2000.0)) {
        throw DomainError("blind: magnitude_binades must be in (0, 2000)");
    }
    const double half_real = cfg.magnitude_binades * 4503599627370496.0; // binades * 2^52
    const auto half = static_cast<std::uint64_t>(
        std::llround(std::min(half_real, static_cast<double>(span / 4))));
    RngStream rng(key_to_seed(key), 0x626c696e64ULL); // stream tag "blind"
    const std::uint64_t raw = rng.next_below(2 * half + 1);
    return static_cast<std::uint64_t>(
        ((static_cast<unsigned __int128>(raw) + span) - half) % span);
}

} // namespace

double blind_offset(double value, std::string_view key, const BlindConfig& cfg) {
    if (!std::isfinite(value)) throw DomainError("blind: value must be finite");
    const std::uint64_t span = kFiniteHi - kFiniteLo + 1;
    const std::uint64_t offset = key_offset(key, cfg, span);
    const std::uint64_t pos = to_ordered(value) - kFiniteLo;
    // Shift modulo the finite range: wrap-around keeps the result finite.
    const auto shifted = static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(pos) + offset) % span);
    return from_ordered(kFiniteLo + shifted);
}

double unblind(double blinded, std::string_view key, const BlindConfig& cfg) {
    if (!std::isfinite(blinded)) throw DomainError("unblind: value must be finite");
    const std::uint64_t span = kFiniteHi - kFiniteLo + 1;
    const std::uint64_t offset = key_offset(key, cfg, span);
    const std::uint64_t pos = to_ordered(blinded) - kFiniteLo;
    const auto shifted = static_cast<std::uint64_t>(
        ((static_cast<unsigned __int128>(pos) + span) - offset) % span);
    return from_ordered(kFiniteLo + shifted);
}

} // namespace cstk
