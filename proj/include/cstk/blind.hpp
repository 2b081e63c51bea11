#ifndef CSTK_BLIND_HPP
#define CSTK_BLIND_HPP

#include <string_view>

// Hidden-offset blinding: a secret, key-derived offset is applied to a
// value, analysis proceeds on the blinded number, and only at the end is
// the offset removed. The offset is never stored; it is re-derived from the
// key, so unblinding is exact by construction.
//
// A plain floating-point addition cannot unblind exactly (the sum rounds
// away low-order bits of the value whenever the offset is large), so the
// offset acts as a translation on the IEEE-754 order lattice: the value is
// shifted a key-derived number of representable-double steps. The range is
// configured in binades (factors of two); the default +-8 binades scrambles
// the value by up to a factor of 256 either way while staying a finite
// double.

namespace cstk {

struct BlindConfig {
    /// Half-width of the offset range, in binades (2^52 lattice steps each).
    double magnitude_binades = 8.0;
};

double blind_offset(double value, std::string_view key, const BlindConfig& cfg = {});
double unblind(double blinded, std::string_view key, const BlindConfig& cfg = {});

} // namespace cstk

#endif
