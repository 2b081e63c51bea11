#ifndef CSTK_VERSION_HPP
#define CSTK_VERSION_HPP

namespace cstk {
inline constexpr const char* kVersion = "0.1.0";
}

#endif
