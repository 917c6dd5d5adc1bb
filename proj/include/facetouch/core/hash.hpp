#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace facetouch {

// 64-bit FNV-1a; stable across platforms, used for fingerprints and tokens.
std::uint64_t fnv1a64(std::string_view bytes);
std::string fnv1a64_hex(std::string_view bytes);

}  // namespace facetouch
