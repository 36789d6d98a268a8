#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace deepcq {

/// FNV-1a over bytes; used for config/weights fingerprints embedded in
/// result rows.
std::uint64_t fnv1a64(std::string_view bytes);

/// Shortest round-trip decimal form of a double ("1.5", "0.3333333333333333").
/// Non-finite values render as "nan"/"inf"/"-inf".
std::string format_double(double v);

std::string to_hex(std::uint64_t v);

}  // namespace deepcq
