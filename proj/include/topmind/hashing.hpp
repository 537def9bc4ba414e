#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace topmind {

/// Lowercase hex SHA-256 digest.
std::string sha256_hex(std::string_view data);

std::uint64_t fnv1a64(std::string_view data);

}  // namespace topmind
