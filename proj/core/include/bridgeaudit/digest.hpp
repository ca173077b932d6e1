#pragma once

#include <string>
#include <string_view>

namespace bridgeaudit {

/// Lowercase hex SHA-256 of the input bytes (64 characters, no prefix).
std::string sha256_hex(std::string_view data);

}  // namespace bridgeaudit
