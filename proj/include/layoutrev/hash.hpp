#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>

namespace layoutrev {

std::string sha256_hex(std::string_view data);

/// First 8 bytes of the SHA-256 digest, big-endian. Stable across platforms.
std::uint64_t content_hash64(std::string_view data);

std::string base64_encode(std::string_view data);

/// Render-cache id of a layout: the first 16 hex digits of the SHA-256 of its
/// canonical design code.
std::string layout_id(std::string_view canonical_code);

/// Hex string of `bytes` bytes from the OpenSSL CSPRNG.
std::string random_token(std::size_t bytes = 16);

}  // namespace layoutrev
