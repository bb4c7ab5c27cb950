#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dift {

std::string base64_encode(std::string_view bytes);
/// Throws DecodeError on malformed input.
std::string base64_decode(std::string_view text);

/// Lowercase hex SHA-256 digest.
std::string sha256_hex(std::string_view bytes);

/// Little-endian packing of numeric arrays.
std::string pack_f32(std::span<const float> values);
std::string pack_f64(std::span<const double> values);
std::vector<float> unpack_f32(std::string_view bytes);
std::vector<double> unpack_f64(std::string_view bytes);
/// IEEE half precision, little-endian.
std::string pack_f16(std::span<const double> values);
std::vector<float> unpack_f16(std::string_view bytes);

}  // namespace dift
