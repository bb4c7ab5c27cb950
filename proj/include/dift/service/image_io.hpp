#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dift/core/types.hpp"
#include "dift/edit/edit_prop.hpp"
#include "dift/temporal/label_mask.hpp"

namespace dift {

inline constexpr int kDefaultMaxImageSide = 4096;

/// Decodes PNG/JPEG/PPM bytes to RGB in [0, 1]. Throws DecodeError on
/// undecodable input and PayloadTooLargeError when either side exceeds
/// max_side.
ImageRef decode_image(const std::string& bytes, std::string id, int max_side = kDefaultMaxImageSide);
ImageRef load_image(const std::filesystem::path& path, std::string id, int max_side = kDefaultMaxImageSide);

/// 8-bit RGB PNG.
std::string encode_png(const ImageRef& image);

/// RGBA layer; images without alpha are opaque.
RgbaImage decode_rgba(const std::string& bytes, int max_side = kDefaultMaxImageSide);

/// 8-bit RGBA PNG (straight alpha).
std::string encode_rgba_png(const RgbaImage& image);

/// Binary mask: any nonzero channel marks the pixel as inside (1).
HardMask decode_binary_mask(const std::string& bytes, int max_side = kDefaultMaxImageSide);

/// Object-label annotation. Single-channel images carry labels directly;
/// color images are mapped back through the standard VOC palette (black is
/// background). Unknown colors raise DecodeError.
HardMask decode_label_mask(const std::string& bytes);
HardMask load_label_mask(const std::filesystem::path& path);

/// Color of label i in the VOC palette, as {r, g, b}.
std::array<std::uint8_t, 3> voc_palette_color(int label);

std::string read_file_bytes(const std::filesystem::path& path);

}  // namespace dift
