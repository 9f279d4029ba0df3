#pragma once

#include <filesystem>

#include "sess/raster.hpp"

namespace sess {

/// Decodes a PNG or JPEG file into an RGB image with values in [0,1].
RasterImage load_image(const std::filesystem::path& path);

/// 8-bit RGB PNG.
void save_png(const RasterImage& img, const std::filesystem::path& path);

/// 8-bit grayscale PNG; values are clamped to [0,1] first.
void save_png(const GrayMap& map, const std::filesystem::path& path);

/// Raw little-endian float32, row-major, no header. Dimensions travel
/// out-of-band (run manifest or fixed by protocol).
void write_f32(const GrayMap& map, const std::filesystem::path& path);
GrayMap read_f32(const std::filesystem::path& path, int height, int width);

}  // namespace sess
