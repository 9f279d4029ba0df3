#include "sess/raster.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sess/errors.hpp"

namespace sess {

namespace {

void check_dims(int height, int width) {
  if (height < 0 || width < 0) {
    throw InvalidArgument("negative raster dimensions " + std::to_string(height) + "x" +
                          std::to_string(width));
  }
}

}  // namespace

RasterImage::RasterImage(int height, int width, float fill) : height_(height), width_(width) {
  check_dims(height, width);
  data_.assign(pixel_count() * kChannels, fill);
}

RasterImage RasterImage::crop(int x, int y, int w, int h) const {
  if (x < 0 || y < 0 || w < 1 || h < 1 || x + w > width_ || y + h > height_) {
    throw InvalidArgument("crop rectangle (" + std::to_string(x) + "," + std::to_string(y) + "," +
                          std::to_string(w) + "x" + std::to_string(h) + ") outside " +
                          std::to_string(width_) + "x" + std::to_string(height_) + " image");
  }
  RasterImage out(h, w);
  const std::size_t row_len = static_cast<std::size_t>(w) * kChannels;
  for (int row = 0; row < h; ++row) {
    const float* src = data_.data() + index(y + row, x, 0);
    std::copy(src, src + row_len, out.data_.data() + out.index(row, 0, 0));
  }
  return out;
}

bool RasterImage::is_valid() const noexcept {
  return std::all_of(data_.begin(), data_.end(),
                     [](float v) { return std::isfinite(v) && v >= 0.0f && v <= 1.0f; });
}

GrayMap::GrayMap(int height, int width, float fill) : height_(height), width_(width) {
  check_dims(height, width);
  values_.assign(static_cast<std::size_t>(height) * static_cast<std::size_t>(width), fill);
}

GrayMap::GrayMap(int height, int width, std::vector<float> values)
    : height_(height), width_(width), values_(std::move(values)) {
  check_dims(height, width);
  if (values_.size() != static_cast<std::size_t>(height) * static_cast<std::size_t>(width)) {
    throw ShapeMismatch("GrayMap value count " + std::to_string(values_.size()) +
                        " does not match " + std::to_string(height) + "x" +
                        std::to_string(width));
  }
}

bool GrayMap::all_finite() const noexcept {
  return std::all_of(values_.begin(), values_.end(), [](float v) { return std::isfinite(v); });
}

}  // namespace sess
