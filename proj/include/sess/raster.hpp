#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace sess {

/// RGB image, interleaved HWC, values in [0,1].
class RasterImage {
 public:
  static constexpr int kChannels = 3;

  RasterImage() = default;
  RasterImage(int height, int width, float fill = 0.0f);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  bool empty() const noexcept { return height_ == 0 || width_ == 0; }
  std::size_t pixel_count() const noexcept {
    return static_cast<std::size_t>(height_) * static_cast<std::size_t>(width_);
  }

  float& at(int y, int x, int c) noexcept { return data_[index(y, x, c)]; }
  float at(int y, int x, int c) const noexcept { return data_[index(y, x, c)]; }

  std::span<float> data() noexcept { return data_; }
  std::span<const float> data() const noexcept { return data_; }

  /// Copy of the rectangle [x, x+w) x [y, y+h). Throws InvalidArgument if
  /// the rectangle leaves the image.
  RasterImage crop(int x, int y, int w, int h) const;

  /// True when every value is finite and inside [0,1].
  bool is_valid() const noexcept;

  friend bool operator==(const RasterImage&, const RasterImage&) = default;

 private:
  std::size_t index(int y, int x, int c) const noexcept {
    return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
            static_cast<std::size_t>(x)) *
               kChannels +
           static_cast<std::size_t>(c);
  }

  int height_ = 0;
  int width_ = 0;
  std::vector<float> data_;
};

/// Single-channel real raster, row-major.
class GrayMap {
 public:
  GrayMap() = default;
  GrayMap(int height, int width, float fill = 0.0f);
  GrayMap(int height, int width, std::vector<float> values);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  bool empty() const noexcept { return height_ == 0 || width_ == 0; }
  std::size_t size() const noexcept { return values_.size(); }

  float& at(int y, int x) noexcept {
    return values_[static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
                   static_cast<std::size_t>(x)];
  }
  float at(int y, int x) const noexcept {
    return values_[static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
                   static_cast<std::size_t>(x)];
  }

  std::span<float> values() noexcept { return values_; }
  std::span<const float> values() const noexcept { return values_; }

  bool all_finite() const noexcept;

  friend bool operator==(const GrayMap&, const GrayMap&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<float> values_;
};

}  // namespace sess
