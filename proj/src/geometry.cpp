#include "sess/geometry.hpp"

#include <string>

#include "sess/errors.hpp"
#include "sess/imgproc.hpp"

namespace sess {

namespace {
constexpr int kBaseSize = 224;
constexpr int kScaleIncrement = 64;
}  // namespace

std::vector<int> scale_sizes(int n) {
  if (n < 1) throw InvalidArgument("number of scales must be >= 1, got " + std::to_string(n));
  std::vector<int> sizes;
  sizes.reserve(static_cast<std::size_t>(n));
  for (int i = 1; i <= n; ++i) sizes.push_back(kBaseSize + kScaleIncrement * (i - 1));
  return sizes;
}

std::vector<int> window_origins(int length, int win, int step) {
  if (win < 1 || step < 1) throw InvalidArgument("window and step must be >= 1");
  if (length < win) {
    throw InvalidArgument("axis length " + std::to_string(length) + " shorter than window " +
                          std::to_string(win));
  }
  std::vector<int> origins;
  for (int pos = 0; pos + win <= length; pos += step) origins.push_back(pos);
  if (origins.back() != length - win) origins.push_back(length - win);
  return origins;
}

void validate(const PatchSpec& s) {
  if (s.scale_index < 1 || s.w < 1 || s.h < 1 || s.x < 0 || s.y < 0 || s.x + s.w > s.scaled_w ||
      s.y + s.h > s.scaled_h) {
    throw InvalidArgument("patch (scale " + std::to_string(s.scale_index) + ", origin " +
                          std::to_string(s.x) + "," + std::to_string(s.y) + ", size " +
                          std::to_string(s.w) + "x" + std::to_string(s.h) +
                          ") does not fit its scaled frame " + std::to_string(s.scaled_w) + "x" +
                          std::to_string(s.scaled_h));
  }
}

Footprint original_footprint(const PatchSpec& s, int orig_h, int orig_w) {
  const double sx = static_cast<double>(orig_w) / s.scaled_w;
  const double sy = static_cast<double>(orig_h) / s.scaled_h;
  return {s.x * sx, s.y * sy, (s.x + s.w) * sx, (s.y + s.h) * sy};
}

std::vector<PatchSpec> enumerate_patches(int image_h, int image_w, int n_scales, int win_w,
                                         int win_h, int step) {
  std::vector<PatchSpec> specs;
  const auto sizes = scale_sizes(n_scales);
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    const auto [h, w] = shorter_side_dims(image_h, image_w, sizes[i]);
    const auto ys = window_origins(h, win_h, step);
    const auto xs = window_origins(w, win_w, step);
    for (int y : ys) {
      for (int x : xs) {
        specs.push_back({static_cast<int>(i) + 1, h, w, x, y, win_w, win_h});
      }
    }
  }
  return specs;
}

}  // namespace sess
