#include "sess/imgproc.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sess/errors.hpp"

namespace sess {

namespace {

void require_size(int h, int w, const char* what) {
  if (h < 1 || w < 1) {
    throw InvalidArgument(std::string(what) + ": degenerate size " + std::to_string(h) + "x" +
                          std::to_string(w));
  }
}

void require_kernel(int ksize, double sigma) {
  if (ksize < 1 || ksize % 2 == 0) {
    throw InvalidArgument("gaussian kernel size must be odd and >= 1, got " +
                          std::to_string(ksize));
  }
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw InvalidArgument("gaussian sigma must be positive, got " + std::to_string(sigma));
  }
}

// Convolves `channels` interleaved planes of size h x w along one axis.
void convolve_axis(const std::vector<float>& src, std::vector<float>& dst, int h, int w,
                   int channels, const std::vector<double>& kernel, bool horizontal) {
  const int radius = static_cast<int>(kernel.size()) / 2;
  const std::size_t row_stride = static_cast<std::size_t>(w) * channels;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < channels; ++c) {
        double acc = 0.0;
        for (int k = -radius; k <= radius; ++k) {
          const int sy = horizontal ? y : reflect_index(y + k, h);
          const int sx = horizontal ? reflect_index(x + k, w) : x;
          acc += kernel[static_cast<std::size_t>(k + radius)] *
                 src[static_cast<std::size_t>(sy) * row_stride +
                     static_cast<std::size_t>(sx) * channels + c];
        }
        dst[static_cast<std::size_t>(y) * row_stride + static_cast<std::size_t>(x) * channels +
            c] = static_cast<float>(acc);
      }
    }
  }
}

std::vector<float> blur_planes(std::vector<float> values, int h, int w, int channels, int ksize,
                               double sigma) {
  if (ksize == 1) return values;
  const auto kernel = gaussian_kernel(ksize, sigma);
  std::vector<float> tmp(values.size());
  convolve_axis(values, tmp, h, w, channels, kernel, /*horizontal=*/true);
  convolve_axis(tmp, values, h, w, channels, kernel, /*horizontal=*/false);
  return values;
}

template <typename Fetch, typename Store>
void resample(const AxisTaps& ty, const AxisTaps& tx, Fetch fetch, Store store) {
  const int out_h = static_cast<int>(ty.lo.size());
  const int out_w = static_cast<int>(tx.lo.size());
  for (int y = 0; y < out_h; ++y) {
    const float fy = ty.frac[y];
    for (int x = 0; x < out_w; ++x) {
      const float fx = tx.frac[x];
      const float top = (1.0f - fx) * fetch(ty.lo[y], tx.lo[x]) + fx * fetch(ty.lo[y], tx.hi[x]);
      const float bot = (1.0f - fx) * fetch(ty.hi[y], tx.lo[x]) + fx * fetch(ty.hi[y], tx.hi[x]);
      store(y, x, (1.0f - fy) * top + fy * bot);
    }
  }
}

}  // namespace

AxisTaps make_axis_taps(int src_len, int dst_len, Sampling sampling) {
  require_size(src_len, dst_len, "make_axis_taps");
  AxisTaps taps;
  taps.lo.resize(static_cast<std::size_t>(dst_len));
  taps.hi.resize(static_cast<std::size_t>(dst_len));
  taps.frac.resize(static_cast<std::size_t>(dst_len));
  const double scale = static_cast<double>(src_len) / dst_len;
  for (int i = 0; i < dst_len; ++i) {
    double s = 0.0;
    if (sampling == Sampling::kHalfPixel) {
      s = (i + 0.5) * scale - 0.5;
    } else if (dst_len > 1) {
      s = static_cast<double>(i) * (src_len - 1) / (dst_len - 1);
    }
    s = std::clamp(s, 0.0, static_cast<double>(src_len - 1));
    const int lo = static_cast<int>(std::floor(s));
    const int hi = std::min(lo + 1, src_len - 1);
    taps.lo[i] = lo;
    taps.hi[i] = hi;
    taps.frac[i] = static_cast<float>(s - lo);
  }
  return taps;
}

std::pair<int, int> shorter_side_dims(int height, int width, int target) {
  require_size(height, width, "resize_shorter_side");
  if (target < 1) throw InvalidArgument("resize target must be >= 1");
  const int shorter = std::min(height, width);
  const int longer = std::max(height, width);
  const int scaled_longer = std::max(
      1, static_cast<int>(std::lround(static_cast<double>(longer) * target / shorter)));
  return height <= width ? std::pair{target, scaled_longer} : std::pair{scaled_longer, target};
}

RasterImage resize_shorter_side(const RasterImage& img, int target) {
  const auto [h, w] = shorter_side_dims(img.height(), img.width(), target);
  return bilinear_resize(img, h, w);
}

GrayMap bilinear_resize(const GrayMap& map, int out_h, int out_w, Sampling sampling) {
  require_size(map.height(), map.width(), "bilinear_resize input");
  require_size(out_h, out_w, "bilinear_resize output");
  if (out_h == map.height() && out_w == map.width()) return map;
  GrayMap out(out_h, out_w);
  resample(
      make_axis_taps(map.height(), out_h, sampling), make_axis_taps(map.width(), out_w, sampling),
      [&](int y, int x) { return map.at(y, x); }, [&](int y, int x, float v) { out.at(y, x) = v; });
  return out;
}

RasterImage bilinear_resize(const RasterImage& img, int out_h, int out_w, Sampling sampling) {
  require_size(img.height(), img.width(), "bilinear_resize input");
  require_size(out_h, out_w, "bilinear_resize output");
  if (out_h == img.height() && out_w == img.width()) return img;
  RasterImage out(out_h, out_w);
  const auto ty = make_axis_taps(img.height(), out_h, sampling);
  const auto tx = make_axis_taps(img.width(), out_w, sampling);
  for (int c = 0; c < RasterImage::kChannels; ++c) {
    resample(
        ty, tx, [&](int y, int x) { return img.at(y, x, c); },
        [&](int y, int x, float v) { out.at(y, x, c) = std::clamp(v, 0.0f, 1.0f); });
  }
  return out;
}

std::vector<double> gaussian_kernel(int ksize, double sigma) {
  require_kernel(ksize, sigma);
  std::vector<double> k(static_cast<std::size_t>(ksize));
  const int radius = ksize / 2;
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double v = std::exp(-(i * i) / (2.0 * sigma * sigma));
    k[static_cast<std::size_t>(i + radius)] = v;
    sum += v;
  }
  for (auto& v : k) v /= sum;
  return k;
}

int reflect_index(int i, int n) noexcept {
  if (n == 1) return 0;
  const int period = 2 * n;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - 1 - i;
}

GrayMap gaussian_blur(const GrayMap& map, int ksize, double sigma) {
  require_kernel(ksize, sigma);
  require_size(map.height(), map.width(), "gaussian_blur");
  std::vector<float> v(map.values().begin(), map.values().end());
  return GrayMap(map.height(), map.width(),
                 blur_planes(std::move(v), map.height(), map.width(), 1, ksize, sigma));
}

RasterImage gaussian_blur(const RasterImage& img, int ksize, double sigma) {
  require_kernel(ksize, sigma);
  require_size(img.height(), img.width(), "gaussian_blur");
  std::vector<float> v(img.data().begin(), img.data().end());
  v = blur_planes(std::move(v), img.height(), img.width(), RasterImage::kChannels, ksize, sigma);
  RasterImage out(img.height(), img.width());
  std::transform(v.begin(), v.end(), out.data().begin(),
                 [](float x) { return std::clamp(x, 0.0f, 1.0f); });
  return out;
}

GrayMap minmax_normalize(const GrayMap& map) {
  GrayMap out(map.height(), map.width());
  if (map.empty()) return out;
  const auto [lo_it, hi_it] = std::minmax_element(map.values().begin(), map.values().end());
  const double lo = *lo_it;
  const double range = static_cast<double>(*hi_it) - lo;
  if (!(range > 0.0)) return out;
  std::transform(map.values().begin(), map.values().end(), out.values().begin(),
                 [&](float v) { return static_cast<float>((v - lo) / range); });
  return out;
}

}  // namespace sess
