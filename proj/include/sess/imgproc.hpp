#pragma once

#include <utility>
#include <vector>

#include "sess/raster.hpp"

namespace sess {

/// Pixel-coordinate convention for bilinear resampling.
enum class Sampling {
  kHalfPixel,     // pixel centers at i + 0.5; what most preprocessing stacks do
  kAlignCorners,  // first and last samples of source and target coincide
};

/// Per-axis bilinear taps: target index i reads source lo[i] and hi[i] and
/// blends them with weight frac[i] on hi[i].
struct AxisTaps {
  std::vector<int> lo;
  std::vector<int> hi;
  std::vector<float> frac;
};

AxisTaps make_axis_taps(int src_len, int dst_len, Sampling sampling = Sampling::kHalfPixel);

/// Dimensions (height, width) after scaling the shorter side to `target`.
/// The longer side is rounded to nearest, minimum 1.
std::pair<int, int> shorter_side_dims(int height, int width, int target);

RasterImage resize_shorter_side(const RasterImage& img, int target);

GrayMap bilinear_resize(const GrayMap& map, int out_h, int out_w,
                        Sampling sampling = Sampling::kHalfPixel);
RasterImage bilinear_resize(const RasterImage& img, int out_h, int out_w,
                            Sampling sampling = Sampling::kHalfPixel);

/// Normalized 1-D Gaussian weights, length `ksize`, centered.
std::vector<double> gaussian_kernel(int ksize, double sigma);

/// Symmetric reflection of an out-of-range index into [0, n): the edge
/// sample is repeated (d c b a | a b c d | d c b a), so a normalized kernel
/// conserves the total mass of the map.
int reflect_index(int i, int n) noexcept;

/// Separable Gaussian filter with reflect borders. `ksize` must be odd.
GrayMap gaussian_blur(const GrayMap& map, int ksize, double sigma);
RasterImage gaussian_blur(const RasterImage& img, int ksize, double sigma);

/// (x - min) / (max - min); a constant map becomes all zeros.
GrayMap minmax_normalize(const GrayMap& map);

}  // namespace sess
