#pragma once

#include <vector>

namespace sess {

/// Shorter-side sizes of the image pyramid: 224 + 64 (i - 1) for i = 1..n.
std::vector<int> scale_sizes(int n);

/// Window start positions along one axis: 0, step, 2 step, ... while the
/// window fits, plus a final window clamped to `length - win` if the regular
/// grid stops short of the far edge.
std::vector<int> window_origins(int length, int win, int step);

/// One sliding-window patch and where it came from.
struct PatchSpec {
  int scale_index = 1;  // 1-based
  int scaled_h = 0;
  int scaled_w = 0;
  int x = 0;  // origin in scaled coordinates
  int y = 0;
  int w = 0;
  int h = 0;

  friend bool operator==(const PatchSpec&, const PatchSpec&) = default;
};

/// Throws InvalidArgument when the patch leaves its scaled frame.
void validate(const PatchSpec& spec);

/// Patch footprint mapped back to the original image frame, in continuous
/// pixel-edge coordinates [x0, x1) x [y0, y1).
struct Footprint {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
};

Footprint original_footprint(const PatchSpec& spec, int orig_h, int orig_w);

/// All patches over every pyramid level, ordered by scale then row-major
/// over origins. Works on dimensions only; no pixels are touched.
std::vector<PatchSpec> enumerate_patches(int image_h, int image_w, int n_scales, int win_w,
                                         int win_h, int step);

}  // namespace sess
