#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "sess/backend.hpp"
#include "sess/raster.hpp"

namespace sess {

enum class CurveKind { kInsertion, kDeletion };

const char* to_string(CurveKind kind) noexcept;

enum class DeletionFill { kZero, kMean };

struct CurveOptions {
  double step_frac = 0.036;
  // Insertion starts from this blur of the image.
  int blur_kernel = 51;
  double blur_sigma = 24.0;
  DeletionFill deletion_fill = DeletionFill::kZero;
  std::size_t max_batch = 32;
};

struct CurveResult {
  CurveKind kind = CurveKind::kDeletion;
  int target = 0;
  std::size_t pixels_per_step = 0;
  std::size_t steps = 0;
  std::vector<double> fractions;  // 0 .. 1, strictly increasing
  std::vector<double> scores;
  double auc = 0.0;
};

/// floor(total * step_frac), at least 1.
std::size_t pixels_per_step(std::size_t total, double step_frac);

/// Trapezoidal area under (x, y). Sizes must match and be >= 2.
double trapezoid_auc(std::span<const double> x, std::span<const double> y);

/// Pixel indices by descending saliency; ties keep row-major order.
std::vector<std::size_t> saliency_order(const GrayMap& saliency);

/// Removes pixels from the image in descending saliency order. Image and
/// saliency must share dimensions; both are resampled to the model input
/// size before scoring.
CurveResult deletion_curve(const RasterImage& image, const GrayMap& saliency,
                           const ClassifierBackend& backend, int target,
                           const CurveOptions& opts = {});

/// Restores original pixels into a heavily blurred copy, in descending
/// saliency order.
CurveResult insertion_curve(const RasterImage& image, const GrayMap& saliency,
                            const ClassifierBackend& backend, int target,
                            const CurveOptions& opts = {});

/// AUC(insertion) - AUC(deletion).
double overall_score(const CurveResult& insertion, const CurveResult& deletion);

/// Axis-aligned box with inclusive edges, in map pixel coordinates.
struct Box {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
};

struct Point {
  int x = 0;
  int y = 0;
};

/// First maximum in row-major order.
Point saliency_peak(const GrayMap& saliency);

/// Hit when the saliency peak lies inside any box, each box grown by
/// `tolerance` pixels (0 = plain containment).
bool pointing_game(const GrayMap& saliency, std::span<const Box> boxes, double tolerance = 0.0);

struct PointingRecord {
  int class_id = 0;
  bool hit = false;
};

struct ClassAccuracy {
  std::size_t hits = 0;
  std::size_t misses = 0;
  double acc = 0.0;
};

struct PointingResult {
  std::map<int, ClassAccuracy> per_class;
  double mean_acc = 0.0;  // unweighted over classes
};

PointingResult aggregate_pointing(std::span<const PointingRecord> records);

}  // namespace sess
