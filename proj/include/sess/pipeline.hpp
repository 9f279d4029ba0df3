#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "sess/backend.hpp"
#include "sess/geometry.hpp"
#include "sess/raster.hpp"
#include "sess/saliency_base.hpp"

namespace sess {

struct SmoothingConfig {
  bool enabled = true;
  int kernel = 11;
  double sigma = 5.0;
};

/// Hyperparameters of one enhancement run. Defaults follow the qualitative
/// protocol (12 scales, no pre-filter, smoothing on).
struct SessConfig {
  static constexpr int kMaxScales = 12;

  int n_scales = 12;
  int window_w = 224;
  int window_h = 224;
  int step = 224;
  double prefilter_ratio = 0.0;  // percent in [0, 100)
  double theta = 0.0;
  SmoothingConfig smoothing;
  int target_class = 0;
  ScoreMode score_mode = ScoreMode::kSoftmax;
  std::size_t max_batch = 32;
  int num_workers = 0;  // 0: SESS_NUM_WORKERS, else hardware concurrency

  /// 10 scales, 90% pre-filter, no smoothing.
  static SessConfig quantitative();

  void validate(const ClassifierBackend& backend) const;
};

/// Worker count after applying the SESS_NUM_WORKERS cap.
int resolve_worker_count(int requested);

/// max(1, ceil(count * (100 - r) / 100)).
std::size_t keep_count(std::size_t count, double prefilter_ratio);

struct PrefilterResult {
  std::vector<std::size_t> kept;  // indices into the input, ascending
  std::vector<PatchSpec> specs;
  std::vector<double> scores;
};

/// Keeps the highest-scoring patches; ties keep enumeration order.
PrefilterResult prefilter(std::span<const PatchSpec> specs, std::span<const double> scores,
                          double prefilter_ratio);

/// Pastes a patch map into a zero canvas of its scaled frame and resamples
/// that canvas to the original image size.
GrayMap calibrate(const GrayMap& patch_map, const PatchSpec& spec, int orig_h, int orig_w);

/// Per-patch maps at original resolution plus their channel weights.
struct CalibratedStack {
  int height = 0;
  int width = 0;
  std::vector<GrayMap> layers;
  std::vector<double> weights;
  ScoreMode mode = ScoreMode::kSoftmax;
  bool weights_applied = false;

  std::size_t kept_count() const noexcept { return layers.size(); }
};

/// Multiplies layer k by weights[k]. Negative weights are rejected in
/// softmax mode.
CalibratedStack apply_channel_weights(CalibratedStack stack);

/// Streaming form of the indicator-weighted average: per pixel, the mean of
/// the layer values that exceed theta, or 0 where none does.
class FusionAccumulator {
 public:
  FusionAccumulator(int height, int width, double theta);

  void add(const GrayMap& layer, double weight = 1.0);
  std::size_t layer_count() const noexcept { return layers_; }

  /// Indicator-weighted mean, before normalization.
  GrayMap average() const;
  /// Min-Max normalized average.
  GrayMap result() const;

 private:
  int height_;
  int width_;
  double theta_;
  std::size_t layers_ = 0;
  std::vector<double> sum_;
  std::vector<std::uint32_t> support_;
};

/// Fuses the stack layers as they are (weights must already be applied for
/// the weighted variant) and Min-Max normalizes the result.
GrayMap fuse(const CalibratedStack& stack, double theta);

struct StageTimings {
  double scaling_ms = 0;
  double scoring_ms = 0;
  double extraction_ms = 0;
  double fusion_ms = 0;
  double smoothing_ms = 0;
  double total_ms = 0;
};

/// Everything a run produces; `stack` is filled only on request.
struct SessRun {
  GrayMap saliency;
  std::vector<PatchSpec> patches;
  std::vector<double> scores;  // class-target score of every patch
  std::vector<std::size_t> kept;
  std::optional<CalibratedStack> stack;
  StageTimings timings;
};

SessRun run_sess_detailed(const RasterImage& image, const ClassifierBackend& backend,
                          const BaseSaliencyMethod& base, const SessConfig& cfg,
                          bool keep_stack = false);

GrayMap run_sess(const RasterImage& image, const ClassifierBackend& backend,
                 const BaseSaliencyMethod& base, const SessConfig& cfg);

/// Saliency of the base method alone: the image is resized to the model
/// input, explained once, and the map is resized back and normalized.
GrayMap run_base_only(const RasterImage& image, const ClassifierBackend& backend,
                      const BaseSaliencyMethod& base, int target);

struct MontageLayout {
  int tile_long_side = 128;
  int gutter = 4;
};

struct MontageTile {
  std::size_t layer = 0;
  int row = 0;
  int col = 0;
  int scale_index = 0;
  // Inclusive outline rectangle in montage pixels.
  int outline_x0 = 0, outline_y0 = 0, outline_x1 = 0, outline_y1 = 0;
};

struct PatchGrid {
  RasterImage montage;
  int tile_w = 0;
  int tile_h = 0;
  int rows = 0;
  int cols = 0;
  std::vector<MontageTile> tiles;
};

/// Montage of the calibrated layers, one row per scale, each tile outlined
/// in red where its patch came from.
PatchGrid dump_patch_grid(const CalibratedStack& stack, std::span<const PatchSpec> specs,
                          const MontageLayout& layout = {});

}  // namespace sess
