#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "sess/backend.hpp"
#include "sess/raster.hpp"

namespace sess {

struct OcclusionConfig {
  int occluder = 32;
  int stride = 16;
  float fill = 0.0f;  // pixel value in [0,1] space
  std::size_t max_batch = 32;

  void validate(int patch_side) const;
};

struct RiseConfig {
  int num_masks = 500;
  int grid = 7;
  double keep_prob = 0.5;
  std::uint64_t seed = 0;
  std::size_t max_batch = 32;

  void validate(int patch_side) const;
};

/// A third-party extractor reached through the file protocol: the command is
/// run through /bin/sh with the request directory appended as last argument.
struct ExternalAdapter {
  std::string command;
  bool keep_workspace_on_failure = true;
};

/// Saliency for one input_size x input_size patch. Output normalization is
/// the caller's business.
class BaseSaliencyMethod {
 public:
  virtual ~BaseSaliencyMethod() = default;

  virtual std::string name() const = 0;
  /// Forward passes spent per patch.
  virtual std::size_t query_budget() const = 0;

  /// `stream` distinguishes patches so randomized methods stay
  /// deterministic under parallel execution.
  virtual GrayMap extract(const RasterImage& patch, int target, const ClassifierBackend& backend,
                          std::uint64_t stream) const = 0;
};

GrayMap occlusion_saliency(const RasterImage& patch, int target, const ClassifierBackend& backend,
                           const OcclusionConfig& cfg);

/// Deterministic source of RISE masks for one (seed, stream) pair.
class RiseMaskGenerator {
 public:
  RiseMaskGenerator(const RiseConfig& cfg, int side, std::uint64_t stream);
  GrayMap next();

 private:
  double next_unit() noexcept;

  RiseConfig cfg_;
  int side_;
  int cell_;
  std::mt19937_64 rng_;
};

GrayMap rise_saliency(const RasterImage& patch, int target, const ClassifierBackend& backend,
                      const RiseConfig& cfg, std::uint64_t stream = 0);

/// RISE estimator over explicit masks: sum_k score_k mask_k / (N p).
GrayMap rise_saliency_from_masks(const RasterImage& patch, int target,
                                 const ClassifierBackend& backend,
                                 const std::vector<GrayMap>& masks, double keep_prob,
                                 std::size_t max_batch = 32);

GrayMap external_saliency(const RasterImage& patch, int target, const ExternalAdapter& adapter);

std::unique_ptr<BaseSaliencyMethod> make_occlusion_method(OcclusionConfig cfg);
std::unique_ptr<BaseSaliencyMethod> make_rise_method(RiseConfig cfg);
std::unique_ptr<BaseSaliencyMethod> make_external_method(ExternalAdapter adapter);

}  // namespace sess
