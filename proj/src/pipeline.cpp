#include "sess/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <numeric>
#include <string>
#include <thread>

#include "sess/errors.hpp"
#include "sess/imgproc.hpp"

namespace sess {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

std::string describe(const PatchSpec& s, std::size_t index) {
  return "patch #" + std::to_string(index) + " (scale " + std::to_string(s.scale_index) + ", " +
         std::to_string(s.scaled_w) + "x" + std::to_string(s.scaled_h) + ", origin " +
         std::to_string(s.x) + "," + std::to_string(s.y) + ")";
}

void scale_layer(GrayMap& layer, double w) {
  for (auto& v : layer.values()) v = static_cast<float>(v * w);
}

}  // namespace

SessConfig SessConfig::quantitative() {
  SessConfig cfg;
  cfg.n_scales = 10;
  cfg.prefilter_ratio = 90.0;
  cfg.smoothing.enabled = false;
  return cfg;
}

void SessConfig::validate(const ClassifierBackend& backend) const {
  if (n_scales < 1 || n_scales > kMaxScales) {
    throw InvalidArgument("number of scales must be in [1, " + std::to_string(kMaxScales) +
                          "], got " + std::to_string(n_scales));
  }
  if (window_w != backend.input_size() || window_h != backend.input_size()) {
    throw InvalidArgument("window " + std::to_string(window_w) + "x" + std::to_string(window_h) +
                          " must equal the model input size " +
                          std::to_string(backend.input_size()));
  }
  if (step < 1) throw InvalidArgument("sliding-window step must be >= 1");
  if (!(prefilter_ratio >= 0.0 && prefilter_ratio < 100.0)) {
    throw InvalidArgument("pre-filter ratio must be a percentage in [0, 100), got " +
                          std::to_string(prefilter_ratio));
  }
  if (!std::isfinite(theta)) throw InvalidArgument("theta must be finite");
  if (smoothing.enabled && (smoothing.kernel < 1 || smoothing.kernel % 2 == 0 ||
                            !(smoothing.sigma > 0.0))) {
    throw InvalidArgument("smoothing needs an odd kernel >= 1 and sigma > 0");
  }
  if (target_class < 0 || target_class >= backend.num_classes()) {
    throw InvalidArgument("target class " + std::to_string(target_class) + " outside [0, " +
                          std::to_string(backend.num_classes()) + ")");
  }
}

int resolve_worker_count(int requested) {
  int n = requested > 0 ? requested
                        : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  if (const char* env = std::getenv("SESS_NUM_WORKERS"); env != nullptr && *env != '\0') {
    const int cap = std::atoi(env);
    if (cap >= 1) n = std::min(n, cap);
  }
  return std::max(1, n);
}

std::size_t keep_count(std::size_t count, double prefilter_ratio) {
  // The small epsilon keeps exact products such as 10 * 30 / 100 from rounding up.
  const double exact = static_cast<double>(count) * (100.0 - prefilter_ratio) / 100.0;
  const auto kept = static_cast<std::size_t>(std::ceil(exact - 1e-9));
  return std::clamp<std::size_t>(kept, 1, std::max<std::size_t>(count, 1));
}

PrefilterResult prefilter(std::span<const PatchSpec> specs, std::span<const double> scores,
                          double prefilter_ratio) {
  if (specs.empty()) throw InvalidArgument("prefilter: no patches");
  if (specs.size() != scores.size()) {
    throw InvalidArgument("prefilter: " + std::to_string(specs.size()) + " patches but " +
                          std::to_string(scores.size()) + " scores");
  }
  if (!(prefilter_ratio >= 0.0 && prefilter_ratio < 100.0)) {
    throw InvalidArgument("pre-filter ratio must be in [0, 100)");
  }
  std::vector<std::size_t> order(specs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  order.resize(keep_count(specs.size(), prefilter_ratio));
  std::sort(order.begin(), order.end());

  PrefilterResult out;
  out.kept = std::move(order);
  for (auto i : out.kept) {
    out.specs.push_back(specs[i]);
    out.scores.push_back(scores[i]);
  }
  return out;
}

GrayMap calibrate(const GrayMap& patch_map, const PatchSpec& spec, int orig_h, int orig_w) {
  validate(spec);
  if (patch_map.height() != spec.h || patch_map.width() != spec.w) {
    throw ShapeMismatch("patch map is " + std::to_string(patch_map.height()) + "x" +
                        std::to_string(patch_map.width()) + ", patch is " +
                        std::to_string(spec.h) + "x" + std::to_string(spec.w));
  }
  const auto ty = make_axis_taps(spec.scaled_h, orig_h);
  const auto tx = make_axis_taps(spec.scaled_w, orig_w);
  // Canvas is zero except inside the patch rectangle.
  const auto canvas = [&](int y, int x) -> float {
    const int py = y - spec.y;
    const int px = x - spec.x;
    if (py < 0 || px < 0 || py >= spec.h || px >= spec.w) return 0.0f;
    return patch_map.at(py, px);
  };
  const auto touches = [](const AxisTaps& t, int i, int lo, int hi) {
    return (t.lo[i] >= lo && t.lo[i] < hi) || (t.hi[i] >= lo && t.hi[i] < hi);
  };

  GrayMap out(orig_h, orig_w);
  std::vector<int> cols;
  for (int x = 0; x < orig_w; ++x) {
    if (touches(tx, x, spec.x, spec.x + spec.w)) cols.push_back(x);
  }
  for (int y = 0; y < orig_h; ++y) {
    if (!touches(ty, y, spec.y, spec.y + spec.h)) continue;
    const float fy = ty.frac[y];
    for (int x : cols) {
      const float fx = tx.frac[x];
      const float top = (1.0f - fx) * canvas(ty.lo[y], tx.lo[x]) + fx * canvas(ty.lo[y], tx.hi[x]);
      const float bot = (1.0f - fx) * canvas(ty.hi[y], tx.lo[x]) + fx * canvas(ty.hi[y], tx.hi[x]);
      out.at(y, x) = (1.0f - fy) * top + fy * bot;
    }
  }
  return out;
}

CalibratedStack apply_channel_weights(CalibratedStack stack) {
  if (stack.weights.size() != stack.layers.size()) {
    throw InternalConsistencyError("stack has " + std::to_string(stack.layers.size()) +
                                   " layers but " + std::to_string(stack.weights.size()) +
                                   " weights");
  }
  for (std::size_t k = 0; k < stack.layers.size(); ++k) {
    const double w = stack.weights[k];
    if (!std::isfinite(w)) throw InternalConsistencyError("non-finite channel weight");
    if (stack.mode == ScoreMode::kSoftmax && w < 0.0) {
      throw InternalConsistencyError("negative channel weight " + std::to_string(w) +
                                     " in softmax mode (layer " + std::to_string(k) + ")");
    }
    scale_layer(stack.layers[k], w);
  }
  stack.weights_applied = true;
  return stack;
}

FusionAccumulator::FusionAccumulator(int height, int width, double theta)
    : height_(height),
      width_(width),
      theta_(theta),
      sum_(static_cast<std::size_t>(height) * static_cast<std::size_t>(width), 0.0),
      support_(sum_.size(), 0) {}

void FusionAccumulator::add(const GrayMap& layer, double weight) {
  if (layer.height() != height_ || layer.width() != width_) {
    throw ShapeMismatch("fusion layer is " + std::to_string(layer.height()) + "x" +
                        std::to_string(layer.width()) + ", expected " + std::to_string(height_) +
                        "x" + std::to_string(width_));
  }
  const auto values = layer.values();
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double v = values[i] * weight;
    if (v > theta_) {
      sum_[i] += v;
      ++support_[i];
    }
  }
  ++layers_;
}

GrayMap FusionAccumulator::average() const {
  GrayMap out(height_, width_);
  auto values = out.values();
  for (std::size_t i = 0; i < values.size(); ++i) {
    values[i] = support_[i] > 0 ? static_cast<float>(sum_[i] / support_[i]) : 0.0f;
  }
  return out;
}

GrayMap FusionAccumulator::result() const { return minmax_normalize(average()); }

GrayMap fuse(const CalibratedStack& stack, double theta) {
  if (stack.layers.empty()) throw InvalidArgument("fuse: empty stack");
  FusionAccumulator acc(stack.height, stack.width, theta);
  for (const auto& layer : stack.layers) acc.add(layer);
  return acc.result();
}

SessRun run_sess_detailed(const RasterImage& image, const ClassifierBackend& backend,
                          const BaseSaliencyMethod& base, const SessConfig& cfg, bool keep_stack) {
  if (image.empty()) throw InvalidArgument("run_sess: empty image");
  cfg.validate(backend);
  const auto t_start = Clock::now();
  SessRun run;

  // Multi-scaling.
  auto t = Clock::now();
  const auto sizes = scale_sizes(cfg.n_scales);
  std::vector<RasterImage> pyramid;
  pyramid.reserve(sizes.size());
  for (int s : sizes) pyramid.push_back(resize_shorter_side(image, s));
  run.timings.scaling_ms = elapsed_ms(t);

  // Sliding windows and batched scoring.
  t = Clock::now();
  run.patches =
      enumerate_patches(image.height(), image.width(), cfg.n_scales, cfg.window_w, cfg.window_h,
                        cfg.step);
  const auto crop = [&](const PatchSpec& s) {
    return pyramid[static_cast<std::size_t>(s.scale_index - 1)].crop(s.x, s.y, s.w, s.h);
  };
  const std::size_t batch = std::max<std::size_t>(1, cfg.max_batch);
  std::vector<RasterImage> chunk;
  for (std::size_t begin = 0; begin < run.patches.size(); begin += batch) {
    const std::size_t n = std::min(batch, run.patches.size() - begin);
    chunk.clear();
    for (std::size_t k = 0; k < n; ++k) chunk.push_back(crop(run.patches[begin + k]));
    const auto s = class_scores(backend, chunk, cfg.target_class, n, cfg.score_mode);
    run.scores.insert(run.scores.end(), s.begin(), s.end());
  }
  run.timings.scoring_ms = elapsed_ms(t);

  // Pre-filtering and per-patch saliency, in parallel over a shared queue.
  t = Clock::now();
  const auto filtered = prefilter(run.patches, run.scores, cfg.prefilter_ratio);
  run.kept = filtered.kept;
  const std::size_t kept = filtered.kept.size();
  std::vector<GrayMap> patch_maps(kept);
  std::vector<std::exception_ptr> failures(kept);
  std::atomic<std::size_t> next{0};
  const auto work = [&] {
    for (std::size_t k = next++; k < kept; k = next++) {
      try {
        const auto& spec = filtered.specs[k];
        GrayMap m = base.extract(crop(spec), cfg.target_class, backend, filtered.kept[k]);
        if (m.height() != spec.h || m.width() != spec.w) {
          throw ShapeMismatch(base.name() + " returned a " + std::to_string(m.height()) + "x" +
                              std::to_string(m.width()) + " map");
        }
        if (!m.all_finite()) throw NonFiniteOutput(base.name() + " returned non-finite values");
        patch_maps[k] = minmax_normalize(m);
      } catch (...) {
        failures[k] = std::current_exception();
      }
    }
  };
  const int workers = std::min<int>(resolve_worker_count(cfg.num_workers), static_cast<int>(kept));
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (int i = 0; i < workers; ++i) pool.emplace_back(work);
  }
  for (std::size_t k = 0; k < kept; ++k) {
    if (!failures[k]) continue;
    const auto where = describe(filtered.specs[k], filtered.kept[k]);
    try {
      std::rethrow_exception(failures[k]);
    } catch (const Error& e) {
      throw PatchError(where + ": " + e.what(), e.category());
    } catch (const std::exception& e) {
      throw PatchError(where + ": " + e.what(), "InternalConsistencyError");
    }
  }
  run.timings.extraction_ms = elapsed_ms(t);

  // Calibration, channel weights and fusion, reduced in enumeration order.
  t = Clock::now();
  for (std::size_t k = 0; k < kept; ++k) {
    const double w = filtered.scores[k];
    if (cfg.score_mode == ScoreMode::kSoftmax && w < 0.0) {
      throw InternalConsistencyError("negative softmax score for " +
                                     describe(filtered.specs[k], filtered.kept[k]));
    }
  }
  FusionAccumulator acc(image.height(), image.width(), cfg.theta);
  if (keep_stack) {
    CalibratedStack stack;
    stack.height = image.height();
    stack.width = image.width();
    stack.mode = cfg.score_mode;
    stack.weights = filtered.scores;
    for (std::size_t k = 0; k < kept; ++k) {
      stack.layers.push_back(
          calibrate(patch_maps[k], filtered.specs[k], image.height(), image.width()));
    }
    stack = apply_channel_weights(std::move(stack));
    for (const auto& layer : stack.layers) acc.add(layer);
    run.stack = std::move(stack);
  } else {
    for (std::size_t k = 0; k < kept; ++k) {
      auto layer = calibrate(patch_maps[k], filtered.specs[k], image.height(), image.width());
      scale_layer(layer, filtered.scores[k]);
      acc.add(layer);
    }
  }
  run.saliency = acc.result();
  run.timings.fusion_ms = elapsed_ms(t);

  if (cfg.smoothing.enabled) {
    t = Clock::now();
    run.saliency = gaussian_blur(run.saliency, cfg.smoothing.kernel, cfg.smoothing.sigma);
    run.timings.smoothing_ms = elapsed_ms(t);
  }
  run.timings.total_ms = elapsed_ms(t_start);
  return run;
}

GrayMap run_sess(const RasterImage& image, const ClassifierBackend& backend,
                 const BaseSaliencyMethod& base, const SessConfig& cfg) {
  return run_sess_detailed(image, backend, base, cfg).saliency;
}

GrayMap run_base_only(const RasterImage& image, const ClassifierBackend& backend,
                      const BaseSaliencyMethod& base, int target) {
  if (image.empty()) throw InvalidArgument("run_base_only: empty image");
  const int side = backend.input_size();
  const auto resized = bilinear_resize(image, side, side);
  const GrayMap m = base.extract(resized, target, backend, 0);
  if (m.height() != side || m.width() != side || !m.all_finite()) {
    throw ShapeMismatch(base.name() + " returned an unusable map");
  }
  return minmax_normalize(bilinear_resize(minmax_normalize(m), image.height(), image.width()));
}

PatchGrid dump_patch_grid(const CalibratedStack& stack, std::span<const PatchSpec> specs,
                          const MontageLayout& layout) {
  if (stack.layers.empty()) throw InvalidArgument("dump_patch_grid: empty stack");
  if (specs.size() != stack.layers.size()) {
    throw InvalidArgument("dump_patch_grid: " + std::to_string(specs.size()) + " specs for " +
                          std::to_string(stack.layers.size()) + " layers");
  }
  if (layout.tile_long_side < 2 || layout.gutter < 0) {
    throw InvalidArgument("dump_patch_grid: bad layout");
  }
  const double s = static_cast<double>(layout.tile_long_side) / std::max(stack.height, stack.width);
  PatchGrid grid;
  grid.tile_w = std::max(1, static_cast<int>(std::lround(stack.width * s)));
  grid.tile_h = std::max(1, static_cast<int>(std::lround(stack.height * s)));

  std::vector<int> scales;
  for (const auto& spec : specs) scales.push_back(spec.scale_index);
  std::sort(scales.begin(), scales.end());
  scales.erase(std::unique(scales.begin(), scales.end()), scales.end());
  std::vector<int> col_of_row(scales.size(), 0);
  for (std::size_t k = 0; k < specs.size(); ++k) {
    const auto row = static_cast<int>(
        std::lower_bound(scales.begin(), scales.end(), specs[k].scale_index) - scales.begin());
    MontageTile tile;
    tile.layer = k;
    tile.row = row;
    tile.col = col_of_row[static_cast<std::size_t>(row)]++;
    tile.scale_index = specs[k].scale_index;
    grid.tiles.push_back(tile);
  }
  grid.rows = static_cast<int>(scales.size());
  grid.cols = *std::max_element(col_of_row.begin(), col_of_row.end());

  const int cell_w = grid.tile_w + layout.gutter;
  const int cell_h = grid.tile_h + layout.gutter;
  grid.montage = RasterImage(grid.rows * cell_h, grid.cols * cell_w, 0.15f);
  for (auto& tile : grid.tiles) {
    const auto thumb = bilinear_resize(stack.layers[tile.layer], grid.tile_h, grid.tile_w);
    const int ox = tile.col * cell_w;
    const int oy = tile.row * cell_h;
    for (int y = 0; y < grid.tile_h; ++y) {
      for (int x = 0; x < grid.tile_w; ++x) {
        const float v = std::clamp(thumb.at(y, x), 0.0f, 1.0f);
        for (int c = 0; c < 3; ++c) grid.montage.at(oy + y, ox + x, c) = v;
      }
    }
    const auto fp = original_footprint(specs[tile.layer], stack.height, stack.width);
    // Footprint edges scaled to the tile, then snapped to the pixels they cover.
    const auto px = [](double v, int len) {
      return std::clamp(static_cast<int>(std::floor(v)), 0, len - 1);
    };
    tile.outline_x0 = ox + px(fp.x0 * s, grid.tile_w);
    tile.outline_y0 = oy + px(fp.y0 * s, grid.tile_h);
    tile.outline_x1 = ox + px(std::ceil(fp.x1 * s - 1e-9) - 1.0, grid.tile_w);
    tile.outline_y1 = oy + px(std::ceil(fp.y1 * s - 1e-9) - 1.0, grid.tile_h);
    tile.outline_x1 = std::max(tile.outline_x1, tile.outline_x0);
    tile.outline_y1 = std::max(tile.outline_y1, tile.outline_y0);
    const auto paint = [&](int y, int x) {
      grid.montage.at(y, x, 0) = 1.0f;
      grid.montage.at(y, x, 1) = 0.0f;
      grid.montage.at(y, x, 2) = 0.0f;
    };
    for (int x = tile.outline_x0; x <= tile.outline_x1; ++x) {
      paint(tile.outline_y0, x);
      paint(tile.outline_y1, x);
    }
    for (int y = tile.outline_y0; y <= tile.outline_y1; ++y) {
      paint(y, tile.outline_x0);
      paint(y, tile.outline_x1);
    }
  }
  return grid;
}

}  // namespace sess
