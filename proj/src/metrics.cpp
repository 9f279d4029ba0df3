#include "sess/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "sess/errors.hpp"
#include "sess/imgproc.hpp"

namespace sess {

const char* to_string(CurveKind kind) noexcept {
  return kind == CurveKind::kInsertion ? "insertion" : "deletion";
}

std::size_t pixels_per_step(std::size_t total, double step_frac) {
  if (!(step_frac > 0.0 && step_frac <= 1.0)) {
    throw InvalidArgument("step fraction must be in (0, 1]");
  }
  return std::max<std::size_t>(
      1, static_cast<std::size_t>(std::floor(static_cast<double>(total) * step_frac)));
}

double trapezoid_auc(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw InvalidArgument("trapezoid_auc needs matching sequences of length >= 2");
  }
  double area = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) area += (x[i] - x[i - 1]) * (y[i] + y[i - 1]) * 0.5;
  return area;
}

std::vector<std::size_t> saliency_order(const GrayMap& saliency) {
  std::vector<std::size_t> order(saliency.size());
  std::iota(order.begin(), order.end(), 0);
  const auto v = saliency.values();
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return v[a] > v[b]; });
  return order;
}

namespace {

struct Prepared {
  RasterImage image;
  GrayMap saliency;
};

Prepared prepare(const RasterImage& image, const GrayMap& saliency,
                 const ClassifierBackend& backend) {
  if (image.empty()) throw InvalidArgument("curve: empty image");
  if (image.height() != saliency.height() || image.width() != saliency.width()) {
    throw ShapeMismatch("saliency " + std::to_string(saliency.height()) + "x" +
                        std::to_string(saliency.width()) + " does not match image " +
                        std::to_string(image.height()) + "x" + std::to_string(image.width()));
  }
  if (!saliency.all_finite()) throw NonFiniteOutput("saliency map has non-finite values");
  const int side = backend.input_size();
  return {bilinear_resize(image, side, side), bilinear_resize(saliency, side, side)};
}

// Walks `start` towards `finish` by copying finish's pixels in saliency
// order, scoring every checkpoint.
CurveResult run_curve(CurveKind kind, const RasterImage& start, const RasterImage& finish,
                      const GrayMap& saliency, const ClassifierBackend& backend, int target,
                      const CurveOptions& opts) {
  const std::size_t total = start.pixel_count();
  CurveResult r;
  r.kind = kind;
  r.target = target;
  r.pixels_per_step = pixels_per_step(total, opts.step_frac);
  r.steps = (total + r.pixels_per_step - 1) / r.pixels_per_step;

  const auto order = saliency_order(saliency);
  const int width = start.width();
  RasterImage work = start;
  std::vector<RasterImage> pending;
  const std::size_t batch = std::max<std::size_t>(1, opts.max_batch);
  const auto flush = [&] {
    if (pending.empty()) return;
    const auto s = class_scores(backend, pending, target, batch);
    r.scores.insert(r.scores.end(), s.begin(), s.end());
    pending.clear();
  };

  std::size_t done = 0;
  for (std::size_t step = 0; step <= r.steps; ++step) {
    const std::size_t upto = std::min(total, step * r.pixels_per_step);
    for (; done < upto; ++done) {
      const int y = static_cast<int>(order[done] / static_cast<std::size_t>(width));
      const int x = static_cast<int>(order[done] % static_cast<std::size_t>(width));
      for (int c = 0; c < RasterImage::kChannels; ++c) work.at(y, x, c) = finish.at(y, x, c);
    }
    r.fractions.push_back(static_cast<double>(upto) / static_cast<double>(total));
    pending.push_back(work);
    if (pending.size() >= batch) flush();
  }
  flush();
  r.auc = trapezoid_auc(r.fractions, r.scores);
  return r;
}

}  // namespace

CurveResult deletion_curve(const RasterImage& image, const GrayMap& saliency,
                           const ClassifierBackend& backend, int target,
                           const CurveOptions& opts) {
  const auto p = prepare(image, saliency, backend);
  RasterImage erased(p.image.height(), p.image.width());
  if (opts.deletion_fill == DeletionFill::kMean) {
    std::array<double, 3> mean{};
    for (int y = 0; y < p.image.height(); ++y) {
      for (int x = 0; x < p.image.width(); ++x) {
        for (int c = 0; c < 3; ++c) mean[c] += p.image.at(y, x, c);
      }
    }
    for (auto& m : mean) m /= static_cast<double>(p.image.pixel_count());
    for (int y = 0; y < erased.height(); ++y) {
      for (int x = 0; x < erased.width(); ++x) {
        for (int c = 0; c < 3; ++c) erased.at(y, x, c) = static_cast<float>(mean[c]);
      }
    }
  }
  return run_curve(CurveKind::kDeletion, p.image, erased, p.saliency, backend, target, opts);
}

CurveResult insertion_curve(const RasterImage& image, const GrayMap& saliency,
                            const ClassifierBackend& backend, int target,
                            const CurveOptions& opts) {
  const auto p = prepare(image, saliency, backend);
  const auto blurred = gaussian_blur(p.image, opts.blur_kernel, opts.blur_sigma);
  return run_curve(CurveKind::kInsertion, blurred, p.image, p.saliency, backend, target, opts);
}

double overall_score(const CurveResult& insertion, const CurveResult& deletion) {
  if (insertion.kind != CurveKind::kInsertion || deletion.kind != CurveKind::kDeletion) {
    throw InvalidArgument("overall_score expects (insertion, deletion) curves");
  }
  if (insertion.target != deletion.target) {
    throw InvalidArgument("overall_score: curves were computed for different classes");
  }
  return insertion.auc - deletion.auc;
}

Point saliency_peak(const GrayMap& saliency) {
  if (saliency.empty()) throw InvalidArgument("saliency_peak: empty map");
  const auto v = saliency.values();
  const auto it = std::max_element(v.begin(), v.end());  // first maximum
  const auto i = static_cast<std::size_t>(it - v.begin());
  return {static_cast<int>(i % static_cast<std::size_t>(saliency.width())),
          static_cast<int>(i / static_cast<std::size_t>(saliency.width()))};
}

bool pointing_game(const GrayMap& saliency, std::span<const Box> boxes, double tolerance) {
  if (boxes.empty()) throw InvalidArgument("pointing_game: no ground-truth boxes");
  if (tolerance < 0.0) throw InvalidArgument("pointing_game: negative tolerance");
  const auto peak = saliency_peak(saliency);
  return std::any_of(boxes.begin(), boxes.end(), [&](const Box& b) {
    return peak.x >= b.x0 - tolerance && peak.x <= b.x1 + tolerance &&
           peak.y >= b.y0 - tolerance && peak.y <= b.y1 + tolerance;
  });
}

PointingResult aggregate_pointing(std::span<const PointingRecord> records) {
  PointingResult out;
  for (const auto& r : records) {
    auto& c = out.per_class[r.class_id];
    (r.hit ? c.hits : c.misses) += 1;
  }
  double sum = 0.0;
  for (auto& [id, c] : out.per_class) {
    c.acc = static_cast<double>(c.hits) / static_cast<double>(c.hits + c.misses);
    sum += c.acc;
  }
  if (!out.per_class.empty()) out.mean_acc = sum / static_cast<double>(out.per_class.size());
  return out;
}

}  // namespace sess
