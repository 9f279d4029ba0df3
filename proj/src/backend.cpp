#include "sess/backend.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "sess/errors.hpp"

namespace sess {

ScoreMatrix::ScoreMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), values_(rows * cols, 0.0) {}

void ScoreMatrix::append(const ScoreMatrix& other) {
  if (rows_ == 0 && cols_ == 0) {
    *this = other;
    return;
  }
  if (other.cols_ != cols_) {
    throw ShapeMismatch("cannot append score rows with " + std::to_string(other.cols_) +
                        " columns to a table with " + std::to_string(cols_));
  }
  values_.insert(values_.end(), other.values_.begin(), other.values_.end());
  rows_ += other.rows_;
}

void softmax_inplace(std::span<double> row) noexcept {
  if (row.empty()) return;
  const double peak = *std::max_element(row.begin(), row.end());
  double sum = 0.0;
  for (auto& v : row) {
    v = std::exp(v - peak);
    sum += v;
  }
  for (auto& v : row) v /= sum;
}

ModelMeta ModelMeta::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingMetadata("model sidecar not readable: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw MissingMetadata("model sidecar " + path.string() + " is not valid JSON: " + e.what());
  }
  ModelMeta meta;
  try {
    for (const char* key : {"input_size", "mean", "std", "emits_logits"}) {
      if (!j.contains(key)) {
        throw MissingMetadata("model sidecar " + path.string() + " lacks '" + key + "'");
      }
    }
    meta.input_size = j.at("input_size").get<int>();
    const auto mean = j.at("mean").get<std::vector<float>>();
    const auto stdv = j.at("std").get<std::vector<float>>();
    if (mean.size() != 3 || stdv.size() != 3) {
      throw MissingMetadata("model sidecar mean/std must have 3 entries");
    }
    std::copy(mean.begin(), mean.end(), meta.preprocessing.mean.begin());
    std::copy(stdv.begin(), stdv.end(), meta.preprocessing.std.begin());
    meta.emits_logits = j.at("emits_logits").get<bool>();
    if (j.contains("labels")) meta.labels = j.at("labels").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw MissingMetadata("model sidecar " + path.string() + ": " + e.what());
  }
  if (meta.input_size < 1) throw MissingMetadata("model sidecar input_size must be >= 1");
  if (std::any_of(meta.preprocessing.std.begin(), meta.preprocessing.std.end(),
                  [](float s) { return !(s > 0.0f); })) {
    throw MissingMetadata("model sidecar std entries must be positive");
  }
  return meta;
}

ClassifierBackend::ClassifierBackend(int input_size, int num_classes, bool emits_logits)
    : input_size_(input_size), num_classes_(num_classes), emits_logits_(emits_logits) {}

ScoreMatrix ClassifierBackend::forward_scores(std::span<const RasterImage> batch,
                                              ScoreMode mode) const {
  if (batch.empty()) throw InvalidArgument("forward_scores: empty batch");
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (batch[i].height() != input_size_ || batch[i].width() != input_size_) {
      throw ShapeMismatch("forward_scores: patch " + std::to_string(i) + " is " +
                          std::to_string(batch[i].height()) + "x" +
                          std::to_string(batch[i].width()) + ", backend expects " +
                          std::to_string(input_size_) + "x" + std::to_string(input_size_));
    }
  }
  ScoreMatrix out = forward_raw(batch);
  if (out.rows() != batch.size() || out.cols() != static_cast<std::size_t>(num_classes_)) {
    throw InferenceError("backend returned " + std::to_string(out.rows()) + "x" +
                         std::to_string(out.cols()) + " scores for a batch of " +
                         std::to_string(batch.size()));
  }
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    if (!std::all_of(row.begin(), row.end(), [](double v) { return std::isfinite(v); })) {
      throw NonFiniteOutput("backend produced non-finite scores for patch " + std::to_string(r));
    }
    if (mode == ScoreMode::kSoftmax && emits_logits_) {
      softmax_inplace(row);
    } else if (mode == ScoreMode::kLogit && !emits_logits_) {
      // Log-probabilities differ from the logits by a per-row constant.
      for (auto& v : row) v = std::log(std::max(v, 1e-300));
    }
  }
  return out;
}

std::vector<double> class_scores(const ClassifierBackend& backend,
                                 std::span<const RasterImage> patches, int target,
                                 std::size_t max_batch, ScoreMode mode) {
  if (target < 0 || target >= backend.num_classes()) {
    throw InvalidArgument("target class " + std::to_string(target) + " outside [0, " +
                          std::to_string(backend.num_classes()) + ")");
  }
  max_batch = std::max<std::size_t>(1, max_batch);
  std::vector<double> scores;
  scores.reserve(patches.size());
  for (std::size_t begin = 0; begin < patches.size(); begin += max_batch) {
    const std::size_t n = std::min(max_batch, patches.size() - begin);
    const auto table = backend.forward_scores(patches.subspan(begin, n), mode);
    for (std::size_t r = 0; r < n; ++r) scores.push_back(table.at(r, static_cast<std::size_t>(target)));
  }
  return scores;
}

namespace {

class QuadrantMock final : public ClassifierBackend {
 public:
  explicit QuadrantMock(int input_size) : ClassifierBackend(input_size, 4, true) {}

  std::string identity() const override {
    return "mock:quadrant:" + std::to_string(input_size());
  }

 protected:
  ScoreMatrix forward_raw(std::span<const RasterImage> batch) const override {
    ScoreMatrix out(batch.size(), 4);
    for (std::size_t b = 0; b < batch.size(); ++b) {
      const auto& img = batch[b];
      const int mid_y = img.height() / 2;
      const int mid_x = img.width() / 2;
      std::array<double, 4> sum{};
      std::array<double, 4> count{};
      for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
          const int q = (y < mid_y ? 0 : 2) + (x < mid_x ? 0 : 1);
          sum[q] += static_cast<double>(img.at(y, x, 0)) + img.at(y, x, 1) + img.at(y, x, 2);
          count[q] += RasterImage::kChannels;
        }
      }
      for (std::size_t q = 0; q < 4; ++q) out.at(b, q) = count[q] > 0 ? sum[q] / count[q] : 0.0;
    }
    return out;
  }
};

}  // namespace

std::unique_ptr<ClassifierBackend> make_quadrant_mock(int num_classes, int input_size) {
  if (num_classes != 4) {
    throw InvalidArgument("the quadrant mock has exactly 4 classes, got " +
                          std::to_string(num_classes));
  }
  if (input_size < 2) throw InvalidArgument("quadrant mock input size must be >= 2");
  return std::make_unique<QuadrantMock>(input_size);
}

std::unique_ptr<ClassifierBackend> open_backend(const std::string& model,
                                                const std::filesystem::path& meta_path) {
  if (model == "mock:quadrant") return make_quadrant_mock();
  const std::filesystem::path model_path(model);
  if (!meta_path.empty()) return load_model(model_path, meta_path);
  const std::filesystem::path candidates[] = {
      std::filesystem::path(model_path.string() + ".json"),
      std::filesystem::path(model_path).replace_extension(".json"),
      model_path.parent_path() / "meta.json"};
  for (const auto& c : candidates) {
    if (std::filesystem::exists(c)) return load_model(model_path, c);
  }
  return load_model(model_path, candidates[0]);
}

}  // namespace sess
