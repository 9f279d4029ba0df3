#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "sess/raster.hpp"

namespace sess {

/// What a backend reports per class. Softmax probabilities are the default;
/// logits are kept for ablations.
enum class ScoreMode { kSoftmax, kLogit };

/// Row-major B x num_classes score table.
class ScoreMatrix {
 public:
  ScoreMatrix() = default;
  ScoreMatrix(std::size_t rows, std::size_t cols);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  double& at(std::size_t r, std::size_t c) noexcept { return values_[r * cols_ + c]; }
  double at(std::size_t r, std::size_t c) const noexcept { return values_[r * cols_ + c]; }
  std::span<const double> row(std::size_t r) const noexcept {
    return {values_.data() + r * cols_, cols_};
  }
  std::span<double> row(std::size_t r) noexcept { return {values_.data() + r * cols_, cols_}; }

  /// Appends the rows of `other`; column counts must agree.
  void append(const ScoreMatrix& other);

  friend bool operator==(const ScoreMatrix&, const ScoreMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

/// In-place numerically stable softmax over one row.
void softmax_inplace(std::span<double> row) noexcept;

/// Per-channel (x - mean) / std applied before inference.
struct Preprocessing {
  std::array<float, 3> mean{0.0f, 0.0f, 0.0f};
  std::array<float, 3> std{1.0f, 1.0f, 1.0f};
};

/// JSON sidecar shipped next to an exported model:
/// {input_size, mean[3], std[3], emits_logits, labels[]}.
struct ModelMeta {
  int input_size = 224;
  Preprocessing preprocessing;
  bool emits_logits = true;
  std::vector<std::string> labels;

  static ModelMeta load(const std::filesystem::path& path);
};

/// A black-box image classifier. forward_scores() validates the batch and is
/// safe to call concurrently from several threads.
class ClassifierBackend {
 public:
  virtual ~ClassifierBackend() = default;
  ClassifierBackend(const ClassifierBackend&) = delete;
  ClassifierBackend& operator=(const ClassifierBackend&) = delete;

  int input_size() const noexcept { return input_size_; }
  int num_classes() const noexcept { return num_classes_; }

  /// Stable identifier of the model, e.g. a content hash.
  virtual std::string identity() const = 0;

  /// Scores for a nonempty batch of input_size x input_size patches.
  ScoreMatrix forward_scores(std::span<const RasterImage> batch,
                             ScoreMode mode = ScoreMode::kSoftmax) const;

 protected:
  ClassifierBackend(int input_size, int num_classes, bool emits_logits);

  /// Raw graph outputs for an already validated batch: logits when
  /// emits_logits, probabilities otherwise.
  virtual ScoreMatrix forward_raw(std::span<const RasterImage> batch) const = 0;

  void set_num_classes(int n) noexcept { num_classes_ = n; }

 private:
  int input_size_;
  int num_classes_;
  bool emits_logits_;
};

/// Class-`target` scores of arbitrarily many patches, run in chunks of at
/// most `max_batch`.
std::vector<double> class_scores(const ClassifierBackend& backend,
                                 std::span<const RasterImage> patches, int target,
                                 std::size_t max_batch, ScoreMode mode = ScoreMode::kSoftmax);

/// Deterministic 4-class test model: the logit of class q is the mean
/// intensity (over channels) of quadrant q of the patch, quadrants ordered
/// top-left, top-right, bottom-left, bottom-right.
std::unique_ptr<ClassifierBackend> make_quadrant_mock(int num_classes = 4, int input_size = 224);

/// Loads an ONNX classifier with its JSON sidecar.
std::unique_ptr<ClassifierBackend> load_model(const std::filesystem::path& model_path,
                                              const ModelMeta& meta);
std::unique_ptr<ClassifierBackend> load_model(const std::filesystem::path& model_path,
                                              const std::filesystem::path& meta_path);

/// Lowercase hex SHA-256 of a file's bytes; the ONNX backend identity.
std::string sha256_file(const std::filesystem::path& path);

/// Resolves a model argument: "mock:quadrant" or an ONNX path. When
/// `meta_path` is empty the sidecar is looked up as <model>.json, then
/// the model path with its extension replaced by .json, then meta.json.
std::unique_ptr<ClassifierBackend> open_backend(const std::string& model,
                                                const std::filesystem::path& meta_path = {});

}  // namespace sess
