#include <algorithm>
#include <fstream>
#include <limits>
#include <mutex>
#include <sstream>
#include <string>

#include <google/protobuf/io/coded_stream.h>
#include <google/protobuf/io/zero_copy_stream_impl.h>
#include <openssl/evp.h>
#include <opencv2/core.hpp>
#include <opencv2/dnn.hpp>

#include "proto/onnx_subset.pb.h"
#include "sess/backend.hpp"
#include "sess/errors.hpp"

namespace sess {

namespace {

struct GraphSignature {
  std::string input_name;
  std::vector<std::int64_t> input_dims;  // -1 for symbolic
  std::vector<std::int64_t> output_dims;
};

std::vector<std::int64_t> dims_of(const onnx::ValueInfoProto& v) {
  std::vector<std::int64_t> dims;
  if (!v.has_type() || !v.type().has_tensor_type()) return dims;
  for (const auto& d : v.type().tensor_type().shape().dim()) {
    dims.push_back(d.has_dim_value() ? d.dim_value() : -1);
  }
  return dims;
}

GraphSignature read_signature(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileNotFound("model file not readable: " + path.string());
  google::protobuf::io::IstreamInputStream raw(&in);
  google::protobuf::io::CodedInputStream coded(&raw);
  coded.SetTotalBytesLimit(std::numeric_limits<int>::max());
  onnx::ModelProto model;
  if (!model.ParseFromCodedStream(&coded) || !model.has_graph()) {
    throw InvalidModelFile("not an ONNX model: " + path.string());
  }
  const auto& graph = model.graph();
  std::vector<std::string> initializers;
  for (const auto& t : graph.initializer()) initializers.push_back(t.name());

  std::vector<const onnx::ValueInfoProto*> inputs;
  for (const auto& v : graph.input()) {
    if (std::find(initializers.begin(), initializers.end(), v.name()) == initializers.end()) {
      inputs.push_back(&v);
    }
  }
  if (inputs.size() != 1) {
    throw UnsupportedModel("expected exactly one image input, graph has " +
                           std::to_string(inputs.size()));
  }
  if (graph.output_size() != 1) {
    throw UnsupportedModel("expected exactly one output, graph has " +
                           std::to_string(graph.output_size()));
  }
  GraphSignature sig;
  sig.input_name = inputs.front()->name();
  sig.input_dims = dims_of(*inputs.front());
  sig.output_dims = dims_of(graph.output(0));
  if (sig.input_dims.size() != 4) {
    throw UnsupportedModel("image input must have shape (B,3,H,W), got rank " +
                           std::to_string(sig.input_dims.size()));
  }
  if (sig.input_dims[1] != 3) throw UnsupportedModel("image input must have 3 channels");
  return sig;
}

class OnnxBackend final : public ClassifierBackend {
 public:
  OnnxBackend(cv::dnn::Net net, std::string input_name, const ModelMeta& meta, int num_classes,
              std::string hash)
      : ClassifierBackend(meta.input_size, num_classes, meta.emits_logits),
        net_(std::move(net)),
        input_name_(std::move(input_name)),
        pre_(meta.preprocessing),
        hash_(std::move(hash)) {}

  std::string identity() const override { return "sha256:" + hash_; }

  // Used once at load time when the graph leaves the class count symbolic.
  void discover_num_classes() {
    RasterImage probe(input_size(), input_size());
    set_num_classes(static_cast<int>(run(std::span<const RasterImage>(&probe, 1)).cols()));
  }

 protected:
  ScoreMatrix forward_raw(std::span<const RasterImage> batch) const override { return run(batch); }

 private:
  ScoreMatrix run(std::span<const RasterImage> batch) const {
    const int n = static_cast<int>(batch.size());
    const int side = input_size();
    const int sizes[] = {n, 3, side, side};
    cv::Mat blob(4, sizes, CV_32F);
    auto* dst = blob.ptr<float>();
    const std::size_t plane = static_cast<std::size_t>(side) * side;
    for (int b = 0; b < n; ++b) {
      const auto& img = batch[static_cast<std::size_t>(b)];
      for (int c = 0; c < 3; ++c) {
        float* out = dst + (static_cast<std::size_t>(b) * 3 + c) * plane;
        const float mean = pre_.mean[c];
        const float inv_std = 1.0f / pre_.std[c];
        for (int y = 0; y < side; ++y) {
          for (int x = 0; x < side; ++x) {
            out[static_cast<std::size_t>(y) * side + x] = (img.at(y, x, c) - mean) * inv_std;
          }
        }
      }
    }
    cv::Mat result;
    {
      std::lock_guard lock(mutex_);
      try {
        net_.setInput(blob, input_name_);
        result = net_.forward().clone();
      } catch (const cv::Exception& e) {
        throw InferenceError(std::string("ONNX inference failed: ") + e.what());
      }
    }
    const std::size_t total = result.total();
    if (total % static_cast<std::size_t>(n) != 0) {
      throw InferenceError("ONNX output size not divisible by batch size");
    }
    const std::size_t cols = total / static_cast<std::size_t>(n);
    ScoreMatrix scores(static_cast<std::size_t>(n), cols);
    const float* src = result.ptr<float>();
    for (std::size_t i = 0; i < total; ++i) scores.at(i / cols, i % cols) = src[i];
    return scores;
  }

  mutable cv::dnn::Net net_;
  mutable std::mutex mutex_;
  std::string input_name_;
  Preprocessing pre_;
  std::string hash_;
};

}  // namespace

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr);
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), digest, &len);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) {
    static constexpr char kDigits[] = "0123456789abcdef";
    hex << kDigits[digest[i] >> 4] << kDigits[digest[i] & 0xf];
  }
  return hex.str();
}

std::unique_ptr<ClassifierBackend> load_model(const std::filesystem::path& model_path,
                                              const ModelMeta& meta) {
  if (!std::filesystem::is_regular_file(model_path)) {
    throw FileNotFound("model file not found: " + model_path.string());
  }
  const auto sig = read_signature(model_path);
  for (int axis : {2, 3}) {
    const auto d = sig.input_dims[static_cast<std::size_t>(axis)];
    if (d != -1 && d != meta.input_size) {
      throw ShapeMismatch("graph input side " + std::to_string(d) +
                          " disagrees with sidecar input_size " + std::to_string(meta.input_size));
    }
  }
  int num_classes = -1;
  if (!sig.output_dims.empty() && sig.output_dims.back() > 0) {
    num_classes = static_cast<int>(sig.output_dims.back());
  }

  cv::dnn::Net net;
  try {
    net = cv::dnn::readNetFromONNX(model_path.string());
  } catch (const cv::Exception& e) {
    throw InvalidModelFile("cannot import ONNX graph " + model_path.string() + ": " + e.what());
  }
  if (net.empty()) throw InvalidModelFile("empty ONNX graph: " + model_path.string());
  net.setPreferableBackend(cv::dnn::DNN_BACKEND_OPENCV);
  net.setPreferableTarget(cv::dnn::DNN_TARGET_CPU);

  auto backend = std::make_unique<OnnxBackend>(std::move(net), sig.input_name, meta,
                                               std::max(num_classes, 1), sha256_file(model_path));
  if (num_classes < 1) backend->discover_num_classes();
  if (!meta.labels.empty() && meta.labels.size() != static_cast<std::size_t>(backend->num_classes())) {
    throw ShapeMismatch("sidecar lists " + std::to_string(meta.labels.size()) +
                        " labels, graph has " + std::to_string(backend->num_classes()) +
                        " classes");
  }
  return backend;
}

std::unique_ptr<ClassifierBackend> load_model(const std::filesystem::path& model_path,
                                              const std::filesystem::path& meta_path) {
  if (!std::filesystem::is_regular_file(model_path)) {
    throw FileNotFound("model file not found: " + model_path.string());
  }
  if (!std::filesystem::is_regular_file(meta_path)) {
    throw MissingMetadata("model sidecar not found: " + meta_path.string());
  }
  return load_model(model_path, ModelMeta::load(meta_path));
}

}  // namespace sess
