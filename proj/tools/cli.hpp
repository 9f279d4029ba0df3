#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "sess/backend.hpp"
#include "sess/config.hpp"
#include "sess/metrics.hpp"

namespace sess::cli {

namespace fs = std::filesystem;
using nlohmann::json;

enum ExitCode : int { kOk = 0, kInputError = 2, kModelError = 3, kInternalError = 4 };

/// Maps an error category to the process exit code.
int exit_code_for(const std::string& category);

/// Name of the stage currently running, reported with errors.
void set_stage(std::string stage);
const std::string& current_stage();

/// Flags shared by every command that runs the pipeline. Values are parsed
/// into plain members; resolve() layers defaults, config file and the
/// flags that were actually given.
class PipelineFlags {
 public:
  void attach(CLI::App& app, bool with_class = true);
  RunConfig resolve(RunConfig defaults) const;

  std::string model = "mock:quadrant";
  std::string meta;
  std::string config_file;
  std::string method = "sess";  // sess | base | uniform

 private:
  CLI::App* app_ = nullptr;
  int class_id_ = 0;
  int scales_ = 12;
  int window_ = 224;
  int step_ = 224;
  double prefilter_ = 0;
  double theta_ = 0;
  bool smooth_ = true;
  std::string base_ = "occlusion";
  std::string adapter_;
  std::uint64_t seed_ = 0;
  std::size_t batch_ = 32;
  int workers_ = 0;
  int masks_ = 500;
  int occluder_ = 32;
  int stride_ = 16;
  std::string score_mode_ = "softmax";

  bool given(const std::string& name) const;
};

/// Backend plus the identity recorded in manifests.
struct LoadedModel {
  std::unique_ptr<ClassifierBackend> backend;
  std::string identity;
};

LoadedModel load_backend(const std::string& model, const std::string& meta);

/// Saliency for one image under the chosen method (sess | base | uniform).
GrayMap explain(const std::string& method, const RasterImage& image,
                const ClassifierBackend& backend, const BaseSaliencyMethod& base,
                const SessConfig& cfg);

void write_json(const fs::path& path, const json& j);
json read_json(const fs::path& path);

/// Rounds to `digits` decimals, for human-facing report fields.
double round_to(double v, int digits);

/// One dataset line: image path resolved against the manifest directory.
struct DatasetItem {
  std::size_t index = 0;
  fs::path image;
  json record;  // the raw line
};

std::vector<DatasetItem> read_dataset(const fs::path& path);

/// Runs `work` over the items not yet present in `checkpoint`, appending one
/// JSON line per finished item. Returns all records (old and new) ordered by
/// item index. `header` pins the configuration: resuming with a different
/// header is an error. At most `max_new` items are processed when nonzero.
std::vector<json> run_resumable(const std::vector<DatasetItem>& items, const fs::path& checkpoint,
                                const json& header, std::size_t max_new, int jobs,
                                const std::function<json(const DatasetItem&)>& work);

// Subcommand registration.
void add_saliency(CLI::App& app, std::function<int()>& run);
void add_inspect(CLI::App& app, std::function<int()>& run);
void add_rerun(CLI::App& app, std::function<int()>& run);
void add_eval_insdel(CLI::App& app, std::function<int()>& run);
void add_eval_pointing(CLI::App& app, std::function<int()>& run);
void add_sweep(CLI::App& app, std::function<int()>& run);

}  // namespace sess::cli
