#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <set>
#include <thread>

#include "cli.hpp"
#include "sess/errors.hpp"
#include "sess/pipeline.hpp"

namespace sess::cli {

namespace {
std::string g_stage = "startup";
}

void set_stage(std::string stage) { g_stage = std::move(stage); }
const std::string& current_stage() { return g_stage; }

int exit_code_for(const std::string& category) {
  static const std::set<std::string> input{"InvalidArgument", "FileNotFound", "ImageDecodeError",
                                           "ShapeMismatch"};
  static const std::set<std::string> model{"ModelError",       "UnsupportedModel",
                                           "InvalidModelFile", "MissingMetadata",
                                           "InferenceError",   "ExternalMethodFailed",
                                           "NonFiniteOutput"};
  if (input.count(category)) return kInputError;
  if (model.count(category)) return kModelError;
  return kInternalError;
}

void PipelineFlags::attach(CLI::App& app, bool with_class) {
  app_ = &app;
  app.add_option("--model", model, "ONNX file or mock:quadrant")->capture_default_str();
  app.add_option("--meta", meta, "model sidecar JSON (default: <model>.json)");
  app.add_option("--config", config_file, "JSON config; flags override it");
  if (with_class) app.add_option("--class", class_id_, "target class index");
  app.add_option("--scales", scales_, "number of scales n (1..12)");
  app.add_option("--window", window_, "sliding-window side in pixels");
  app.add_option("--step", step_, "sliding-window step in pixels");
  app.add_option("--prefilter", prefilter_, "pre-filter ratio r in percent [0, 100)");
  app.add_option("--theta", theta_, "fusion threshold");
  app.add_flag("--smooth,!--no-smooth", smooth_, "final Gaussian smoothing (11, 5)");
  app.add_option("--base", base_, "base method")
      ->check(CLI::IsMember({"occlusion", "rise", "external"}));
  app.add_option("--adapter", adapter_, "external adapter command");
  app.add_option("--seed", seed_, "RISE seed");
  app.add_option("--rise-masks", masks_, "RISE masks per patch");
  app.add_option("--occluder", occluder_, "occlusion window side");
  app.add_option("--stride", stride_, "occlusion stride");
  app.add_option("--batch", batch_, "maximum forward batch");
  app.add_option("--workers", workers_, "worker threads (0: SESS_NUM_WORKERS or all cores)");
  app.add_option("--score-mode", score_mode_, "softmax or logit")
      ->check(CLI::IsMember({"softmax", "logit"}));
  app.add_option("--method", method, "sess, base, or uniform")
      ->check(CLI::IsMember({"sess", "base", "uniform"}))
      ->capture_default_str();
}

bool PipelineFlags::given(const std::string& name) const {
  if (app_ == nullptr) return false;
  const auto* opt = app_->get_option_no_throw(name);
  return opt != nullptr && opt->count() > 0;
}

RunConfig PipelineFlags::resolve(RunConfig cfg) const {
  if (!config_file.empty()) cfg = load_run_config(config_file, cfg);
  auto& s = cfg.sess;
  if (given("--class")) s.target_class = class_id_;
  if (given("--scales")) s.n_scales = scales_;
  if (given("--window")) s.window_w = s.window_h = window_;
  if (given("--step")) s.step = step_;
  if (given("--prefilter")) s.prefilter_ratio = prefilter_;
  if (given("--theta")) s.theta = theta_;
  if (given("--smooth")) s.smoothing.enabled = smooth_;  // also set by --no-smooth
  if (given("--batch")) s.max_batch = batch_;
  if (given("--workers")) s.num_workers = workers_;
  if (given("--score-mode")) {
    s.score_mode = score_mode_ == "logit" ? ScoreMode::kLogit : ScoreMode::kSoftmax;
  }
  if (given("--base")) cfg.base = base_;
  if (given("--adapter")) cfg.adapter = adapter_;
  if (given("--seed")) cfg.rise.seed = seed_;
  if (given("--rise-masks")) cfg.rise.num_masks = masks_;
  if (given("--occluder")) cfg.occlusion.occluder = occluder_;
  if (given("--stride")) cfg.occlusion.stride = stride_;
  if (cfg.base == "external" && cfg.adapter.empty()) {
    throw InvalidArgument("--base external needs --adapter");
  }
  return cfg;
}

LoadedModel load_backend(const std::string& model, const std::string& meta) {
  set_stage("load-model");
  LoadedModel out;
  out.backend = open_backend(model, meta);
  out.identity = out.backend->identity();
  return out;
}

GrayMap explain(const std::string& method, const RasterImage& image,
                const ClassifierBackend& backend, const BaseSaliencyMethod& base,
                const SessConfig& cfg) {
  if (method == "sess") return run_sess(image, backend, base, cfg);
  if (method == "base") return run_base_only(image, backend, base, cfg.target_class);
  if (method == "uniform") return GrayMap(image.height(), image.width(), 1.0f);
  throw InvalidArgument("unknown method '" + method + "'");
}

void write_json(const fs::path& path, const json& j) {
  const auto tmp = fs::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp);
    if (!out) throw FileNotFound("cannot write " + path.string());
    out << j.dump(2) << '\n';
  }
  fs::rename(tmp, path);
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FileNotFound("cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw InvalidArgument(path.string() + ": " + e.what());
  }
}

double round_to(double v, int digits) {
  const double f = std::pow(10.0, digits);
  return std::round(v * f) / f;
}

std::vector<DatasetItem> read_dataset(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FileNotFound("dataset manifest not found: " + path.string());
  std::vector<DatasetItem> items;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    DatasetItem item;
    try {
      item.record = json::parse(line);
    } catch (const json::exception& e) {
      throw InvalidArgument(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (!item.record.contains("image") || !item.record["image"].is_string()) {
      throw InvalidArgument(path.string() + ":" + std::to_string(line_no) +
                            ": missing \"image\"");
    }
    fs::path image = item.record["image"].get<std::string>();
    if (image.is_relative()) image = path.parent_path() / image;
    item.image = image;
    item.index = items.size();
    items.push_back(std::move(item));
  }
  if (items.empty()) throw InvalidArgument("dataset manifest is empty: " + path.string());
  return items;
}

std::vector<json> run_resumable(const std::vector<DatasetItem>& items, const fs::path& checkpoint,
                                const json& header, std::size_t max_new, int jobs,
                                const std::function<json(const DatasetItem&)>& work) {
  std::map<std::size_t, json> done;
  if (fs::exists(checkpoint)) {
    std::ifstream in(checkpoint);
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      json j;
      try {
        j = json::parse(line);
      } catch (const json::exception&) {
        break;  // torn final line from an interrupted write
      }
      if (first) {
        if (!j.contains("header") || j["header"] != header) {
          throw InvalidArgument("checkpoint " + checkpoint.string() +
                                " was written with a different configuration; use a new --out");
        }
        first = false;
        continue;
      }
      done[j.at("index").get<std::size_t>()] = j;
    }
  }
  // Rewrite so a torn tail never survives into the next append.
  {
    std::ofstream out(checkpoint, std::ios::trunc);
    out << json{{"header", header}}.dump() << '\n';
    for (const auto& [i, j] : done) out << j.dump() << '\n';
  }

  std::vector<const DatasetItem*> todo;
  for (const auto& item : items) {
    if (!done.count(item.index)) todo.push_back(&item);
  }
  if (max_new > 0 && todo.size() > max_new) todo.resize(max_new);

  std::ofstream out(checkpoint, std::ios::app);
  std::mutex mu;
  std::atomic<std::size_t> next{0};
  const auto loop = [&] {
    for (std::size_t k = next++; k < todo.size(); k = next++) {
      json rec;
      try {
        rec = work(*todo[k]);
      } catch (const Error& e) {
        rec = {{"status", "failed"}, {"error", std::string(e.category()) + ": " + e.what()}};
      } catch (const std::exception& e) {
        rec = {{"status", "failed"}, {"error", e.what()}};
      }
      rec["index"] = todo[k]->index;
      if (rec.value("status", "") == "failed") {
        std::lock_guard lock(mu);
        std::cerr << "sess: skipping " << todo[k]->image.string() << ": "
                  << rec["error"].get<std::string>() << '\n';
      }
      std::lock_guard lock(mu);
      out << rec.dump() << '\n';
      out.flush();
      done[todo[k]->index] = std::move(rec);
    }
  };
  jobs = std::clamp(jobs, 1, static_cast<int>(std::max<std::size_t>(1, todo.size())));
  if (jobs == 1) {
    loop();
  } else {
    std::vector<std::jthread> pool;
    for (int i = 0; i < jobs; ++i) pool.emplace_back(loop);
  }

  std::vector<json> records;
  for (auto& [i, j] : done) records.push_back(std::move(j));
  return records;
}

}  // namespace sess::cli
