#include "sess/saliency_base.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include <fcntl.h>
#include <sys/wait.h>
#include <unistd.h>

#include <nlohmann/json.hpp>

#include "sess/errors.hpp"
#include "sess/geometry.hpp"
#include "sess/image_io.hpp"
#include "sess/imgproc.hpp"

namespace sess {

void OcclusionConfig::validate(int patch_side) const {
  if (occluder < 1 || occluder > patch_side) {
    throw InvalidArgument("occluder must be in [1, " + std::to_string(patch_side) + "], got " +
                          std::to_string(occluder));
  }
  if (stride < 1 || stride > occluder) {
    throw InvalidArgument("occlusion stride must be in [1, occluder], got " +
                          std::to_string(stride));
  }
  if (!(fill >= 0.0f && fill <= 1.0f)) throw InvalidArgument("occlusion fill must be in [0,1]");
}

void RiseConfig::validate(int patch_side) const {
  if (num_masks < 1) throw InvalidArgument("RISE needs at least one mask");
  if (grid < 1 || grid > patch_side) {
    throw InvalidArgument("RISE grid must be in [1, " + std::to_string(patch_side) + "]");
  }
  if (!(keep_prob > 0.0 && keep_prob <= 1.0)) {
    throw InvalidArgument("RISE keep probability must be in (0,1]");
  }
}

namespace {

void require_square(const RasterImage& patch, const ClassifierBackend& backend) {
  if (patch.height() != backend.input_size() || patch.width() != backend.input_size()) {
    throw ShapeMismatch("patch is " + std::to_string(patch.height()) + "x" +
                        std::to_string(patch.width()) + ", backend expects " +
                        std::to_string(backend.input_size()));
  }
}

}  // namespace

GrayMap occlusion_saliency(const RasterImage& patch, int target, const ClassifierBackend& backend,
                           const OcclusionConfig& cfg) {
  require_square(patch, backend);
  const int side = patch.height();
  cfg.validate(side);

  const double base = class_scores(backend, std::span(&patch, 1), target, 1).front();
  const auto origins = window_origins(side, cfg.occluder, cfg.stride);

  struct Placement {
    int x, y;
  };
  std::vector<Placement> placements;
  for (int y : origins) {
    for (int x : origins) placements.push_back({x, y});
  }

  std::vector<double> drop_sum(static_cast<std::size_t>(side) * side, 0.0);
  std::vector<int> coverage(drop_sum.size(), 0);
  const std::size_t batch = std::max<std::size_t>(1, cfg.max_batch);
  std::vector<RasterImage> occluded;
  for (std::size_t begin = 0; begin < placements.size(); begin += batch) {
    const std::size_t n = std::min(batch, placements.size() - begin);
    occluded.assign(n, patch);
    for (std::size_t k = 0; k < n; ++k) {
      const auto [px, py] = placements[begin + k];
      for (int y = py; y < py + cfg.occluder; ++y) {
        for (int x = px; x < px + cfg.occluder; ++x) {
          for (int c = 0; c < RasterImage::kChannels; ++c) occluded[k].at(y, x, c) = cfg.fill;
        }
      }
    }
    std::vector<double> scores;
    try {
      scores = class_scores(backend, occluded, target, n);
    } catch (const Error& e) {
      throw InferenceError("occlusion placements " + std::to_string(begin) + ".." +
                           std::to_string(begin + n - 1) + ": " + e.what());
    }
    for (std::size_t k = 0; k < n; ++k) {
      const auto [px, py] = placements[begin + k];
      const double drop = std::max(0.0, base - scores[k]);
      for (int y = py; y < py + cfg.occluder; ++y) {
        for (int x = px; x < px + cfg.occluder; ++x) {
          const auto i = static_cast<std::size_t>(y) * side + x;
          drop_sum[i] += drop;
          coverage[i] += 1;
        }
      }
    }
  }

  GrayMap out(side, side);
  auto values = out.values();
  for (std::size_t i = 0; i < values.size(); ++i) {
    values[i] = coverage[i] > 0 ? static_cast<float>(drop_sum[i] / coverage[i]) : 0.0f;
  }
  return out;
}

RiseMaskGenerator::RiseMaskGenerator(const RiseConfig& cfg, int side, std::uint64_t stream)
    : cfg_(cfg), side_(side), cell_((side + cfg.grid - 1) / cfg.grid) {
  cfg.validate(side);
  std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  rng_.seed(seq);
}

double RiseMaskGenerator::next_unit() noexcept {
  // 53 random mantissa bits; mt19937_64 output is fully specified by the standard.
  return static_cast<double>(rng_() >> 11) * 0x1.0p-53;
}

GrayMap RiseMaskGenerator::next() {
  GrayMap grid(cfg_.grid, cfg_.grid);
  for (auto& v : grid.values()) v = next_unit() < cfg_.keep_prob ? 1.0f : 0.0f;
  const int up = (cfg_.grid + 1) * cell_;
  const int dx = static_cast<int>(rng_() % static_cast<std::uint64_t>(cell_));
  const int dy = static_cast<int>(rng_() % static_cast<std::uint64_t>(cell_));
  const GrayMap upsampled = bilinear_resize(grid, up, up);
  GrayMap mask(side_, side_);
  for (int y = 0; y < side_; ++y) {
    for (int x = 0; x < side_; ++x) mask.at(y, x) = upsampled.at(y + dy, x + dx);
  }
  return mask;
}

namespace {

// Adds sum_k score_k * mask_k into `acc`.
void accumulate_rise(const RasterImage& patch, int target, const ClassifierBackend& backend,
                     const std::vector<GrayMap>& masks, std::size_t max_batch,
                     std::vector<double>& acc) {
  const int side = patch.height();
  max_batch = std::max<std::size_t>(1, max_batch);
  std::vector<RasterImage> masked;
  for (std::size_t begin = 0; begin < masks.size(); begin += max_batch) {
    const std::size_t n = std::min(max_batch, masks.size() - begin);
    masked.assign(n, patch);
    for (std::size_t k = 0; k < n; ++k) {
      const auto& m = masks[begin + k];
      if (m.height() != side || m.width() != side) throw ShapeMismatch("RISE mask size mismatch");
      for (int y = 0; y < side; ++y) {
        for (int x = 0; x < side; ++x) {
          for (int c = 0; c < RasterImage::kChannels; ++c) masked[k].at(y, x, c) *= m.at(y, x);
        }
      }
    }
    const auto scores = class_scores(backend, masked, target, n);
    for (std::size_t k = 0; k < n; ++k) {
      const auto values = masks[begin + k].values();
      for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += scores[k] * values[i];
    }
  }
}

GrayMap finish_rise(const std::vector<double>& acc, int side, double norm) {
  GrayMap out(side, side);
  auto values = out.values();
  for (std::size_t i = 0; i < acc.size(); ++i) values[i] = static_cast<float>(acc[i] / norm);
  return out;
}

}  // namespace

GrayMap rise_saliency_from_masks(const RasterImage& patch, int target,
                                 const ClassifierBackend& backend,
                                 const std::vector<GrayMap>& masks, double keep_prob,
                                 std::size_t max_batch) {
  require_square(patch, backend);
  if (masks.empty()) throw InvalidArgument("RISE needs at least one mask");
  if (!(keep_prob > 0.0 && keep_prob <= 1.0)) throw InvalidArgument("keep_prob must be in (0,1]");
  const int side = patch.height();
  std::vector<double> acc(static_cast<std::size_t>(side) * side, 0.0);
  accumulate_rise(patch, target, backend, masks, max_batch, acc);
  return finish_rise(acc, side, static_cast<double>(masks.size()) * keep_prob);
}

GrayMap rise_saliency(const RasterImage& patch, int target, const ClassifierBackend& backend,
                      const RiseConfig& cfg, std::uint64_t stream) {
  require_square(patch, backend);
  const int side = patch.height();
  RiseMaskGenerator gen(cfg, side, stream);
  const int batch = static_cast<int>(std::max<std::size_t>(1, cfg.max_batch));
  std::vector<double> acc(static_cast<std::size_t>(side) * side, 0.0);
  std::vector<GrayMap> masks;
  for (int begin = 0; begin < cfg.num_masks; begin += batch) {
    const int n = std::min(batch, cfg.num_masks - begin);
    masks.clear();
    for (int k = 0; k < n; ++k) masks.push_back(gen.next());
    accumulate_rise(patch, target, backend, masks, static_cast<std::size_t>(n), acc);
  }
  return finish_rise(acc, side, static_cast<double>(cfg.num_masks) * cfg.keep_prob);
}

namespace {

class TempWorkspace {
 public:
  TempWorkspace() {
    auto pattern = (std::filesystem::temp_directory_path() / "sess-adapter-XXXXXX").string();
    if (::mkdtemp(pattern.data()) == nullptr) {
      throw ExternalMethodFailed("cannot create adapter workspace under " +
                                 std::filesystem::temp_directory_path().string());
    }
    path_ = pattern;
  }
  ~TempWorkspace() {
    if (!keep_) {
      std::error_code ec;
      std::filesystem::remove_all(path_, ec);
    }
  }
  TempWorkspace(const TempWorkspace&) = delete;
  TempWorkspace& operator=(const TempWorkspace&) = delete;

  const std::filesystem::path& path() const noexcept { return path_; }
  void keep() noexcept { keep_ = true; }

 private:
  std::filesystem::path path_;
  bool keep_ = false;
};

std::string read_text(const std::filesystem::path& p, std::size_t limit = 4096) {
  std::ifstream in(p);
  std::string s((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (s.size() > limit) s = "..." + s.substr(s.size() - limit);
  return s;
}

// Runs `command "$1"` through /bin/sh with stdout/stderr captured to `log`.
int run_adapter(const std::string& command, const std::filesystem::path& dir,
                const std::filesystem::path& log) {
  const std::string script = command + " \"$1\"";
  const pid_t pid = ::fork();
  if (pid < 0) throw ExternalMethodFailed("fork failed for adapter '" + command + "'");
  if (pid == 0) {
    const int fd = ::open(log.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
    if (fd >= 0) {
      ::dup2(fd, STDOUT_FILENO);
      ::dup2(fd, STDERR_FILENO);
      ::close(fd);
    }
    ::execl("/bin/sh", "sh", "-c", script.c_str(), "sess-adapter", dir.c_str(),
            static_cast<char*>(nullptr));
    ::_exit(127);
  }
  int status = 0;
  while (::waitpid(pid, &status, 0) < 0) {
    if (errno != EINTR) throw ExternalMethodFailed("waitpid failed for adapter '" + command + "'");
  }
  if (WIFEXITED(status)) return WEXITSTATUS(status);
  return 128 + (WIFSIGNALED(status) ? WTERMSIG(status) : 0);
}

}  // namespace

GrayMap external_saliency(const RasterImage& patch, int target, const ExternalAdapter& adapter) {
  if (adapter.command.empty()) throw InvalidArgument("external adapter command is empty");
  TempWorkspace ws;
  save_png(patch, ws.path() / "patch.png");
  {
    std::ofstream req(ws.path() / "request.json");
    req << nlohmann::json{{"class_id", target}}.dump() << '\n';
  }
  const auto log = ws.path() / "adapter.log";
  const int code = run_adapter(adapter.command, ws.path(), log);
  const auto fail_context = [&] {
    if (adapter.keep_workspace_on_failure) ws.keep();
    std::string ctx = " (workspace " + ws.path().string() + ")";
    const auto text = read_text(log);
    if (!text.empty()) ctx += "\n--- adapter output ---\n" + text;
    return ctx;
  };
  if (code != 0) {
    throw ExternalMethodFailed("adapter '" + adapter.command + "' exited with status " +
                               std::to_string(code) + fail_context());
  }
  const auto out_path = ws.path() / "saliency.f32";
  if (!std::filesystem::is_regular_file(out_path)) {
    throw ExternalMethodFailed("adapter '" + adapter.command + "' produced no saliency.f32" +
                               fail_context());
  }
  GrayMap map;
  try {
    map = read_f32(out_path, patch.height(), patch.width());
  } catch (const ShapeMismatch& e) {
    throw ShapeMismatch(std::string("adapter output: ") + e.what() + fail_context());
  }
  if (!map.all_finite()) {
    throw NonFiniteOutput("adapter '" + adapter.command + "' returned non-finite saliency" +
                          fail_context());
  }
  return map;
}

namespace {

class OcclusionMethod final : public BaseSaliencyMethod {
 public:
  explicit OcclusionMethod(OcclusionConfig cfg) : cfg_(cfg) {}
  std::string name() const override { return "occlusion"; }
  std::size_t query_budget() const override {
    // Placement count depends on the patch side; report it for the default 224.
    const auto n = window_origins(224, cfg_.occluder, cfg_.stride).size();
    return n * n + 1;
  }
  GrayMap extract(const RasterImage& patch, int target, const ClassifierBackend& backend,
                  std::uint64_t) const override {
    return occlusion_saliency(patch, target, backend, cfg_);
  }

 private:
  OcclusionConfig cfg_;
};

class RiseMethod final : public BaseSaliencyMethod {
 public:
  explicit RiseMethod(RiseConfig cfg) : cfg_(cfg) {}
  std::string name() const override { return "rise"; }
  std::size_t query_budget() const override { return static_cast<std::size_t>(cfg_.num_masks); }
  GrayMap extract(const RasterImage& patch, int target, const ClassifierBackend& backend,
                  std::uint64_t stream) const override {
    return rise_saliency(patch, target, backend, cfg_, stream);
  }

 private:
  RiseConfig cfg_;
};

class ExternalMethod final : public BaseSaliencyMethod {
 public:
  explicit ExternalMethod(ExternalAdapter adapter) : adapter_(std::move(adapter)) {}
  std::string name() const override { return "external"; }
  std::size_t query_budget() const override { return 0; }  // unknown to us
  GrayMap extract(const RasterImage& patch, int target, const ClassifierBackend&,
                  std::uint64_t) const override {
    return external_saliency(patch, target, adapter_);
  }

 private:
  ExternalAdapter adapter_;
};

}  // namespace

std::unique_ptr<BaseSaliencyMethod> make_occlusion_method(OcclusionConfig cfg) {
  cfg.validate(224);
  return std::make_unique<OcclusionMethod>(cfg);
}

std::unique_ptr<BaseSaliencyMethod> make_rise_method(RiseConfig cfg) {
  cfg.validate(224);
  return std::make_unique<RiseMethod>(cfg);
}

std::unique_ptr<BaseSaliencyMethod> make_external_method(ExternalAdapter adapter) {
  if (adapter.command.empty()) throw InvalidArgument("external adapter command is empty");
  return std::make_unique<ExternalMethod>(std::move(adapter));
}

}  // namespace sess
