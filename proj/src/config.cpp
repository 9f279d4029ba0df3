#include "sess/config.hpp"

#include <fstream>

#include "sess/errors.hpp"

namespace sess {

namespace {

template <typename T>
void read_opt(const nlohmann::json& j, const char* key, T& out) {
  if (const auto it = j.find(key); it != j.end() && !it->is_null()) out = it->get<T>();
}

}  // namespace

void to_json(nlohmann::json& j, const SessConfig& c) {
  j = {{"n_scales", c.n_scales},
       {"window_w", c.window_w},
       {"window_h", c.window_h},
       {"step", c.step},
       {"prefilter_ratio", c.prefilter_ratio},
       {"theta", c.theta},
       {"smoothing",
        {{"enabled", c.smoothing.enabled},
         {"kernel", c.smoothing.kernel},
         {"sigma", c.smoothing.sigma}}},
       {"target_class", c.target_class},
       {"score_mode", c.score_mode == ScoreMode::kSoftmax ? "softmax" : "logit"},
       {"max_batch", c.max_batch}};
}

void from_json(const nlohmann::json& j, SessConfig& c) {
  read_opt(j, "n_scales", c.n_scales);
  read_opt(j, "window_w", c.window_w);
  read_opt(j, "window_h", c.window_h);
  read_opt(j, "step", c.step);
  read_opt(j, "prefilter_ratio", c.prefilter_ratio);
  read_opt(j, "theta", c.theta);
  if (const auto it = j.find("smoothing"); it != j.end()) {
    read_opt(*it, "enabled", c.smoothing.enabled);
    read_opt(*it, "kernel", c.smoothing.kernel);
    read_opt(*it, "sigma", c.smoothing.sigma);
  }
  read_opt(j, "target_class", c.target_class);
  if (const auto it = j.find("score_mode"); it != j.end()) {
    const auto mode = it->get<std::string>();
    if (mode == "softmax") {
      c.score_mode = ScoreMode::kSoftmax;
    } else if (mode == "logit") {
      c.score_mode = ScoreMode::kLogit;
    } else {
      throw InvalidArgument("score_mode must be 'softmax' or 'logit', got '" + mode + "'");
    }
  }
  read_opt(j, "max_batch", c.max_batch);
}

void to_json(nlohmann::json& j, const OcclusionConfig& c) {
  j = {{"occluder", c.occluder}, {"stride", c.stride}, {"fill", c.fill}};
}

void from_json(const nlohmann::json& j, OcclusionConfig& c) {
  read_opt(j, "occluder", c.occluder);
  read_opt(j, "stride", c.stride);
  read_opt(j, "fill", c.fill);
}

void to_json(nlohmann::json& j, const RiseConfig& c) {
  j = {{"num_masks", c.num_masks}, {"grid", c.grid}, {"keep_prob", c.keep_prob}, {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, RiseConfig& c) {
  read_opt(j, "num_masks", c.num_masks);
  read_opt(j, "grid", c.grid);
  read_opt(j, "keep_prob", c.keep_prob);
  read_opt(j, "seed", c.seed);
}

void to_json(nlohmann::json& j, const CurveOptions& o) {
  j = {{"step_frac", o.step_frac},
       {"blur_kernel", o.blur_kernel},
       {"blur_sigma", o.blur_sigma},
       {"deletion_fill", o.deletion_fill == DeletionFill::kZero ? "zero" : "mean"}};
}

void from_json(const nlohmann::json& j, CurveOptions& o) {
  read_opt(j, "step_frac", o.step_frac);
  read_opt(j, "blur_kernel", o.blur_kernel);
  read_opt(j, "blur_sigma", o.blur_sigma);
  if (const auto it = j.find("deletion_fill"); it != j.end()) {
    const auto fill = it->get<std::string>();
    if (fill != "zero" && fill != "mean") {
      throw InvalidArgument("deletion_fill must be 'zero' or 'mean'");
    }
    o.deletion_fill = fill == "zero" ? DeletionFill::kZero : DeletionFill::kMean;
  }
}

void to_json(nlohmann::json& j, const RunConfig& c) {
  j = {{"sess", c.sess},         {"base", c.base},     {"occlusion", c.occlusion},
       {"rise", c.rise},         {"adapter", c.adapter}, {"curves", c.curves}};
}

void from_json(const nlohmann::json& j, RunConfig& c) {
  if (const auto it = j.find("sess"); it != j.end()) from_json(*it, c.sess);
  read_opt(j, "base", c.base);
  if (const auto it = j.find("occlusion"); it != j.end()) from_json(*it, c.occlusion);
  if (const auto it = j.find("rise"); it != j.end()) from_json(*it, c.rise);
  read_opt(j, "adapter", c.adapter);
  if (const auto it = j.find("curves"); it != j.end()) from_json(*it, c.curves);
}

RunConfig load_run_config(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw FileNotFound("config file not found: " + path.string());
  try {
    const auto j = nlohmann::json::parse(in);
    from_json(j, base);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument("config " + path.string() + ": " + e.what());
  }
  return base;
}

std::unique_ptr<BaseSaliencyMethod> make_base_method(const RunConfig& cfg) {
  if (cfg.base == "occlusion") {
    auto occ = cfg.occlusion;
    occ.max_batch = cfg.sess.max_batch;
    return make_occlusion_method(occ);
  }
  if (cfg.base == "rise") {
    auto rise = cfg.rise;
    rise.max_batch = cfg.sess.max_batch;
    return make_rise_method(rise);
  }
  if (cfg.base == "external") return make_external_method({cfg.adapter});
  throw InvalidArgument("unknown base method '" + cfg.base + "' (occlusion|rise|external)");
}

}  // namespace sess
