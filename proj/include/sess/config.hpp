#pragma once

#include <filesystem>

#include <nlohmann/json.hpp>

#include "sess/metrics.hpp"
#include "sess/pipeline.hpp"
#include "sess/saliency_base.hpp"

namespace sess {

// JSON mirrors of the configuration structs. Reading is a partial update:
// keys that are absent keep the value already in the target.

void to_json(nlohmann::json& j, const SessConfig& cfg);
void from_json(const nlohmann::json& j, SessConfig& cfg);

void to_json(nlohmann::json& j, const OcclusionConfig& cfg);
void from_json(const nlohmann::json& j, OcclusionConfig& cfg);

void to_json(nlohmann::json& j, const RiseConfig& cfg);
void from_json(const nlohmann::json& j, RiseConfig& cfg);

void to_json(nlohmann::json& j, const CurveOptions& opts);
void from_json(const nlohmann::json& j, CurveOptions& opts);

/// Everything a command needs to rebuild its pipeline.
struct RunConfig {
  SessConfig sess;
  std::string base = "occlusion";  // occlusion | rise | external
  OcclusionConfig occlusion;
  RiseConfig rise;
  std::string adapter;
  CurveOptions curves;
};

void to_json(nlohmann::json& j, const RunConfig& cfg);
void from_json(const nlohmann::json& j, RunConfig& cfg);

/// Reads a JSON config file on top of `base`.
RunConfig load_run_config(const std::filesystem::path& path, RunConfig base = {});

std::unique_ptr<BaseSaliencyMethod> make_base_method(const RunConfig& cfg);

}  // namespace sess
