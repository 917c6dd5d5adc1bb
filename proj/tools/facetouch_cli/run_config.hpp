#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "facetouch/features/features.hpp"
#include "facetouch/pipeline/pipeline.hpp"
#include "facetouch/synth/synth.hpp"

namespace facetouch::cli {

inline constexpr const char* kToolVersion = "facetouch 1.0.0";

struct EvaluationSettings {
  std::uint64_t split_seed = 7;
  std::uint64_t random_seed = 7;
  std::vector<Variant> variants{Variant::RfPcaSvm};
};

// Every tunable in one file. Missing keys keep their defaults; unknown keys
// are rejected with InvalidConfig.
struct RunConfig {
  NormalizationParams normalization;
  HogConfig hog;
  bool include_hog = false;
  bool lenient_ingest = false;
  PipelineSpec pipeline;
  EvaluationSettings evaluation;
  SynthConfig synth;
};

RunConfig run_config_from_json(const nlohmann::json& j);
nlohmann::json run_config_to_json(const RunConfig& config);
RunConfig load_run_config(const std::filesystem::path& path);

// Hash of the canonical JSON form.
std::string config_hash(const RunConfig& config);

// "# "-less header lines naming the tool version, command, config hash and
// seeds. Written at the top of every output file.
std::vector<std::string> provenance_lines(const RunConfig& config, const std::string& command);

}  // namespace facetouch::cli
