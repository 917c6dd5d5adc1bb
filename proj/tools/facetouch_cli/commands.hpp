#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "facetouch/core/error.hpp"
#include "facetouch/eval/report.hpp"
#include "facetouch/eval/stats.hpp"
#include "facetouch/ingest/dataset.hpp"
#include "facetouch_cli/run_config.hpp"

namespace facetouch::cli {

namespace fs = std::filesystem;

// A manifest (file, directory holding manifest.json, or path missing its
// .json suffix) or a feature CSV, optionally suffixed with "#first" or
// "#second" to keep one grouped half.
struct InputRef {
  enum class Half { All, First, Second };
  fs::path path;
  Half half = Half::All;
};

InputRef parse_input_ref(const std::string& text);
fs::path resolve_manifest_path(const fs::path& path);

struct LoadedInput {
  FeatureMatrix matrix;
  std::map<std::string, std::string> infant_of;  // video id -> infant id (manifests only)
};

// Extracts features from every video of a manifest and attaches labels when
// a labels file exists.
FeatureMatrix extract_manifest(const DatasetManifest& manifest, const RunConfig& config, Warnings* warnings = nullptr);
LoadedInput load_input(const std::string& ref, const RunConfig& config, Warnings* warnings = nullptr);

DatasetManifest cmd_synth(const RunConfig& config, const fs::path& out_dir);
// Returns the number of feature rows written.
std::size_t cmd_extract(const RunConfig& config, const fs::path& manifest, const fs::path& out_csv,
                        Warnings* warnings = nullptr);
TrainedModel cmd_train(const RunConfig& config, const std::vector<std::string>& inputs, const fs::path& out_model);

struct EvaluateArgs {
  // Direct mode: saved models scored on one test input.
  std::vector<fs::path> models;
  std::string test;
  std::string name = "evaluation";
  // Protocol mode: A/B cross-dataset configurations, models trained here.
  std::optional<std::string> dataset_a;
  std::optional<std::string> dataset_b;
  fs::path out;                     // JSON report
  std::optional<fs::path> out_text;  // aligned tables
};

// Protocol mode runs train A -> test B, train B -> test A and
// train A + half of B -> test the other half (split by video with
// evaluation.split_seed), one model per configured variant.
EvalReport cmd_evaluate(const RunConfig& config, const EvaluateArgs& args);

// Writes video_id,infant_id,frame_index,on_head (+ region flags for
// multi-label models). `infant_manifest` maps videos to infants when the
// input is a feature CSV. Returns the number of rows.
std::size_t cmd_predict(const RunConfig& config, const fs::path& model, const std::string& input, const fs::path& out_csv,
                        const std::optional<fs::path>& infant_manifest = std::nullopt);

struct InfantSummary {
  std::string infant_id;
  std::size_t frames = 0;
  double touch_ratio = 0.0;
  std::optional<double> fm_rate;
  std::optional<double> gm_rate;
};

struct CorrelationReport {
  std::vector<InfantSummary> infants;
  std::optional<CorrelationResult> fm;
  std::optional<CorrelationResult> gm;
  std::vector<std::string> notices;
};

CorrelationReport cmd_correlate(const RunConfig& config, const fs::path& predictions, const fs::path& mullen,
                                const std::optional<fs::path>& out, double age_cutoff_months = 5.0);

}  // namespace facetouch::cli
