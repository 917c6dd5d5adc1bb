#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "facetouch/core/feature_matrix.hpp"
#include "facetouch/eval/stats.hpp"
#include "facetouch/pipeline/pipeline.hpp"

namespace facetouch {

inline constexpr double kSignificanceLevel = 0.01;

struct ReportRow {
  std::string method;
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  bool analytic = false;  // expectation rather than measured predictions
  bool precision_undefined = false;
  std::optional<McNemarResult> vs_zeror;
  std::optional<McNemarResult> vs_random;
};

struct ConfigurationReport {
  std::string name;
  Task task = Task::BinaryTouch;
  bool skipped = false;
  std::string notice;
  std::size_t test_rows = 0;
  // On-head share (binary) or mean per-region share over on-head rows.
  double prevalence = 0.0;
  std::vector<ReportRow> rows;  // Zero Rule, Random chance, then models
};

struct EvalReport {
  std::uint64_t random_seed = 0;
  std::vector<ConfigurationReport> configurations;
};

struct NamedModel {
  std::string name;
  const TrainedModel* model = nullptr;
};

struct EvaluationConfig {
  std::string name;
  const FeatureMatrix* test = nullptr;
  // Same task and training data; the first model's training summary feeds
  // the Zero Rule row.
  std::vector<NamedModel> models;
};

// Multi-label McNemar pairs each (frame, region) decision.
EvalReport build_report(const std::vector<EvaluationConfig>& configs, std::uint64_t random_seed);

std::string report_to_json(const EvalReport& report);
// Aligned plain-text tables, one per configuration.
std::string report_to_text(const EvalReport& report);

}  // namespace facetouch
