#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "facetouch/core/types.hpp"
#include "facetouch/ingest/dataset.hpp"
#include "facetouch/ingest/tables.hpp"

namespace facetouch {

struct SynthConfig {
  std::size_t n_videos = 40;
  // Infants own videos round-robin; 0 gives every video its own infant.
  std::size_t n_infants = 0;
  int frames_per_video = 200;
  double fps = 30.0;
  int image_width = 256;
  int image_height = 256;
  double noise_std_px = 1.0;
  double hand_dropout_prob = 0.1;
  double face_dropout_prob = 0.05;
  double pose_dropout_prob = 0.02;
  // Touch events per minute for an infant with activity multiplier 1.
  double touch_event_rate = 45.0;
  // When set, touch_event_rate is replaced by the calibrated rate.
  std::optional<double> target_prevalence;
  // eyes, ears, nose, mouth, cheeks
  std::array<double, kRegionCount> touch_region_distribution{0.2, 0.15, 0.2, 0.3, 0.15};
  double mullen_coupling = 0.6;
  double gm_coupling = 0.2;
  bool render_frames = true;
  std::uint64_t seed = 7;

  // Throws InvalidConfig.
  void validate() const;
  std::size_t infant_count() const { return n_infants ? n_infants : n_videos; }
};

// Generator constants; they define the oracle and are seed-stable.
namespace synth_constants {
inline constexpr double kTouchThreshold = 0.25;   // trunk lengths from the head ellipse
inline constexpr double kRegionThreshold = 0.10;  // trunk lengths to a landmark group
inline constexpr int kApproachMin = 5, kApproachMax = 20;
inline constexpr int kHoldMin = 3, kHoldMax = 30;
inline constexpr double kActivityMin = 0.25, kActivityMax = 1.75;
inline constexpr std::array<double, 4> kVisitAges{1.0, 3.0, 5.0, 7.0};
}  // namespace synth_constants

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

// True (noise-free) geometry of one frame, in pixels.
struct TrueFrame {
  std::array<Point2, kJointCount> joints;
  std::array<std::array<Point2, kHandLandmarkCount>, 2> hands;  // [left, right]
  std::array<Point2, kFaceLandmarkCount> face;
  Point2 head_center;
  double head_a = 0.0;  // semi-axes in pixels
  double head_b = 0.0;
  double head_angle = 0.0;  // radians
  double trunk = 0.0;
  double fingertip_head_distance = 0.0;  // trunk lengths, 0 inside the head ellipse
  bool on_head = false;
  std::array<bool, kRegionCount> regions{};
};

struct SynthVideo {
  std::string video_id;
  std::string infant_id;
  VideoSequence observed;  // noisy landmark stream
  std::vector<TrueFrame> truth;
  std::vector<LabelRecord> labels;
  double true_ratio = 0.0;
};

struct SynthDataset {
  std::vector<SynthVideo> videos;
  std::vector<MullenRecord> mullen;
  std::map<std::string, double> infant_true_ratio;
  double touch_event_rate = 0.0;  // rate actually used
};

std::string synth_video_id(std::size_t index);
std::string synth_infant_id(std::size_t index);

// Deterministic labels from true geometry.
std::vector<LabelRecord> oracle_labels(const SynthVideo& video);

// Ground-truth geometry and noisy observations for one video.
SynthVideo generate_video(const SynthConfig& config, std::size_t index, double touch_event_rate);

// Bisection on the event rate so that ground-truth on-head prevalence over the
// configured videos matches the target.
double calibrate_touch_rate(const SynthConfig& config, double target_prevalence);

// Everything except images, in memory.
SynthDataset generate_in_memory(const SynthConfig& config);

GrayImage render_frame(const TrueFrame& frame, const SynthConfig& config, std::uint64_t noise_seed);

// Writes manifest.json, landmarks/<vid>.landmarks.jsonl, labels/<vid>.csv,
// frames/<vid>/frame_<i>.pgm (when rendering) and mullen.csv under out_dir.
// Returns the manifest as written.
DatasetManifest generate(const SynthConfig& config, const std::filesystem::path& out_dir,
                         const std::vector<std::string>& provenance = {});

}  // namespace facetouch
