#pragma once

#include <array>
#include <vector>

#include "facetouch/core/error.hpp"
#include "facetouch/core/feature_matrix.hpp"
#include "facetouch/core/types.hpp"
#include "facetouch/imaging/face.hpp"
#include "facetouch/imaging/hog.hpp"
#include "facetouch/preprocess/preprocess.hpp"

namespace facetouch {

inline constexpr std::size_t kBodyDistanceCount = 36;
inline constexpr std::size_t kAngleCount = 4;
inline constexpr std::size_t kHandFeatureCount = 92;  // 90 distances + 2 confidences
inline constexpr std::size_t kTemporalCount = 36;

struct TemporalWindowSpec {
  std::vector<int> windows{1, 3, 5};
  double fps = 30.0;

  void validate() const;
};

// All functions below expect normalized landmarks and use the manifest's
// column order for their family. Missing values are NaN.

// (dx, dy, dist) from each wrist to nose, neck, eyes and ears, with
// d = target - wrist.
std::array<double, kBodyDistanceCount> body_distance_features(const PoseFrame& pose);

// Interior angles in degrees at elbowL, elbowR, shoulderL, shoulderR. A
// zero-length bone yields a missing value and a warning.
std::array<double, kAngleCount> angle_features(const PoseFrame& pose, Warnings* warnings = nullptr);

// Fingertip-to-face distances for both hands followed by the two detection
// confidences (0 for an absent hand, whose distances are missing).
std::array<double, kHandFeatureCount> hand_distance_features(const FrameRecord& frame);

// frames x 36 matrix: displacement, speed and acceleration of the wrists and
// elbows over each window, in trunk lengths per second (and per second^2).
RowMatrix temporal_features(const VideoSequence& video, const TemporalWindowSpec& spec);

// Per-frame upper/lower face-region confidences.
struct FaceConfidence {
  double upper = 0.0;
  double lower = 0.0;
};

// frames x 170 matrix in manifest order for a preprocessed video.
FeatureMatrix assemble_frame_features(const VideoSequence& video, const std::vector<FaceConfidence>& face_conf,
                                      const TemporalWindowSpec& spec, Warnings* warnings = nullptr);

struct ExtractionOptions {
  NormalizationParams normalization;
  HogConfig hog;
  bool include_hog = false;
  ImageSource images;  // only consulted when include_hog is set
};

// Raw pixel-space video to cleaned feature rows: normalization, smoothing,
// per-frame features, face appearance, per-video outlier cleaning.
FeatureMatrix extract_video_features(const VideoSequence& raw, const ExtractionOptions& options,
                                     Warnings* warnings = nullptr);

// Attaches labels keyed by (video_id, frame_index). Rows without a label keep
// an empty slot.
void attach_labels(FeatureMatrix& matrix, const std::vector<LabelRecord>& labels);

// One mirrored feature row: value i is the partner's value, negated for
// signed x differences.
void mirror_row(const FeatureManifest& manifest, const double* in, double* out);

// Original rows followed by their mirrored copies; labels are copied.
FeatureMatrix flip_augment(const FeatureMatrix& matrix);

}  // namespace facetouch
