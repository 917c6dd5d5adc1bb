#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "facetouch/core/feature_matrix.hpp"
#include "facetouch/core/types.hpp"

namespace facetouch {

struct NormalizationParams {
  // Origin is always the Neck and the scale is the Neck-MidHip trunk length.
  double low_confidence_threshold = 0.1;
  int median_window = 5;
  int mean_window = 3;
  // Longest gap (frames) filled by interpolation; defaults to round(fps).
  std::optional<int> max_gap_frames;

  // Throws InvalidConfig for even/non-positive windows or thresholds outside [0,1).
  void validate() const;
  int max_gap_for(double fps) const;
};

// Translate every pixel-space landmark so the Neck is the origin and divide by
// the trunk length. Frames lacking Neck or MidHip use the video's median trunk
// length and the last known Neck position. Keypoints below the confidence
// threshold become missing. Throws NoUsableTrunk when no frame has both joints.
VideoSequence normalize_video(const VideoSequence& video, const NormalizationParams& params);

// Per coordinate channel: moving median, then moving mean, over present values;
// gaps up to max_gap frames are filled linearly (leading/trailing gaps take the
// nearest value). Applies to pose joints and to hand landmarks within frames
// where the hand was detected.
VideoSequence smooth_and_interpolate(const VideoSequence& video, const NormalizationParams& params);

// Channel-level filter used by smooth_and_interpolate. NaN marks missing.
std::vector<double> smooth_channel(std::span<const double> values, int median_window, int mean_window,
                                   int max_gap);

// Fills missing entries of a channel by linear interpolation between the
// nearest observed neighbours and nearest-value extension at the ends. Gaps
// longer than max_gap stay missing (pass a negative max_gap for no limit).
void interpolate_gaps(std::vector<double>& values, int max_gap);

// Per video and feature (HOG and confidence families exempt): values outside
// median +- 3*IQR become missing, then gaps are interpolated in frame order.
// With IQR = 0 a value is an outlier when |v - median| > 1e-6 * max(1, |median|).
FeatureMatrix clean_features(const FeatureMatrix& matrix);

struct ImputationStats {
  std::vector<double> means;
  std::vector<std::string> warnings;
};

// Column means over observed training values; never-observed columns get 0
// and a warning.
ImputationStats fit_imputation(const RowMatrix& train);
ImputationStats fit_imputation(const FeatureMatrix& train);
void apply_imputation_inplace(RowMatrix& values, const ImputationStats& stats);
FeatureMatrix apply_imputation(const FeatureMatrix& matrix, const ImputationStats& stats);

}  // namespace facetouch
