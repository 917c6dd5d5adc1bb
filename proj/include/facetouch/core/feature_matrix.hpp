#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "facetouch/core/manifest.hpp"
#include "facetouch/core/types.hpp"

namespace facetouch {

// Missing values are quiet NaNs throughout the feature pipeline.
inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();
inline bool is_missing(double v) { return std::isnan(v); }

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct FeatureMatrix {
  FeatureManifest manifest;
  RowMatrix values;  // rows x manifest.size()
  std::vector<std::string> video_ids;
  std::vector<int> frame_indices;
  // Either empty or one entry per row.
  std::vector<std::optional<LabelRecord>> labels;

  FeatureMatrix() = default;
  FeatureMatrix(FeatureManifest m, std::size_t rows);

  std::size_t rows() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t cols() const { return static_cast<std::size_t>(values.cols()); }
  // True when every row carries a label.
  bool fully_labeled() const;

  // Throws ManifestMismatch / InvalidArgument when shapes or label keys disagree.
  void validate() const;

  FeatureMatrix select_rows(std::span<const std::size_t> rows) const;
  // Subset of columns; the manifest is rebuilt without mirror metadata for
  // dropped partners.
  FeatureMatrix select_columns(std::span<const std::size_t> cols) const;
  // Distinct video ids in first-appearance order.
  std::vector<std::string> distinct_videos() const;
  std::vector<std::size_t> rows_of_videos(const std::vector<std::string>& videos) const;

  bool operator==(const FeatureMatrix& other) const;
};

// Vertical concatenation; manifests must match.
FeatureMatrix concat(const FeatureMatrix& a, const FeatureMatrix& b);
// Concatenation of many blocks in one pass. Throws EmptyInput for no blocks.
FeatureMatrix concat_all(const std::vector<FeatureMatrix>& blocks);

// Appends the columns of `right` to `left` row by row (same row keys).
FeatureMatrix hconcat(const FeatureMatrix& left, const FeatureMatrix& right);

}  // namespace facetouch
