#include "facetouch/core/feature_matrix.hpp"

#include <cstring>
#include <unordered_map>
#include <unordered_set>

#include "facetouch/core/error.hpp"

namespace facetouch {

FeatureMatrix::FeatureMatrix(FeatureManifest m, std::size_t rows)
    : manifest(std::move(m)),
      values(RowMatrix::Constant(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(manifest.size()),
                                 kMissing)),
      video_ids(rows),
      frame_indices(rows, 0) {}

bool FeatureMatrix::fully_labeled() const {
  if (labels.size() != rows()) return false;
  for (const auto& l : labels) {
    if (!l) return false;
  }
  return true;
}

void FeatureMatrix::validate() const {
  if (cols() != manifest.size()) {
    throw Error(ErrorCode::ManifestMismatch, "matrix has " + std::to_string(cols()) +
                                                 " columns but manifest has " + std::to_string(manifest.size()));
  }
  if (video_ids.size() != rows() || frame_indices.size() != rows()) {
    throw Error(ErrorCode::InvalidArgument, "row keys do not match row count");
  }
  if (!labels.empty()) {
    if (labels.size() != rows()) throw Error(ErrorCode::InvalidArgument, "label count does not match row count");
    for (std::size_t i = 0; i < rows(); ++i) {
      if (!labels[i]) continue;
      if (labels[i]->video_id != video_ids[i] || labels[i]->frame_index != frame_indices[i]) {
        throw Error(ErrorCode::InvalidArgument, "label key mismatch at row " + std::to_string(i));
      }
    }
  }
}

FeatureMatrix FeatureMatrix::select_rows(std::span<const std::size_t> rows_sel) const {
  FeatureMatrix out(manifest, rows_sel.size());
  if (!labels.empty()) out.labels.resize(rows_sel.size());
  for (std::size_t k = 0; k < rows_sel.size(); ++k) {
    const std::size_t r = rows_sel[k];
    out.values.row(Eigen::Index(k)) = values.row(Eigen::Index(r));
    out.video_ids[k] = video_ids[r];
    out.frame_indices[k] = frame_indices[r];
    if (!labels.empty()) out.labels[k] = labels[r];
  }
  return out;
}

FeatureMatrix FeatureMatrix::select_columns(std::span<const std::size_t> cols_sel) const {
  std::unordered_map<std::size_t, std::size_t> remap;
  for (std::size_t k = 0; k < cols_sel.size(); ++k) remap.emplace(cols_sel[k], k);
  std::vector<FeatureEntry> entries;
  entries.reserve(cols_sel.size());
  for (std::size_t c : cols_sel) {
    FeatureEntry e = manifest[c];
    if (e.mirror_partner) {
      auto it = remap.find(*e.mirror_partner);
      e.mirror_partner = it == remap.end() ? std::nullopt : std::optional<std::size_t>(it->second);
    }
    entries.push_back(std::move(e));
  }
  FeatureMatrix out(FeatureManifest(std::move(entries)), rows());
  for (std::size_t k = 0; k < cols_sel.size(); ++k) {
    out.values.col(Eigen::Index(k)) = values.col(Eigen::Index(cols_sel[k]));
  }
  out.video_ids = video_ids;
  out.frame_indices = frame_indices;
  out.labels = labels;
  return out;
}

std::vector<std::string> FeatureMatrix::distinct_videos() const {
  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  for (const auto& v : video_ids) {
    if (seen.insert(v).second) out.push_back(v);
  }
  return out;
}

std::vector<std::size_t> FeatureMatrix::rows_of_videos(const std::vector<std::string>& videos) const {
  const std::unordered_set<std::string> wanted(videos.begin(), videos.end());
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < rows(); ++i) {
    if (wanted.count(video_ids[i])) out.push_back(i);
  }
  return out;
}

bool FeatureMatrix::operator==(const FeatureMatrix& other) const {
  if (!(manifest == other.manifest) || video_ids != other.video_ids || frame_indices != other.frame_indices ||
      labels != other.labels || values.rows() != other.values.rows() || values.cols() != other.values.cols()) {
    return false;
  }
  // Bitwise comparison so that missing cells (NaN) compare equal.
  return values.size() == 0 ||
         std::memcmp(values.data(), other.values.data(), sizeof(double) * std::size_t(values.size())) == 0;
}

FeatureMatrix concat(const FeatureMatrix& a, const FeatureMatrix& b) {
  if (!(a.manifest == b.manifest)) {
    throw Error(ErrorCode::ManifestMismatch, "cannot concatenate matrices with different manifests");
  }
  FeatureMatrix out(a.manifest, a.rows() + b.rows());
  if (a.rows()) out.values.topRows(Eigen::Index(a.rows())) = a.values;
  if (b.rows()) out.values.bottomRows(Eigen::Index(b.rows())) = b.values;
  std::copy(a.video_ids.begin(), a.video_ids.end(), out.video_ids.begin());
  std::copy(b.video_ids.begin(), b.video_ids.end(), out.video_ids.begin() + std::ptrdiff_t(a.rows()));
  std::copy(a.frame_indices.begin(), a.frame_indices.end(), out.frame_indices.begin());
  std::copy(b.frame_indices.begin(), b.frame_indices.end(), out.frame_indices.begin() + std::ptrdiff_t(a.rows()));
  if (!a.labels.empty() || !b.labels.empty()) {
    out.labels.resize(out.rows());
    for (std::size_t i = 0; i < a.labels.size(); ++i) out.labels[i] = a.labels[i];
    for (std::size_t i = 0; i < b.labels.size(); ++i) out.labels[a.rows() + i] = b.labels[i];
  }
  return out;
}

FeatureMatrix concat_all(const std::vector<FeatureMatrix>& blocks) {
  if (blocks.empty()) throw Error(ErrorCode::EmptyInput, "nothing to concatenate");
  std::size_t rows = 0;
  bool labelled = false;
  for (const auto& b : blocks) {
    if (!(b.manifest == blocks.front().manifest)) {
      throw Error(ErrorCode::ManifestMismatch, "cannot concatenate matrices with different manifests");
    }
    rows += b.rows();
    labelled = labelled || !b.labels.empty();
  }
  FeatureMatrix out(blocks.front().manifest, rows);
  if (labelled) out.labels.resize(rows);
  std::size_t at = 0;
  for (const auto& b : blocks) {
    if (b.rows()) out.values.middleRows(Eigen::Index(at), Eigen::Index(b.rows())) = b.values;
    for (std::size_t i = 0; i < b.rows(); ++i) {
      out.video_ids[at + i] = b.video_ids[i];
      out.frame_indices[at + i] = b.frame_indices[i];
      if (!b.labels.empty()) out.labels[at + i] = b.labels[i];
    }
    at += b.rows();
  }
  return out;
}

FeatureMatrix hconcat(const FeatureMatrix& left, const FeatureMatrix& right) {
  if (left.rows() != right.rows() || left.video_ids != right.video_ids ||
      left.frame_indices != right.frame_indices) {
    throw Error(ErrorCode::ManifestMismatch, "cannot join matrices with different row keys");
  }
  std::vector<FeatureEntry> entries = left.manifest.entries();
  const std::size_t offset = entries.size();
  for (FeatureEntry e : right.manifest.entries()) {
    if (e.mirror_partner) e.mirror_partner = *e.mirror_partner + offset;
    entries.push_back(std::move(e));
  }
  FeatureMatrix out(FeatureManifest(std::move(entries)), left.rows());
  out.values.leftCols(Eigen::Index(left.cols())) = left.values;
  out.values.rightCols(Eigen::Index(right.cols())) = right.values;
  out.video_ids = left.video_ids;
  out.frame_indices = left.frame_indices;
  out.labels = left.labels.empty() ? right.labels : left.labels;
  return out;
}

}  // namespace facetouch
