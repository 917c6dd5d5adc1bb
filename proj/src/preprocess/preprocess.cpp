#include "facetouch/preprocess/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "facetouch/core/error.hpp"

namespace facetouch {

void NormalizationParams::validate() const {
  if (median_window < 1 || median_window % 2 == 0 || mean_window < 1 || mean_window % 2 == 0) {
    throw Error(ErrorCode::InvalidConfig, "smoothing windows must be odd and >= 1");
  }
  if (!(low_confidence_threshold >= 0.0 && low_confidence_threshold < 1.0)) {
    throw Error(ErrorCode::InvalidConfig, "confidence threshold must lie in [0, 1)");
  }
  if (max_gap_frames && *max_gap_frames < 0) throw Error(ErrorCode::InvalidConfig, "max_gap_frames must be >= 0");
}

int NormalizationParams::max_gap_for(double fps) const {
  return max_gap_frames ? *max_gap_frames : static_cast<int>(std::lround(fps));
}

namespace {

double median_of(std::vector<double>& v) {
  const std::size_t n = v.size();
  const std::size_t mid = n / 2;
  std::nth_element(v.begin(), v.begin() + std::ptrdiff_t(mid), v.end());
  const double hi = v[mid];
  if (n % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + std::ptrdiff_t(mid));
  return 0.5 * (lo + hi);
}

// Linear-interpolated quantile of sorted data (type 7).
double quantile_sorted(const std::vector<double>& sorted, double p) {
  const double pos = p * double(sorted.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - double(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

void drop_low_confidence(Keypoint2D& k, double threshold) {
  if (k.present && k.confidence < threshold) k.present = false;
}

Keypoint2D normalized(const Keypoint2D& k, double ox, double oy, double scale) {
  Keypoint2D out = k;
  if (k.present) {
    out.x = (k.x - ox) / scale;
    out.y = (k.y - oy) / scale;
  }
  return out;
}

}  // namespace

VideoSequence normalize_video(const VideoSequence& video, const NormalizationParams& params) {
  params.validate();
  if (video.frames.empty()) throw Error(ErrorCode::InvalidArgument, "video " + video.video_id + " has no frames");
  const double thr = params.low_confidence_threshold;

  VideoSequence out = video;
  for (auto& f : out.frames) {
    for (auto& k : f.pose.keypoints) drop_low_confidence(k, thr);
    for (HandSide side : {HandSide::Left, HandSide::Right}) {
      if (auto& hand = f.hand(side)) {
        for (auto& k : hand->landmarks) drop_low_confidence(k, thr);
      }
    }
    if (f.face) {
      for (auto& k : f.face->landmarks) drop_low_confidence(k, thr);
    }
  }

  std::vector<double> trunks;
  std::vector<std::optional<double>> frame_trunk(out.frames.size());
  for (std::size_t i = 0; i < out.frames.size(); ++i) {
    const auto& neck = out.frames[i].pose[Joint::Neck];
    const auto& hip = out.frames[i].pose[Joint::MidHip];
    if (neck.present && hip.present) {
      const double t = std::hypot(neck.x - hip.x, neck.y - hip.y);
      if (t > 0.0) {
        frame_trunk[i] = t;
        trunks.push_back(t);
      }
    }
  }
  if (trunks.empty()) {
    throw Error(ErrorCode::NoUsableTrunk, "video " + video.video_id + ": no frame has both Neck and MidHip");
  }
  const double median_trunk = median_of(trunks);

  // Origin fallback: last known Neck, or the first one for leading frames.
  std::optional<std::pair<double, double>> last_neck;
  for (const auto& f : out.frames) {
    if (f.pose[Joint::Neck].present) {
      last_neck = {f.pose[Joint::Neck].x, f.pose[Joint::Neck].y};
      break;
    }
  }

  for (std::size_t i = 0; i < out.frames.size(); ++i) {
    FrameRecord& f = out.frames[i];
    if (f.pose[Joint::Neck].present) last_neck = {f.pose[Joint::Neck].x, f.pose[Joint::Neck].y};
    const double ox = last_neck->first;
    const double oy = last_neck->second;
    const double scale = frame_trunk[i].value_or(median_trunk);
    for (auto& k : f.pose.keypoints) k = normalized(k, ox, oy, scale);
    for (HandSide side : {HandSide::Left, HandSide::Right}) {
      if (auto& hand = f.hand(side)) {
        for (auto& k : hand->landmarks) k = normalized(k, ox, oy, scale);
      }
    }
    if (f.face && f.face->source_space == FaceSpace::FullFrame) {
      for (auto& k : f.face->landmarks) k = normalized(k, ox, oy, scale);
    }
  }
  return out;
}

void interpolate_gaps(std::vector<double>& v, int max_gap) {
  const std::size_t n = v.size();
  const std::size_t limit = max_gap < 0 ? n : std::size_t(max_gap);
  std::size_t i = 0;
  while (i < n) {
    if (!is_missing(v[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < n && is_missing(v[j])) ++j;
    const std::size_t len = j - i;
    const bool has_left = i > 0;
    const bool has_right = j < n;
    if (len <= limit && (has_left || has_right)) {
      if (has_left && has_right) {
        const double a = v[i - 1];
        const double b = v[j];
        for (std::size_t t = i; t < j; ++t) {
          const double frac = double(t - (i - 1)) / double(len + 1);
          v[t] = a + frac * (b - a);
        }
      } else {
        const double fill = has_left ? v[i - 1] : v[j];
        for (std::size_t t = i; t < j; ++t) v[t] = fill;
      }
    }
    i = j;
  }
}

std::vector<double> smooth_channel(std::span<const double> values, int median_window, int mean_window,
                                   int max_gap) {
  const std::size_t n = values.size();
  std::vector<double> med(n, kMissing);
  std::vector<double> window;
  const std::ptrdiff_t hm = median_window / 2;
  const std::ptrdiff_t ha = mean_window / 2;
  for (std::ptrdiff_t t = 0; t < std::ptrdiff_t(n); ++t) {
    if (is_missing(values[std::size_t(t)])) continue;
    window.clear();
    for (std::ptrdiff_t s = std::max<std::ptrdiff_t>(0, t - hm); s <= std::min<std::ptrdiff_t>(n - 1, t + hm); ++s) {
      if (!is_missing(values[std::size_t(s)])) window.push_back(values[std::size_t(s)]);
    }
    med[std::size_t(t)] = median_of(window);
  }
  std::vector<double> out(n, kMissing);
  for (std::ptrdiff_t t = 0; t < std::ptrdiff_t(n); ++t) {
    if (is_missing(med[std::size_t(t)])) continue;
    double sum = 0.0;
    int count = 0;
    for (std::ptrdiff_t s = std::max<std::ptrdiff_t>(0, t - ha); s <= std::min<std::ptrdiff_t>(n - 1, t + ha); ++s) {
      if (!is_missing(med[std::size_t(s)])) {
        sum += med[std::size_t(s)];
        ++count;
      }
    }
    out[std::size_t(t)] = sum / count;
  }
  interpolate_gaps(out, max_gap);
  return out;
}

namespace {

// Smooths x/y channels of a keypoint track; `writable[t]` selects frames whose
// slot may receive a value.
template <typename Get>
void smooth_track(std::vector<FrameRecord>& frames, Get get, const std::vector<bool>& writable,
                  const NormalizationParams& params, int max_gap) {
  const std::size_t n = frames.size();
  std::vector<double> xs(n, kMissing), ys(n, kMissing), conf(n, kMissing);
  for (std::size_t t = 0; t < n; ++t) {
    const Keypoint2D* k = get(frames[t]);
    if (k && k->present) {
      xs[t] = k->x;
      ys[t] = k->y;
      conf[t] = k->confidence;
    }
  }
  const auto sx = smooth_channel(xs, params.median_window, params.mean_window, max_gap);
  const auto sy = smooth_channel(ys, params.median_window, params.mean_window, max_gap);
  // Confidence of filled frames: the lower of the bracketing observations.
  std::vector<double> lo = conf, hi = conf;
  for (std::size_t t = 1; t < n; ++t) {
    if (is_missing(lo[t])) lo[t] = lo[t - 1];
  }
  for (std::size_t t = n; t-- > 1;) {
    if (is_missing(hi[t - 1])) hi[t - 1] = hi[t];
  }
  for (std::size_t t = 0; t < n; ++t) {
    if (!writable[t]) continue;
    Keypoint2D* k = const_cast<Keypoint2D*>(get(frames[t]));
    if (!k) continue;
    if (is_missing(sx[t]) || is_missing(sy[t])) {
      k->present = false;
      continue;
    }
    if (!k->present) {
      const double a = is_missing(lo[t]) ? hi[t] : lo[t];
      const double b = is_missing(hi[t]) ? lo[t] : hi[t];
      k->confidence = std::min(a, b);
    }
    k->x = sx[t];
    k->y = sy[t];
    k->present = true;
  }
}

}  // namespace

VideoSequence smooth_and_interpolate(const VideoSequence& video, const NormalizationParams& params) {
  params.validate();
  VideoSequence out = video;
  const int max_gap = params.max_gap_for(video.fps);
  const std::vector<bool> all(out.frames.size(), true);
  for (Joint j : kAllJoints) {
    smooth_track(
        out.frames, [j](const FrameRecord& f) -> const Keypoint2D* { return &f.pose[j]; }, all, params, max_gap);
  }
  for (HandSide side : {HandSide::Left, HandSide::Right}) {
    std::vector<bool> has_hand(out.frames.size());
    for (std::size_t t = 0; t < out.frames.size(); ++t) has_hand[t] = out.frames[t].hand(side).has_value();
    for (std::size_t l = 0; l < kHandLandmarkCount; ++l) {
      smooth_track(
          out.frames,
          [side, l](const FrameRecord& f) -> const Keypoint2D* {
            const auto& h = f.hand(side);
            return h ? &h->landmarks[l] : nullptr;
          },
          has_hand, params, max_gap);
    }
  }
  return out;
}

FeatureMatrix clean_features(const FeatureMatrix& matrix) {
  FeatureMatrix out = matrix;
  std::map<std::string, std::vector<std::size_t>> by_video;
  for (std::size_t i = 0; i < matrix.rows(); ++i) by_video[matrix.video_ids[i]].push_back(i);
  for (auto& [vid, rows] : by_video) {
    std::stable_sort(rows.begin(), rows.end(), [&](std::size_t a, std::size_t b) {
      return matrix.frame_indices[a] < matrix.frame_indices[b];
    });
  }

  std::vector<double> column, observed;
  for (std::size_t c = 0; c < matrix.cols(); ++c) {
    const FeatureFamily fam = matrix.manifest[c].family;
    if (fam == FeatureFamily::HOG || fam == FeatureFamily::HandConfidence ||
        fam == FeatureFamily::FaceRegionConfidence) {
      continue;
    }
    for (const auto& [vid, rows] : by_video) {
      column.resize(rows.size());
      observed.clear();
      for (std::size_t k = 0; k < rows.size(); ++k) {
        column[k] = matrix.values(Eigen::Index(rows[k]), Eigen::Index(c));
        if (!is_missing(column[k])) observed.push_back(column[k]);
      }
      if (observed.empty()) continue;
      std::sort(observed.begin(), observed.end());
      const double med = quantile_sorted(observed, 0.5);
      const double iqr = quantile_sorted(observed, 0.75) - quantile_sorted(observed, 0.25);
      for (double& v : column) {
        if (is_missing(v)) continue;
        const bool outlier = iqr > 0.0 ? (v < med - 3.0 * iqr || v > med + 3.0 * iqr)
                                       : std::abs(v - med) > 1e-6 * std::max(1.0, std::abs(med));
        if (outlier) v = kMissing;
      }
      interpolate_gaps(column, -1);
      for (std::size_t k = 0; k < rows.size(); ++k) {
        out.values(Eigen::Index(rows[k]), Eigen::Index(c)) = column[k];
      }
    }
  }
  return out;
}

ImputationStats fit_imputation(const RowMatrix& train) {
  ImputationStats stats;
  stats.means.assign(std::size_t(train.cols()), 0.0);
  for (Eigen::Index c = 0; c < train.cols(); ++c) {
    double sum = 0.0;
    std::size_t count = 0;
    for (Eigen::Index r = 0; r < train.rows(); ++r) {
      const double v = train(r, c);
      if (!is_missing(v)) {
        sum += v;
        ++count;
      }
    }
    if (count == 0) {
      stats.warnings.push_back("feature column " + std::to_string(c) + " never observed in training; imputing 0");
    } else {
      stats.means[std::size_t(c)] = sum / double(count);
    }
  }
  return stats;
}

ImputationStats fit_imputation(const FeatureMatrix& train) {
  ImputationStats stats = fit_imputation(train.values);
  for (auto& w : stats.warnings) {
    const auto pos = w.find("column ");
    const std::size_t c = std::stoul(w.substr(pos + 7));
    w = "feature " + train.manifest[c].name + " never observed in training; imputing 0";
  }
  return stats;
}

void apply_imputation_inplace(RowMatrix& values, const ImputationStats& stats) {
  if (std::size_t(values.cols()) != stats.means.size()) {
    throw Error(ErrorCode::DimensionMismatch, "imputation statistics do not match the matrix width");
  }
  for (Eigen::Index r = 0; r < values.rows(); ++r) {
    for (Eigen::Index c = 0; c < values.cols(); ++c) {
      if (is_missing(values(r, c))) values(r, c) = stats.means[std::size_t(c)];
    }
  }
}

FeatureMatrix apply_imputation(const FeatureMatrix& matrix, const ImputationStats& stats) {
  FeatureMatrix out = matrix;
  apply_imputation_inplace(out.values, stats);
  return out;
}

}  // namespace facetouch
