#include "facetouch/imaging/face.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>

namespace facetouch {

namespace {

constexpr double kDeg = 180.0 / std::numbers::pi;

bool usable(const Keypoint2D& k, double min_conf) { return k.present && k.confidence >= min_conf; }

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::optional<std::pair<double, double>> landmark_mean(const FaceFrame& face, std::size_t first, std::size_t last) {
  double sx = 0.0, sy = 0.0;
  int n = 0;
  for (std::size_t i = first; i <= last; ++i) {
    if (!face.landmarks[i].present) continue;
    sx += face.landmarks[i].x;
    sy += face.landmarks[i].y;
    ++n;
  }
  if (n == 0) return std::nullopt;
  return std::pair{sx / n, sy / n};
}

}  // namespace

std::vector<FaceRegion> estimate_face_region(const VideoSequence& video, double min_confidence) {
  const std::size_t n = video.frames.size();
  std::vector<double> trunks;
  for (const auto& f : video.frames) {
    const auto& neck = f.pose[Joint::Neck];
    const auto& hip = f.pose[Joint::MidHip];
    if (usable(neck, min_confidence) && usable(hip, min_confidence)) {
      trunks.push_back(std::hypot(neck.x - hip.x, neck.y - hip.y));
    }
  }
  const double median_trunk = trunks.empty() ? 0.0 : median(trunks);

  std::vector<std::optional<FaceRegion>> direct(n);
  for (std::size_t t = 0; t < n; ++t) {
    const FrameRecord& f = video.frames[t];
    double sx = 0.0, sy = 0.0, sc = 0.0;
    int count = 0;
    for (Joint j : {Joint::Nose, Joint::LEye, Joint::REye, Joint::LEar, Joint::REar}) {
      const auto& k = f.pose[j];
      if (!usable(k, min_confidence)) continue;
      sx += k.x;
      sy += k.y;
      sc += k.confidence;
      ++count;
    }
    if (count == 0) continue;

    double size = 0.0;
    const auto& le = f.pose[Joint::LEar];
    const auto& re = f.pose[Joint::REar];
    if (usable(le, min_confidence) && usable(re, min_confidence)) {
      size = 2.2 * std::hypot(le.x - re.x, le.y - re.y);
    }
    if (!(size > 0.0)) {
      const auto& neck = f.pose[Joint::Neck];
      const auto& hip = f.pose[Joint::MidHip];
      if (usable(neck, min_confidence) && usable(hip, min_confidence)) {
        size = 1.5 * std::hypot(neck.x - hip.x, neck.y - hip.y);
      } else {
        size = 1.5 * median_trunk;
      }
    }
    if (!(size > 0.0)) continue;

    FaceRegion r;
    r.center = Keypoint2D::at(sx / count, sy / count, sc / count);
    r.size_px = size;
    r.provenance = RegionProvenance::FromPose;
    std::optional<std::pair<double, double>> right_eye, left_eye;
    if (f.face && f.face->source_space == FaceSpace::FullFrame) {
      right_eye = landmark_mean(*f.face, 36, 41);
      left_eye = landmark_mean(*f.face, 42, 47);
    }
    if (right_eye && left_eye) {
      r.provenance = RegionProvenance::FromFaceLandmarks;
    } else {
      right_eye.reset();
      left_eye.reset();
      const auto& rk = f.pose[Joint::REye];
      const auto& lk = f.pose[Joint::LEye];
      if (usable(rk, min_confidence) && usable(lk, min_confidence)) {
        right_eye = std::pair{rk.x, rk.y};
        left_eye = std::pair{lk.x, lk.y};
      }
    }
    if (right_eye && left_eye) {
      const double dx = left_eye->first - right_eye->first;
      const double dy = left_eye->second - right_eye->second;
      if (dx != 0.0 || dy != 0.0) r.rotation_deg = std::atan2(dy, dx) * kDeg;
    }
    direct[t] = r;
  }

  std::vector<FaceRegion> out(n);
  // Distance to the nearest direct region on each side; the earlier wins ties.
  std::vector<std::optional<std::size_t>> prev(n), next(n);
  std::optional<std::size_t> last;
  for (std::size_t t = 0; t < n; ++t) {
    if (direct[t]) last = t;
    prev[t] = last;
  }
  last.reset();
  for (std::size_t t = n; t-- > 0;) {
    if (direct[t]) last = t;
    next[t] = last;
  }
  if (n > 0 && !prev[n - 1]) {
    throw Error(ErrorCode::NoFaceAnywhere, "video " + video.video_id + " has no frame with a usable head keypoint");
  }
  for (std::size_t t = 0; t < n; ++t) {
    if (direct[t]) {
      out[t] = *direct[t];
      continue;
    }
    std::size_t src;
    if (prev[t] && next[t]) {
      src = (t - *prev[t] <= *next[t] - t) ? *prev[t] : *next[t];
    } else {
      src = prev[t] ? *prev[t] : *next[t];
    }
    out[t] = *direct[src];
    out[t].provenance = RegionProvenance::FromNeighborFrames;
  }
  return out;
}

Patch align_and_crop(const GrayImage& image, const FaceRegion& region, int target_w, int target_h) {
  if (target_w <= 0 || target_h <= 0) throw Error(ErrorCode::InvalidArgument, "crop size must be positive");
  if (image.width <= 0 || image.height <= 0) throw Error(ErrorCode::InvalidArgument, "empty image");
  Patch patch(target_w, target_h);
  const double s = region.size_px / target_w;
  const double theta = region.rotation_deg / kDeg;
  const double c = std::cos(theta);
  const double sn = std::sin(theta);
  const double cx = (target_w - 1) * 0.5;
  const double cy = (target_h - 1) * 0.5;
  auto pixel = [&](int x, int y) {
    x = std::clamp(x, 0, image.width - 1);
    y = std::clamp(y, 0, image.height - 1);
    return double(image.at(x, y));
  };
  for (int v = 0; v < target_h; ++v) {
    for (int u = 0; u < target_w; ++u) {
      const double ox = (u - cx) * s;
      const double oy = (v - cy) * s;
      const double x = region.center.x + c * ox - sn * oy;
      const double y = region.center.y + sn * ox + c * oy;
      const double fx = std::floor(x);
      const double fy = std::floor(y);
      const double ax = x - fx;
      const double ay = y - fy;
      const int x0 = int(fx);
      const int y0 = int(fy);
      const double top = (1 - ax) * pixel(x0, y0) + ax * pixel(x0 + 1, y0);
      const double bottom = (1 - ax) * pixel(x0, y0 + 1) + ax * pixel(x0 + 1, y0 + 1);
      patch.at(u, v) = (1 - ay) * top + ay * bottom;
    }
  }
  return patch;
}

Keypoint2D face_landmark_to_frame(const FaceFrame& face, std::size_t index, const FaceRegion& region) {
  Keypoint2D k = face.landmarks.at(index);
  if (face.source_space == FaceSpace::FullFrame || !k.present) return k;
  const double theta = region.rotation_deg / kDeg;
  const double ox = k.x - region.size_px * 0.5;
  const double oy = k.y - region.size_px * 0.5;
  k.x = region.center.x + std::cos(theta) * ox - std::sin(theta) * oy;
  k.y = region.center.y + std::sin(theta) * ox + std::cos(theta) * oy;
  return k;
}

std::pair<double, double> face_region_confidences(const FrameRecord& frame) {
  if (!frame.face) return {0.0, 0.0};
  auto mean_conf = [&](std::size_t first, std::size_t last) {
    double s = 0.0;
    for (std::size_t i = first; i <= last; ++i) s += frame.face->landmarks[i].present ? frame.face->landmarks[i].confidence : 0.0;
    return s / double(last - first + 1);
  };
  return {mean_conf(36, 47), mean_conf(48, 67)};
}

ImageSource disk_image_source() {
  return [](const FrameRecord& frame) -> std::optional<GrayImage> {
    if (!frame.image_ref) return std::nullopt;
    if (!std::filesystem::exists(*frame.image_ref)) return std::nullopt;
    return load_pgm(*frame.image_ref);
  };
}

FaceAppearance face_hog_features(const VideoSequence& video, const HogConfig& config, const ImageSource& images,
                                 Warnings* warnings) {
  const std::size_t n = video.frames.size();
  const std::size_t face_len = hog_length(config.face_width, config.face_height, config);
  const std::size_t half_len = hog_length(config.half_width, config.half_height, config);
  FaceAppearance out;
  out.hog = RowMatrix::Constant(Eigen::Index(n), Eigen::Index(face_len + 2 * half_len), kMissing);
  out.upper_conf.resize(n);
  out.lower_conf.resize(n);
  for (std::size_t t = 0; t < n; ++t) {
    std::tie(out.upper_conf[t], out.lower_conf[t]) = face_region_confidences(video.frames[t]);
  }

  std::vector<std::optional<GrayImage>> loaded(n);
  bool any_image = false;
  if (images) {
    for (std::size_t t = 0; t < n; ++t) {
      loaded[t] = images(video.frames[t]);
      any_image = any_image || loaded[t].has_value();
    }
  }
  if (!any_image) return out;

  std::vector<FaceRegion> regions;
  try {
    regions = estimate_face_region(video);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::NoFaceAnywhere) throw;
    if (warnings) warnings->add("video " + video.video_id + ": no face region; HOG features left missing");
    return out;
  }

  for (std::size_t t = 0; t < n; ++t) {
    if (!loaded[t]) continue;
    const GrayImage& image = *loaded[t];
    const FaceRegion& region = regions[t];
    const FrameRecord& frame = video.frames[t];

    const double theta = region.rotation_deg / kDeg;
    auto offset_center = [&](double fraction) {
      FaceRegion r = region;
      const double oy = fraction * region.size_px;
      r.center.x = region.center.x - std::sin(theta) * oy;
      r.center.y = region.center.y + std::cos(theta) * oy;
      return r;
    };
    auto landmark_center = [&](std::size_t first, std::size_t last) -> std::optional<FaceRegion> {
      if (!frame.face) return std::nullopt;
      double sx = 0.0, sy = 0.0;
      int count = 0;
      for (std::size_t i = first; i <= last; ++i) {
        const Keypoint2D k = face_landmark_to_frame(*frame.face, i, region);
        if (!k.present) continue;
        sx += k.x;
        sy += k.y;
        ++count;
      }
      if (count == 0) return std::nullopt;
      FaceRegion r = region;
      r.center.x = sx / count;
      r.center.y = sy / count;
      return r;
    };
    const FaceRegion upper = landmark_center(36, 47).value_or(offset_center(-0.15));
    const FaceRegion lower = landmark_center(48, 67).value_or(offset_center(0.25));

    const auto face_desc = hog(align_and_crop(image, region, config.face_width, config.face_height), config);
    const auto upper_desc = hog(align_and_crop(image, upper, config.half_width, config.half_height), config);
    const auto lower_desc = hog(align_and_crop(image, lower, config.half_width, config.half_height), config);
    auto row = out.hog.row(Eigen::Index(t));
    std::size_t c = 0;
    for (double v : face_desc) row(Eigen::Index(c++)) = v;
    for (double v : upper_desc) row(Eigen::Index(c++)) = v;
    for (double v : lower_desc) row(Eigen::Index(c++)) = v;
  }
  return out;
}

}  // namespace facetouch
