#include "facetouch/features/features.hpp"

#include <cmath>
#include <map>
#include <numbers>

namespace facetouch {

namespace {

constexpr std::array<Joint, 6> kBodyTargets{Joint::Nose, Joint::Neck, Joint::LEye, Joint::REye, Joint::LEar, Joint::REar};
constexpr std::array<Joint, 2> kWrists{Joint::LWrist, Joint::RWrist};
constexpr std::array<Joint, 3> kHandTargets{Joint::LEye, Joint::REye, Joint::Nose};
constexpr std::array<Joint, 4> kTemporalJoints{Joint::LWrist, Joint::RWrist, Joint::LElbow, Joint::RElbow};

void write_triple(const Keypoint2D& from, const Keypoint2D& to, double* out) {
  if (!from.present || !to.present) {
    out[0] = out[1] = out[2] = kMissing;
    return;
  }
  const double dx = to.x - from.x;
  const double dy = to.y - from.y;
  out[0] = dx;
  out[1] = dy;
  out[2] = std::sqrt(dx * dx + dy * dy);
}

double joint_angle(const Keypoint2D& a, const Keypoint2D& vertex, const Keypoint2D& b, const char* name,
                   Warnings* warnings) {
  if (!a.present || !vertex.present || !b.present) return kMissing;
  const double ux = a.x - vertex.x, uy = a.y - vertex.y;
  const double vx = b.x - vertex.x, vy = b.y - vertex.y;
  const double nu = std::hypot(ux, uy);
  const double nv = std::hypot(vx, vy);
  if (nu == 0.0 || nv == 0.0) {
    if (warnings) warnings->add(std::string("zero-length bone at ") + name + "; angle missing");
    return kMissing;
  }
  // atan2 of cross and dot is accurate near 0 and 180 degrees.
  const double cross = ux * vy - uy * vx;
  const double dot = ux * vx + uy * vy;
  return std::atan2(std::abs(cross), dot) * 180.0 / std::numbers::pi;
}

}  // namespace

void TemporalWindowSpec::validate() const {
  if (windows.empty()) throw Error(ErrorCode::InvalidConfig, "no temporal windows");
  for (int w : windows) {
    if (w < 1) throw Error(ErrorCode::InvalidConfig, "temporal windows must be >= 1");
  }
  if (!(fps > 0.0)) throw Error(ErrorCode::InvalidConfig, "fps must be positive");
}

std::array<double, kBodyDistanceCount> body_distance_features(const PoseFrame& pose) {
  std::array<double, kBodyDistanceCount> out{};
  double* p = out.data();
  for (Joint wrist : kWrists) {
    for (Joint target : kBodyTargets) {
      write_triple(pose[wrist], pose[target], p);
      p += 3;
    }
  }
  return out;
}

std::array<double, kAngleCount> angle_features(const PoseFrame& pose, Warnings* warnings) {
  return {
      joint_angle(pose[Joint::LShoulder], pose[Joint::LElbow], pose[Joint::LWrist], "elbowL", warnings),
      joint_angle(pose[Joint::RShoulder], pose[Joint::RElbow], pose[Joint::RWrist], "elbowR", warnings),
      joint_angle(pose[Joint::Neck], pose[Joint::LShoulder], pose[Joint::LElbow], "shoulderL", warnings),
      joint_angle(pose[Joint::Neck], pose[Joint::RShoulder], pose[Joint::RElbow], "shoulderR", warnings),
  };
}

std::array<double, kHandFeatureCount> hand_distance_features(const FrameRecord& frame) {
  std::array<double, kHandFeatureCount> out{};
  double* p = out.data();
  for (HandSide side : {HandSide::Left, HandSide::Right}) {
    const auto& hand = frame.hand(side);
    for (std::size_t tip : kFingertipIndices) {
      for (Joint target : kHandTargets) {
        if (hand) {
          write_triple(hand->landmarks[tip], frame.pose[target], p);
        } else {
          p[0] = p[1] = p[2] = kMissing;
        }
        p += 3;
      }
    }
  }
  out[90] = frame.left_hand ? frame.left_hand->detection_confidence : 0.0;
  out[91] = frame.right_hand ? frame.right_hand->detection_confidence : 0.0;
  return out;
}

RowMatrix temporal_features(const VideoSequence& video, const TemporalWindowSpec& spec) {
  spec.validate();
  const std::size_t n = video.frames.size();
  const std::size_t nw = spec.windows.size();
  RowMatrix out = RowMatrix::Constant(Eigen::Index(n), Eigen::Index(3 * kTemporalJoints.size() * nw), kMissing);
  const std::size_t kind_stride = kTemporalJoints.size() * nw;
  for (std::size_t j = 0; j < kTemporalJoints.size(); ++j) {
    const Joint joint = kTemporalJoints[j];
    for (std::size_t wi = 0; wi < nw; ++wi) {
      const std::size_t w = std::size_t(spec.windows[wi]);
      const double rate = spec.fps / double(w);
      std::vector<double> speed(n, kMissing);
      for (std::size_t t = w; t < n; ++t) {
        const auto& a = video.frames[t].pose[joint];
        const auto& b = video.frames[t - w].pose[joint];
        if (!a.present || !b.present) continue;
        const double d = std::hypot(a.x - b.x, a.y - b.y);
        speed[t] = d * rate;
        out(Eigen::Index(t), Eigen::Index(j * nw + wi)) = d;
        out(Eigen::Index(t), Eigen::Index(kind_stride + j * nw + wi)) = speed[t];
      }
      for (std::size_t t = 2 * w; t < n; ++t) {
        if (is_missing(speed[t]) || is_missing(speed[t - w])) continue;
        out(Eigen::Index(t), Eigen::Index(2 * kind_stride + j * nw + wi)) = (speed[t] - speed[t - w]) * rate;
      }
    }
  }
  return out;
}

FeatureMatrix assemble_frame_features(const VideoSequence& video, const std::vector<FaceConfidence>& face_conf,
                                      const TemporalWindowSpec& spec, Warnings* warnings) {
  const std::size_t n = video.frames.size();
  if (face_conf.size() != n) {
    throw Error(ErrorCode::ManifestMismatch, "face confidences do not match the frame count");
  }
  if (spec.windows.size() != 3) {
    throw Error(ErrorCode::ManifestMismatch, "the feature manifest expects three temporal windows");
  }
  FeatureMatrix m(build_manifest(false), n);
  const RowMatrix temporal = temporal_features(video, spec);
  for (std::size_t t = 0; t < n; ++t) {
    const FrameRecord& f = video.frames[t];
    m.video_ids[t] = video.video_id;
    m.frame_indices[t] = f.frame_index;
    double* row = m.values.row(Eigen::Index(t)).data();
    std::size_t c = 0;
    for (double v : body_distance_features(f.pose)) row[c++] = v;
    Warnings angle_warnings;
    for (double v : angle_features(f.pose, &angle_warnings)) row[c++] = v;
    if (warnings) {
      for (const auto& msg : angle_warnings.messages) {
        warnings->add("video " + video.video_id + " frame " + std::to_string(f.frame_index) + ": " + msg);
      }
    }
    for (double v : hand_distance_features(f)) row[c++] = v;
    for (Eigen::Index k = 0; k < temporal.cols(); ++k) row[c++] = temporal(Eigen::Index(t), k);
    row[c++] = face_conf[t].upper;
    row[c++] = face_conf[t].lower;
  }
  return m;
}

FeatureMatrix extract_video_features(const VideoSequence& raw, const ExtractionOptions& options, Warnings* warnings) {
  validate(raw);
  const VideoSequence normalized = normalize_video(raw, options.normalization);
  const VideoSequence smoothed = smooth_and_interpolate(normalized, options.normalization);

  const FaceAppearance appearance =
      face_hog_features(raw, options.hog, options.include_hog ? options.images : ImageSource{}, warnings);
  std::vector<FaceConfidence> conf(raw.frames.size());
  for (std::size_t t = 0; t < conf.size(); ++t) conf[t] = {appearance.upper_conf[t], appearance.lower_conf[t]};

  TemporalWindowSpec spec;
  spec.fps = raw.fps;
  FeatureMatrix base = assemble_frame_features(smoothed, conf, spec, warnings);
  if (options.include_hog) {
    FeatureMatrix full(build_manifest(true), base.rows());
    full.video_ids = base.video_ids;
    full.frame_indices = base.frame_indices;
    full.values.leftCols(base.values.cols()) = base.values;
    full.values.rightCols(appearance.hog.cols()) = appearance.hog;
    base = std::move(full);
  }
  return clean_features(base);
}

void attach_labels(FeatureMatrix& matrix, const std::vector<LabelRecord>& labels) {
  std::map<std::pair<std::string, int>, const LabelRecord*> index;
  for (const auto& l : labels) index[{l.video_id, l.frame_index}] = &l;
  matrix.labels.assign(matrix.rows(), std::nullopt);
  for (std::size_t i = 0; i < matrix.rows(); ++i) {
    const auto it = index.find({matrix.video_ids[i], matrix.frame_indices[i]});
    if (it != index.end()) matrix.labels[i] = *it->second;
  }
}

void mirror_row(const FeatureManifest& manifest, const double* in, double* out) {
  for (std::size_t i = 0; i < manifest.size(); ++i) {
    const double v = in[manifest.mirror_index(i)];
    out[i] = manifest[i].signed_x ? -v : v;
  }
}

FeatureMatrix flip_augment(const FeatureMatrix& matrix) {
  const std::size_t n = matrix.rows();
  FeatureMatrix out(matrix.manifest, 2 * n);
  out.values.topRows(Eigen::Index(n)) = matrix.values;
  for (std::size_t i = 0; i < n; ++i) {
    mirror_row(matrix.manifest, matrix.values.row(Eigen::Index(i)).data(),
               out.values.row(Eigen::Index(n + i)).data());
  }
  out.video_ids = matrix.video_ids;
  out.video_ids.insert(out.video_ids.end(), matrix.video_ids.begin(), matrix.video_ids.end());
  out.frame_indices = matrix.frame_indices;
  out.frame_indices.insert(out.frame_indices.end(), matrix.frame_indices.begin(), matrix.frame_indices.end());
  if (!matrix.labels.empty()) {
    out.labels = matrix.labels;
    out.labels.insert(out.labels.end(), matrix.labels.begin(), matrix.labels.end());
  }
  return out;
}

}  // namespace facetouch
