#include "facetouch/core/types.hpp"

#include <string>

#include "facetouch/core/error.hpp"

namespace facetouch {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::MissingFile: return "MissingFile";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::DuplicateVideoId: return "DuplicateVideoId";
    case ErrorCode::MalformedManifest: return "MalformedManifest";
    case ErrorCode::MalformedRecord: return "MalformedRecord";
    case ErrorCode::NonMonotonicFrames: return "NonMonotonicFrames";
    case ErrorCode::MalformedLabels: return "MalformedLabels";
    case ErrorCode::RegionWithoutTouch: return "RegionWithoutTouch";
    case ErrorCode::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorCode::TruncatedFile: return "TruncatedFile";
    case ErrorCode::MalformedMullen: return "MalformedMullen";
    case ErrorCode::NonPositiveAge: return "NonPositiveAge";
    case ErrorCode::HeaderMismatch: return "HeaderMismatch";
    case ErrorCode::NoUsableTrunk: return "NoUsableTrunk";
    case ErrorCode::ManifestMismatch: return "ManifestMismatch";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NoFaceAnywhere: return "NoFaceAnywhere";
    case ErrorCode::DegenerateLabels: return "DegenerateLabels";
    case ErrorCode::TooFewRows: return "TooFewRows";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::SingleClass: return "SingleClass";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::SingleCombination: return "SingleCombination";
    case ErrorCode::TooFewGroups: return "TooFewGroups";
    case ErrorCode::ManifestFingerprintMismatch: return "ManifestFingerprintMismatch";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::CorruptModel: return "CorruptModel";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::ZeroVariance: return "ZeroVariance";
    case ErrorCode::TooFewPoints: return "TooFewPoints";
    case ErrorCode::InsufficientVisits: return "InsufficientVisits";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(error_code_name(code)) + ": " + message), code_(code) {}

std::string_view joint_name(Joint j) { return kJointNames[index_of(j)]; }

std::optional<Joint> joint_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kJointCount; ++i) {
    if (kJointNames[i] == name) return kAllJoints[i];
  }
  return std::nullopt;
}

Joint mirror_joint(Joint j) {
  switch (j) {
    case Joint::RShoulder: return Joint::LShoulder;
    case Joint::RElbow: return Joint::LElbow;
    case Joint::RWrist: return Joint::LWrist;
    case Joint::LShoulder: return Joint::RShoulder;
    case Joint::LElbow: return Joint::RElbow;
    case Joint::LWrist: return Joint::RWrist;
    case Joint::REye: return Joint::LEye;
    case Joint::LEye: return Joint::REye;
    case Joint::REar: return Joint::LEar;
    case Joint::LEar: return Joint::REar;
    default: return j;
  }
}

std::size_t mirror_face_landmark(std::size_t i) {
  if (i <= 16) return 16 - i;                 // jaw
  if (i <= 26) return 43 - i;                 // brows 17..21 <-> 26..22
  if (i <= 30) return i;                      // nose bridge
  if (i <= 35) return 66 - i;                 // nostrils 31..35
  if (i <= 39) return 81 - i;                 // 36..39 <-> 45..42
  if (i <= 41) return 87 - i;                 // 40,41 <-> 47,46
  if (i <= 45) return 81 - i;
  if (i <= 47) return 87 - i;
  if (i <= 54) return 102 - i;                // outer lip top 48..54
  if (i <= 59) return 114 - i;                // outer lip bottom 55..59
  if (i <= 64) return 124 - i;                // inner lip top 60..64
  if (i <= 67) return 132 - i;                // inner lip bottom 65..67
  throw Error(ErrorCode::InvalidArgument, "face landmark index out of range: " + std::to_string(i));
}

bool LabelRecord::consistent() const {
  if (on_head) return true;
  for (bool r : regions) {
    if (r) return false;
  }
  return true;
}

unsigned LabelRecord::region_code() const {
  unsigned code = 0;
  for (std::size_t r = 0; r < kRegionCount; ++r) {
    if (regions[r]) code |= 1u << r;
  }
  return code;
}

std::array<bool, kRegionCount> regions_from_code(unsigned code) {
  std::array<bool, kRegionCount> out{};
  for (std::size_t r = 0; r < kRegionCount; ++r) out[r] = (code >> r) & 1u;
  return out;
}

void validate(const VideoSequence& video) {
  if (!(video.fps > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "video " + video.video_id + ": fps must be positive");
  }
  for (std::size_t i = 1; i < video.frames.size(); ++i) {
    const auto& prev = video.frames[i - 1];
    const auto& cur = video.frames[i];
    if (cur.frame_index <= prev.frame_index || cur.timestamp_s <= prev.timestamp_s) {
      throw Error(ErrorCode::NonMonotonicFrames,
                  "video " + video.video_id + ": frame " + std::to_string(cur.frame_index) +
                      " does not follow frame " + std::to_string(prev.frame_index));
    }
  }
  for (const auto& f : video.frames) {
    if (f.left_hand && f.left_hand->side != HandSide::Left) {
      throw Error(ErrorCode::InvalidArgument, "left hand slot holds a right hand");
    }
    if (f.right_hand && f.right_hand->side != HandSide::Right) {
      throw Error(ErrorCode::InvalidArgument, "right hand slot holds a left hand");
    }
  }
}

namespace {

Keypoint2D mirror_point(const Keypoint2D& k, double width) {
  Keypoint2D out = k;
  if (k.present) out.x = (width - 1.0) - k.x;
  return out;
}

}  // namespace

VideoSequence mirror_video(const VideoSequence& video, double image_width) {
  VideoSequence out = video;
  for (std::size_t fi = 0; fi < video.frames.size(); ++fi) {
    const FrameRecord& src = video.frames[fi];
    FrameRecord& dst = out.frames[fi];
    for (Joint j : kAllJoints) {
      dst.pose[mirror_joint(j)] = mirror_point(src.pose[j], image_width);
    }
    if (src.face) {
      for (std::size_t i = 0; i < kFaceLandmarkCount; ++i) {
        dst.face->landmarks[mirror_face_landmark(i)] = mirror_point(src.face->landmarks[i], image_width);
      }
    }
    for (HandSide side : {HandSide::Left, HandSide::Right}) {
      const auto& hand = src.hand(side);
      auto& target = dst.hand(mirror_side(side));
      if (!hand) {
        target.reset();
        continue;
      }
      HandFrame h = *hand;
      h.side = mirror_side(side);
      for (auto& k : h.landmarks) k = mirror_point(k, image_width);
      target = h;
    }
  }
  return out;
}

}  // namespace facetouch
