#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace facetouch {

// Body joint vocabulary of the pose stream (OpenPose BODY_25 subset).
enum class Joint : std::uint8_t {
  Nose,
  Neck,
  RShoulder,
  RElbow,
  RWrist,
  LShoulder,
  LElbow,
  LWrist,
  MidHip,
  REye,
  LEye,
  REar,
  LEar,
};

inline constexpr std::size_t kJointCount = 13;

inline constexpr std::array<std::string_view, kJointCount> kJointNames{
    "Nose",   "Neck",   "RShoulder", "RElbow", "RWrist", "LShoulder", "LElbow",
    "LWrist", "MidHip", "REye",      "LEye",   "REar",   "LEar"};

inline constexpr std::array<Joint, kJointCount> kAllJoints{
    Joint::Nose,      Joint::Neck,   Joint::RShoulder, Joint::RElbow, Joint::RWrist,
    Joint::LShoulder, Joint::LElbow, Joint::LWrist,    Joint::MidHip, Joint::REye,
    Joint::LEye,      Joint::REar,   Joint::LEar};

constexpr std::size_t index_of(Joint j) { return static_cast<std::size_t>(j); }
std::string_view joint_name(Joint j);
std::optional<Joint> joint_from_name(std::string_view name);
// Left/right counterpart; midline joints map to themselves.
Joint mirror_joint(Joint j);

struct Keypoint2D {
  double x = 0.0;
  double y = 0.0;
  double confidence = 0.0;
  bool present = false;

  static Keypoint2D at(double x, double y, double confidence = 1.0) {
    return Keypoint2D{x, y, confidence, true};
  }
};

struct PoseFrame {
  std::array<Keypoint2D, kJointCount> keypoints{};

  Keypoint2D& operator[](Joint j) { return keypoints[index_of(j)]; }
  const Keypoint2D& operator[](Joint j) const { return keypoints[index_of(j)]; }
};

enum class FaceSpace { Crop, FullFrame };

inline constexpr std::size_t kFaceLandmarkCount = 68;

// iBUG 68-point ordering: jaw 0-16, brows 17-26, nose 27-35, eyes 36-47,
// mouth 48-67.
struct FaceFrame {
  std::array<Keypoint2D, kFaceLandmarkCount> landmarks{};
  FaceSpace source_space = FaceSpace::FullFrame;
};

// Index of the horizontally mirrored counterpart in the 68-point ordering.
std::size_t mirror_face_landmark(std::size_t index);

enum class HandSide { Left, Right };

inline constexpr std::size_t kHandLandmarkCount = 21;
// Thumb, index, middle, ring, pinky tips in the 21-point hand ordering.
inline constexpr std::array<std::size_t, 5> kFingertipIndices{4, 8, 12, 16, 20};

struct HandFrame {
  HandSide side = HandSide::Left;
  std::array<Keypoint2D, kHandLandmarkCount> landmarks{};
  double detection_confidence = 0.0;
};

constexpr HandSide mirror_side(HandSide s) {
  return s == HandSide::Left ? HandSide::Right : HandSide::Left;
}

struct FrameRecord {
  int frame_index = 0;
  double timestamp_s = 0.0;
  PoseFrame pose;
  std::optional<FaceFrame> face;
  std::optional<HandFrame> left_hand;
  std::optional<HandFrame> right_hand;
  std::optional<std::string> image_ref;

  std::optional<HandFrame>& hand(HandSide side) {
    return side == HandSide::Left ? left_hand : right_hand;
  }
  const std::optional<HandFrame>& hand(HandSide side) const {
    return side == HandSide::Left ? left_hand : right_hand;
  }
};

struct VideoSequence {
  std::string video_id;
  std::string infant_id;
  double fps = 0.0;
  std::vector<FrameRecord> frames;
};

// Throws Error(NonMonotonicFrames / InvalidArgument) when the sequence breaks
// ordering, fps or confidence invariants.
void validate(const VideoSequence& video);

// Mirror image of a video: x -> (image_width - 1) - x for every landmark, with
// left/right joints, hands and face landmarks relabelled to their mirrored
// counterparts. Image references are kept as-is.
VideoSequence mirror_video(const VideoSequence& video, double image_width);

enum class Region : std::uint8_t { Eyes, Ears, Nose, Mouth, Cheeks };

inline constexpr std::size_t kRegionCount = 5;
inline constexpr std::array<std::string_view, kRegionCount> kRegionNames{"eyes", "ears", "nose",
                                                                         "mouth", "cheeks"};

struct LabelRecord {
  std::string video_id;
  int frame_index = 0;
  bool on_head = false;
  std::array<bool, kRegionCount> regions{};

  bool region(Region r) const { return regions[static_cast<std::size_t>(r)]; }
  // False when a region flag is set without an on-head touch.
  bool consistent() const;
  // Bit r set when region r is flagged.
  unsigned region_code() const;

  bool operator==(const LabelRecord&) const = default;
};

std::array<bool, kRegionCount> regions_from_code(unsigned code);

}  // namespace facetouch
