#pragma once

#include <cmath>
#include <filesystem>
#include <optional>
#include <string>

#include "facetouch/core/error.hpp"
#include "facetouch/core/random.hpp"
#include "facetouch/core/types.hpp"

namespace fixture {

using namespace facetouch;

// Upright infant in pixel space: neck at (100, 100), trunk 100 px.
inline PoseFrame upright_pose(double conf = 0.9) {
  PoseFrame p;
  p[Joint::Nose] = Keypoint2D::at(100, 70, conf);
  p[Joint::Neck] = Keypoint2D::at(100, 100, conf);
  p[Joint::RShoulder] = Keypoint2D::at(80, 100, conf);
  p[Joint::RElbow] = Keypoint2D::at(70, 130, conf);
  p[Joint::RWrist] = Keypoint2D::at(75, 160, conf);
  p[Joint::LShoulder] = Keypoint2D::at(120, 100, conf);
  p[Joint::LElbow] = Keypoint2D::at(130, 130, conf);
  p[Joint::LWrist] = Keypoint2D::at(125, 160, conf);
  p[Joint::MidHip] = Keypoint2D::at(100, 200, conf);
  p[Joint::REye] = Keypoint2D::at(94, 64, conf);
  p[Joint::LEye] = Keypoint2D::at(106, 64, conf);
  p[Joint::REar] = Keypoint2D::at(90, 68, conf);
  p[Joint::LEar] = Keypoint2D::at(110, 68, conf);
  return p;
}

inline HandFrame hand_at(HandSide side, double x, double y, double conf) {
  HandFrame h;
  h.side = side;
  h.detection_confidence = conf;
  for (std::size_t i = 0; i < kHandLandmarkCount; ++i) {
    h.landmarks[i] = Keypoint2D::at(x + double(i % 5), y - double(i / 5), 0.9);
  }
  return h;
}

// Wrists swing sinusoidally; hands and a full-frame face are attached.
inline VideoSequence moving_video(std::size_t frames, std::uint64_t seed = 1, double fps = 30.0) {
  Rng rng = make_rng(seed);
  VideoSequence v;
  v.video_id = "v" + std::to_string(seed);
  v.infant_id = "i" + std::to_string(seed);
  v.fps = fps;
  const double phase = uniform(rng, 0, 6.28);
  for (std::size_t f = 0; f < frames; ++f) {
    FrameRecord r;
    r.frame_index = int(f);
    r.timestamp_s = double(f) / fps;
    r.pose = upright_pose();
    const double s = std::sin(0.2 * double(f) + phase);
    r.pose[Joint::LWrist].x += 20 * s + normal(rng, 0, 0.5);
    r.pose[Joint::LWrist].y -= 40 * (1 + s) + normal(rng, 0, 0.5);
    r.pose[Joint::RWrist].x -= 15 * std::cos(0.15 * double(f)) + normal(rng, 0, 0.5);
    r.pose[Joint::RWrist].y -= 30 * (1 + std::cos(0.15 * double(f)));
    r.pose[Joint::LElbow].y -= 10 * (1 + s);
    r.left_hand = hand_at(HandSide::Left, r.pose[Joint::LWrist].x, r.pose[Joint::LWrist].y - 5, 0.8);
    if (f % 7 != 3) r.right_hand = hand_at(HandSide::Right, r.pose[Joint::RWrist].x, r.pose[Joint::RWrist].y - 5, 0.7);
    FaceFrame face;
    for (std::size_t i = 0; i < kFaceLandmarkCount; ++i) {
      face.landmarks[i] = Keypoint2D::at(88 + double(i % 12) * 2.0, 58 + double(i / 12) * 4.0, 0.6 + 0.005 * double(i % 10));
    }
    r.face = face;
    v.frames.push_back(r);
  }
  return v;
}

// Code of the facetouch::Error thrown by f, if any.
template <typename F>
std::optional<ErrorCode> error_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

// Fresh scratch directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("facetouch_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace fixture
