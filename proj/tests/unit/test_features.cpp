#include <doctest.h>

#include "facetouch/features/features.hpp"
#include "support/fixtures.hpp"

using namespace facetouch;

namespace {

const FeatureManifest& manifest() {
  static const FeatureManifest m = build_manifest(false);
  return m;
}

std::size_t col(const std::string& name) {
  const auto i = manifest().index_of(name);
  REQUIRE(i);
  return *i;
}

PoseFrame empty_pose() { return PoseFrame{}; }

std::size_t temporal_start() { return col("temp_disp_wristL_w1"); }

}  // namespace

TEST_CASE("body distances") {
  PoseFrame p = empty_pose();
  p[Joint::LWrist] = Keypoint2D::at(0, 0);
  p[Joint::Nose] = Keypoint2D::at(0.3, 0.4);
  p[Joint::LEye] = Keypoint2D::at(0, 0);
  const auto f = body_distance_features(p);
  CHECK(f[col("dist_x_wristL_nose")] == doctest::Approx(0.3));
  CHECK(f[col("dist_y_wristL_nose")] == doctest::Approx(0.4));
  CHECK(f[col("dist_e_wristL_nose")] == doctest::Approx(0.5));
  CHECK(f[col("dist_x_wristL_eyeL")] == 0.0);
  CHECK(f[col("dist_e_wristL_eyeL")] == 0.0);
  CHECK(is_missing(f[col("dist_x_wristL_neck")]));
  CHECK(is_missing(f[col("dist_e_wristR_nose")]));
}

TEST_CASE("distance triples are consistent") {
  const auto v = fixture::moving_video(40, 4);
  Warnings w;
  const auto m = assemble_frame_features(normalize_video(v, NormalizationParams{}), std::vector<FaceConfidence>(40),
                                         TemporalWindowSpec{{1, 3, 5}, 30}, &w);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c + 2 < m.cols(); ++c) {
      const auto& name = m.manifest[c].name;
      const bool triple = (name.rfind("dist_x_", 0) == 0 || name.rfind("hand_x_", 0) == 0);
      if (!triple || is_missing(m.values(r, c))) continue;
      const double dx = m.values(r, c), dy = m.values(r, c + 1), e = m.values(r, c + 2);
      CHECK(e >= 0.0);
      CHECK(std::abs(e * e - (dx * dx + dy * dy)) < 1e-12);
    }
  }
}

TEST_CASE("joint angles") {
  PoseFrame p = empty_pose();
  p[Joint::LShoulder] = Keypoint2D::at(0, 0);
  p[Joint::LElbow] = Keypoint2D::at(1, 0);
  p[Joint::LWrist] = Keypoint2D::at(2, 0);
  p[Joint::RShoulder] = Keypoint2D::at(0, 0);
  p[Joint::RElbow] = Keypoint2D::at(1, 0);
  p[Joint::RWrist] = Keypoint2D::at(1, 1);
  p[Joint::Neck] = Keypoint2D::at(-1, 0);
  Warnings w;
  const auto a = angle_features(p, &w);
  const std::size_t base = col("angle_elbowL");
  CHECK(a[col("angle_elbowL") - base] == doctest::Approx(180.0));
  CHECK(a[col("angle_elbowR") - base] == doctest::Approx(90.0));
  CHECK(a[col("angle_shoulderL") - base] == doctest::Approx(180.0));
  CHECK(w.empty());

  p[Joint::LWrist] = p[Joint::LElbow];
  const auto d = angle_features(p, &w);
  CHECK(is_missing(d[col("angle_elbowL") - base]));
  CHECK(w.size() == 1);

  p[Joint::RWrist] = Keypoint2D{};
  CHECK(is_missing(angle_features(p)[col("angle_elbowR") - base]));
}

TEST_CASE("hand distances and confidences") {
  FrameRecord f;
  f.pose[Joint::Nose] = Keypoint2D::at(0, 0.2);
  f.pose[Joint::LEye] = Keypoint2D::at(0.1, 0.3);
  f.pose[Joint::REye] = Keypoint2D::at(-0.1, 0.3);
  HandFrame right;
  right.side = HandSide::Right;
  right.detection_confidence = 0.7;
  for (auto& k : right.landmarks) k = Keypoint2D::at(1, 1);
  right.landmarks[8] = Keypoint2D::at(0, 0);
  f.right_hand = right;
  const std::size_t base = col("hand_x_handL_thumb_eyeL");
  auto h = hand_distance_features(f);
  CHECK(h[col("hand_x_handR_index_nose") - base] == doctest::Approx(0.0));
  CHECK(h[col("hand_y_handR_index_nose") - base] == doctest::Approx(0.2));
  CHECK(h[col("hand_e_handR_index_nose") - base] == doctest::Approx(0.2));
  CHECK(h[col("hand_conf_R") - base] == 0.7);
  CHECK(h[col("hand_conf_L") - base] == 0.0);
  std::size_t missing_left = 0;
  for (std::size_t i = 0; i < 45; ++i) missing_left += is_missing(h[i]);
  CHECK(missing_left == 45);

  HandFrame left = right;
  left.side = HandSide::Left;
  left.detection_confidence = 0.9;
  f.left_hand = left;
  h = hand_distance_features(f);
  CHECK(h[col("hand_conf_L") - base] == 0.9);
  CHECK(h[col("hand_conf_R") - base] == 0.7);
}

TEST_CASE("temporal features") {
  const double fps = 10;
  VideoSequence v;
  v.fps = fps;
  for (int t = 0; t < 20; ++t) {
    FrameRecord f;
    f.frame_index = t;
    f.timestamp_s = t / fps;
    f.pose[Joint::LWrist] = Keypoint2D::at(double(t) / fps, 0.5);
    f.pose[Joint::RWrist] = Keypoint2D::at(0.25, 0.25);
    f.pose[Joint::LElbow] = Keypoint2D::at(0.3 * double(t * t) / (fps * fps), 0);
    v.frames.push_back(f);
  }
  const auto m = temporal_features(v, TemporalWindowSpec{{1, 3, 5}, fps});
  REQUIRE(m.cols() == 36);
  auto at = [&](int frame, const std::string& name) { return m(frame, Eigen::Index(col(name) - temporal_start())); };
  // Unit speed along x.
  CHECK(at(5, "temp_speed_wristL_w1") == doctest::Approx(1.0));
  CHECK(at(5, "temp_accel_wristL_w1") == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(at(10, "temp_speed_wristL_w3") == doctest::Approx(1.0));
  CHECK(at(4, "temp_disp_wristL_w3") == doctest::Approx(0.3));
  // Stationary wrist.
  CHECK(at(12, "temp_disp_wristR_w5") == 0.0);
  CHECK(at(12, "temp_accel_wristR_w5") == 0.0);
  // Boundary: first w frames for displacement/speed, 2w for acceleration.
  CHECK(is_missing(at(0, "temp_disp_wristL_w1")));
  CHECK_FALSE(is_missing(at(1, "temp_disp_wristL_w1")));
  CHECK(is_missing(at(4, "temp_speed_wristL_w5")));
  CHECK(is_missing(at(9, "temp_accel_wristL_w5")));
  CHECK_FALSE(is_missing(at(10, "temp_accel_wristL_w5")));
  // Constant acceleration 0.6 trunk/s^2 along x for the left elbow, w = 1:
  // v1(t) = 0.3 (2t - 1) / fps, a1 = 0.6.
  CHECK(at(8, "temp_accel_elbowL_w1") == doctest::Approx(0.6));
  // Missing joint.
  CHECK(is_missing(at(8, "temp_disp_elbowR_w1")));
}

TEST_CASE("temporal features ignore a constant offset") {
  auto v = normalize_video(fixture::moving_video(30, 8), NormalizationParams{});
  auto shifted = v;
  for (auto& f : shifted.frames)
    for (auto& k : f.pose.keypoints) {
      k.x += 3.5;
      k.y -= 1.25;
    }
  const TemporalWindowSpec spec{{1, 3, 5}, 30};
  const auto a = temporal_features(v, spec);
  const auto b = temporal_features(shifted, spec);
  for (Eigen::Index r = 0; r < a.rows(); ++r)
    for (Eigen::Index c = 0; c < a.cols(); ++c) {
      if (is_missing(a(r, c))) {
        CHECK(is_missing(b(r, c)));
      } else {
        CHECK(std::abs(a(r, c) - b(r, c)) < 1e-9);
      }
    }
}

TEST_CASE("frame assembly") {
  auto v = normalize_video(fixture::moving_video(70, 6), NormalizationParams{});
  v.frames[5].left_hand.reset();
  v.frames[5].right_hand.reset();
  v.frames[5].face.reset();
  std::vector<FaceConfidence> conf(70, FaceConfidence{0.8, 0.6});
  conf[5] = {};
  const auto m = assemble_frame_features(v, conf, TemporalWindowSpec{{1, 3, 5}, 30});
  CHECK(m.rows() == 70);
  CHECK(m.cols() == 170);
  CHECK(m.manifest.names() == manifest().names());
  CHECK(m.video_ids[0] == v.video_id);
  CHECK(m.frame_indices[69] == 69);
  for (std::size_t c = 0; c < 40; ++c) CHECK_FALSE(is_missing(m.values(5, c)));
  CHECK(is_missing(m.values(5, col("hand_x_handL_index_nose"))));
  CHECK(m.values(5, col("hand_conf_L")) == 0.0);
  CHECK(m.values(5, col("face_conf_upper")) == 0.0);
  CHECK(m.values(6, col("face_conf_upper")) == 0.8);
  CHECK(m.values(6, col("face_conf_lower")) == 0.6);
  CHECK(fixture::error_of([&] {
          assemble_frame_features(v, std::vector<FaceConfidence>(3), TemporalWindowSpec{{1, 3, 5}, 30});
        }) == ErrorCode::ManifestMismatch);
}

TEST_CASE("flip augmentation") {
  FeatureMatrix m(manifest(), 3);
  Rng rng = make_rng(2);
  for (std::size_t r = 0; r < 3; ++r) {
    m.video_ids[r] = "v";
    m.frame_indices[r] = int(r);
    for (std::size_t c = 0; c < 170; ++c) m.values(r, c) = normal(rng, 0, 1);
  }
  m.values(0, col("dist_x_wristL_eyeR")) = 0.2;
  m.values(0, col("angle_elbowL")) = 30;
  m.values(0, col("angle_elbowR")) = 120;
  m.labels = {LabelRecord{"v", 0, true, {true, false, false, false, false}}, LabelRecord{"v", 1, false, {}},
              LabelRecord{"v", 2, false, {}}};
  const auto a = flip_augment(m);
  REQUIRE(a.rows() == 6);
  CHECK(a.values(3, col("dist_x_wristR_eyeL")) == -0.2);
  CHECK(a.values(3, col("angle_elbowR")) == 30);
  CHECK(a.values(3, col("angle_elbowL")) == 120);
  CHECK(a.labels[3] == m.labels[0]);
  CHECK(a.labels[5] == m.labels[2]);
  CHECK(a.values.topRows(3) == m.values);
  // Mirroring twice restores the row.
  std::vector<double> once(170), twice(170);
  mirror_row(manifest(), m.values.row(1).data(), once.data());
  mirror_row(manifest(), once.data(), twice.data());
  for (std::size_t c = 0; c < 170; ++c) CHECK(twice[c] == m.values(1, Eigen::Index(c)));
}

TEST_CASE("features of a mirrored video equal mirrored features") {
  const auto v = fixture::moving_video(60, 21);
  ExtractionOptions opt;
  const auto a = extract_video_features(v, opt);
  const auto b = extract_video_features(mirror_video(v, 256), opt);
  REQUIRE(a.rows() == b.rows());
  double worst = 0;
  std::vector<double> mirrored(a.cols());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    mirror_row(a.manifest, a.values.row(Eigen::Index(r)).data(), mirrored.data());
    for (std::size_t c = 0; c < a.cols(); ++c) {
      const double x = mirrored[c], y = b.values(Eigen::Index(r), Eigen::Index(c));
      REQUIRE(is_missing(x) == is_missing(y));
      if (!is_missing(x)) worst = std::max(worst, std::abs(x - y));
    }
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("labels attach by video and frame") {
  const auto v = fixture::moving_video(10, 3);
  auto m = extract_video_features(v, ExtractionOptions{});
  attach_labels(m, {LabelRecord{v.video_id, 4, true, {false, false, false, true, false}},
                    LabelRecord{"other", 4, true, {}}});
  REQUIRE(m.labels.size() == 10);
  CHECK(m.labels[4]->region(Region::Mouth));
  CHECK_FALSE(m.labels[3].has_value());
}
