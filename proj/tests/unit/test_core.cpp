#include <doctest.h>

#include <map>
#include <set>

#include "facetouch/core/error.hpp"
#include "facetouch/core/feature_matrix.hpp"
#include "facetouch/core/hash.hpp"
#include "facetouch/core/manifest.hpp"
#include "facetouch/core/random.hpp"
#include "facetouch/core/types.hpp"
#include "support/fixtures.hpp"

using namespace facetouch;

TEST_CASE("manifest sizes") {
  CHECK(build_manifest(false).size() == 170);
  CHECK(build_manifest(true).size() == 710);
  CHECK(build_manifest(true).indices_where(is_hog_family).size() == kHogFeatureCount);
  CHECK_FALSE(build_manifest(false).has_hog());
}

TEST_CASE("manifest family counts follow the inventory") {
  const auto m = build_manifest(true);
  std::map<FeatureFamily, std::size_t> counts;
  for (const auto& e : m.entries()) ++counts[e.family];
  CHECK(counts[FeatureFamily::BodyDistance] == 2 * 6 * 3);
  CHECK(counts[FeatureFamily::Angle] == 4);
  CHECK(counts[FeatureFamily::HandDistance] == 2 * 5 * 3 * 3);
  CHECK(counts[FeatureFamily::HandConfidence] == 2);
  CHECK(counts[FeatureFamily::Temporal] == 4 * 3 * 3);
  CHECK(counts[FeatureFamily::FaceRegionConfidence] == 2);
  CHECK(counts[FeatureFamily::HOG] == 324 + 108 + 108);
}

TEST_CASE("mirror metadata of a wrist-eye difference") {
  const auto m = build_manifest(false);
  const auto i = m.index_of("dist_x_wristL_eyeR");
  REQUIRE(i);
  const auto partner = m.mirror_index(*i);
  CHECK(m[partner].name == "dist_x_wristR_eyeL");
  CHECK(m[*i].signed_x);
  CHECK_FALSE(m[*m.index_of("dist_y_wristL_eyeR")].signed_x);
  CHECK(m[m.mirror_index(*m.index_of("angle_elbowL"))].name == "angle_elbowR");
  CHECK(m.mirror_index(*m.index_of("dist_e_wristL_nose")) == *m.index_of("dist_e_wristR_nose"));
}

TEST_CASE("manifest determinism and mirror involution") {
  const auto a = build_manifest(true);
  const auto b = build_manifest(true);
  CHECK(a.names() == b.names());
  CHECK(a.fingerprint() == b.fingerprint());
  CHECK(a.fingerprint() != build_manifest(false).fingerprint());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a.mirror_index(a.mirror_index(i)) == i);
    // Partners share a family and a sign convention.
    CHECK(a[a.mirror_index(i)].family == a[i].family);
    CHECK(a[a.mirror_index(i)].signed_x == a[i].signed_x);
  }
  const auto names = a.names();
  const std::set<std::string> unique(names.begin(), names.end());
  CHECK(unique.size() == a.size());
}

TEST_CASE("manifest rejects duplicates and asymmetric partners") {
  CHECK_THROWS_AS(FeatureManifest({{"a", FeatureFamily::Angle, false, {}}, {"a", FeatureFamily::Angle, false, {}}}),
                  Error);
  CHECK_THROWS_AS(FeatureManifest({{"a", FeatureFamily::Angle, false, 1}, {"b", FeatureFamily::Angle, false, {}}}),
                  Error);
}

TEST_CASE("joint and landmark mirroring are involutions") {
  for (Joint j : kAllJoints) CHECK(mirror_joint(mirror_joint(j)) == j);
  CHECK(mirror_joint(Joint::LWrist) == Joint::RWrist);
  CHECK(mirror_joint(Joint::Nose) == Joint::Nose);
  for (std::size_t i = 0; i < kFaceLandmarkCount; ++i) CHECK(mirror_face_landmark(mirror_face_landmark(i)) == i);
  CHECK(mirror_face_landmark(0) == 16);
  CHECK(mirror_face_landmark(36) == 45);
  CHECK(mirror_face_landmark(30) == 30);
  CHECK(mirror_face_landmark(48) == 54);
  for (std::string_view n : kJointNames) CHECK(joint_name(*joint_from_name(n)) == n);
  CHECK_FALSE(joint_from_name("Tail"));
}

TEST_CASE("label record invariants") {
  LabelRecord r{"v", 1, false, {}};
  CHECK(r.consistent());
  r.regions[2] = true;
  CHECK_FALSE(r.consistent());
  r.on_head = true;
  CHECK(r.consistent());
  CHECK(r.region(Region::Nose));
  CHECK(r.region_code() == 4u);
  for (unsigned code = 0; code < 32; ++code) {
    LabelRecord x{"v", 0, true, regions_from_code(code)};
    CHECK(x.region_code() == code);
  }
}

TEST_CASE("video validation") {
  auto v = fixture::moving_video(5);
  CHECK_NOTHROW(validate(v));
  v.frames[2].frame_index = 1;
  CHECK_THROWS_AS(validate(v), Error);
  try {
    validate(v);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonMonotonicFrames);
  }
  auto w = fixture::moving_video(3);
  w.fps = 0;
  CHECK_THROWS_AS(validate(w), Error);
}

TEST_CASE("mirror_video twice is the identity") {
  const auto v = fixture::moving_video(6, 3);
  const auto m = mirror_video(v, 256);
  CHECK(m.frames[0].pose[Joint::LWrist].x == doctest::Approx(255 - v.frames[0].pose[Joint::RWrist].x));
  CHECK(m.frames[0].left_hand.has_value() == v.frames[0].right_hand.has_value());
  const auto back = mirror_video(m, 256);
  for (std::size_t f = 0; f < v.frames.size(); ++f) {
    for (Joint j : kAllJoints) {
      CHECK(back.frames[f].pose[j].x == doctest::Approx(v.frames[f].pose[j].x).epsilon(1e-12));
      CHECK(back.frames[f].pose[j].y == v.frames[f].pose[j].y);
    }
    for (std::size_t i = 0; i < kFaceLandmarkCount; ++i) {
      CHECK(back.frames[f].face->landmarks[i].x == doctest::Approx(v.frames[f].face->landmarks[i].x).epsilon(1e-12));
    }
  }
}

TEST_CASE("feature matrix row and column selection") {
  FeatureMatrix m(build_manifest(false), 4);
  m.video_ids = {"a", "a", "b", "c"};
  m.frame_indices = {0, 1, 0, 0};
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < 170; ++c) m.values(r, c) = double(r * 1000 + c);
  CHECK_NOTHROW(m.validate());
  CHECK(m.distinct_videos() == std::vector<std::string>{"a", "b", "c"});
  CHECK(m.rows_of_videos({"c", "a"}) == std::vector<std::size_t>{0, 1, 3});
  const std::vector<std::size_t> rows{3, 1};
  const auto s = m.select_rows(rows);
  CHECK(s.rows() == 2);
  CHECK(s.values(0, 5) == 3005);
  CHECK(s.video_ids[1] == "a");
  const std::vector<std::size_t> cols{0, 2};
  const auto c = m.select_columns(cols);
  CHECK(c.cols() == 2);
  CHECK(c.values(2, 1) == 2002);
  CHECK(c.manifest[0].name == m.manifest[0].name);
  // Both of these were x differences whose partners were dropped.
  CHECK_FALSE(c.manifest[0].mirror_partner);

  const auto both = concat(m, s);
  CHECK(both.rows() == 6);
  CHECK(both.values(4, 7) == 3007);
  CHECK(concat_all({m, s, m}).rows() == 10);
  CHECK_THROWS_AS(concat_all({}), Error);
  CHECK_THROWS_AS(concat(m, c), Error);
}

TEST_CASE("feature matrix validation catches label key mismatches") {
  FeatureMatrix m(build_manifest(false), 2);
  m.video_ids = {"a", "a"};
  m.frame_indices = {0, 1};
  m.values.setZero();
  m.labels = {LabelRecord{"a", 0, false, {}}, LabelRecord{"a", 5, false, {}}};
  CHECK_THROWS_AS(m.validate(), Error);
  m.labels[1]->frame_index = 1;
  CHECK_NOTHROW(m.validate());
  CHECK(m.fully_labeled());
  m.labels[1].reset();
  CHECK_FALSE(m.fully_labeled());
}

TEST_CASE("fnv1a64 reference values") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ull);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cull);
  CHECK(fnv1a64_hex("foobar") == "85944171f73967e8");
}

TEST_CASE("seeded helpers are deterministic and in range") {
  Rng a = make_rng(42, 3), b = make_rng(42, 3), c = make_rng(42, 4);
  CHECK(a() == b());
  CHECK(make_rng(42, 3)() != c());
  Rng r = make_rng(1);
  std::vector<int> hits(7, 0);
  for (int i = 0; i < 7000; ++i) {
    const double u = uniform01(r);
    CHECK((u >= 0.0 && u < 1.0));
    ++hits[uniform_int(r, 0, 6)];
  }
  for (int h : hits) CHECK(h > 800);
  std::vector<int> v{1, 2, 3, 4, 5};
  shuffle(v, r);
  std::sort(v.begin(), v.end());
  CHECK(v == std::vector<int>{1, 2, 3, 4, 5});
}
