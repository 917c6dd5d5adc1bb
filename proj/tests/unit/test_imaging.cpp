#include <doctest.h>

#include "facetouch/imaging/face.hpp"
#include "facetouch/imaging/hog.hpp"
#include "support/fixtures.hpp"

using namespace facetouch;
using fixture::error_of;

namespace {

Patch random_patch(int w, int h, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  Patch p(w, h);
  for (auto& v : p.pixels) v = uniform(rng, 0, 255);
  return p;
}

VideoSequence head_video(std::size_t frames) {
  VideoSequence v;
  v.video_id = "v";
  v.fps = 10;
  for (std::size_t f = 0; f < frames; ++f) {
    FrameRecord r;
    r.frame_index = int(f);
    r.timestamp_s = double(f) / 10;
    r.pose = fixture::upright_pose();
    v.frames.push_back(r);
  }
  return v;
}

void drop_head(FrameRecord& f) {
  for (Joint j : {Joint::Nose, Joint::LEye, Joint::REye, Joint::LEar, Joint::REar}) f.pose[j] = Keypoint2D{};
}

}  // namespace

TEST_CASE("face region from ears and pose") {
  auto v = head_video(1);
  auto& p = v.frames[0].pose;
  p[Joint::REar] = Keypoint2D::at(90, 100);
  p[Joint::LEar] = Keypoint2D::at(110, 100);
  p[Joint::Nose] = Keypoint2D::at(100, 106);
  p[Joint::REye] = Keypoint2D::at(95, 96);
  p[Joint::LEye] = Keypoint2D::at(105, 96);
  const auto r = estimate_face_region(v);
  REQUIRE(r.size() == 1);
  CHECK(r[0].size_px == doctest::Approx(44.0));
  CHECK(r[0].center.x == doctest::Approx((90 + 110 + 100 + 95 + 105) / 5.0));
  CHECK(r[0].center.y == doctest::Approx((100 + 100 + 106 + 96 + 96) / 5.0));
  CHECK(r[0].provenance != RegionProvenance::FromNeighborFrames);

  // Without both ears the size falls back to 1.5 trunk lengths.
  p[Joint::LEar] = Keypoint2D{};
  CHECK(estimate_face_region(v)[0].size_px == doctest::Approx(150.0));
}

TEST_CASE("headless frames copy the nearest face, earlier on ties") {
  auto v = head_video(10);
  for (std::size_t f : {0, 1, 2, 3, 4, 6, 7, 8}) drop_head(v.frames[f]);
  v.frames[5].pose[Joint::Nose].x = 50;
  v.frames[9].pose[Joint::Nose].x = 150;
  const auto r = estimate_face_region(v);
  REQUIRE(r.size() == 10);
  CHECK(r[7].center.x == r[5].center.x);
  CHECK(r[7].provenance == RegionProvenance::FromNeighborFrames);
  CHECK(r[8].center.x == r[9].center.x);
  CHECK(r[0].center.x == r[5].center.x);

  for (auto& f : v.frames) drop_head(f);
  CHECK(error_of([&] { estimate_face_region(v); }) == ErrorCode::NoFaceAnywhere);
}

TEST_CASE("rotation follows the eye line") {
  auto v = head_video(1);
  auto& p = v.frames[0].pose;
  p[Joint::REye] = Keypoint2D::at(90, 60);
  p[Joint::LEye] = Keypoint2D::at(110, 80);
  CHECK(std::abs(estimate_face_region(v)[0].rotation_deg) == doctest::Approx(45.0));
  p[Joint::LEye] = Keypoint2D{};
  CHECK(estimate_face_region(v)[0].rotation_deg == 0.0);
}

TEST_CASE("align and crop") {
  GrayImage img{100, 100, std::vector<std::uint8_t>(100 * 100, 0)};
  for (int y = 40; y < 60; ++y)
    for (int x = 40; x < 60; ++x) img.pixels[std::size_t(y) * 100 + x] = 255;
  FaceRegion region;
  region.center = Keypoint2D::at(49.5, 49.5);
  region.size_px = 40;
  const auto patch = align_and_crop(img, region, 32, 32);
  CHECK(patch.width == 32);
  CHECK(patch.height == 32);
  CHECK(patch.at(16, 16) == doctest::Approx(255));
  CHECK(patch.at(15, 15) == doctest::Approx(255));
  CHECK(patch.at(0, 0) == doctest::Approx(0));
  CHECK(patch.at(31, 31) == doctest::Approx(0));
  // Symmetric about the centre.
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x) CHECK(patch.at(x, y) == doctest::Approx(patch.at(31 - x, y)));

  GrayImage flat{50, 40, std::vector<std::uint8_t>(50 * 40, 77)};
  FaceRegion edge;
  edge.center = Keypoint2D::at(2, 3);
  edge.size_px = 60;
  edge.rotation_deg = 17;
  const auto clamp = align_and_crop(flat, edge, 32, 16);
  CHECK(clamp.width == 32);
  CHECK(clamp.height == 16);
  for (double v : clamp.pixels) CHECK(v == doctest::Approx(77));
}

TEST_CASE("hog lengths") {
  const HogConfig cfg;
  CHECK(hog_length(32, 32, cfg) == 324);
  CHECK(hog_length(32, 16, cfg) == 108);
  CHECK(hog_length(32, 32, cfg) + 2 * hog_length(32, 16, cfg) == 540);
  CHECK(hog(Patch(32, 32, 10), cfg).size() == 324);
  CHECK(hog(Patch(32, 16, 10), cfg).size() == 108);
  CHECK(error_of([&] { hog(Patch(30, 32), cfg); }) == ErrorCode::DimensionMismatch);
}

TEST_CASE("hog of constant and shifted patches") {
  const HogConfig cfg;
  for (double v : hog(Patch(32, 32, 123), cfg)) CHECK(v == 0.0);
  Patch p = random_patch(32, 32, 4);
  for (auto& v : p.pixels) v *= 0.5;
  Patch q = p;
  for (auto& v : q.pixels) v += 50;
  const auto a = hog(p, cfg), b = hog(q, cfg);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
}

TEST_CASE("hog blocks are finite with norm at most one") {
  const HogConfig cfg;
  const std::size_t block = std::size_t(cfg.block_cells * cfg.block_cells * cfg.bins);
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto h = hog(random_patch(32, 32, s), cfg);
    for (std::size_t b = 0; b < h.size() / block; ++b) {
      double n = 0;
      for (std::size_t i = 0; i < block; ++i) {
        const double v = h[b * block + i];
        CHECK(std::isfinite(v));
        CHECK(v >= 0.0);
        n += v * v;
      }
      CHECK(std::sqrt(n) <= 1.0 + 1e-9);
    }
  }
}

TEST_CASE("hog flip equivariance") {
  const HogConfig cfg;
  for (auto [w, h] : {std::pair{32, 32}, std::pair{32, 16}}) {
    const auto perm = hog_mirror_permutation(w, h, cfg);
    for (std::size_t i = 0; i < perm.size(); ++i) CHECK(perm[perm[i]] == i);
    for (std::uint64_t s = 0; s < 8; ++s) {
      const Patch p = random_patch(w, h, 100 + s);
      const auto a = hog(p, cfg);
      const auto b = hog(flip_horizontal(p), cfg);
      for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(b[perm[i]] - a[i]) < 1e-9);
    }
  }
}

TEST_CASE("face landmark confidences and appearance") {
  FrameRecord f;
  CHECK(face_region_confidences(f) == std::pair{0.0, 0.0});
  FaceFrame face;
  for (std::size_t i = 0; i < kFaceLandmarkCount; ++i) face.landmarks[i] = Keypoint2D::at(0, 0, 0.3);
  for (std::size_t i = 36; i <= 47; ++i) face.landmarks[i].confidence = 0.8;
  for (std::size_t i = 48; i <= 67; ++i) face.landmarks[i].confidence = i % 2 ? 0.4 : 0.6;
  f.face = face;
  const auto [upper, lower] = face_region_confidences(f);
  CHECK(upper == doctest::Approx(0.8));
  CHECK(lower == doctest::Approx(0.5));

  auto v = fixture::moving_video(4, 2);
  const auto none = face_hog_features(v, HogConfig{}, [](const FrameRecord&) { return std::optional<GrayImage>{}; });
  CHECK(none.hog.rows() == 4);
  CHECK(none.hog.cols() == 540);
  CHECK(none.hog.hasNaN());
  CHECK(none.upper_conf[0] > 0.0);

  Rng rng = make_rng(8);
  GrayImage img{256, 256, std::vector<std::uint8_t>(256 * 256)};
  for (auto& px : img.pixels) px = std::uint8_t(uniform_int(rng, 0, 255));
  const auto some = face_hog_features(v, HogConfig{}, [&](const FrameRecord&) { return std::optional<GrayImage>{img}; });
  CHECK_FALSE(some.hog.hasNaN());
  CHECK(some.hog.row(0).squaredNorm() > 0.0);
}

TEST_CASE("crop-space landmarks map through the face region") {
  FaceFrame face;
  face.source_space = FaceSpace::Crop;
  face.landmarks[30] = Keypoint2D::at(50, 50, 0.9);
  FaceRegion r;
  r.center = Keypoint2D::at(200, 100);
  r.size_px = 100;
  const auto k = face_landmark_to_frame(face, 30, r);
  CHECK(k.x == doctest::Approx(200.0).epsilon(0.01));
  CHECK(k.y == doctest::Approx(100.0).epsilon(0.01));
  face.source_space = FaceSpace::FullFrame;
  CHECK(face_landmark_to_frame(face, 30, r).x == 50);
}
