#include <doctest.h>

#include <algorithm>

#include "facetouch/preprocess/preprocess.hpp"
#include "support/fixtures.hpp"

using namespace facetouch;
using fixture::error_of;

namespace {

VideoSequence transform_video(VideoSequence v, double scale, double ox, double oy) {
  auto apply = [&](Keypoint2D& k) {
    k.x = k.x * scale + ox;
    k.y = k.y * scale + oy;
  };
  for (auto& f : v.frames) {
    for (auto& k : f.pose.keypoints) apply(k);
    for (auto* h : {&f.left_hand, &f.right_hand})
      if (*h)
        for (auto& k : (*h)->landmarks) apply(k);
    if (f.face)
      for (auto& k : f.face->landmarks) apply(k);
  }
  return v;
}

void check_same_pose(const VideoSequence& a, const VideoSequence& b, double tol) {
  REQUIRE(a.frames.size() == b.frames.size());
  for (std::size_t f = 0; f < a.frames.size(); ++f) {
    for (Joint j : kAllJoints) {
      const auto& p = a.frames[f].pose[j];
      const auto& q = b.frames[f].pose[j];
      REQUIRE(p.present == q.present);
      if (!p.present) continue;
      CHECK(std::abs(p.x - q.x) < tol);
      CHECK(std::abs(p.y - q.y) < tol);
    }
    if (a.frames[f].left_hand) {
      CHECK(std::abs(a.frames[f].left_hand->landmarks[8].x - b.frames[f].left_hand->landmarks[8].x) < tol);
    }
    if (a.frames[f].face) {
      CHECK(std::abs(a.frames[f].face->landmarks[50].y - b.frames[f].face->landmarks[50].y) < tol);
    }
  }
}

FeatureMatrix single_column_matrix(const std::vector<double>& col, const std::string& video = "v") {
  FeatureMatrix m(build_manifest(false), col.size());
  for (std::size_t r = 0; r < col.size(); ++r) {
    m.video_ids[r] = video;
    m.frame_indices[r] = int(r);
    m.values.row(r).setConstant(1.0);
    m.values(r, 0) = col[r];
  }
  return m;
}

}  // namespace

TEST_CASE("normalization arithmetic") {
  VideoSequence v;
  v.video_id = "v";
  v.fps = 10;
  FrameRecord f;
  f.pose[Joint::Neck] = Keypoint2D::at(100, 100, 0.9);
  f.pose[Joint::MidHip] = Keypoint2D::at(100, 200, 0.9);
  f.pose[Joint::RWrist] = Keypoint2D::at(150, 100, 0.9);
  f.pose[Joint::LWrist] = Keypoint2D::at(0, 0, 0.05);
  v.frames.push_back(f);
  const auto n = normalize_video(v, NormalizationParams{});
  const auto& w = n.frames[0].pose[Joint::RWrist];
  CHECK(w.present);
  CHECK(w.x == doctest::Approx(0.5));
  CHECK(w.y == doctest::Approx(0.0));
  CHECK(n.frames[0].pose[Joint::MidHip].y == doctest::Approx(1.0));
  CHECK_FALSE(n.frames[0].pose[Joint::LWrist].present);

  VideoSequence no_hip = v;
  no_hip.frames[0].pose[Joint::MidHip] = Keypoint2D{};
  CHECK(error_of([&] { normalize_video(no_hip, NormalizationParams{}); }) == ErrorCode::NoUsableTrunk);
}

TEST_CASE("frames without a trunk borrow the median trunk and last neck") {
  auto v = fixture::moving_video(5);
  v.frames[2].pose[Joint::MidHip] = Keypoint2D{};
  v.frames[2].pose[Joint::Neck] = Keypoint2D{};
  const auto n = normalize_video(v, NormalizationParams{});
  // Neck (100,100) and trunk 100 px come from the other frames.
  CHECK(n.frames[2].pose[Joint::Nose].y == doctest::Approx(-0.3));
  CHECK(n.frames[2].pose[Joint::RShoulder].x == doctest::Approx(-0.2));
}

TEST_CASE("normalization is scale and translation invariant") {
  const auto v = fixture::moving_video(25, 11);
  const auto base = normalize_video(v, NormalizationParams{});
  for (double s : {0.37, 2.0, 13.5}) {
    check_same_pose(base, normalize_video(transform_video(v, s, 0, 0), NormalizationParams{}), 1e-9);
  }
  for (double o : {-500.0, 3.25, 1e4}) {
    check_same_pose(base, normalize_video(transform_video(v, 1.0, o, -o / 2), NormalizationParams{}), 1e-9);
  }
}

TEST_CASE("channel smoothing and interpolation") {
  const std::vector<double> spike{0, 0, 10, 0, 0};
  const auto s = smooth_channel(spike, 3, 1, 5);
  CHECK(s[2] == doctest::Approx(0.0));

  std::vector<double> gap{1, kMissing, 3};
  interpolate_gaps(gap, 5);
  CHECK(gap[1] == doctest::Approx(2.0));

  std::vector<double> longgap{1, kMissing, kMissing, kMissing, 5};
  interpolate_gaps(longgap, 2);
  CHECK(is_missing(longgap[2]));
  std::vector<double> fits{1, kMissing, kMissing, 5};
  interpolate_gaps(fits, 2);
  CHECK(fits[2] == doctest::Approx(11.0 / 3.0));

  std::vector<double> ends{kMissing, 2, kMissing, 4, kMissing};
  interpolate_gaps(ends, -1);
  CHECK(ends == std::vector<double>{2, 2, 3, 4, 4});
}

TEST_CASE("smoothing stays within the local envelope") {
  Rng rng = make_rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> x(60);
    for (auto& v : x) v = uniform01(rng) < 0.1 ? kMissing : normal(rng, 0, 3);
    const int mw = 5, kw = 3;
    const auto y = smooth_channel(x, mw, kw, 10);
    const int span = mw / 2 + kw / 2;
    for (int i = 0; i < 60; ++i) {
      if (is_missing(y[std::size_t(i)]) || is_missing(x[std::size_t(i)])) continue;
      double lo = 1e300, hi = -1e300;
      for (int j = std::max(0, i - span); j <= std::min(59, i + span); ++j) {
        if (is_missing(x[std::size_t(j)])) continue;
        lo = std::min(lo, x[std::size_t(j)]);
        hi = std::max(hi, x[std::size_t(j)]);
      }
      CHECK(y[std::size_t(i)] >= lo - 1e-12);
      CHECK(y[std::size_t(i)] <= hi + 1e-12);
    }
  }
}

TEST_CASE("smooth_and_interpolate fills short pose gaps") {
  auto v = fixture::moving_video(30, 2);
  v.frames[10].pose[Joint::LElbow] = Keypoint2D{};
  for (std::size_t f = 27; f < 30; ++f) v.frames[f].pose[Joint::REar] = Keypoint2D{};
  for (std::size_t f = 0; f < 12; ++f) v.frames[f].pose[Joint::LEar] = Keypoint2D{};
  NormalizationParams p;
  p.max_gap_frames = 5;
  const auto s = smooth_and_interpolate(normalize_video(v, p), p);
  CHECK(s.frames[10].pose[Joint::LElbow].present);
  // A short trailing gap takes the nearest value; a long leading one stays open.
  CHECK(s.frames[29].pose[Joint::REar].present);
  CHECK(s.frames[29].pose[Joint::REar].x == s.frames[26].pose[Joint::REar].x);
  CHECK_FALSE(s.frames[0].pose[Joint::LEar].present);
  CHECK(s.frames.size() == 30);

  NormalizationParams bad;
  bad.median_window = 4;
  CHECK(error_of([&] { bad.validate(); }) == ErrorCode::InvalidConfig);
  bad.median_window = 5;
  bad.low_confidence_threshold = 1.0;
  CHECK(error_of([&] { bad.validate(); }) == ErrorCode::InvalidConfig);
  CHECK(NormalizationParams{}.max_gap_for(29.97) == 30);
}

TEST_CASE("outlier cleaning per video") {
  const auto cleaned = clean_features(single_column_matrix({1, 1, 1, 100, 1}));
  CHECK(cleaned.values(3, 0) == doctest::Approx(1.0));

  const auto constant = single_column_matrix({4, 4, 4, 4});
  CHECK(clean_features(constant).values == constant.values);

  const auto missing = clean_features(single_column_matrix({kMissing, kMissing, kMissing}));
  CHECK(is_missing(missing.values(1, 0)));

  // Videos are cleaned independently: 100 is ordinary in the second video.
  auto two = concat(single_column_matrix({1, 1, 1, 1, 1}, "a"), single_column_matrix({100, 101, 99, 100, 102}, "b"));
  const auto c2 = clean_features(two);
  CHECK(c2.values(6, 0) == 101);

  // Confidence columns are never treated as outliers.
  auto conf = single_column_matrix({1, 1, 1, 1, 1});
  const auto ci = *conf.manifest.index_of("hand_conf_L");
  conf.values(2, ci) = 0.0;
  CHECK(clean_features(conf).values(2, ci) == 0.0);
}

TEST_CASE("mean imputation") {
  RowMatrix train(2, 3);
  train << 2, kMissing, 1, 4, kMissing, 1;
  const auto stats = fit_imputation(train);
  CHECK(stats.means[0] == 3.0);
  CHECK(stats.means[1] == 0.0);
  CHECK(stats.warnings.size() == 1);
  RowMatrix test(1, 3);
  test << kMissing, kMissing, 7;
  apply_imputation_inplace(test, stats);
  CHECK(test(0, 0) == 3.0);
  CHECK(test(0, 1) == 0.0);
  CHECK(test(0, 2) == 7.0);

  RowMatrix full(2, 3);
  full << 1, 2, 3, 4, 5, 6;
  RowMatrix copy = full;
  apply_imputation_inplace(copy, stats);
  CHECK(copy == full);

  RowMatrix once(2, 3);
  once << kMissing, 1, kMissing, 2, kMissing, 3;
  apply_imputation_inplace(once, stats);
  RowMatrix twice = once;
  apply_imputation_inplace(twice, stats);
  CHECK(once == twice);
  CHECK_FALSE(once.hasNaN());
}
