#include "facetouch/synth/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <numeric>

#include "facetouch/core/error.hpp"
#include "facetouch/core/random.hpp"

namespace fs = std::filesystem;

namespace facetouch {

namespace {

using namespace synth_constants;
constexpr double kPi = std::numbers::pi;
constexpr double kDeg = kPi / 180.0;

// RNG stream ids; per-video streams are offset by the video index.
constexpr std::uint64_t kScheduleStream = 1'000'000;
constexpr std::uint64_t kMotionStream = 2'000'000;
constexpr std::uint64_t kNoiseStream = 3'000'000;
constexpr std::uint64_t kInfantStream = 4'000'000;
constexpr std::uint64_t kMullenStream = 5'000'000;
constexpr std::uint64_t kRenderStream = 6'000'000;

Point2 operator+(Point2 a, Point2 b) { return {a.x + b.x, a.y + b.y}; }
Point2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }
Point2 operator*(double s, Point2 a) { return {s * a.x, s * a.y}; }
double norm(Point2 a) { return std::hypot(a.x, a.y); }
Point2 rotate(Point2 p, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  return {c * p.x - s * p.y, s * p.x + c * p.y};
}
Point2 polar(double length, double angle) { return {length * std::cos(angle), length * std::sin(angle)}; }

// Face template in head-local trunk units (x towards image right, y down) for
// the subject's right side and the midline; the rest follows by mirroring.
struct FaceTemplate {
  std::array<Point2, kFaceLandmarkCount> points{};
};

FaceTemplate make_face_template() {
  FaceTemplate t;
  std::array<bool, kFaceLandmarkCount> set{};
  auto put = [&](std::size_t i, double x, double y) {
    t.points[i] = {x, y};
    set[i] = true;
  };
  for (std::size_t i = 0; i <= 8; ++i) {
    const double a = kPi * double(i) / 16.0;
    put(i, -0.27 * std::cos(a), -0.02 + 0.3 * std::sin(a));
  }
  for (std::size_t k = 0; k < 5; ++k) put(17 + k, -0.2 + 0.04 * double(k), -0.13 - 0.015 * std::sin(kPi * double(k) / 4.0));
  for (std::size_t k = 0; k < 4; ++k) put(27 + k, 0.0, -0.08 + 0.04 * double(k));
  put(31, -0.05, 0.07);
  put(32, -0.025, 0.075);
  put(33, 0.0, 0.078);
  put(36, -0.17, -0.05);
  put(37, -0.14, -0.07);
  put(38, -0.10, -0.07);
  put(39, -0.07, -0.05);
  put(40, -0.10, -0.035);
  put(41, -0.14, -0.035);
  put(48, -0.08, 0.17);
  put(49, -0.05, 0.15);
  put(50, -0.02, 0.145);
  put(51, 0.0, 0.15);
  put(57, 0.0, 0.2);
  put(58, -0.03, 0.195);
  put(59, -0.06, 0.185);
  put(60, -0.06, 0.17);
  put(61, -0.02, 0.163);
  put(62, 0.0, 0.163);
  put(66, 0.0, 0.177);
  put(67, -0.02, 0.177);
  for (std::size_t i = 0; i < kFaceLandmarkCount; ++i) {
    if (!set[i]) continue;
    const std::size_t m = mirror_face_landmark(i);
    if (!set[m]) t.points[m] = {-t.points[i].x, t.points[i].y};
  }
  return t;
}

const FaceTemplate& face_template() {
  static const FaceTemplate t = make_face_template();
  return t;
}

// Head-local anchor points (trunk units).
constexpr Point2 kNoseTip{0.0, 0.05};
constexpr Point2 kREye{-0.12, -0.05};
constexpr Point2 kLEye{0.12, -0.05};
constexpr Point2 kREar{-0.3, -0.02};
constexpr Point2 kLEar{0.3, -0.02};
constexpr Point2 kRCheek{-0.17, 0.08};
constexpr Point2 kLCheek{0.17, 0.08};
constexpr Point2 kMouth{0.0, 0.17};
constexpr double kHeadA = 0.3, kHeadB = 0.36, kHeadOffset = 0.45;
constexpr double kUpperArm = 0.45, kForearm = 0.4;
// Fingertip angle offsets (degrees, left hand) and lengths from the wrist.
constexpr std::array<double, 5> kFingerAngle{-40.0, 0.0, 10.0, 20.0, 30.0};
constexpr std::array<double, 5> kFingerLength{0.12, 0.2, 0.21, 0.19, 0.16};

struct Sinusoids {
  std::array<double, 3> amp{}, freq{}, phase{};
  double at(double t) const {
    double s = 0.0;
    for (std::size_t k = 0; k < 3; ++k) s += amp[k] * std::sin(2 * kPi * freq[k] * t + phase[k]);
    return s;
  }
};

Sinusoids draw_sinusoids(Rng& rng, double amp_lo, double amp_hi, double f_lo, double f_hi) {
  Sinusoids s;
  for (std::size_t k = 0; k < 3; ++k) {
    s.amp[k] = uniform(rng, amp_lo, amp_hi);
    s.freq[k] = uniform(rng, f_lo, f_hi);
    s.phase[k] = uniform(rng, 0.0, 2 * kPi);
  }
  return s;
}

struct TouchEvent {
  int start = 0;
  int approach = 0;
  int hold = 0;
  int retract = 0;
  int hand = 0;  // 0 left, 1 right
  Point2 target;  // head-local trunk units
  int end() const { return start + approach + hold + retract; }
};

struct InfantTraits {
  double activity = 1.0;
  double trunk = 80.0;
};

InfantTraits infant_traits(const SynthConfig& config, std::size_t infant) {
  Rng rng = make_rng(config.seed, kInfantStream + infant);
  InfantTraits t;
  t.activity = uniform(rng, kActivityMin, kActivityMax);
  t.trunk = uniform(rng, 0.27, 0.35) * std::min(config.image_width, config.image_height);
  return t;
}

Point2 draw_target(Rng& rng, const SynthConfig& config, int& hand) {
  const auto& dist = config.touch_region_distribution;
  const double total = std::accumulate(dist.begin(), dist.end(), 0.0);
  double u = uniform01(rng) * total;
  std::size_t region = 0;
  while (region + 1 < kRegionCount && u >= dist[region]) {
    u -= dist[region];
    ++region;
  }
  const bool left_side = uniform01(rng) < 0.5;
  Point2 p;
  switch (static_cast<Region>(region)) {
    case Region::Eyes: p = left_side ? kLEye : kREye; break;
    case Region::Ears: p = left_side ? kLEar : kREar; break;
    case Region::Nose: p = kNoseTip; break;
    case Region::Mouth: p = kMouth; break;
    case Region::Cheeks: p = left_side ? kLCheek : kRCheek; break;
  }
  const bool midline = p.x == 0.0;
  const bool same_side = uniform01(rng) < 0.75;
  if (midline) {
    hand = same_side ? 0 : 1;
  } else {
    hand = (left_side == same_side) ? 0 : 1;
  }
  p.x += uniform(rng, -0.02, 0.02);
  p.y += uniform(rng, -0.02, 0.02);
  return p;
}

std::vector<TouchEvent> schedule_events(const SynthConfig& config, std::size_t video, double rate) {
  Rng rng = make_rng(config.seed, kScheduleStream + video);
  std::vector<TouchEvent> events;
  const double mean_gap = rate > 0.0 ? 60.0 * config.fps / rate : 1e18;
  double t = 0.0;
  while (true) {
    // Every event consumes the same draws so schedules shift smoothly with rate.
    const double gap = -std::log(1.0 - uniform01(rng)) * mean_gap;
    TouchEvent e;
    e.approach = uniform_int(rng, kApproachMin, kApproachMax);
    e.hold = uniform_int(rng, kHoldMin, kHoldMax);
    e.retract = uniform_int(rng, kApproachMin, kApproachMax);
    e.target = draw_target(rng, config, e.hand);
    t += gap;
    if (t >= config.frames_per_video) break;
    e.start = int(t);
    events.push_back(e);
    t = e.end();
  }
  return events;
}

double wrap_angle(double a) {
  while (a > kPi) a -= 2 * kPi;
  while (a < -kPi) a += 2 * kPi;
  return a;
}

double smoothstep(double u) {
  u = std::clamp(u, 0.0, 1.0);
  return u * u * (3 - 2 * u);
}

// Two-link IK placing the index fingertip on `target`; returns absolute
// (upper, fore) angles with the elbow bent away from the body midline.
std::pair<double, double> solve_arm(Point2 shoulder, Point2 target, double l1, double l2, double midline_x) {
  Point2 d = target - shoulder;
  double dist = norm(d);
  dist = std::clamp(dist, std::abs(l1 - l2) + 1e-6, l1 + l2 - 1e-6);
  const double base = std::atan2(d.y, d.x);
  const double cos_off = std::clamp((l1 * l1 + dist * dist - l2 * l2) / (2 * l1 * dist), -1.0, 1.0);
  const double off = std::acos(cos_off);
  const Point2 reach = shoulder + polar(dist, base);
  std::pair<double, double> best{};
  double best_out = -1e300;
  for (double sign : {1.0, -1.0}) {
    const double upper = base + sign * off;
    const Point2 elbow = shoulder + polar(l1, upper);
    const double outward = std::abs(elbow.x - midline_x);
    if (outward > best_out) {
      best_out = outward;
      const Point2 f = reach - elbow;
      best = {upper, std::atan2(f.y, f.x)};
    }
  }
  return best;
}

double ellipse_distance(Point2 p, const TrueFrame& f) {
  const Point2 local = rotate(p - f.head_center, -f.head_angle);
  const double q = std::hypot(local.x / f.head_a, local.y / f.head_b);
  if (q <= 1.0) return 0.0;
  // Radial approximation, exact along the axes.
  return (q - 1.0) * std::hypot(local.x, local.y) / q;
}

void fill_hand(TrueFrame& f, int hand, Point2 wrist, double fore_angle, double trunk) {
  const double side = hand == 0 ? 1.0 : -1.0;
  auto& pts = f.hands[std::size_t(hand)];
  pts[0] = wrist;
  for (std::size_t finger = 0; finger < 5; ++finger) {
    const double ang = fore_angle + side * kFingerAngle[finger] * kDeg;
    const Point2 tip = polar(kFingerLength[finger] * trunk, ang);
    const std::array<double, 4> frac = finger == 0 ? std::array<double, 4>{0.25, 0.5, 0.75, 1.0}
                                                   : std::array<double, 4>{0.45, 0.65, 0.83, 1.0};
    for (std::size_t k = 0; k < 4; ++k) pts[1 + 4 * finger + k] = wrist + frac[k] * tip;
  }
}

void label_frame(TrueFrame& f) {
  const double t = f.trunk;
  double best = 1e300;
  for (const auto& hand : f.hands) {
    for (std::size_t tip : kFingertipIndices) best = std::min(best, ellipse_distance(hand[tip], f));
  }
  f.fingertip_head_distance = best / t;
  f.on_head = f.fingertip_head_distance <= kTouchThreshold;
  f.regions = {};
  if (!f.on_head) return;

  auto to_frame = [&](Point2 local) { return f.head_center + rotate(t * local, f.head_angle); };
  std::array<std::vector<Point2>, kRegionCount> groups;
  for (std::size_t i = 36; i <= 47; ++i) groups[0].push_back(f.face[i]);
  groups[1] = {to_frame(kREar), to_frame(kLEar)};
  for (std::size_t i = 27; i <= 35; ++i) groups[2].push_back(f.face[i]);
  for (std::size_t i = 48; i <= 67; ++i) groups[3].push_back(f.face[i]);
  groups[4] = {to_frame(kRCheek), to_frame(kLCheek)};
  std::array<double, kRegionCount> dist{};
  for (std::size_t g = 0; g < kRegionCount; ++g) {
    dist[g] = 1e300;
    for (const auto& hand : f.hands) {
      for (std::size_t tip : kFingertipIndices) {
        for (const auto& p : groups[g]) dist[g] = std::min(dist[g], norm(hand[tip] - p) / t);
      }
    }
  }
  const std::size_t nearest = std::size_t(std::min_element(dist.begin(), dist.end()) - dist.begin());
  for (std::size_t g = 0; g < kRegionCount; ++g) f.regions[g] = g == nearest || dist[g] <= kRegionThreshold;
}

std::vector<TrueFrame> simulate_truth(const SynthConfig& config, std::size_t video, double rate) {
  const std::size_t infant = video % config.infant_count();
  const InfantTraits traits = infant_traits(config, infant);
  const auto events = schedule_events(config, video, rate * traits.activity);
  Rng rng = make_rng(config.seed, kMotionStream + video);

  const double T = traits.trunk;
  const Point2 neck0{config.image_width * 0.5 + uniform(rng, -0.04, 0.04) * config.image_width,
                     config.image_height * 0.4 + uniform(rng, -0.03, 0.03) * config.image_height};
  const double body_angle = uniform(rng, -10.0, 10.0) * kDeg;
  const Sinusoids head_tilt = draw_sinusoids(rng, 1.0, 3.0, 0.1, 0.5);
  const Sinusoids drift_x = draw_sinusoids(rng, 0.3, 1.0, 0.05, 0.3);
  const Sinusoids drift_y = draw_sinusoids(rng, 0.3, 1.0, 0.05, 0.3);
  std::array<Sinusoids, 2> upper_noise, fore_noise;
  std::array<double, 2> upper_rest{}, fore_rest{};
  for (int h = 0; h < 2; ++h) {
    upper_noise[std::size_t(h)] = draw_sinusoids(rng, 3.0, 9.0, 0.2, 1.2);
    fore_noise[std::size_t(h)] = draw_sinusoids(rng, 4.0, 12.0, 0.3, 1.5);
    const double up = uniform(rng, 40.0, 65.0) * kDeg;
    const double fo = uniform(rng, 85.0, 115.0) * kDeg;
    // Left arm on the image right; the right arm mirrors it.
    upper_rest[std::size_t(h)] = h == 0 ? up : kPi - up;
    fore_rest[std::size_t(h)] = h == 0 ? fo : kPi - fo;
  }
  std::vector<std::array<double, 2>> hold_jitter_phase(events.size());
  for (auto& p : hold_jitter_phase) p = {uniform(rng, 0.0, 2 * kPi), uniform(rng, 0.0, 2 * kPi)};

  const FaceTemplate& tmpl = face_template();
  std::vector<TrueFrame> out(std::size_t(config.frames_per_video));
  for (int t = 0; t < config.frames_per_video; ++t) {
    const double time = t / config.fps;
    TrueFrame& f = out[std::size_t(t)];
    f.trunk = T;
    const Point2 neck = neck0 + Point2{drift_x.at(time), drift_y.at(time)};
    auto body = [&](Point2 local) { return neck + rotate(T * local, body_angle); };
    f.joints[index_of(Joint::Neck)] = neck;
    f.joints[index_of(Joint::MidHip)] = body({0.0, 1.0});
    f.joints[index_of(Joint::RShoulder)] = body({-0.4, 0.08});
    f.joints[index_of(Joint::LShoulder)] = body({0.4, 0.08});

    f.head_angle = body_angle + head_tilt.at(time) * kDeg;
    f.head_center = neck + rotate({0.0, -kHeadOffset * T}, f.head_angle);
    f.head_a = kHeadA * T;
    f.head_b = kHeadB * T;
    auto head = [&](Point2 local) { return f.head_center + rotate(T * local, f.head_angle); };
    for (std::size_t i = 0; i < kFaceLandmarkCount; ++i) f.face[i] = head(tmpl.points[i]);
    f.joints[index_of(Joint::Nose)] = head(kNoseTip);
    f.joints[index_of(Joint::REye)] = head(kREye);
    f.joints[index_of(Joint::LEye)] = head(kLEye);
    f.joints[index_of(Joint::REar)] = head(kREar);
    f.joints[index_of(Joint::LEar)] = head(kLEar);

    for (int h = 0; h < 2; ++h) {
      const std::size_t hs = std::size_t(h);
      const Point2 shoulder = f.joints[index_of(h == 0 ? Joint::LShoulder : Joint::RShoulder)];
      double upper = upper_rest[hs] + body_angle + upper_noise[hs].at(time) * kDeg;
      double fore = fore_rest[hs] + body_angle + fore_noise[hs].at(time) * kDeg;
      for (std::size_t k = 0; k < events.size(); ++k) {
        const TouchEvent& e = events[k];
        if (e.hand != h || t < e.start || t >= e.end()) continue;
        Point2 local = e.target;
        local.x += 0.015 * std::sin(2 * kPi * 0.7 * time + hold_jitter_phase[k][0]);
        local.y += 0.015 * std::sin(2 * kPi * 0.9 * time + hold_jitter_phase[k][1]);
        const auto [iu, ifo] =
            solve_arm(shoulder, head(local), kUpperArm * T, (kForearm + kFingerLength[1]) * T, neck.x);
        double w;
        if (t < e.start + e.approach) {
          w = smoothstep(double(t - e.start + 1) / double(e.approach));
        } else if (t < e.start + e.approach + e.hold) {
          w = 1.0;
        } else {
          w = 1.0 - smoothstep(double(t - e.start - e.approach - e.hold + 1) / double(e.retract + 1));
        }
        upper += w * wrap_angle(iu - upper);
        fore += w * wrap_angle(ifo - fore);
      }
      const Point2 elbow = shoulder + polar(kUpperArm * T, upper);
      const Point2 wrist = elbow + polar(kForearm * T, fore);
      f.joints[index_of(h == 0 ? Joint::LElbow : Joint::RElbow)] = elbow;
      f.joints[index_of(h == 0 ? Joint::LWrist : Joint::RWrist)] = wrist;
      fill_hand(f, h, wrist, fore, T);
    }
    label_frame(f);
  }
  return out;
}

Keypoint2D observe(Point2 p, double conf, double sigma, Rng& rng) {
  return Keypoint2D::at(p.x + normal(rng, 0.0, sigma), p.y + normal(rng, 0.0, sigma), conf);
}

VideoSequence observe_video(const SynthConfig& config, std::size_t video, const std::vector<TrueFrame>& truth) {
  Rng rng = make_rng(config.seed, kNoiseStream + video);
  VideoSequence v;
  v.video_id = synth_video_id(video);
  v.infant_id = synth_infant_id(video % config.infant_count());
  v.fps = config.fps;
  const double sigma = config.noise_std_px;
  for (std::size_t t = 0; t < truth.size(); ++t) {
    const TrueFrame& f = truth[t];
    FrameRecord r;
    r.frame_index = int(t);
    r.timestamp_s = double(t) / config.fps;
    for (std::size_t j = 0; j < kJointCount; ++j) {
      const double conf = uniform(rng, 0.7, 0.98);
      const double drop = uniform01(rng);
      Keypoint2D k = observe(f.joints[j], conf, sigma, rng);
      if (drop < config.pose_dropout_prob * 0.5) {
        k = Keypoint2D{};
      } else if (drop < config.pose_dropout_prob) {
        k.confidence = 0.05;
      }
      r.pose.keypoints[j] = k;
    }
    for (int h = 0; h < 2; ++h) {
      const double drop = uniform01(rng);
      HandFrame hand;
      hand.side = h == 0 ? HandSide::Left : HandSide::Right;
      hand.detection_confidence = uniform(rng, 0.6, 0.99);
      for (std::size_t l = 0; l < kHandLandmarkCount; ++l) {
        hand.landmarks[l] = observe(f.hands[std::size_t(h)][l], uniform(rng, 0.5, 0.95), sigma, rng);
      }
      if (drop >= config.hand_dropout_prob) r.hand(hand.side) = hand;
    }
    const double face_drop = uniform01(rng);
    FaceFrame face;
    face.source_space = FaceSpace::FullFrame;
    for (std::size_t i = 0; i < kFaceLandmarkCount; ++i) {
      double occlusion = 1e300;
      for (const auto& hand : f.hands) {
        for (std::size_t tip : kFingertipIndices) occlusion = std::min(occlusion, norm(hand[tip] - f.face[i]));
      }
      const double base = uniform(rng, 0.8, 0.95);
      face.landmarks[i] = observe(f.face[i], occlusion < 0.12 * f.trunk ? base * 0.35 : base, sigma, rng);
    }
    if (face_drop >= config.face_dropout_prob) r.face = face;
    v.frames.push_back(std::move(r));
  }
  return v;
}

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void SynthConfig::validate() const {
  auto prob = [](double p, const char* name) {
    if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorCode::InvalidConfig, std::string(name) + " must lie in [0, 1]");
  };
  if (n_videos == 0) throw Error(ErrorCode::InvalidConfig, "n_videos must be positive");
  if (frames_per_video < 1) throw Error(ErrorCode::InvalidConfig, "frames_per_video must be positive");
  if (!(fps > 0.0)) throw Error(ErrorCode::InvalidConfig, "fps must be positive");
  if (image_width < 32 || image_height < 32) throw Error(ErrorCode::InvalidConfig, "image must be at least 32x32");
  if (!(noise_std_px >= 0.0)) throw Error(ErrorCode::InvalidConfig, "noise_std_px must be non-negative");
  prob(hand_dropout_prob, "hand_dropout_prob");
  prob(face_dropout_prob, "face_dropout_prob");
  prob(pose_dropout_prob, "pose_dropout_prob");
  prob(mullen_coupling, "mullen_coupling");
  prob(gm_coupling, "gm_coupling");
  if (!(touch_event_rate >= 0.0)) throw Error(ErrorCode::InvalidConfig, "touch_event_rate must be non-negative");
  if (target_prevalence) prob(*target_prevalence, "target_prevalence");
  double sum = 0.0;
  for (double p : touch_region_distribution) {
    prob(p, "touch_region_distribution entries");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw Error(ErrorCode::InvalidConfig, "touch_region_distribution must sum to 1");
  if (n_infants > n_videos) throw Error(ErrorCode::InvalidConfig, "more infants than videos");
}

std::string synth_video_id(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "vid_%03zu", index);
  return buf;
}

std::string synth_infant_id(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "inf_%03zu", index);
  return buf;
}

std::vector<LabelRecord> oracle_labels(const SynthVideo& video) {
  std::vector<LabelRecord> out;
  out.reserve(video.truth.size());
  for (std::size_t t = 0; t < video.truth.size(); ++t) {
    LabelRecord l;
    l.video_id = video.video_id;
    l.frame_index = int(t);
    l.on_head = video.truth[t].on_head;
    l.regions = video.truth[t].regions;
    out.push_back(l);
  }
  return out;
}

SynthVideo generate_video(const SynthConfig& config, std::size_t index, double touch_event_rate) {
  SynthVideo v;
  v.video_id = synth_video_id(index);
  v.infant_id = synth_infant_id(index % config.infant_count());
  v.truth = simulate_truth(config, index, touch_event_rate);
  v.observed = observe_video(config, index, v.truth);
  v.labels = oracle_labels(v);
  std::size_t on = 0;
  for (const auto& f : v.truth) on += f.on_head;
  v.true_ratio = v.truth.empty() ? 0.0 : double(on) / double(v.truth.size());
  return v;
}

double calibrate_touch_rate(const SynthConfig& config, double target_prevalence) {
  config.validate();
  auto prevalence = [&](double rate) {
    std::size_t on = 0, total = 0;
    for (std::size_t v = 0; v < config.n_videos; ++v) {
      for (const auto& f : simulate_truth(config, v, rate)) {
        on += f.on_head;
        ++total;
      }
    }
    return double(on) / double(total);
  };
  double lo = 0.0, hi = 240.0;
  for (int it = 0; it < 24; ++it) {
    const double mid = 0.5 * (lo + hi);
    (prevalence(mid) < target_prevalence ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

SynthDataset generate_in_memory(const SynthConfig& config) {
  config.validate();
  SynthDataset ds;
  ds.touch_event_rate =
      config.target_prevalence ? calibrate_touch_rate(config, *config.target_prevalence) : config.touch_event_rate;
  for (std::size_t v = 0; v < config.n_videos; ++v) ds.videos.push_back(generate_video(config, v, ds.touch_event_rate));

  const std::size_t n_inf = config.infant_count();
  std::vector<double> ratio(n_inf, 0.0);
  std::vector<std::size_t> frames(n_inf, 0);
  for (std::size_t v = 0; v < ds.videos.size(); ++v) {
    const std::size_t inf = v % n_inf;
    ratio[inf] += ds.videos[v].true_ratio * double(ds.videos[v].truth.size());
    frames[inf] += ds.videos[v].truth.size();
  }
  for (std::size_t i = 0; i < n_inf; ++i) {
    ratio[i] = frames[i] ? ratio[i] / double(frames[i]) : 0.0;
    ds.infant_true_ratio[synth_infant_id(i)] = ratio[i];
  }

  // Slopes with an exact in-sample correlation to the true ratios: the noise
  // is orthogonalized against the standardized ratios before mixing.
  Rng rng = make_rng(config.seed, kMullenStream);
  const double mean_r = std::accumulate(ratio.begin(), ratio.end(), 0.0) / double(n_inf);
  double var_r = 0.0;
  for (double r : ratio) var_r += (r - mean_r) * (r - mean_r);
  var_r /= double(n_inf);
  std::vector<double> z(n_inf, 0.0);
  if (var_r > 0.0) {
    for (std::size_t i = 0; i < n_inf; ++i) z[i] = (ratio[i] - mean_r) / std::sqrt(var_r);
  }
  auto coupled = [&](double rho) {
    std::vector<double> e(n_inf);
    for (double& x : e) x = normal01(rng);
    const double me = std::accumulate(e.begin(), e.end(), 0.0) / double(n_inf);
    for (double& x : e) x -= me;
    double dot = 0.0;
    for (std::size_t i = 0; i < n_inf; ++i) dot += e[i] * z[i];
    for (std::size_t i = 0; i < n_inf; ++i) e[i] -= dot / double(n_inf) * z[i];
    double ve = 0.0;
    for (double x : e) ve += x * x;
    ve /= double(n_inf);
    const double se = ve > 0.0 ? std::sqrt(ve) : 1.0;
    const double zr = var_r > 0.0 ? rho : 0.0;
    std::vector<double> out(n_inf);
    for (std::size_t i = 0; i < n_inf; ++i) out[i] = zr * z[i] + std::sqrt(1.0 - zr * zr) * e[i] / se;
    return out;
  };
  const auto fm = coupled(config.mullen_coupling);
  const auto gm = coupled(config.gm_coupling);
  for (std::size_t i = 0; i < n_inf; ++i) {
    const double fm_slope = 2.0 + 0.5 * fm[i];
    const double gm_slope = 2.5 + 0.6 * gm[i];
    const double fm_base = uniform(rng, 1.0, 3.0);
    const double gm_base = uniform(rng, 1.0, 4.0);
    for (double age : kVisitAges) {
      MullenRecord rec;
      rec.infant_id = synth_infant_id(i);
      rec.visit_age_months = age;
      // Development slows after the first five months.
      const double fm_age = age <= 5.0 ? age : 5.0 + 0.5 * (age - 5.0);
      const double gm_age = age <= 5.0 ? age : 5.0 + 0.5 * (age - 5.0);
      rec.fm_raw = fm_base + fm_slope * fm_age;
      rec.gm_raw = gm_base + gm_slope * gm_age;
      ds.mullen.push_back(rec);
    }
  }
  return ds;
}

namespace {

struct Canvas {
  int w, h;
  std::vector<double> px;
  void blend(int x, int y, double value, double coverage) {
    double& p = px[std::size_t(y) * std::size_t(w) + std::size_t(x)];
    p = p * (1.0 - coverage) + value * coverage;
  }
  // Signed-distance shapes with a one-pixel anti-aliased edge.
  template <typename Sdf>
  void fill(double x0, double y0, double x1, double y1, double value, Sdf sdf) {
    const int xa = std::max(0, int(std::floor(x0)) - 1), xb = std::min(w - 1, int(std::ceil(x1)) + 1);
    const int ya = std::max(0, int(std::floor(y0)) - 1), yb = std::min(h - 1, int(std::ceil(y1)) + 1);
    for (int y = ya; y <= yb; ++y) {
      for (int x = xa; x <= xb; ++x) {
        const double cov = std::clamp(0.5 - sdf(Point2{double(x), double(y)}), 0.0, 1.0);
        if (cov > 0.0) blend(x, y, value, cov);
      }
    }
  }
  void capsule(Point2 a, Point2 b, double r, double value) {
    const Point2 ab = b - a;
    const double len2 = ab.x * ab.x + ab.y * ab.y;
    fill(std::min(a.x, b.x) - r, std::min(a.y, b.y) - r, std::max(a.x, b.x) + r, std::max(a.y, b.y) + r, value,
         [&](Point2 p) {
           const Point2 ap = p - a;
           const double u = len2 > 0 ? std::clamp((ap.x * ab.x + ap.y * ab.y) / len2, 0.0, 1.0) : 0.0;
           return norm(p - (a + u * ab)) - r;
         });
  }
  void disc(Point2 c, double r, double value) { capsule(c, c, r, value); }
  void ellipse(Point2 c, double a, double b, double angle, double value) {
    const double r = std::max(a, b);
    fill(c.x - r, c.y - r, c.x + r, c.y + r, value, [&](Point2 p) {
      const Point2 l = rotate(p - c, -angle);
      const double q = std::hypot(l.x / a, l.y / b);
      return (q - 1.0) * std::min(a, b);
    });
  }
};

}  // namespace

GrayImage render_frame(const TrueFrame& f, const SynthConfig& config, std::uint64_t noise_seed) {
  Canvas c{config.image_width, config.image_height,
           std::vector<double>(std::size_t(config.image_width) * std::size_t(config.image_height), 0.0)};
  for (int y = 0; y < c.h; ++y) {
    for (int x = 0; x < c.w; ++x) c.px[std::size_t(y) * std::size_t(c.w) + std::size_t(x)] = 30.0 + 20.0 * y / c.h;
  }
  const double T = f.trunk;
  auto J = [&](Joint j) { return f.joints[index_of(j)]; };
  c.capsule(J(Joint::Neck), J(Joint::MidHip), 0.2 * T, 110.0);
  c.capsule(J(Joint::RShoulder), J(Joint::LShoulder), 0.08 * T, 125.0);
  for (auto [s, e, w] : {std::tuple{Joint::LShoulder, Joint::LElbow, Joint::LWrist},
                         std::tuple{Joint::RShoulder, Joint::RElbow, Joint::RWrist}}) {
    c.capsule(J(s), J(e), 0.065 * T, 150.0);
    c.capsule(J(e), J(w), 0.055 * T, 155.0);
  }
  c.ellipse(f.head_center, f.head_a, f.head_b, f.head_angle, 190.0);
  for (std::size_t i = 17; i <= 26; i += 1) {
    if (i != 21 && i != 26) c.capsule(f.face[i], f.face[i + 1], 0.012 * T, 120.0);
  }
  for (std::size_t eye : {36u, 42u}) {
    Point2 centre{};
    for (std::size_t k = 0; k < 6; ++k) centre = centre + (1.0 / 6.0) * f.face[eye + k];
    c.ellipse(centre, 0.045 * T, 0.025 * T, f.head_angle, 45.0);
  }
  c.disc(f.face[33], 0.025 * T, 150.0);
  Point2 mouth{};
  for (std::size_t k = 48; k <= 59; ++k) mouth = mouth + (1.0 / 12.0) * f.face[k];
  c.ellipse(mouth, 0.075 * T, 0.03 * T, f.head_angle, 70.0);
  for (const auto& hand : f.hands) {
    const Point2 palm = hand[0] + 0.45 * (hand[9] - hand[0]);
    c.disc(palm, 0.07 * T, 215.0);
    for (std::size_t finger = 0; finger < 5; ++finger) c.capsule(hand[0], hand[4 + 4 * finger], 0.02 * T, 220.0);
  }

  Rng rng(mix_seed(noise_seed, 0));
  GrayImage img;
  img.width = c.w;
  img.height = c.h;
  img.pixels.resize(c.px.size());
  for (std::size_t i = 0; i < c.px.size(); ++i) {
    const double noise = (double(rng() >> 53) / double(1 << 11) - 0.5) * 12.0;
    img.pixels[i] = std::uint8_t(std::clamp(std::lround(c.px[i] + noise), 0L, 255L));
  }
  return img;
}

DatasetManifest generate(const SynthConfig& config, const fs::path& out_dir, const std::vector<std::string>& provenance) {
  const SynthDataset ds = generate_in_memory(config);
  fs::create_directories(out_dir / "landmarks");
  fs::create_directories(out_dir / "labels");
  DatasetManifest manifest;
  manifest.dataset_name = "synthetic";
  manifest.base_dir = out_dir;
  manifest.provenance = provenance;
  manifest.provenance.push_back("synth seed=" + std::to_string(config.seed) +
                                " touch_event_rate=" + format_number(ds.touch_event_rate));
  for (std::size_t v = 0; v < ds.videos.size(); ++v) {
    const SynthVideo& sv = ds.videos[v];
    VideoEntry e;
    e.video_id = sv.video_id;
    e.infant_id = sv.infant_id;
    e.fps = config.fps;
    e.landmarks_path = out_dir / "landmarks" / (sv.video_id + ".landmarks.jsonl");
    e.labels_path = out_dir / "labels" / (sv.video_id + ".csv");
    write_landmarks(sv.observed, e.landmarks_path, manifest.provenance);
    write_labels(sv.labels, *e.labels_path, manifest.provenance);
    if (config.render_frames) {
      e.frames_dir = out_dir / "frames" / sv.video_id;
      fs::create_directories(*e.frames_dir);
      for (std::size_t t = 0; t < sv.truth.size(); ++t) {
        const GrayImage img = render_frame(sv.truth[t], config, mix_seed(config.seed, kRenderStream + v * 100000 + t));
        write_pgm(img, *e.frames_dir / frame_file_name(int(t)), manifest.provenance);
      }
    }
    manifest.videos.push_back(std::move(e));
  }
  write_mullen(ds.mullen, out_dir / "mullen.csv", manifest.provenance);
  save_manifest(manifest, out_dir / "manifest.json");
  return manifest;
}

}  // namespace facetouch
