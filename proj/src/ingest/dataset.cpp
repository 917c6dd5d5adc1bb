#include "facetouch/ingest/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "facetouch/core/error.hpp"

namespace facetouch {

namespace fs = std::filesystem;
using nlohmann::json;

const VideoEntry* DatasetManifest::find(const std::string& video_id) const {
  for (const auto& v : videos) {
    if (v.video_id == video_id) return &v;
  }
  return nullptr;
}

namespace {

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

std::string relative_to(const fs::path& base, const fs::path& p) {
  std::error_code ec;
  auto rel = fs::relative(p, base, ec);
  if (ec || rel.empty()) return p.string();
  return rel.generic_string();
}

bool valid_id(const std::string& s) {
  return !s.empty() && s.find_first_of(",\n\r\"") == std::string::npos;
}

}  // namespace

DatasetManifest load_manifest(const fs::path& path) {
  if (!fs::exists(path)) throw Error(ErrorCode::MissingFile, "manifest not found: " + path.string());
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open manifest: " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedManifest, path.string() + ": " + e.what());
  }

  DatasetManifest out;
  out.base_dir = path.parent_path();
  try {
    if (!doc.is_object()) throw Error(ErrorCode::MalformedManifest, "manifest root must be an object");
    for (auto it = doc.begin(); it != doc.end(); ++it) {
      if (it.key() != "dataset_name" && it.key() != "videos" && it.key() != "provenance") {
        throw Error(ErrorCode::MalformedManifest, "unknown manifest key: " + it.key());
      }
    }
    out.dataset_name = doc.value("dataset_name", std::string{});
    if (doc.contains("provenance")) {
      const auto& prov = doc["provenance"];
      if (prov.is_array()) {
        for (const auto& line : prov) out.provenance.push_back(line.is_string() ? line.get<std::string>() : line.dump());
      } else {
        out.provenance.push_back(prov.is_string() ? prov.get<std::string>() : prov.dump());
      }
    }
    if (!doc.contains("videos") || !doc["videos"].is_array() || doc["videos"].empty()) {
      throw Error(ErrorCode::MalformedManifest, path.string() + ": manifest lists no videos");
    }
    std::unordered_set<std::string> seen;
    for (const auto& v : doc["videos"]) {
      VideoEntry e;
      e.video_id = v.at("video_id").get<std::string>();
      e.infant_id = v.value("infant_id", e.video_id);
      e.fps = v.at("fps").get<double>();
      if (!valid_id(e.video_id) || !valid_id(e.infant_id)) {
        throw Error(ErrorCode::MalformedManifest, "invalid video or infant id: '" + e.video_id + "'");
      }
      if (!(e.fps > 0.0) || !std::isfinite(e.fps)) {
        throw Error(ErrorCode::MalformedManifest, "video " + e.video_id + ": fps must be positive");
      }
      if (!seen.insert(e.video_id).second) {
        throw Error(ErrorCode::DuplicateVideoId, "duplicate video_id in manifest: " + e.video_id);
      }
      e.landmarks_path = resolve(out.base_dir, v.at("landmarks").get<std::string>());
      if (v.contains("labels") && !v["labels"].is_null()) {
        e.labels_path = resolve(out.base_dir, v["labels"].get<std::string>());
      }
      if (v.contains("frames_dir") && !v["frames_dir"].is_null()) {
        e.frames_dir = resolve(out.base_dir, v["frames_dir"].get<std::string>());
      }
      if (!fs::exists(e.landmarks_path)) {
        throw Error(ErrorCode::MissingFile, "landmark file not found: " + e.landmarks_path.string());
      }
      out.videos.push_back(std::move(e));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedManifest, path.string() + ": " + e.what());
  }
  return out;
}

void save_manifest(const DatasetManifest& manifest, const fs::path& path) {
  const fs::path base = path.parent_path().empty() ? fs::path(".") : path.parent_path();
  json doc;
  doc["dataset_name"] = manifest.dataset_name;
  json videos = json::array();
  for (const auto& v : manifest.videos) {
    json e;
    e["video_id"] = v.video_id;
    e["infant_id"] = v.infant_id;
    e["fps"] = v.fps;
    e["landmarks"] = relative_to(base, v.landmarks_path);
    if (v.labels_path) e["labels"] = relative_to(base, *v.labels_path);
    if (v.frames_dir) e["frames_dir"] = relative_to(base, *v.frames_dir);
    videos.push_back(std::move(e));
  }
  doc["videos"] = std::move(videos);
  if (!manifest.provenance.empty()) doc["provenance"] = manifest.provenance;
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write manifest: " + path.string());
  out << doc.dump(2) << '\n';
}

std::string frame_file_name(int frame_index) { return "frame_" + std::to_string(frame_index) + ".pgm"; }

namespace {

struct ParseContext {
  std::size_t clamped = 0;
};

Keypoint2D parse_triple(const json& j, ParseContext& ctx) {
  if (j.is_null()) return Keypoint2D{};
  if (!j.is_array() || j.size() != 3) throw std::invalid_argument("keypoint must be [x, y, conf] or null");
  const double x = j[0].get<double>();
  const double y = j[1].get<double>();
  double c = j[2].get<double>();
  if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(c)) {
    throw std::invalid_argument("non-finite keypoint value");
  }
  if (c < 0.0 || c > 1.0) {
    c = std::clamp(c, 0.0, 1.0);
    ++ctx.clamped;
  }
  return Keypoint2D{x, y, c, true};
}

template <std::size_t N>
void parse_points(const json& j, std::array<Keypoint2D, N>& out, const char* what, ParseContext& ctx) {
  if (!j.is_array() || j.size() != N) {
    throw std::invalid_argument(std::string(what) + " must list exactly " + std::to_string(N) + " points");
  }
  for (std::size_t i = 0; i < N; ++i) out[i] = parse_triple(j[i], ctx);
}

FrameRecord parse_record(const std::string& line, const VideoEntry& entry, ParseContext& ctx) {
  const json j = json::parse(line);
  if (!j.is_object()) throw std::invalid_argument("record must be a JSON object");
  FrameRecord f;
  const auto idx = j.at("frame_index").get<long long>();
  if (idx < 0 || idx > std::numeric_limits<int>::max()) throw std::invalid_argument("frame_index out of range");
  f.frame_index = static_cast<int>(idx);
  f.timestamp_s = j.contains("timestamp_s") ? j["timestamp_s"].get<double>() : f.frame_index / entry.fps;

  const json& pose = j.at("pose");
  if (!pose.is_object()) throw std::invalid_argument("pose must be an object");
  std::array<bool, kJointCount> seen{};
  for (auto it = pose.begin(); it != pose.end(); ++it) {
    auto joint = joint_from_name(it.key());
    if (!joint) throw std::invalid_argument("unknown joint '" + it.key() + "'");
    f.pose[*joint] = parse_triple(it.value(), ctx);
    seen[index_of(*joint)] = true;
  }
  for (std::size_t i = 0; i < kJointCount; ++i) {
    if (!seen[i]) throw std::invalid_argument("pose lacks joint " + std::string(kJointNames[i]));
  }

  if (j.contains("face") && !j["face"].is_null()) {
    FaceFrame face;
    parse_points(j["face"], face.landmarks, "face", ctx);
    const std::string space = j.value("face_space", std::string("full-frame"));
    if (space == "crop") {
      face.source_space = FaceSpace::Crop;
    } else if (space != "full-frame") {
      throw std::invalid_argument("unknown face_space '" + space + "'");
    }
    f.face = face;
  }

  if (j.contains("hands") && !j["hands"].is_null()) {
    const json& hands = j["hands"];
    for (auto it = hands.begin(); it != hands.end(); ++it) {
      HandSide side;
      if (it.key() == "left") {
        side = HandSide::Left;
      } else if (it.key() == "right") {
        side = HandSide::Right;
      } else {
        throw std::invalid_argument("unknown hand side '" + it.key() + "'");
      }
      if (it.value().is_null()) continue;
      HandFrame hand;
      hand.side = side;
      parse_points(it.value().at("landmarks"), hand.landmarks, "hand", ctx);
      double c = it.value().at("confidence").get<double>();
      if (!std::isfinite(c)) throw std::invalid_argument("non-finite hand confidence");
      if (c < 0.0 || c > 1.0) {
        c = std::clamp(c, 0.0, 1.0);
        ++ctx.clamped;
      }
      hand.detection_confidence = c;
      f.hand(side) = hand;
    }
  }

  if (j.contains("image") && !j["image"].is_null()) {
    const fs::path base = entry.frames_dir ? *entry.frames_dir : entry.landmarks_path.parent_path();
    f.image_ref = resolve(base, j["image"].get<std::string>()).string();
  } else if (entry.frames_dir) {
    const fs::path candidate = *entry.frames_dir / frame_file_name(f.frame_index);
    if (fs::exists(candidate)) f.image_ref = candidate.string();
  }
  return f;
}

}  // namespace

LoadedVideo load_video(const VideoEntry& entry, const LoadOptions& options) {
  std::ifstream in(entry.landmarks_path);
  if (!in) throw Error(ErrorCode::MissingFile, "cannot open landmark file: " + entry.landmarks_path.string());

  LoadedVideo out;
  out.video.video_id = entry.video_id;
  out.video.infant_id = entry.infant_id;
  out.video.fps = entry.fps;
  ParseContext ctx;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos || line[0] == '#') continue;
    ++out.frames_in;
    FrameRecord record;
    try {
      record = parse_record(line, entry, ctx);
    } catch (const std::exception& e) {
      if (options.strict) {
        throw Error(ErrorCode::MalformedRecord,
                    entry.landmarks_path.string() + ":" + std::to_string(line_no) + ": " + e.what());
      }
      ++out.rejected;
      continue;
    }
    if (!out.video.frames.empty()) {
      const auto& prev = out.video.frames.back();
      if (record.frame_index <= prev.frame_index || record.timestamp_s <= prev.timestamp_s) {
        throw Error(ErrorCode::NonMonotonicFrames, entry.landmarks_path.string() + ":" + std::to_string(line_no) +
                                                       ": frame " + std::to_string(record.frame_index) +
                                                       " after frame " + std::to_string(prev.frame_index));
      }
    }
    out.video.frames.push_back(std::move(record));
  }
  out.clamped_confidences = ctx.clamped;
  return out;
}

namespace {

void append_number(std::string& s, double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  s.append(buf, res.ptr);
}

void append_triple(std::string& s, const Keypoint2D& k) {
  if (!k.present) {
    s += "null";
    return;
  }
  s += '[';
  append_number(s, k.x);
  s += ',';
  append_number(s, k.y);
  s += ',';
  append_number(s, k.confidence);
  s += ']';
}

template <std::size_t N>
void append_points(std::string& s, const std::array<Keypoint2D, N>& pts) {
  s += '[';
  for (std::size_t i = 0; i < N; ++i) {
    if (i) s += ',';
    append_triple(s, pts[i]);
  }
  s += ']';
}

}  // namespace

std::string landmark_record_json(const FrameRecord& f) {
  std::string s;
  s.reserve(4096);
  s += "{\"frame_index\":" + std::to_string(f.frame_index) + ",\"timestamp_s\":";
  append_number(s, f.timestamp_s);
  s += ",\"pose\":{";
  for (std::size_t i = 0; i < kJointCount; ++i) {
    if (i) s += ',';
    s += '"';
    s += kJointNames[i];
    s += "\":";
    append_triple(s, f.pose.keypoints[i]);
  }
  s += "},\"face\":";
  if (f.face) {
    append_points(s, f.face->landmarks);
    if (f.face->source_space == FaceSpace::Crop) s += ",\"face_space\":\"crop\"";
  } else {
    s += "null";
  }
  s += ",\"hands\":{";
  bool first = true;
  for (HandSide side : {HandSide::Left, HandSide::Right}) {
    if (!first) s += ',';
    first = false;
    s += side == HandSide::Left ? "\"left\":" : "\"right\":";
    const auto& hand = f.hand(side);
    if (!hand) {
      s += "null";
      continue;
    }
    s += "{\"landmarks\":";
    append_points(s, hand->landmarks);
    s += ",\"confidence\":";
    append_number(s, hand->detection_confidence);
    s += '}';
  }
  s += '}';
  if (f.image_ref) {
    s += ",\"image\":";
    s += json(fs::path(*f.image_ref).filename().string()).dump();
  }
  s += '}';
  return s;
}

void write_landmarks(const VideoSequence& video, const fs::path& path, const std::vector<std::string>& header) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write landmark file: " + path.string());
  for (const auto& h : header) out << "# " << h << '\n';
  for (const auto& f : video.frames) out << landmark_record_json(f) << '\n';
  if (!out) throw Error(ErrorCode::IoError, "write failed: " + path.string());
}

}  // namespace facetouch
