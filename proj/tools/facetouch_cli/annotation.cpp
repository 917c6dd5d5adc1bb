#include "facetouch_cli/annotation.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "facetouch/core/error.hpp"
#include "facetouch/core/hash.hpp"
#include "facetouch/ingest/tables.hpp"

// After Eigen: <resolv.h>, pulled in by httplib, defines a `_res` macro.
#include <httplib.h>

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace facetouch::cli {

namespace {

AnnotationService::Response error_response(int status, const std::string& message) {
  return {status, json{{"error", message}, {"status", status}}.dump()};
}

AnnotationService::Response ok(const json& j) { return {200, j.dump()}; }

std::optional<bool> flag_of(const json& j, const char* key) {
  if (!j.contains(key)) return false;
  const auto& v = j.at(key);
  if (v.is_boolean()) return v.get<bool>();
  if (v.is_number_integer()) {
    const auto n = v.get<long long>();
    if (n == 0 || n == 1) return n == 1;
  }
  return std::nullopt;
}

}  // namespace

AnnotationService::AnnotationService(DatasetManifest manifest) : manifest_(std::move(manifest)) {
  for (const auto& e : manifest_.videos) {
    auto state = std::make_unique<VideoState>();
    state->entry = &e;
    videos_.emplace(e.video_id, std::move(state));
  }
}

AnnotationService::VideoState* AnnotationService::find(const std::string& video_id) {
  const auto it = videos_.find(video_id);
  return it == videos_.end() ? nullptr : it->second.get();
}

const VideoSequence& AnnotationService::video(VideoState& state) {
  std::lock_guard lock(state.load_mutex);
  if (!state.video) state.video = load_video(*state.entry, LoadOptions{false}).video;
  return *state.video;
}

fs::path AnnotationService::labels_path(const std::string& video_id) const {
  const VideoEntry* e = manifest_.find(video_id);
  if (e && e->labels_path) return *e->labels_path;
  return manifest_.base_dir / "labels" / (video_id + ".csv");
}

std::string AnnotationService::current_version(const std::string& video_id) const {
  const fs::path p = labels_path(video_id);
  if (!fs::exists(p)) return "0";
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return fnv1a64_hex(ss.str());
}

AnnotationService::Response AnnotationService::list_videos() {
  json list = json::array();
  for (const auto& e : manifest_.videos) {
    std::size_t frames = 0;
    try {
      frames = video(*find(e.video_id)).frames.size();
    } catch (const Error& err) {
      return error_response(500, err.what());
    }
    list.push_back({{"video_id", e.video_id},
                    {"infant_id", e.infant_id},
                    {"fps", e.fps},
                    {"frames", frames},
                    {"has_labels", fs::exists(labels_path(e.video_id))}});
  }
  return ok({{"schema_version", kSchemaVersion}, {"videos", list}});
}

AnnotationService::Response AnnotationService::frame(const std::string& video_id, const std::string& index) {
  VideoState* state = find(video_id);
  if (!state) return error_response(404, "unknown video " + video_id);
  std::size_t i = 0;
  const auto [ptr, ec] = std::from_chars(index.data(), index.data() + index.size(), i);
  if (ec != std::errc() || ptr != index.data() + index.size()) return error_response(404, "bad frame index " + index);
  const VideoSequence& v = video(*state);
  if (i >= v.frames.size()) return error_response(404, "frame " + index + " is out of range");
  const auto& ref = v.frames[i].image_ref;
  if (!ref || !fs::exists(*ref)) return error_response(404, "frame " + index + " has no image");
  GrayImage img;
  try {
    img = load_pgm(*ref);
  } catch (const Error& err) {
    return error_response(500, err.what());
  }
  const std::string raw(img.pixels.begin(), img.pixels.end());
  return ok({{"schema_version", kSchemaVersion},
             {"video_id", video_id},
             {"position", i},
             {"frame_index", v.frames[i].frame_index},
             {"width", img.width},
             {"height", img.height},
             {"encoding", "base64-gray8"},
             {"pixels", httplib::detail::base64_encode(raw)}});
}

AnnotationService::Response AnnotationService::landmarks(const std::string& video_id) {
  VideoState* state = find(video_id);
  if (!state) return error_response(404, "unknown video " + video_id);
  json frames = json::array();
  for (const auto& f : video(*state).frames) frames.push_back(json::parse(landmark_record_json(f)));
  return ok({{"schema_version", kSchemaVersion}, {"video_id", video_id}, {"frames", frames}});
}

AnnotationService::Response AnnotationService::get_labels(const std::string& video_id) {
  VideoState* state = find(video_id);
  if (!state) return error_response(404, "unknown video " + video_id);
  std::lock_guard lock(state->write_mutex);
  json rows = json::array();
  const fs::path p = labels_path(video_id);
  if (fs::exists(p)) {
    try {
      for (const auto& r : load_labels(p)) {
        if (r.video_id != video_id) continue;
        json row{{"frame_index", r.frame_index}, {"on_head", r.on_head}};
        for (std::size_t k = 0; k < kRegionCount; ++k) row[std::string(kRegionNames[k])] = r.regions[k];
        rows.push_back(row);
      }
    } catch (const Error& err) {
      return error_response(500, err.what());
    }
  }
  return ok({{"schema_version", kSchemaVersion},
             {"video_id", video_id},
             {"version", current_version(video_id)},
             {"labels", rows}});
}

AnnotationService::Response AnnotationService::post_labels(const std::string& video_id, const std::string& body) {
  VideoState* state = find(video_id);
  if (!state) return error_response(404, "unknown video " + video_id);
  json j;
  try {
    j = json::parse(body);
  } catch (const json::exception& e) {
    return error_response(400, std::string("body is not JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("labels") || !j.at("labels").is_array()) {
    return error_response(422, "body needs a \"labels\" list");
  }
  if (!j.contains("version") || !j.at("version").is_string()) {
    return error_response(409, "a version token from GET labels is required");
  }

  std::set<int> valid_frames;
  for (const auto& f : video(*state).frames) valid_frames.insert(f.frame_index);
  std::vector<LabelRecord> records;
  std::set<int> seen;
  for (const auto& row : j.at("labels")) {
    if (!row.is_object() || !row.contains("frame_index") || !row.at("frame_index").is_number_integer()) {
      return error_response(422, "each label needs an integer frame_index");
    }
    LabelRecord r;
    r.video_id = video_id;
    r.frame_index = row.at("frame_index").get<int>();
    if (!valid_frames.count(r.frame_index)) {
      return error_response(422, "frame_index " + std::to_string(r.frame_index) + " is not in the video");
    }
    if (!seen.insert(r.frame_index).second) {
      return error_response(422, "frame_index " + std::to_string(r.frame_index) + " appears twice");
    }
    const auto on = flag_of(row, "on_head");
    if (!on) return error_response(422, "on_head must be 0/1 or a boolean");
    r.on_head = *on;
    for (std::size_t k = 0; k < kRegionCount; ++k) {
      const auto f = flag_of(row, std::string(kRegionNames[k]).c_str());
      if (!f) return error_response(422, std::string(kRegionNames[k]) + " must be 0/1 or a boolean");
      r.regions[k] = *f;
    }
    if (!r.consistent()) {
      return error_response(422, "frame " + std::to_string(r.frame_index) + ": region flagged without an on-head touch");
    }
    records.push_back(std::move(r));
  }
  std::sort(records.begin(), records.end(),
            [](const LabelRecord& a, const LabelRecord& b) { return a.frame_index < b.frame_index; });

  std::lock_guard lock(state->write_mutex);
  const std::string current = current_version(video_id);
  if (j.at("version").get<std::string>() != current) {
    return {409, json{{"error", "labels changed since they were read"}, {"status", 409}, {"version", current}}.dump()};
  }
  const fs::path p = labels_path(video_id);
  try {
    fs::create_directories(p.parent_path());
    write_labels(records, p);
  } catch (const Error& err) {
    return error_response(500, err.what());
  }
  return ok({{"schema_version", kSchemaVersion},
             {"video_id", video_id},
             {"version", current_version(video_id)},
             {"saved", records.size()}});
}

void AnnotationService::mount(httplib::Server& server, const std::optional<fs::path>& ui_dir) {
  auto reply = [](httplib::Response& res, const Response& r) {
    res.status = r.status;
    res.set_content(r.body, "application/json");
  };
  server.Get("/api/videos", [this, reply](const httplib::Request&, httplib::Response& res) { reply(res, list_videos()); });
  server.Get(R"(/api/videos/([^/]+)/frames/([^/]+))", [this, reply](const httplib::Request& req, httplib::Response& res) {
    reply(res, frame(req.matches[1], req.matches[2]));
  });
  server.Get(R"(/api/videos/([^/]+)/landmarks)", [this, reply](const httplib::Request& req, httplib::Response& res) {
    reply(res, landmarks(req.matches[1]));
  });
  server.Get(R"(/api/videos/([^/]+)/labels)", [this, reply](const httplib::Request& req, httplib::Response& res) {
    reply(res, get_labels(req.matches[1]));
  });
  server.Post(R"(/api/videos/([^/]+)/labels)", [this, reply](const httplib::Request& req, httplib::Response& res) {
    reply(res, post_labels(req.matches[1], req.body));
  });
  if (ui_dir) {
    if (!server.set_mount_point("/", ui_dir->string())) {
      throw Error(ErrorCode::MissingFile, "UI directory not found: " + ui_dir->string());
    }
  }
}

void run_annotation_server(const fs::path& manifest, const std::string& host, int port,
                           const std::optional<fs::path>& ui_dir) {
  AnnotationService service(load_manifest(manifest));
  httplib::Server server;
  service.mount(server, ui_dir);
  if (!server.listen(host, port)) {
    throw Error(ErrorCode::IoError, "cannot listen on " + host + ":" + std::to_string(port));
  }
}

}  // namespace facetouch::cli
