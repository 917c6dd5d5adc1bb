#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "facetouch/ingest/dataset.hpp"

namespace httplib {
class Server;
}

namespace facetouch::cli {

// HTTP API behind the labelling UI. Handlers are plain functions so they can
// be exercised without a socket; mount() wires them into an httplib server.
//
//   GET  /api/videos                      {"videos": [{"video_id", "infant_id", "frames", "has_labels"}]}
//   GET  /api/videos/{id}/frames/{i}      {"width", "height", "encoding": "base64-gray8", "pixels"}
//   GET  /api/videos/{id}/landmarks       {"frames": [landmark records]}
//   GET  /api/videos/{id}/labels          {"video_id", "version", "labels": [...]}
//   POST /api/videos/{id}/labels          body {"version", "labels": [...]}; returns the new version
//
// Frame indices in URLs are positions in the landmark stream. Label rows are
// {"frame_index", "on_head", "eyes", "ears", "nose", "mouth", "cheeks"} with
// 0/1 or boolean flags.
class AnnotationService {
 public:
  struct Response {
    int status = 200;
    std::string body;
  };

  static constexpr int kSchemaVersion = 1;

  explicit AnnotationService(DatasetManifest manifest);

  Response list_videos();
  Response frame(const std::string& video_id, const std::string& index);
  Response landmarks(const std::string& video_id);
  Response get_labels(const std::string& video_id);
  Response post_labels(const std::string& video_id, const std::string& body);

  // Serves the UI's static files from ui_dir when given.
  void mount(httplib::Server& server, const std::optional<std::filesystem::path>& ui_dir = std::nullopt);

  std::filesystem::path labels_path(const std::string& video_id) const;

 private:
  struct VideoState {
    const VideoEntry* entry = nullptr;
    std::mutex write_mutex;
    std::mutex load_mutex;
    std::optional<VideoSequence> video;
  };

  VideoState* find(const std::string& video_id);
  const VideoSequence& video(VideoState& state);
  std::string current_version(const std::string& video_id) const;

  DatasetManifest manifest_;
  std::map<std::string, std::unique_ptr<VideoState>> videos_;
};

// Blocks serving on host:port until the process is stopped.
void run_annotation_server(const std::filesystem::path& manifest, const std::string& host, int port,
                           const std::optional<std::filesystem::path>& ui_dir);

}  // namespace facetouch::cli
