#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "facetouch/core/types.hpp"

namespace facetouch {

struct VideoEntry {
  std::string video_id;
  std::string infant_id;
  double fps = 0.0;
  std::filesystem::path landmarks_path;
  std::optional<std::filesystem::path> labels_path;
  std::optional<std::filesystem::path> frames_dir;
};

// Dataset manifest file (JSON):
//   { "dataset_name": "...",
//     "videos": [ { "video_id": "...", "infant_id": "...", "fps": 10,
//                   "landmarks": "landmarks/v1.landmarks.jsonl",
//                   "labels": "labels/v1.csv",          (optional)
//                   "frames_dir": "frames/v1" } ] }    (optional)
// Relative paths resolve against the manifest's directory.
struct DatasetManifest {
  std::string dataset_name;
  std::filesystem::path base_dir;
  std::vector<VideoEntry> videos;
  std::vector<std::string> provenance;  // free-form lines, kept verbatim

  const VideoEntry* find(const std::string& video_id) const;
};

// Errors: MissingFile, DuplicateVideoId, MalformedManifest.
DatasetManifest load_manifest(const std::filesystem::path& path);
// Paths are written relative to the manifest directory when possible.
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

struct LoadOptions {
  // Strict: malformed records raise. Lenient: they are rejected and counted.
  bool strict = true;
};

struct LoadedVideo {
  VideoSequence video;
  std::size_t frames_in = 0;
  std::size_t rejected = 0;
  std::size_t clamped_confidences = 0;
};

// Landmark stream: one JSON object per line,
//   {"frame_index": 0, "timestamp_s": 0.0,
//    "pose": {"Nose": [x, y, conf] | null, ... all 13 joints},
//    "face": [[x, y, conf] x 68] | null, "face_space": "full-frame" | "crop",
//    "hands": {"left": {"landmarks": [[x, y, conf] x 21], "confidence": c} | null,
//              "right": ... },
//    "image": "frame_0.pgm"}   (optional, relative to frames_dir)
// Coordinates are pixels of the source frame.
// Errors: MissingFile, MalformedRecord (with line number), NonMonotonicFrames.
LoadedVideo load_video(const VideoEntry& entry, const LoadOptions& options = {});

// Header lines are written as "# " comments, which the reader skips.
void write_landmarks(const VideoSequence& video, const std::filesystem::path& path,
                     const std::vector<std::string>& header = {});
std::string landmark_record_json(const FrameRecord& frame);

std::string frame_file_name(int frame_index);

}  // namespace facetouch
