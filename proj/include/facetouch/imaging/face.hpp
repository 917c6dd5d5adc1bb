#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "facetouch/core/error.hpp"
#include "facetouch/core/feature_matrix.hpp"
#include "facetouch/core/types.hpp"
#include "facetouch/imaging/hog.hpp"
#include "facetouch/ingest/tables.hpp"

namespace facetouch {

enum class RegionProvenance { FromFaceLandmarks, FromPose, FromNeighborFrames };

struct FaceRegion {
  Keypoint2D center;  // pixel space
  double size_px = 0.0;
  double rotation_deg = 0.0;
  RegionProvenance provenance = RegionProvenance::FromPose;
};

// One region per frame. Head keypoints are those present with confidence at or
// above `min_confidence`. Frames without any copy the nearest frame's region,
// preferring the earlier one on ties. Throws NoFaceAnywhere.
std::vector<FaceRegion> estimate_face_region(const VideoSequence& video, double min_confidence = 0.1);

// Samples a target_w x target_h patch: output pixel (u, v) reads the image at
// center + R(rotation) * ((u - (target_w-1)/2) * s, (v - (target_h-1)/2) * s)
// with s = size_px / target_w, bilinearly and with edge clamping.
Patch align_and_crop(const GrayImage& image, const FaceRegion& region, int target_w, int target_h);

// Maps a face landmark to full-frame pixels. Crop-space landmarks are pixel
// offsets inside the aligned size_px x size_px face crop.
Keypoint2D face_landmark_to_frame(const FaceFrame& face, std::size_t index, const FaceRegion& region);

// Mean confidence of eye landmarks 36-47 and mouth landmarks 48-67; 0 without a face.
std::pair<double, double> face_region_confidences(const FrameRecord& frame);

using ImageSource = std::function<std::optional<GrayImage>(const FrameRecord&)>;

// Reads FrameRecord::image_ref from disk; frames without a reference yield nothing.
ImageSource disk_image_source();

struct FaceAppearance {
  RowMatrix hog;  // frames x 540, NaN where no image is available
  std::vector<double> upper_conf;
  std::vector<double> lower_conf;
};

// Face crop (face_width x face_height) plus upper and lower half crops
// centred on the eye and mouth landmarks. Without face landmarks the half
// crops sit at fixed offsets above and below the region centre.
FaceAppearance face_hog_features(const VideoSequence& video, const HogConfig& config, const ImageSource& images,
                                 Warnings* warnings = nullptr);

}  // namespace facetouch
