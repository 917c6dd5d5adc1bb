#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace facetouch {

enum class FeatureFamily {
  BodyDistance,
  Angle,
  HandDistance,
  HandConfidence,
  Temporal,
  FaceRegionConfidence,
  HOG,
};

std::string_view family_name(FeatureFamily family);

struct FeatureEntry {
  std::string name;
  FeatureFamily family = FeatureFamily::BodyDistance;
  // Negated under a horizontal flip (signed x differences).
  bool signed_x = false;
  // Index of the left/right counterpart; empty when the feature maps to itself.
  std::optional<std::size_t> mirror_partner;

  bool operator==(const FeatureEntry&) const = default;
};

inline constexpr std::size_t kNonHogFeatureCount = 170;
inline constexpr std::size_t kHogFeatureCount = 540;

// Ordered feature inventory shared by extraction, serialization and models.
class FeatureManifest {
 public:
  FeatureManifest() = default;
  // Throws Error(InvalidArgument) on duplicate names or asymmetric partners.
  explicit FeatureManifest(std::vector<FeatureEntry> entries);

  std::size_t size() const { return entries_.size(); }
  const FeatureEntry& operator[](std::size_t i) const { return entries_[i]; }
  const std::vector<FeatureEntry>& entries() const { return entries_; }

  std::optional<std::size_t> index_of(std::string_view name) const;
  std::size_t mirror_index(std::size_t i) const;
  bool has_hog() const;
  std::vector<std::string> names() const;
  std::vector<std::size_t> indices_where(bool (*pred)(FeatureFamily)) const;

  // Stable 64-bit FNV-1a digest over names, families and mirror metadata.
  std::string fingerprint() const;

  bool operator==(const FeatureManifest& other) const { return entries_ == other.entries_; }

 private:
  std::vector<FeatureEntry> entries_;
  std::unordered_map<std::string, std::size_t> by_name_;
};

// Canonical manifest: 170 pose/hand/temporal/confidence features, followed by
// 540 HOG dimensions (face 324, upper face 108, lower face 108) when requested.
FeatureManifest build_manifest(bool include_hog);

inline bool is_hog_family(FeatureFamily f) { return f == FeatureFamily::HOG; }
inline bool is_non_hog_family(FeatureFamily f) { return f != FeatureFamily::HOG; }

}  // namespace facetouch
