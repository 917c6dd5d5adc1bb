#include "facetouch/core/manifest.hpp"

#include <array>
#include <cstdint>
#include <cstdio>

#include "facetouch/core/error.hpp"
#include "facetouch/imaging/hog.hpp"

namespace facetouch {

std::string_view family_name(FeatureFamily family) {
  switch (family) {
    case FeatureFamily::BodyDistance: return "BodyDistance";
    case FeatureFamily::Angle: return "Angle";
    case FeatureFamily::HandDistance: return "HandDistance";
    case FeatureFamily::HandConfidence: return "HandConfidence";
    case FeatureFamily::Temporal: return "Temporal";
    case FeatureFamily::FaceRegionConfidence: return "FaceRegionConfidence";
    case FeatureFamily::HOG: return "HOG";
  }
  return "Unknown";
}

FeatureManifest::FeatureManifest(std::vector<FeatureEntry> entries) : entries_(std::move(entries)) {
  by_name_.reserve(entries_.size());
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (!by_name_.emplace(entries_[i].name, i).second) {
      throw Error(ErrorCode::InvalidArgument, "duplicate feature name: " + entries_[i].name);
    }
  }
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const std::size_t partner = mirror_index(i);
    if (partner >= entries_.size() || mirror_index(partner) != i) {
      throw Error(ErrorCode::InvalidArgument, "mirror partner of " + entries_[i].name + " is not symmetric");
    }
  }
}

std::optional<std::size_t> FeatureManifest::index_of(std::string_view name) const {
  auto it = by_name_.find(std::string(name));
  if (it == by_name_.end()) return std::nullopt;
  return it->second;
}

std::size_t FeatureManifest::mirror_index(std::size_t i) const {
  return entries_[i].mirror_partner.value_or(i);
}

bool FeatureManifest::has_hog() const {
  for (const auto& e : entries_) {
    if (e.family == FeatureFamily::HOG) return true;
  }
  return false;
}

std::vector<std::string> FeatureManifest::names() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.name);
  return out;
}

std::vector<std::size_t> FeatureManifest::indices_where(bool (*pred)(FeatureFamily)) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (pred(entries_[i].family)) out.push_back(i);
  }
  return out;
}

std::string FeatureManifest::fingerprint() const {
  std::uint64_t h = 14695981039346656037ull;
  auto mix = [&h](std::string_view s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 1099511628211ull;
    }
    h ^= 0xff;
    h *= 1099511628211ull;
  };
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& e = entries_[i];
    mix(e.name);
    mix(family_name(e.family));
    mix(e.signed_x ? "s" : "u");
    mix(std::to_string(mirror_index(i)));
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

struct Side {
  const char* tag;       // token used in feature names
  const char* mirrored;  // token of the mirrored side
};

constexpr std::array<Side, 2> kSides{{{"L", "R"}, {"R", "L"}}};

// Body distance targets; the second token is the mirrored target.
constexpr std::array<std::array<const char*, 2>, 6> kBodyTargets{{{"nose", "nose"},
                                                                 {"neck", "neck"},
                                                                 {"eyeL", "eyeR"},
                                                                 {"eyeR", "eyeL"},
                                                                 {"earL", "earR"},
                                                                 {"earR", "earL"}}};
constexpr std::array<std::array<const char*, 2>, 3> kHandTargets{
    {{"eyeL", "eyeR"}, {"eyeR", "eyeL"}, {"nose", "nose"}}};
constexpr std::array<const char*, 3> kComponents{"x", "y", "e"};
constexpr std::array<const char*, 5> kFingers{"thumb", "index", "middle", "ring", "pinky"};
constexpr std::array<const char*, 3> kTemporalKinds{"disp", "speed", "accel"};
constexpr std::array<std::array<const char*, 2>, 4> kTemporalJoints{
    {{"wristL", "wristR"}, {"wristR", "wristL"}, {"elbowL", "elbowR"}, {"elbowR", "elbowL"}}};
constexpr std::array<int, 3> kTemporalWindows{1, 3, 5};

struct Draft {
  std::string name;
  FeatureFamily family;
  bool signed_x;
  std::string partner_name;  // empty: self
};

}  // namespace

FeatureManifest build_manifest(bool include_hog) {
  std::vector<Draft> drafts;
  drafts.reserve(include_hog ? kNonHogFeatureCount + kHogFeatureCount : kNonHogFeatureCount);

  for (const auto& side : kSides) {
    for (const auto& target : kBodyTargets) {
      for (const char* comp : kComponents) {
        const std::string c = comp;
        drafts.push_back({"dist_" + c + "_wrist" + side.tag + "_" + target[0], FeatureFamily::BodyDistance,
                          c == "x", "dist_" + c + "_wrist" + side.mirrored + "_" + target[1]});
      }
    }
  }
  for (const char* joint : {"elbow", "shoulder"}) {
    for (const auto& side : kSides) {
      drafts.push_back({std::string("angle_") + joint + side.tag, FeatureFamily::Angle, false,
                        std::string("angle_") + joint + side.mirrored});
    }
  }
  for (const auto& side : kSides) {
    for (const char* finger : kFingers) {
      for (const auto& target : kHandTargets) {
        for (const char* comp : kComponents) {
          const std::string c = comp;
          const std::string stem = std::string("_") + finger + "_";
          drafts.push_back({"hand_" + c + "_hand" + side.tag + stem + target[0], FeatureFamily::HandDistance,
                            c == "x", "hand_" + c + "_hand" + side.mirrored + stem + target[1]});
        }
      }
    }
  }
  for (const auto& side : kSides) {
    drafts.push_back({std::string("hand_conf_") + side.tag, FeatureFamily::HandConfidence, false,
                      std::string("hand_conf_") + side.mirrored});
  }
  for (const char* kind : kTemporalKinds) {
    for (const auto& joint : kTemporalJoints) {
      for (int w : kTemporalWindows) {
        const std::string suffix = "_w" + std::to_string(w);
        drafts.push_back({std::string("temp_") + kind + "_" + joint[0] + suffix, FeatureFamily::Temporal, false,
                          std::string("temp_") + kind + "_" + joint[1] + suffix});
      }
    }
  }
  drafts.push_back({"face_conf_upper", FeatureFamily::FaceRegionConfidence, false, ""});
  drafts.push_back({"face_conf_lower", FeatureFamily::FaceRegionConfidence, false, ""});

  const std::size_t base = drafts.size();
  std::vector<std::optional<std::size_t>> hog_partner;
  if (include_hog) {
    const HogConfig config;
    struct Part {
      const char* tag;
      int w;
      int h;
    };
    const std::array<Part, 3> parts{{{"face", config.face_width, config.face_height},
                                     {"upper", config.half_width, config.half_height},
                                     {"lower", config.half_width, config.half_height}}};
    std::size_t offset = base;
    for (const auto& part : parts) {
      const auto perm = hog_mirror_permutation(part.w, part.h, config);
      for (std::size_t i = 0; i < perm.size(); ++i) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "hog_%s_%03zu", part.tag, i);
        drafts.push_back({buf, FeatureFamily::HOG, false, ""});
        hog_partner.push_back(perm[i] == i ? std::nullopt : std::optional<std::size_t>(offset + perm[i]));
      }
      offset += perm.size();
    }
  }

  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < drafts.size(); ++i) index.emplace(drafts[i].name, i);

  std::vector<FeatureEntry> entries;
  entries.reserve(drafts.size());
  for (std::size_t i = 0; i < drafts.size(); ++i) {
    const Draft& d = drafts[i];
    FeatureEntry e{d.name, d.family, d.signed_x, std::nullopt};
    if (i >= base) {
      e.mirror_partner = hog_partner[i - base];
    } else if (!d.partner_name.empty() && d.partner_name != d.name) {
      e.mirror_partner = index.at(d.partner_name);
    }
    entries.push_back(std::move(e));
  }
  return FeatureManifest(std::move(entries));
}

}  // namespace facetouch
