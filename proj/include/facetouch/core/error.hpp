#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace facetouch {

// Machine-readable failure categories. The CLI prints the name of the code
// and maps it to a nonzero exit status.
enum class ErrorCode {
  InvalidArgument,
  InvalidConfig,
  MissingFile,
  IoError,
  DuplicateVideoId,
  MalformedManifest,
  MalformedRecord,
  NonMonotonicFrames,
  MalformedLabels,
  RegionWithoutTouch,
  UnsupportedFormat,
  TruncatedFile,
  MalformedMullen,
  NonPositiveAge,
  HeaderMismatch,
  NoUsableTrunk,
  ManifestMismatch,
  DimensionMismatch,
  NoFaceAnywhere,
  DegenerateLabels,
  TooFewRows,
  NonFiniteLoss,
  SingleClass,
  NoConvergence,
  SingleCombination,
  TooFewGroups,
  ManifestFingerprintMismatch,
  VersionMismatch,
  CorruptModel,
  EmptyInput,
  LengthMismatch,
  ZeroVariance,
  TooFewPoints,
  InsufficientVisits,
};

std::string_view error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Non-fatal notices collected by operations that degrade gracefully.
struct Warnings {
  std::vector<std::string> messages;

  void add(std::string message) { messages.push_back(std::move(message)); }
  bool empty() const { return messages.empty(); }
  std::size_t size() const { return messages.size(); }
};

}  // namespace facetouch
