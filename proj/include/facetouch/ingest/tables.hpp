#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "facetouch/core/feature_matrix.hpp"
#include "facetouch/core/types.hpp"

namespace facetouch {

// ---- labels -----------------------------------------------------------------

enum class LabelMode { Strict, Lenient };

// CSV with header video_id,frame_index,on_head,eyes,ears,nose,mouth,cheeks and
// 0/1 flags. Strict mode rejects region flags on off-head rows
// (RegionWithoutTouch); lenient mode clears them.
std::vector<LabelRecord> load_labels(const std::filesystem::path& path, LabelMode mode = LabelMode::Strict);
std::vector<LabelRecord> parse_labels(const std::string& text, LabelMode mode = LabelMode::Strict,
                                      const std::string& source = "<labels>");
std::string format_labels(const std::vector<LabelRecord>& labels);
void write_labels(const std::vector<LabelRecord>& labels, const std::filesystem::path& path,
                  const std::vector<std::string>& header = {});

// ---- grayscale frames ---------------------------------------------------------

struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // row-major

  std::uint8_t at(int x, int y) const { return pixels[std::size_t(y) * width + x]; }
};

// Binary PGM (P5) with maxval 255. Errors: MissingFile, UnsupportedFormat,
// TruncatedFile.
GrayImage load_pgm(const std::filesystem::path& path);
GrayImage decode_pgm(const std::string& bytes);
void write_pgm(const GrayImage& image, const std::filesystem::path& path, const std::vector<std::string>& comments = {});

// ---- Mullen scores ------------------------------------------------------------

struct MullenRecord {
  std::string infant_id;
  double visit_age_months = 0.0;
  double gm_raw = 0.0;
  double fm_raw = 0.0;
};

// CSV header infant_id,visit_age_months,gm_raw,fm_raw.
// Errors: MalformedMullen, NonPositiveAge.
std::vector<MullenRecord> load_mullen(const std::filesystem::path& path);
void write_mullen(const std::vector<MullenRecord>& records, const std::filesystem::path& path,
                  const std::vector<std::string>& header = {});

// ---- feature matrices -----------------------------------------------------------

// Optional '#'-prefixed provenance lines written before the CSV header.
using ProvenanceLines = std::vector<std::string>;

// Columns: video_id, frame_index, manifest features in order, then
// on_head + the five region flags when any row is labelled. Missing cells are
// empty; numbers use the shortest representation that round-trips exactly.
void write_feature_matrix(const FeatureMatrix& matrix, const std::filesystem::path& path,
                          const ProvenanceLines& provenance = {});
// Errors: MissingFile, HeaderMismatch (when `expected` is given and the header
// disagrees), MalformedRecord.
FeatureMatrix read_feature_matrix(const std::filesystem::path& path, const FeatureManifest* expected = nullptr);

// Splits one CSV line on commas (no quoting; ids never contain commas).
std::vector<std::string> split_csv_line(const std::string& line);

}  // namespace facetouch
