#include "facetouch/ingest/tables.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>

#include "facetouch/core/error.hpp"

namespace facetouch {

namespace fs = std::filesystem;

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  std::size_t end = line.size();
  if (end > 0 && line[end - 1] == '\r') --end;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string::npos || comma >= end) {
      out.emplace_back(line, start, end - start);
      break;
    }
    out.emplace_back(line, start, comma - start);
    start = comma + 1;
  }
  return out;
}

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingFile, "cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

void write_file_atomically(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + tmp.string());
    out << content;
    if (!out) throw Error(ErrorCode::IoError, "write failed: " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot replace " + path.string() + ": " + ec.message());
}

template <typename T>
bool parse_number(const std::string& s, T& out) {
  const char* first = s.data();
  const char* last = s.data() + s.size();
  while (first < last && *first == ' ') ++first;
  while (last > first && last[-1] == ' ') --last;
  if (first == last) return false;
  auto res = std::from_chars(first, last, out);
  return res.ec == std::errc() && res.ptr == last;
}

bool parse_flag(const std::string& s, bool& out) {
  int v = 0;
  if (!parse_number(s, v) || (v != 0 && v != 1)) return false;
  out = v == 1;
  return true;
}

constexpr const char* kLabelHeader = "video_id,frame_index,on_head,eyes,ears,nose,mouth,cheeks";

void append_number(std::string& s, double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  s.append(buf, res.ptr);
}

}  // namespace

std::vector<LabelRecord> parse_labels(const std::string& text, LabelMode mode, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  std::vector<LabelRecord> out;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto cells = split_csv_line(line);
    if (!header_seen) {
      if (line != kLabelHeader) {
        throw Error(ErrorCode::MalformedLabels, source + ": expected header '" + kLabelHeader + "'");
      }
      header_seen = true;
      continue;
    }
    auto fail = [&](const std::string& why) {
      return Error(ErrorCode::MalformedLabels, source + ":" + std::to_string(line_no) + ": " + why);
    };
    if (cells.size() != 8) throw fail("expected 8 columns");
    LabelRecord r;
    r.video_id = cells[0];
    if (r.video_id.empty()) throw fail("empty video_id");
    if (!parse_number(cells[1], r.frame_index) || r.frame_index < 0) throw fail("bad frame_index");
    if (!parse_flag(cells[2], r.on_head)) throw fail("on_head must be 0 or 1");
    for (std::size_t k = 0; k < kRegionCount; ++k) {
      if (!parse_flag(cells[3 + k], r.regions[k])) throw fail("region flags must be 0 or 1");
    }
    if (!r.consistent()) {
      if (mode == LabelMode::Strict) {
        throw Error(ErrorCode::RegionWithoutTouch,
                    source + ":" + std::to_string(line_no) + ": region flagged while on_head=0");
      }
      r.regions.fill(false);
    }
    out.push_back(std::move(r));
  }
  if (!header_seen) throw Error(ErrorCode::MalformedLabels, source + ": missing header");
  return out;
}

std::vector<LabelRecord> load_labels(const fs::path& path, LabelMode mode) {
  if (!fs::exists(path)) throw Error(ErrorCode::MissingFile, "labels not found: " + path.string());
  return parse_labels(read_file(path), mode, path.string());
}

std::string format_labels(const std::vector<LabelRecord>& labels) {
  std::string s = std::string(kLabelHeader) + "\n";
  for (const auto& r : labels) {
    s += r.video_id + "," + std::to_string(r.frame_index) + "," + (r.on_head ? "1" : "0");
    for (bool f : r.regions) s += f ? ",1" : ",0";
    s += '\n';
  }
  return s;
}

void write_labels(const std::vector<LabelRecord>& labels, const fs::path& path, const std::vector<std::string>& header) {
  std::string s;
  for (const auto& h : header) s += "# " + h + "\n";
  write_file_atomically(path, s + format_labels(labels));
}

// ---- PGM ----------------------------------------------------------------------

GrayImage decode_pgm(const std::string& bytes) {
  std::size_t pos = 0;
  auto skip_space_and_comments = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_int = [&]() -> long {
    skip_space_and_comments();
    const std::size_t start = pos;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) ++pos;
    if (start == pos) throw Error(ErrorCode::TruncatedFile, "PGM header is incomplete");
    return std::stol(bytes.substr(start, pos - start));
  };
  if (bytes.size() < 2 || bytes[0] != 'P') throw Error(ErrorCode::UnsupportedFormat, "not a PGM file");
  if (bytes[1] != '5') {
    throw Error(ErrorCode::UnsupportedFormat, std::string("PGM variant P") + bytes[1] + " is not supported");
  }
  pos = 2;
  const long w = read_int();
  const long h = read_int();
  const long maxval = read_int();
  if (w <= 0 || h <= 0 || w > 1 << 15 || h > 1 << 15) {
    throw Error(ErrorCode::UnsupportedFormat, "invalid PGM dimensions");
  }
  if (maxval != 255) throw Error(ErrorCode::UnsupportedFormat, "only maxval 255 is supported");
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
    throw Error(ErrorCode::TruncatedFile, "PGM header is incomplete");
  }
  ++pos;  // single whitespace before the raster
  const std::size_t n = std::size_t(w) * std::size_t(h);
  if (bytes.size() - pos < n) {
    throw Error(ErrorCode::TruncatedFile, "PGM raster has " + std::to_string(bytes.size() - pos) + " of " +
                                              std::to_string(n) + " bytes");
  }
  GrayImage img;
  img.width = static_cast<int>(w);
  img.height = static_cast<int>(h);
  img.pixels.assign(bytes.begin() + std::ptrdiff_t(pos), bytes.begin() + std::ptrdiff_t(pos + n));
  return img;
}

GrayImage load_pgm(const fs::path& path) { return decode_pgm(read_file(path)); }

void write_pgm(const GrayImage& image, const fs::path& path, const std::vector<std::string>& comments) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << "P5\n";
  for (const auto& c : comments) out << "# " << c << '\n';
  out << image.width << ' ' << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.pixels.data()), std::streamsize(image.pixels.size()));
  if (!out) throw Error(ErrorCode::IoError, "write failed: " + path.string());
}

// ---- Mullen -------------------------------------------------------------------

std::vector<MullenRecord> load_mullen(const fs::path& path) {
  const std::string text = read_file(path);
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  std::vector<MullenRecord> out;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      if (line != "infant_id,visit_age_months,gm_raw,fm_raw") {
        throw Error(ErrorCode::MalformedMullen, path.string() + ": unexpected header");
      }
      header_seen = true;
      continue;
    }
    const auto cells = split_csv_line(line);
    const std::string where = path.string() + ":" + std::to_string(line_no);
    MullenRecord r;
    if (cells.size() != 4 || cells[0].empty() || !parse_number(cells[1], r.visit_age_months) ||
        !parse_number(cells[2], r.gm_raw) || !parse_number(cells[3], r.fm_raw) || !std::isfinite(r.gm_raw) ||
        !std::isfinite(r.fm_raw) || !std::isfinite(r.visit_age_months)) {
      throw Error(ErrorCode::MalformedMullen, where + ": malformed row");
    }
    if (r.visit_age_months <= 0.0) throw Error(ErrorCode::NonPositiveAge, where + ": visit age must be positive");
    r.infant_id = cells[0];
    out.push_back(std::move(r));
  }
  if (!header_seen) throw Error(ErrorCode::MalformedMullen, path.string() + ": missing header");
  return out;
}

void write_mullen(const std::vector<MullenRecord>& records, const fs::path& path, const std::vector<std::string>& header) {
  std::string s;
  for (const auto& h : header) s += "# " + h + "\n";
  s += "infant_id,visit_age_months,gm_raw,fm_raw\n";
  for (const auto& r : records) {
    s += r.infant_id + ",";
    append_number(s, r.visit_age_months);
    s += ',';
    append_number(s, r.gm_raw);
    s += ',';
    append_number(s, r.fm_raw);
    s += '\n';
  }
  write_file_atomically(path, s);
}

// ---- feature matrices -----------------------------------------------------------

void write_feature_matrix(const FeatureMatrix& matrix, const fs::path& path, const ProvenanceLines& provenance) {
  matrix.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  for (const auto& p : provenance) out << "# " << p << '\n';
  bool any_label = false;
  for (const auto& l : matrix.labels) any_label = any_label || l.has_value();

  std::string line = "video_id,frame_index";
  for (const auto& e : matrix.manifest.entries()) line += "," + e.name;
  if (any_label) {
    line += ",on_head";
    for (auto r : kRegionNames) line += "," + std::string(r);
  }
  out << line << '\n';
  for (std::size_t i = 0; i < matrix.rows(); ++i) {
    line.clear();
    line += matrix.video_ids[i];
    line += ',';
    line += std::to_string(matrix.frame_indices[i]);
    for (std::size_t c = 0; c < matrix.cols(); ++c) {
      line += ',';
      const double v = matrix.values(Eigen::Index(i), Eigen::Index(c));
      if (!is_missing(v)) append_number(line, v);
    }
    if (any_label) {
      const auto& l = matrix.labels[i];
      if (l) {
        line += l->on_head ? ",1" : ",0";
        for (bool f : l->regions) line += f ? ",1" : ",0";
      } else {
        line += ",,,,,,";
      }
    }
    out << line << '\n';
  }
  if (!out) throw Error(ErrorCode::IoError, "write failed: " + path.string());
}

FeatureMatrix read_feature_matrix(const fs::path& path, const FeatureManifest* expected) {
  const std::string text = read_file(path);
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    header = split_csv_line(line);
    break;
  }
  if (header.size() < 2 || header[0] != "video_id" || header[1] != "frame_index") {
    throw Error(ErrorCode::HeaderMismatch, path.string() + ": missing video_id,frame_index header");
  }
  bool has_labels = header.size() >= 8 && header[header.size() - 6] == "on_head";
  const std::size_t n_features = header.size() - 2 - (has_labels ? 6 : 0);

  // Recover the manifest: canonical ones are recognised by name, otherwise the
  // columns become a plain manifest without mirror metadata.
  FeatureManifest manifest;
  std::vector<std::string> names(header.begin() + 2, header.begin() + 2 + std::ptrdiff_t(n_features));
  for (bool hog : {false, true}) {
    FeatureManifest canonical = build_manifest(hog);
    if (canonical.names() == names) {
      manifest = std::move(canonical);
      break;
    }
  }
  if (manifest.size() == 0 && n_features > 0) {
    std::vector<FeatureEntry> entries;
    for (const auto& n : names) {
      FeatureEntry e;
      e.name = n;
      e.family = n.rfind("hog_", 0) == 0 ? FeatureFamily::HOG : FeatureFamily::BodyDistance;
      entries.push_back(e);
    }
    manifest = FeatureManifest(std::move(entries));
  }
  if (expected && manifest.names() != expected->names()) {
    throw Error(ErrorCode::HeaderMismatch, path.string() + ": columns do not match the expected manifest (" +
                                               std::to_string(n_features) + " vs " +
                                               std::to_string(expected->size()) + " features)");
  }
  if (expected) manifest = *expected;

  std::vector<std::vector<double>> rows;
  std::vector<std::string> vids;
  std::vector<int> frames;
  std::vector<std::optional<LabelRecord>> labels;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const auto cells = split_csv_line(line);
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (cells.size() != header.size()) throw Error(ErrorCode::MalformedRecord, where + ": wrong column count");
    int frame = 0;
    if (!parse_number(cells[1], frame)) throw Error(ErrorCode::MalformedRecord, where + ": bad frame_index");
    std::vector<double> row(n_features, kMissing);
    for (std::size_t c = 0; c < n_features; ++c) {
      const std::string& cell = cells[2 + c];
      if (cell.empty()) continue;
      if (!parse_number(cell, row[c])) throw Error(ErrorCode::MalformedRecord, where + ": bad number");
    }
    std::optional<LabelRecord> label;
    if (has_labels && !cells[2 + n_features].empty()) {
      LabelRecord r;
      r.video_id = cells[0];
      r.frame_index = frame;
      if (!parse_flag(cells[2 + n_features], r.on_head)) throw Error(ErrorCode::MalformedRecord, where + ": bad label");
      for (std::size_t k = 0; k < kRegionCount; ++k) {
        if (!parse_flag(cells[3 + n_features + k], r.regions[k])) {
          throw Error(ErrorCode::MalformedRecord, where + ": bad label");
        }
      }
      label = std::move(r);
    }
    vids.push_back(cells[0]);
    frames.push_back(frame);
    rows.push_back(std::move(row));
    labels.push_back(std::move(label));
  }
  FeatureMatrix m(manifest, rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t c = 0; c < n_features; ++c) m.values(Eigen::Index(i), Eigen::Index(c)) = rows[i][c];
  }
  m.video_ids = std::move(vids);
  m.frame_indices = std::move(frames);
  if (has_labels) m.labels = std::move(labels);
  return m;
}

}  // namespace facetouch
