#include "facetouch_cli/commands.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "facetouch/features/features.hpp"
#include "facetouch/imaging/face.hpp"
#include "facetouch/ingest/tables.hpp"
#include "facetouch/synth/synth.hpp"

using json = nlohmann::json;

namespace facetouch::cli {

namespace {

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::IoError, "failed writing " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingFile, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool is_feature_csv(const fs::path& p) { return p.extension() == ".csv"; }

PipelineSpec spec_for(const RunConfig& config, Variant variant) {
  PipelineSpec s = config.pipeline;
  s.variant = variant;
  return s;
}

}  // namespace

InputRef parse_input_ref(const std::string& text) {
  InputRef ref;
  const auto hash = text.rfind('#');
  if (hash == std::string::npos) {
    ref.path = text;
    return ref;
  }
  const std::string sel = text.substr(hash + 1);
  if (sel == "first") {
    ref.half = InputRef::Half::First;
  } else if (sel == "second") {
    ref.half = InputRef::Half::Second;
  } else {
    throw Error(ErrorCode::InvalidArgument, "unknown half selector '#" + sel + "' (use #first or #second)");
  }
  ref.path = text.substr(0, hash);
  return ref;
}

fs::path resolve_manifest_path(const fs::path& path) {
  if (fs::is_directory(path)) return path / "manifest.json";
  if (!fs::exists(path)) {
    fs::path with_ext = path;
    with_ext += ".json";
    if (fs::exists(with_ext)) return with_ext;
  }
  return path;
}

FeatureMatrix extract_manifest(const DatasetManifest& manifest, const RunConfig& config, Warnings* warnings) {
  ExtractionOptions options;
  options.normalization = config.normalization;
  options.hog = config.hog;
  options.include_hog = config.include_hog;
  options.images = disk_image_source();
  LoadOptions load;
  load.strict = !config.lenient_ingest;
  std::vector<FeatureMatrix> blocks;
  for (const auto& entry : manifest.videos) {
    LoadedVideo lv = load_video(entry, load);
    if (warnings && lv.rejected) {
      warnings->add(entry.video_id + ": " + std::to_string(lv.rejected) + " malformed records rejected");
    }
    FeatureMatrix m = extract_video_features(lv.video, options, warnings);
    if (entry.labels_path && fs::exists(*entry.labels_path)) attach_labels(m, load_labels(*entry.labels_path));
    blocks.push_back(std::move(m));
  }
  return concat_all(blocks);
}

LoadedInput load_input(const std::string& text, const RunConfig& config, Warnings* warnings) {
  const InputRef ref = parse_input_ref(text);
  LoadedInput out;
  if (is_feature_csv(ref.path)) {
    out.matrix = read_feature_matrix(ref.path);
  } else {
    const DatasetManifest manifest = load_manifest(resolve_manifest_path(ref.path));
    for (const auto& v : manifest.videos) out.infant_of[v.video_id] = v.infant_id;
    out.matrix = extract_manifest(manifest, config, warnings);
  }
  if (ref.half != InputRef::Half::All) {
    HalfSplit split = split_by_video(out.matrix, config.evaluation.split_seed);
    out.matrix = ref.half == InputRef::Half::First ? std::move(split.first) : std::move(split.second);
  }
  return out;
}

DatasetManifest cmd_synth(const RunConfig& config, const fs::path& out_dir) {
  return generate(config.synth, out_dir, provenance_lines(config, "synth"));
}

std::size_t cmd_extract(const RunConfig& config, const fs::path& manifest, const fs::path& out_csv, Warnings* warnings) {
  const FeatureMatrix m = extract_manifest(load_manifest(resolve_manifest_path(manifest)), config, warnings);
  if (out_csv.has_parent_path()) fs::create_directories(out_csv.parent_path());
  write_feature_matrix(m, out_csv, provenance_lines(config, "extract"));
  return m.rows();
}

TrainedModel cmd_train(const RunConfig& config, const std::vector<std::string>& inputs, const fs::path& out_model) {
  if (inputs.empty()) throw Error(ErrorCode::InvalidArgument, "train needs at least one input");
  std::vector<FeatureMatrix> blocks;
  for (const auto& in : inputs) blocks.push_back(load_input(in, config).matrix);
  const TrainedModel model = fit(config.pipeline, concat_all(blocks));
  std::string text = model_to_string(model);
  json j = json::parse(text);
  j["provenance"] = provenance_lines(config, "train");
  write_text(out_model, j.dump(1) + "\n");
  return model;
}

EvalReport cmd_evaluate(const RunConfig& config, const EvaluateArgs& args) {
  EvalReport report;
  if (args.dataset_a || args.dataset_b) {
    if (!args.dataset_a || !args.dataset_b) {
      throw Error(ErrorCode::InvalidArgument, "protocol mode needs both dataset A and dataset B");
    }
    const FeatureMatrix a = load_input(*args.dataset_a, config).matrix;
    const FeatureMatrix b = load_input(*args.dataset_b, config).matrix;
    const HalfSplit half = split_by_video(b, config.evaluation.split_seed);
    struct Setup {
      std::string name;
      FeatureMatrix train;
      const FeatureMatrix* test;
    };
    std::vector<Setup> setups;
    setups.push_back({"Train A, test B", a, &b});
    setups.push_back({"Train B, test A", b, &a});
    setups.push_back({"Train A + 50% B, test other 50% B", concat(a, half.first), &half.second});
    std::vector<std::vector<TrainedModel>> models(setups.size());
    std::vector<EvaluationConfig> configs;
    for (std::size_t s = 0; s < setups.size(); ++s) {
      if (!setups[s].train.fully_labeled()) {
        throw Error(ErrorCode::InvalidArgument, setups[s].name + ": training data must be labelled");
      }
      for (Variant v : config.evaluation.variants) models[s].push_back(fit(spec_for(config, v), setups[s].train));
      EvaluationConfig ec;
      ec.name = setups[s].name;
      ec.test = setups[s].test;
      for (std::size_t m = 0; m < models[s].size(); ++m) {
        ec.models.push_back({variant_name(config.evaluation.variants[m]), &models[s][m]});
      }
      configs.push_back(std::move(ec));
    }
    report = build_report(configs, config.evaluation.random_seed);
  } else {
    if (args.models.empty() || args.test.empty()) {
      throw Error(ErrorCode::InvalidArgument, "evaluate needs --model and --test (or --dataset-a/--dataset-b)");
    }
    std::vector<TrainedModel> models;
    for (const auto& p : args.models) models.push_back(load_model(p));
    const FeatureMatrix test = load_input(args.test, config).matrix;
    EvaluationConfig ec;
    ec.name = args.name;
    ec.test = &test;
    for (std::size_t m = 0; m < models.size(); ++m) {
      ec.models.push_back({args.models[m].stem().string(), &models[m]});
    }
    report = build_report({ec}, config.evaluation.random_seed);
  }
  json j = json::parse(report_to_json(report));
  j["provenance"] = provenance_lines(config, "evaluate");
  write_text(args.out, j.dump(2) + "\n");
  if (args.out_text) {
    std::string text;
    for (const auto& line : provenance_lines(config, "evaluate")) text += "# " + line + "\n";
    write_text(*args.out_text, text + report_to_text(report));
  }
  return report;
}

std::size_t cmd_predict(const RunConfig& config, const fs::path& model_path, const std::string& input,
                        const fs::path& out_csv, const std::optional<fs::path>& infant_manifest) {
  const TrainedModel model = load_model(model_path);
  LoadedInput in = load_input(input, config);
  if (infant_manifest) {
    for (const auto& v : load_manifest(resolve_manifest_path(*infant_manifest)).videos) {
      in.infant_of[v.video_id] = v.infant_id;
    }
  }
  const Predictions pred = predict(model, in.matrix);
  const bool multi = model.spec.task == Task::MultiLabelRegions;
  std::string s;
  for (const auto& line : provenance_lines(config, "predict")) s += "# " + line + "\n";
  s += "video_id,infant_id,frame_index,on_head";
  if (multi) {
    for (auto r : kRegionNames) s += "," + std::string(r);
  }
  s += "\n";
  for (std::size_t r = 0; r < in.matrix.rows(); ++r) {
    const auto& vid = in.matrix.video_ids[r];
    const auto it = in.infant_of.find(vid);
    s += vid + "," + (it == in.infant_of.end() ? vid : it->second) + "," + std::to_string(in.matrix.frame_indices[r]) +
         "," + (pred.on_head[r] ? "1" : "0");
    if (multi) {
      for (bool f : pred.regions[r]) s += f ? ",1" : ",0";
    }
    s += "\n";
  }
  write_text(out_csv, s);
  return in.matrix.rows();
}

CorrelationReport cmd_correlate(const RunConfig& config, const fs::path& predictions, const fs::path& mullen,
                                const std::optional<fs::path>& out, double age_cutoff_months) {
  std::istringstream in(read_text(predictions));
  std::string line;
  std::vector<std::string> header;
  std::map<std::string, std::vector<bool>> per_infant;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto cells = split_csv_line(line);
    if (header.empty()) {
      header = cells;
      if (header.size() < 4 || header[0] != "video_id" || header[1] != "infant_id" || header[3] != "on_head") {
        throw Error(ErrorCode::HeaderMismatch, predictions.string() + ": expected video_id,infant_id,frame_index,on_head");
      }
      continue;
    }
    if (cells.size() != header.size() || (cells[3] != "0" && cells[3] != "1")) {
      throw Error(ErrorCode::MalformedRecord, predictions.string() + ":" + std::to_string(line_no) + ": bad prediction row");
    }
    per_infant[cells[1]].push_back(cells[3] == "1");
  }

  std::map<std::string, std::vector<MullenRecord>> visits;
  for (auto& rec : load_mullen(mullen)) visits[rec.infant_id].push_back(rec);

  CorrelationReport report;
  std::vector<double> fm_x, fm_y, gm_x, gm_y;
  for (const auto& [id, preds] : per_infant) {
    InfantSummary s;
    s.infant_id = id;
    s.frames = preds.size();
    s.touch_ratio = touch_frequency(preds);
    const auto it = visits.find(id);
    if (it == visits.end()) {
      report.notices.push_back(id + ": no Mullen records");
    } else {
      for (auto cat : {MullenCategory::FineMotor, MullenCategory::GrossMotor}) {
        try {
          const double rate = mullen_rate(it->second, cat, age_cutoff_months);
          (cat == MullenCategory::FineMotor ? s.fm_rate : s.gm_rate) = rate;
          auto& xs = cat == MullenCategory::FineMotor ? fm_x : gm_x;
          auto& ys = cat == MullenCategory::FineMotor ? fm_y : gm_y;
          xs.push_back(s.touch_ratio);
          ys.push_back(rate);
        } catch (const Error& e) {
          if (e.code() != ErrorCode::InsufficientVisits) throw;
          report.notices.push_back(e.what());
        }
      }
    }
    report.infants.push_back(std::move(s));
  }
  auto correlate = [&](const std::vector<double>& x, const std::vector<double>& y,
                       const char* what) -> std::optional<CorrelationResult> {
    try {
      return pearson(x, y);
    } catch (const Error& e) {
      report.notices.push_back(std::string(what) + ": " + e.what());
      return std::nullopt;
    }
  };
  report.fm = correlate(fm_x, fm_y, "FM");
  report.gm = correlate(gm_x, gm_y, "GM");

  if (out) {
    auto corr_json = [](const std::optional<CorrelationResult>& c) -> json {
      if (!c) return nullptr;
      return json{{"r", c->r}, {"n", c->n}, {"t_statistic", c->t_statistic}, {"p_value", c->p_value}};
    };
    json infants = json::array();
    for (const auto& s : report.infants) {
      infants.push_back({{"infant_id", s.infant_id},
                         {"frames", s.frames},
                         {"touch_ratio", s.touch_ratio},
                         {"fm_rate", s.fm_rate ? json(*s.fm_rate) : json(nullptr)},
                         {"gm_rate", s.gm_rate ? json(*s.gm_rate) : json(nullptr)}});
    }
    json j{{"provenance", provenance_lines(config, "correlate")},
           {"age_cutoff_months", age_cutoff_months},
           {"fm", corr_json(report.fm)},
           {"gm", corr_json(report.gm)},
           {"infants", infants},
           {"notices", report.notices}};
    write_text(*out, j.dump(2) + "\n");
  }
  return report;
}

}  // namespace facetouch::cli
