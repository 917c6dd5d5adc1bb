#include "facetouch_cli/run_config.hpp"

#include <fstream>
#include <set>

#include "facetouch/core/error.hpp"
#include "facetouch/core/hash.hpp"

using json = nlohmann::json;

namespace facetouch::cli {

namespace {

class Reader {
 public:
  Reader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw Error(ErrorCode::InvalidConfig, where_ + " must be an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw Error(ErrorCode::InvalidConfig, where_ + "." + key + " has the wrong type");
    }
  }

  template <typename T>
  void get_optional(const char* key, std::optional<T>& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    if (j_.at(key).is_null()) {
      out.reset();
      return;
    }
    T v{};
    get(key, v);
    out = v;
  }

  const json* child(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  std::string path(const char* key) const { return where_ + "." + key; }

  ~Reader() noexcept(false) {
    if (std::uncaught_exceptions()) return;
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw Error(ErrorCode::InvalidConfig, "unknown key " + where_ + "." + it.key());
    }
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

json gamma_list(const std::vector<std::optional<double>>& gammas) {
  json out = json::array();
  for (const auto& g : gammas) out.push_back(g ? json(*g) : json("scale"));
  return out;
}

std::vector<std::optional<double>> parse_gammas(const json& j) {
  if (!j.is_array()) throw Error(ErrorCode::InvalidConfig, "pipeline.grid.gammas must be a list");
  std::vector<std::optional<double>> out;
  for (const auto& v : j) {
    if (v.is_string() && v.get<std::string>() == "scale") {
      out.push_back(std::nullopt);
    } else if (v.is_number()) {
      out.push_back(v.get<double>());
    } else {
      throw Error(ErrorCode::InvalidConfig, "gamma entries are numbers or \"scale\"");
    }
  }
  return out;
}

void read_pipeline(const json& j, PipelineSpec& p) {
  Reader r(j, "pipeline");
  std::string variant = variant_name(p.variant), task = task_name(p.task);
  r.get("variant", variant);
  r.get("task", task);
  try {
    p.variant = variant_from_name(variant);
    p.task = task_from_name(task);
  } catch (const Error& e) {
    throw Error(ErrorCode::InvalidConfig, e.what());
  }
  r.get("seed", p.seed);
  r.get("folds", p.folds);
  r.get("augment", p.augment);
  r.get("svm_tol", p.svm_tol);
  if (const json* g = r.child("grid")) {
    Reader gr(*g, r.path("grid"));
    gr.get("pca_thresholds", p.grid.pca_thresholds);
    gr.get("latent_sizes", p.grid.latent_sizes);
    gr.get("epochs", p.grid.epochs);
    gr.get("C", p.grid.C);
    if (const json* gm = gr.child("gammas")) p.grid.gammas = parse_gammas(*gm);
  }
  if (const json* f = r.child("forest")) {
    Reader fr(*f, r.path("forest"));
    fr.get("n_trees", p.forest.n_trees);
    fr.get("max_depth", p.forest.max_depth);
    fr.get("min_samples_leaf", p.forest.min_samples_leaf);
    fr.get("max_bins", p.forest.max_bins);
  }
  if (const json* a = r.child("autoencoder")) {
    Reader ar(*a, r.path("autoencoder"));
    ar.get("batch_size", p.autoencoder.batch_size);
    ar.get("learning_rate", p.autoencoder.learning_rate);
    ar.get("beta1", p.autoencoder.beta1);
    ar.get("beta2", p.autoencoder.beta2);
    ar.get("epsilon", p.autoencoder.epsilon);
  }
}

void read_synth(const json& j, SynthConfig& s) {
  Reader r(j, "synth");
  r.get("n_videos", s.n_videos);
  r.get("n_infants", s.n_infants);
  r.get("frames_per_video", s.frames_per_video);
  r.get("fps", s.fps);
  r.get("image_width", s.image_width);
  r.get("image_height", s.image_height);
  r.get("noise_std_px", s.noise_std_px);
  r.get("hand_dropout_prob", s.hand_dropout_prob);
  r.get("face_dropout_prob", s.face_dropout_prob);
  r.get("pose_dropout_prob", s.pose_dropout_prob);
  r.get("touch_event_rate", s.touch_event_rate);
  r.get_optional("target_prevalence", s.target_prevalence);
  r.get("touch_region_distribution", s.touch_region_distribution);
  r.get("mullen_coupling", s.mullen_coupling);
  r.get("gm_coupling", s.gm_coupling);
  r.get("render_frames", s.render_frames);
  r.get("seed", s.seed);
}

}  // namespace

RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  {
    Reader r(j, "config");
    r.get("include_hog", c.include_hog);
    r.get("lenient_ingest", c.lenient_ingest);
    if (const json* n = r.child("normalization")) {
      Reader nr(*n, "normalization");
      nr.get("low_confidence_threshold", c.normalization.low_confidence_threshold);
      nr.get("median_window", c.normalization.median_window);
      nr.get("mean_window", c.normalization.mean_window);
      nr.get_optional("max_gap_frames", c.normalization.max_gap_frames);
    }
    if (const json* h = r.child("hog")) {
      Reader hr(*h, "hog");
      hr.get("face_width", c.hog.face_width);
      hr.get("face_height", c.hog.face_height);
      hr.get("half_width", c.hog.half_width);
      hr.get("half_height", c.hog.half_height);
      hr.get("cell", c.hog.cell);
      hr.get("block_cells", c.hog.block_cells);
      hr.get("block_stride", c.hog.block_stride);
      hr.get("bins", c.hog.bins);
      hr.get("clip", c.hog.clip);
    }
    if (const json* p = r.child("pipeline")) read_pipeline(*p, c.pipeline);
    if (const json* e = r.child("evaluation")) {
      Reader er(*e, "evaluation");
      er.get("split_seed", c.evaluation.split_seed);
      er.get("random_seed", c.evaluation.random_seed);
      std::vector<std::string> names;
      er.get("variants", names);
      if (!names.empty()) {
        c.evaluation.variants.clear();
        for (const auto& n : names) {
          try {
            c.evaluation.variants.push_back(variant_from_name(n));
          } catch (const Error& err) {
            throw Error(ErrorCode::InvalidConfig, err.what());
          }
        }
      }
    }
    if (const json* s = r.child("synth")) read_synth(*s, c.synth);
  }
  c.normalization.validate();
  c.pipeline.validate();
  c.synth.validate();
  return c;
}

json run_config_to_json(const RunConfig& c) {
  const auto& p = c.pipeline;
  const auto& s = c.synth;
  json variants = json::array();
  for (Variant v : c.evaluation.variants) variants.push_back(variant_name(v));
  return json{
      {"include_hog", c.include_hog},
      {"lenient_ingest", c.lenient_ingest},
      {"normalization",
       {{"low_confidence_threshold", c.normalization.low_confidence_threshold},
        {"median_window", c.normalization.median_window},
        {"mean_window", c.normalization.mean_window},
        {"max_gap_frames", c.normalization.max_gap_frames ? json(*c.normalization.max_gap_frames) : json(nullptr)}}},
      {"hog",
       {{"face_width", c.hog.face_width},
        {"face_height", c.hog.face_height},
        {"half_width", c.hog.half_width},
        {"half_height", c.hog.half_height},
        {"cell", c.hog.cell},
        {"block_cells", c.hog.block_cells},
        {"block_stride", c.hog.block_stride},
        {"bins", c.hog.bins},
        {"clip", c.hog.clip}}},
      {"pipeline",
       {{"variant", variant_name(p.variant)},
        {"task", task_name(p.task)},
        {"seed", p.seed},
        {"folds", p.folds},
        {"augment", p.augment},
        {"svm_tol", p.svm_tol},
        {"grid",
         {{"pca_thresholds", p.grid.pca_thresholds},
          {"latent_sizes", p.grid.latent_sizes},
          {"epochs", p.grid.epochs},
          {"C", p.grid.C},
          {"gammas", gamma_list(p.grid.gammas)}}},
        {"forest",
         {{"n_trees", p.forest.n_trees},
          {"max_depth", p.forest.max_depth},
          {"min_samples_leaf", p.forest.min_samples_leaf},
          {"max_bins", p.forest.max_bins}}},
        {"autoencoder",
         {{"batch_size", p.autoencoder.batch_size},
          {"learning_rate", p.autoencoder.learning_rate},
          {"beta1", p.autoencoder.beta1},
          {"beta2", p.autoencoder.beta2},
          {"epsilon", p.autoencoder.epsilon}}}}},
      {"evaluation",
       {{"split_seed", c.evaluation.split_seed}, {"random_seed", c.evaluation.random_seed}, {"variants", variants}}},
      {"synth",
       {{"n_videos", s.n_videos},
        {"n_infants", s.n_infants},
        {"frames_per_video", s.frames_per_video},
        {"fps", s.fps},
        {"image_width", s.image_width},
        {"image_height", s.image_height},
        {"noise_std_px", s.noise_std_px},
        {"hand_dropout_prob", s.hand_dropout_prob},
        {"face_dropout_prob", s.face_dropout_prob},
        {"pose_dropout_prob", s.pose_dropout_prob},
        {"touch_event_rate", s.touch_event_rate},
        {"target_prevalence", s.target_prevalence ? json(*s.target_prevalence) : json(nullptr)},
        {"touch_region_distribution", s.touch_region_distribution},
        {"mullen_coupling", s.mullen_coupling},
        {"gm_coupling", s.gm_coupling},
        {"render_frames", s.render_frames},
        {"seed", s.seed}}}};
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MissingFile, "config not found: " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, path.string() + ": " + e.what());
  }
  return run_config_from_json(j);
}

std::string config_hash(const RunConfig& config) { return fnv1a64_hex(run_config_to_json(config).dump()); }

std::vector<std::string> provenance_lines(const RunConfig& config, const std::string& command) {
  return {std::string(kToolVersion) + " " + command,
          "config_hash=" + config_hash(config),
          "seeds: pipeline=" + std::to_string(config.pipeline.seed) +
              " synth=" + std::to_string(config.synth.seed) +
              " split=" + std::to_string(config.evaluation.split_seed) +
              " random=" + std::to_string(config.evaluation.random_seed)};
}

}  // namespace facetouch::cli
