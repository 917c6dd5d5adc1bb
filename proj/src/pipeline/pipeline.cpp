#include "facetouch/pipeline/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "facetouch/core/error.hpp"
#include "facetouch/core/random.hpp"
#include "facetouch/features/features.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace facetouch {

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::RfPcaSvm: return "rf-pca-svm";
    case Variant::AutoencSvmI: return "autoenc-svm-1";
    case Variant::AutoencSvmII: return "autoenc-svm-2";
  }
  return "?";
}

Variant variant_from_name(const std::string& name) {
  for (Variant v : {Variant::RfPcaSvm, Variant::AutoencSvmI, Variant::AutoencSvmII}) {
    if (variant_name(v) == name) return v;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown variant '" + name + "'");
}

std::string task_name(Task t) { return t == Task::BinaryTouch ? "binary" : "multilabel"; }

Task task_from_name(const std::string& name) {
  if (name == "binary") return Task::BinaryTouch;
  if (name == "multilabel") return Task::MultiLabelRegions;
  throw Error(ErrorCode::InvalidArgument, "unknown task '" + name + "'");
}

void PipelineSpec::validate() const {
  if (folds < 2) throw Error(ErrorCode::InvalidConfig, "at least two folds are needed");
  if (grid.C.empty() || grid.gammas.empty()) throw Error(ErrorCode::InvalidConfig, "SVM grid is empty");
  for (double c : grid.C) {
    if (!(c > 0.0)) throw Error(ErrorCode::InvalidConfig, "C must be positive");
  }
  for (const auto& g : grid.gammas) {
    if (g && !(*g > 0.0)) throw Error(ErrorCode::InvalidConfig, "gamma must be positive");
  }
  if (variant == Variant::RfPcaSvm) {
    if (grid.pca_thresholds.empty()) throw Error(ErrorCode::InvalidConfig, "PCA threshold grid is empty");
    for (double t : grid.pca_thresholds) {
      if (!(t > 0.0 && t <= 1.0)) throw Error(ErrorCode::InvalidConfig, "PCA thresholds must lie in (0, 1]");
    }
  } else {
    if (grid.latent_sizes.empty() || grid.epochs.empty()) {
      throw Error(ErrorCode::InvalidConfig, "autoencoder grid is empty");
    }
    for (auto z : grid.latent_sizes) {
      if (z == 0) throw Error(ErrorCode::InvalidConfig, "latent size must be positive");
    }
    for (int e : grid.epochs) {
      if (e < 1) throw Error(ErrorCode::InvalidConfig, "epochs must be positive");
    }
  }
}

std::vector<Hyperparameters> enumerate_grid(const PipelineSpec& spec) {
  std::vector<Hyperparameters> out;
  auto svm_points = [&](Hyperparameters h) {
    for (double c : spec.grid.C) {
      for (const auto& g : spec.grid.gammas) {
        h.C = c;
        h.gamma = g;
        out.push_back(h);
      }
    }
  };
  if (spec.variant == Variant::RfPcaSvm) {
    for (double t : spec.grid.pca_thresholds) {
      Hyperparameters h;
      h.pca_threshold = t;
      svm_points(h);
    }
  } else {
    for (auto z : spec.grid.latent_sizes) {
      for (int e : spec.grid.epochs) {
        Hyperparameters h;
        h.latent = z;
        h.epochs = e;
        svm_points(h);
      }
    }
  }
  return out;
}

std::vector<std::string> GroupedFolds::videos_in(std::size_t fold) const {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < videos.size(); ++i) {
    if (fold_of[i] == fold) out.push_back(videos[i]);
  }
  return out;
}

GroupedFolds make_grouped_folds(const std::vector<std::string>& video_ids, std::size_t k, std::uint64_t seed) {
  std::vector<std::string> distinct;
  std::set<std::string> seen;
  for (const auto& v : video_ids) {
    if (seen.insert(v).second) distinct.push_back(v);
  }
  if (k == 0 || distinct.size() < k) {
    throw Error(ErrorCode::TooFewGroups, std::to_string(distinct.size()) + " videos cannot fill " +
                                             std::to_string(k) + " folds");
  }
  Rng rng = make_rng(seed);
  shuffle(distinct, rng);
  GroupedFolds f;
  f.k = k;
  f.videos = distinct;
  f.fold_of.resize(distinct.size());
  for (std::size_t i = 0; i < distinct.size(); ++i) f.fold_of[i] = i % k;
  return f;
}

std::vector<std::size_t> pipeline_columns(Variant variant, const FeatureManifest& manifest) {
  if (variant == Variant::AutoencSvmII) {
    if (!manifest.has_hog()) {
      throw Error(ErrorCode::InvalidArgument, "AUTOENC-SVM-II needs HOG columns; extract with HOG enabled");
    }
    std::vector<std::size_t> all(manifest.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    return all;
  }
  return manifest.indices_where(is_non_hog_family);
}

FeatureMatrix prepare_training(const PipelineSpec& spec, const FeatureMatrix& labelled) {
  if (!labelled.fully_labeled()) throw Error(ErrorCode::InvalidArgument, "training rows must all carry labels");
  const auto cols = pipeline_columns(spec.variant, labelled.manifest);
  std::vector<std::size_t> rows;
  for (std::size_t r = 0; r < labelled.rows(); ++r) {
    if (spec.task == Task::BinaryTouch || labelled.labels[r]->on_head) rows.push_back(r);
  }
  if (rows.empty()) throw Error(ErrorCode::EmptyInput, "no training rows for the " + task_name(spec.task) + " task");
  return labelled.select_rows(rows).select_columns(cols);
}

std::vector<int> task_targets(Task task, const FeatureMatrix& m) {
  std::vector<int> out(m.rows());
  if (task == Task::BinaryTouch) {
    for (std::size_t r = 0; r < m.rows(); ++r) out[r] = m.labels[r]->on_head ? 1 : 0;
    return out;
  }
  std::set<int> codes;
  for (std::size_t r = 0; r < m.rows(); ++r) codes.insert(int(m.labels[r]->region_code()));
  const std::vector<int> sorted(codes.begin(), codes.end());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const int code = int(m.labels[r]->region_code());
    out[r] = int(std::lower_bound(sorted.begin(), sorted.end(), code) - sorted.begin());
  }
  return out;
}

namespace {

std::vector<int> region_codes(const FeatureMatrix& m) {
  std::vector<int> out(m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) out[r] = int(m.labels[r]->region_code());
  return out;
}

RowMatrix take_columns(const RowMatrix& x, const std::vector<std::size_t>& cols) {
  RowMatrix out(x.rows(), Eigen::Index(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) out.col(Eigen::Index(k)) = x.col(Eigen::Index(cols[k]));
  return out;
}

std::uint64_t stage_stream(const GroupedFolds& folds, std::size_t fold) {
  return fold >= folds.k ? 999 : fold;
}

// Rows and training matrix of a fold, in the order the stages were fitted on.
struct FoldData {
  FeatureMatrix train;  // augmented when requested
  FeatureMatrix validation;
};

FoldData split_fold(const PipelineSpec& spec, const FeatureMatrix& prepared, const GroupedFolds& folds,
                    std::size_t fold, std::vector<std::size_t>& train_rows, std::vector<std::size_t>& val_rows) {
  std::set<std::string> held;
  if (fold < folds.k) {
    for (const auto& v : folds.videos_in(fold)) held.insert(v);
  }
  train_rows.clear();
  val_rows.clear();
  for (std::size_t r = 0; r < prepared.rows(); ++r) {
    (held.count(prepared.video_ids[r]) ? val_rows : train_rows).push_back(r);
  }
  if (train_rows.empty()) throw Error(ErrorCode::EmptyInput, "fold has no training rows");
  FoldData d;
  d.train = prepared.select_rows(train_rows);
  if (spec.augment) d.train = flip_augment(d.train);
  d.validation = prepared.select_rows(val_rows);
  return d;
}

RowMatrix standardized(const FoldStages& st, const RowMatrix& raw) {
  RowMatrix x = raw;
  apply_imputation_inplace(x, st.imputation);
  st.standardizer.transform_inplace(x);
  return x;
}

FoldStages fit_stages_on(const PipelineSpec& spec, const FeatureMatrix& train, std::uint64_t stream) {
  FoldStages st;
  st.imputation = fit_imputation(train);
  RowMatrix x = train.values;
  apply_imputation_inplace(x, st.imputation);
  st.standardizer = Standardizer::fit(x);
  st.standardizer.transform_inplace(x);
  if (spec.variant == Variant::RfPcaSvm) {
    const auto y = task_targets(spec.task, train);
    const ForestModel forest = fit_forest(x, y, spec.forest, mix_seed(spec.seed, 1000 + stream));
    st.selected = select_features(forest);
    st.pca = fit_pca(take_columns(x, st.selected), 1.0);
  } else {
    std::vector<int> epochs = spec.grid.epochs;
    std::sort(epochs.begin(), epochs.end());
    epochs.erase(std::unique(epochs.begin(), epochs.end()), epochs.end());
    for (std::size_t z : spec.grid.latent_sizes) {
      AutoencoderParams p = spec.autoencoder;
      p.latent = z;
      p.epochs = epochs.back();
      auto snaps = fit_autoencoder_snapshots(x, p, epochs, mix_seed(spec.seed, 2000 + stream * 4096 + z));
      for (std::size_t i = 0; i < epochs.size(); ++i) {
        Hyperparameters key;
        key.latent = z;
        key.epochs = epochs[i];
        st.autoencoder_keys.push_back(key);
        st.autoencoders.push_back(std::move(snaps[i]));
      }
    }
  }
  return st;
}

double score_binary(const std::vector<int>& pred, const FeatureMatrix& val) {
  std::size_t ok = 0;
  for (std::size_t r = 0; r < val.rows(); ++r) ok += (pred[r] > 0) == val.labels[r]->on_head;
  return double(ok) / double(val.rows());
}

double score_multilabel(const std::vector<RegionFlags>& pred, const FeatureMatrix& val) {
  std::vector<RegionFlags> truth(val.rows());
  for (std::size_t r = 0; r < val.rows(); ++r) truth[r] = val.labels[r]->regions;
  return multilabel_macro_metrics(pred, truth).accuracy;
}

// Trains and scores every grid row listed in `members` (same reduced inputs).
void evaluate_block(const PipelineSpec& spec, const RowMatrix& xtr, const FeatureMatrix& train, const RowMatrix& xva,
                    const FeatureMatrix& val, const std::vector<std::size_t>& members, std::vector<CvRow>& table,
                    std::size_t fold) {
  std::vector<int> ytr;
  std::vector<int> codes;
  if (spec.task == Task::BinaryTouch) {
    ytr.resize(train.rows());
    for (std::size_t r = 0; r < train.rows(); ++r) ytr[r] = train.labels[r]->on_head ? 1 : -1;
  } else {
    codes = region_codes(train);
  }
  const double scale = scale_gamma(xtr);
  std::map<double, std::vector<std::size_t>> by_gamma;
  std::vector<double> gamma_order;
  for (std::size_t m : members) {
    const double g = table[m].params.gamma.value_or(scale);
    if (!by_gamma.count(g)) gamma_order.push_back(g);
    by_gamma[g].push_back(m);
  }
  for (double g : gamma_order) {
    KernelCache cache(xtr, g);
    for (std::size_t m : by_gamma[g]) {
      SvmParams p;
      p.C = table[m].params.C;
      p.gamma = g;
      p.tol = spec.svm_tol;
      try {
        if (spec.task == Task::BinaryTouch) {
          const SvmModel model = train_svm(xtr, ytr, p, nullptr, &cache);
          table[m].fold_scores[fold] = score_binary(model.predict(xva), val);
        } else {
          const PowersetModel model = train_powerset(xtr, codes, p, nullptr, &cache);
          table[m].fold_scores[fold] = score_multilabel(model.predict(xva), val);
        }
      } catch (const Error& e) {
        if (e.code() != ErrorCode::NoConvergence) throw;
        table[m].failed = true;
        table[m].note = "fold " + std::to_string(fold) + ": " + e.what();
      }
    }
  }
}

}  // namespace

FoldStages fit_fold_stages(const PipelineSpec& spec, const FeatureMatrix& prepared, const GroupedFolds& folds,
                           std::size_t fold) {
  std::vector<std::size_t> tr, va;
  const FoldData d = split_fold(spec, prepared, folds, fold, tr, va);
  FoldStages st = fit_stages_on(spec, d.train, stage_stream(folds, fold));
  st.train_rows = std::move(tr);
  st.validation_rows = std::move(va);
  return st;
}

GridResult grid_search(const PipelineSpec& spec, const FeatureMatrix& prepared, const GroupedFolds& folds) {
  spec.validate();
  GridResult result;
  for (const auto& h : enumerate_grid(spec)) {
    CvRow row;
    row.params = h;
    row.fold_scores.assign(folds.k, 0.0);
    result.table.push_back(std::move(row));
  }
  for (std::size_t fold = 0; fold < folds.k; ++fold) {
    std::vector<std::size_t> tr, va;
    const FoldData d = split_fold(spec, prepared, folds, fold, tr, va);
    if (va.empty()) throw Error(ErrorCode::EmptyInput, "fold " + std::to_string(fold) + " has no validation rows");
    const FoldStages st = fit_stages_on(spec, d.train, stage_stream(folds, fold));
    const RowMatrix xtr = standardized(st, d.train.values);
    const RowMatrix xva = standardized(st, d.validation.values);
    if (spec.variant == Variant::RfPcaSvm) {
      const RowMatrix str = take_columns(xtr, st.selected);
      const RowMatrix sva = take_columns(xva, st.selected);
      for (double t : spec.grid.pca_thresholds) {
        std::vector<std::size_t> members;
        for (std::size_t m = 0; m < result.table.size(); ++m) {
          if (result.table[m].params.pca_threshold == t) members.push_back(m);
        }
        const std::size_t k = st.pca->retained_for(t);
        evaluate_block(spec, st.pca->transform(str, k), d.train, st.pca->transform(sva, k), d.validation, members,
                       result.table, fold);
      }
    } else {
      for (std::size_t a = 0; a < st.autoencoders.size(); ++a) {
        const auto& key = st.autoencoder_keys[a];
        std::vector<std::size_t> members;
        for (std::size_t m = 0; m < result.table.size(); ++m) {
          const auto& p = result.table[m].params;
          if (p.latent == key.latent && p.epochs == key.epochs) members.push_back(m);
        }
        if (members.empty()) continue;
        evaluate_block(spec, st.autoencoders[a].encode(xtr), d.train, st.autoencoders[a].encode(xva), d.validation,
                       members, result.table, fold);
      }
    }
  }
  bool any = false;
  for (std::size_t m = 0; m < result.table.size(); ++m) {
    auto& row = result.table[m];
    double s = 0.0;
    for (double v : row.fold_scores) s += v;
    row.mean_score = s / double(folds.k);
    if (row.failed) continue;
    if (!any || row.mean_score > result.table[result.best].mean_score) {
      result.best = m;
      any = true;
    }
  }
  if (!any) throw Error(ErrorCode::NoConvergence, "no grid configuration converged on every fold");
  return result;
}

namespace {

PipelineSpec narrowed(const PipelineSpec& spec, const Hyperparameters& h) {
  PipelineSpec s = spec;
  s.grid.C = {h.C};
  s.grid.gammas = {h.gamma};
  if (spec.variant == Variant::RfPcaSvm) {
    s.grid.pca_thresholds = {h.pca_threshold};
  } else {
    s.grid.latent_sizes = {h.latent};
    s.grid.epochs = {h.epochs};
  }
  return s;
}

RowMatrix reduce_inputs(const TrainedModel& model, const RowMatrix& raw) {
  RowMatrix x = raw;
  apply_imputation_inplace(x, model.imputation);
  model.standardizer.transform_inplace(x);
  if (model.spec.variant == Variant::RfPcaSvm) return model.pca->transform(take_columns(x, model.selected), model.pca_components);
  return model.autoencoder->encode(x);
}

}  // namespace

TrainedModel fit_with(const PipelineSpec& spec_in, const FeatureMatrix& labelled, const Hyperparameters& params) {
  const PipelineSpec spec = narrowed(spec_in, params);
  spec.validate();
  const FeatureMatrix prepared = prepare_training(spec, labelled);
  TrainedModel model;
  model.spec = spec_in;
  model.chosen = params;
  model.manifest_fingerprint = labelled.manifest.fingerprint();
  model.input_columns = pipeline_columns(spec.variant, labelled.manifest);

  GroupedFolds all;  // k = 0: every row trains
  std::vector<std::size_t> tr, va;
  const FoldData d = split_fold(spec, prepared, all, 0, tr, va);
  FoldStages st = fit_stages_on(spec, d.train, stage_stream(all, 0));
  model.imputation = st.imputation;
  model.standardizer = st.standardizer;
  for (const auto& w : st.imputation.warnings) model.warnings.push_back(w);
  if (spec.variant == Variant::RfPcaSvm) {
    model.selected = st.selected;
    model.pca = std::move(st.pca);
    model.pca_components = model.pca->retained_for(params.pca_threshold);
  } else {
    model.autoencoder = std::move(st.autoencoders.front());
  }
  const RowMatrix x = reduce_inputs(model, d.train.values);
  SvmParams p;
  p.C = params.C;
  p.gamma = params.gamma.value_or(scale_gamma(x));
  p.tol = spec.svm_tol;
  if (spec.task == Task::BinaryTouch) {
    std::vector<int> y(d.train.rows());
    for (std::size_t r = 0; r < y.size(); ++r) y[r] = d.train.labels[r]->on_head ? 1 : -1;
    model.svm = train_svm(x, y, p);
  } else {
    Warnings w;
    model.powerset = train_powerset(x, region_codes(d.train), p, &w);
    for (auto& m : w.messages) model.warnings.push_back(m);
  }

  model.train_rows = labelled.rows();
  std::vector<bool> on(labelled.rows());
  for (std::size_t r = 0; r < labelled.rows(); ++r) on[r] = labelled.labels[r]->on_head;
  model.train_prevalence = touch_frequency(on);
  model.zeror_on_head = zeror_binary(on);
  const auto codes = region_codes(prepared);
  model.zeror_code = zeror_combination(codes);
  return model;
}

TrainedModel fit(const PipelineSpec& spec, const FeatureMatrix& labelled) {
  spec.validate();
  const auto grid = enumerate_grid(spec);
  if (grid.size() == 1) return fit_with(spec, labelled, grid.front());
  const FeatureMatrix prepared = prepare_training(spec, labelled);
  const GroupedFolds folds = make_grouped_folds(prepared.video_ids, spec.folds, spec.seed);
  GridResult gr = grid_search(spec, prepared, folds);
  TrainedModel model = fit_with(spec, labelled, gr.table[gr.best].params);
  model.cv_table = std::move(gr.table);

  // Resubstitution sanity check against the selected CV score.
  const double cv = model.cv_table[gr.best].mean_score;
  const Predictions pred = predict(model, labelled);
  double train_score;
  if (spec.task == Task::BinaryTouch) {
    std::size_t ok = 0;
    for (std::size_t r = 0; r < labelled.rows(); ++r) ok += pred.on_head[r] == labelled.labels[r]->on_head;
    train_score = double(ok) / double(labelled.rows());
  } else {
    std::vector<RegionFlags> p, t;
    for (std::size_t r = 0; r < labelled.rows(); ++r) {
      if (!labelled.labels[r]->on_head) continue;
      p.push_back(pred.regions[r]);
      t.push_back(labelled.labels[r]->regions);
    }
    train_score = multilabel_macro_metrics(p, t).accuracy;
  }
  if (train_score < cv - 0.05) {
    model.warnings.push_back("training score " + std::to_string(train_score) + " is below the CV score " +
                             std::to_string(cv) + " by more than 0.05");
  }
  return model;
}

Predictions predict(const TrainedModel& model, const FeatureMatrix& matrix) {
  if (matrix.manifest.fingerprint() != model.manifest_fingerprint) {
    throw Error(ErrorCode::ManifestFingerprintMismatch,
                "feature manifest " + matrix.manifest.fingerprint() + " does not match the model's " +
                    model.manifest_fingerprint);
  }
  const RowMatrix x = reduce_inputs(model, take_columns(matrix.values, model.input_columns));
  Predictions out;
  if (model.spec.task == Task::BinaryTouch) {
    const auto y = model.svm->predict(x);
    out.on_head.resize(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) out.on_head[i] = y[i] > 0;
  } else {
    out.regions = model.powerset->predict(x);
    out.on_head.resize(out.regions.size());
    for (std::size_t i = 0; i < out.regions.size(); ++i) {
      out.on_head[i] = std::any_of(out.regions[i].begin(), out.regions[i].end(), [](bool b) { return b; });
    }
  }
  return out;
}

HalfSplit split_by_video(const FeatureMatrix& matrix, std::uint64_t seed) {
  auto videos = matrix.distinct_videos();
  Rng rng = make_rng(seed);
  shuffle(videos, rng);
  const std::size_t half = videos.size() / 2;
  const std::vector<std::string> a(videos.begin(), videos.begin() + std::ptrdiff_t(half));
  const std::vector<std::string> b(videos.begin() + std::ptrdiff_t(half), videos.end());
  return {matrix.select_rows(matrix.rows_of_videos(a)), matrix.select_rows(matrix.rows_of_videos(b))};
}

// ---- serialization ------------------------------------------------------------

namespace {

constexpr const char* kFormat = "facetouch-model";

json to_json(const RowMatrix& m) {
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::vector<double>(m.data(), m.data() + m.size())}};
}

json to_json(const Matrix& m) {
  const RowMatrix r = m;
  return to_json(r);
}

RowMatrix row_matrix(const json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (rows < 0 || cols < 0 || std::size_t(rows * cols) != data.size()) {
    throw Error(ErrorCode::CorruptModel, "matrix payload has the wrong length");
  }
  RowMatrix m(rows, cols);
  std::copy(data.begin(), data.end(), m.data());
  return m;
}

json to_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vector vector_of(const json& j) {
  const auto d = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(d.data(), Eigen::Index(d.size()));
}

json to_json(const Hyperparameters& h) {
  return json{{"pca_threshold", h.pca_threshold},
              {"latent", h.latent},
              {"epochs", h.epochs},
              {"C", h.C},
              {"gamma", h.gamma ? json(*h.gamma) : json("scale")}};
}

Hyperparameters hyper_of(const json& j) {
  Hyperparameters h;
  h.pca_threshold = j.at("pca_threshold").get<double>();
  h.latent = j.at("latent").get<std::size_t>();
  h.epochs = j.at("epochs").get<int>();
  h.C = j.at("C").get<double>();
  const auto& g = j.at("gamma");
  if (!g.is_string()) h.gamma = g.get<double>();
  return h;
}

json to_json(const PipelineSpec& s) {
  json gammas = json::array();
  for (const auto& g : s.grid.gammas) gammas.push_back(g ? json(*g) : json("scale"));
  return json{{"variant", variant_name(s.variant)},
              {"task", task_name(s.task)},
              {"seed", s.seed},
              {"folds", s.folds},
              {"augment", s.augment},
              {"svm_tol", s.svm_tol},
              {"grid",
               {{"pca_thresholds", s.grid.pca_thresholds},
                {"latent_sizes", s.grid.latent_sizes},
                {"epochs", s.grid.epochs},
                {"C", s.grid.C},
                {"gammas", gammas}}},
              {"forest",
               {{"n_trees", s.forest.n_trees},
                {"max_depth", s.forest.max_depth},
                {"min_samples_leaf", s.forest.min_samples_leaf},
                {"max_bins", s.forest.max_bins}}},
              {"autoencoder",
               {{"batch_size", s.autoencoder.batch_size},
                {"learning_rate", s.autoencoder.learning_rate},
                {"beta1", s.autoencoder.beta1},
                {"beta2", s.autoencoder.beta2},
                {"epsilon", s.autoencoder.epsilon}}}};
}

PipelineSpec spec_of(const json& j) {
  PipelineSpec s;
  s.variant = variant_from_name(j.at("variant").get<std::string>());
  s.task = task_from_name(j.at("task").get<std::string>());
  s.seed = j.at("seed").get<std::uint64_t>();
  s.folds = j.at("folds").get<std::size_t>();
  s.augment = j.at("augment").get<bool>();
  s.svm_tol = j.at("svm_tol").get<double>();
  const auto& g = j.at("grid");
  s.grid.pca_thresholds = g.at("pca_thresholds").get<std::vector<double>>();
  s.grid.latent_sizes = g.at("latent_sizes").get<std::vector<std::size_t>>();
  s.grid.epochs = g.at("epochs").get<std::vector<int>>();
  s.grid.C = g.at("C").get<std::vector<double>>();
  s.grid.gammas.clear();
  for (const auto& v : g.at("gammas")) {
    s.grid.gammas.push_back(v.is_string() ? std::nullopt : std::optional<double>(v.get<double>()));
  }
  const auto& f = j.at("forest");
  s.forest.n_trees = f.at("n_trees").get<int>();
  s.forest.max_depth = f.at("max_depth").get<int>();
  s.forest.min_samples_leaf = f.at("min_samples_leaf").get<int>();
  s.forest.max_bins = f.at("max_bins").get<int>();
  const auto& a = j.at("autoencoder");
  s.autoencoder.batch_size = a.at("batch_size").get<int>();
  s.autoencoder.learning_rate = a.at("learning_rate").get<double>();
  s.autoencoder.beta1 = a.at("beta1").get<double>();
  s.autoencoder.beta2 = a.at("beta2").get<double>();
  s.autoencoder.epsilon = a.at("epsilon").get<double>();
  return s;
}

json to_json(const PcaModel& p) {
  return json{{"mean", p.mean},
              {"components", to_json(p.components)},
              {"eigenvalues", p.eigenvalues},
              {"explained_variance_ratio", p.explained_variance_ratio},
              {"retained_count", p.retained_count}};
}

PcaModel pca_of(const json& j) {
  PcaModel p;
  p.mean = j.at("mean").get<std::vector<double>>();
  p.components = row_matrix(j.at("components"));
  p.eigenvalues = j.at("eigenvalues").get<std::vector<double>>();
  p.explained_variance_ratio = j.at("explained_variance_ratio").get<std::vector<double>>();
  p.retained_count = j.at("retained_count").get<std::size_t>();
  return p;
}

json to_json(const AutoencoderModel& a) {
  json layers = json::array();
  for (const auto& l : a.layers) layers.push_back({{"weight", to_json(l.weight)}, {"bias", to_json(l.bias)}});
  return json{{"input_dim", a.input_dim},
              {"hidden_dim", a.hidden_dim},
              {"latent_dim", a.latent_dim},
              {"layers", layers},
              {"loss_log", a.loss_log}};
}

AutoencoderModel autoencoder_of(const json& j) {
  AutoencoderModel a;
  a.input_dim = j.at("input_dim").get<std::size_t>();
  a.hidden_dim = j.at("hidden_dim").get<std::size_t>();
  a.latent_dim = j.at("latent_dim").get<std::size_t>();
  const auto& layers = j.at("layers");
  if (layers.size() != a.layers.size()) throw Error(ErrorCode::CorruptModel, "autoencoder needs four layers");
  for (std::size_t i = 0; i < a.layers.size(); ++i) {
    a.layers[i].weight = row_matrix(layers[i].at("weight"));
    a.layers[i].bias = vector_of(layers[i].at("bias"));
  }
  a.loss_log = j.at("loss_log").get<std::vector<double>>();
  return a;
}

json to_json(const SvmModel& m) {
  return json{{"support_vectors", to_json(m.support_vectors)},
              {"dual_coef", m.dual_coef},
              {"bias", m.bias},
              {"gamma", m.gamma},
              {"C", m.C},
              {"weight_negative", m.weight_negative},
              {"weight_positive", m.weight_positive}};
}

SvmModel svm_of(const json& j) {
  SvmModel m;
  m.support_vectors = row_matrix(j.at("support_vectors"));
  m.dual_coef = j.at("dual_coef").get<std::vector<double>>();
  if (m.dual_coef.size() != std::size_t(m.support_vectors.rows())) {
    throw Error(ErrorCode::CorruptModel, "dual coefficients do not match the support vectors");
  }
  m.bias = j.at("bias").get<double>();
  m.gamma = j.at("gamma").get<double>();
  m.C = j.at("C").get<double>();
  m.weight_negative = j.at("weight_negative").get<double>();
  m.weight_positive = j.at("weight_positive").get<double>();
  return m;
}

json to_json(const PowersetModel& p) {
  json members = json::array();
  for (const auto& m : p.ovr.members) members.push_back(to_json(m));
  return json{{"codes", p.codes},
              {"constant_code", p.constant_code ? json(*p.constant_code) : json(nullptr)},
              {"ovr_classes", p.ovr.classes},
              {"ovr_members", members}};
}

PowersetModel powerset_of(const json& j) {
  PowersetModel p;
  p.codes = j.at("codes").get<std::vector<int>>();
  if (!j.at("constant_code").is_null()) p.constant_code = j.at("constant_code").get<int>();
  p.ovr.classes = j.at("ovr_classes").get<std::vector<int>>();
  for (const auto& m : j.at("ovr_members")) p.ovr.members.push_back(svm_of(m));
  return p;
}

json stats_json(const ImputationStats& imp, const Standardizer& s) {
  return json{{"imputation_means", imp.means},
              {"imputation_warnings", imp.warnings},
              {"standardizer_mean", s.mean},
              {"standardizer_std", s.stddev}};
}

}  // namespace

std::string serialize_stages(const FoldStages& st) {
  json j = stats_json(st.imputation, st.standardizer);
  j["train_rows"] = st.train_rows;
  j["validation_rows"] = st.validation_rows;
  j["selected"] = st.selected;
  j["pca"] = st.pca ? to_json(*st.pca) : json(nullptr);
  json aes = json::array();
  for (std::size_t i = 0; i < st.autoencoders.size(); ++i) {
    json a = to_json(st.autoencoders[i]);
    a["key"] = to_json(st.autoencoder_keys[i]);
    aes.push_back(a);
  }
  j["autoencoders"] = aes;
  return j.dump();
}

std::string model_to_string(const TrainedModel& m) {
  json j;
  j["format"] = kFormat;
  j["version"] = m.version;
  j["spec"] = to_json(m.spec);
  j["manifest_fingerprint"] = m.manifest_fingerprint;
  j["input_columns"] = m.input_columns;
  j["stats"] = stats_json(m.imputation, m.standardizer);
  j["selected"] = m.selected;
  j["pca"] = m.pca ? to_json(*m.pca) : json(nullptr);
  j["pca_components"] = m.pca_components;
  j["autoencoder"] = m.autoencoder ? to_json(*m.autoencoder) : json(nullptr);
  j["svm"] = m.svm ? to_json(*m.svm) : json(nullptr);
  j["powerset"] = m.powerset ? to_json(*m.powerset) : json(nullptr);
  j["chosen"] = to_json(m.chosen);
  json table = json::array();
  for (const auto& row : m.cv_table) {
    table.push_back({{"params", to_json(row.params)},
                     {"fold_scores", row.fold_scores},
                     {"mean_score", row.mean_score},
                     {"failed", row.failed},
                     {"note", row.note}});
  }
  j["cv_table"] = table;
  j["train"] = {{"rows", m.train_rows},
                {"prevalence", m.train_prevalence},
                {"zeror_on_head", m.zeror_on_head},
                {"zeror_code", m.zeror_code}};
  j["warnings"] = m.warnings;
  return j.dump(1) + "\n";
}

TrainedModel model_from_string(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::CorruptModel, std::string("model file does not parse: ") + e.what());
  }
  try {
    if (!j.is_object() || j.value("format", "") != kFormat) {
      throw Error(ErrorCode::CorruptModel, "not a model file");
    }
    const int version = j.at("version").get<int>();
    if (version != 1) {
      throw Error(ErrorCode::VersionMismatch, "model version " + std::to_string(version) + " is not supported (expected 1)");
    }
    TrainedModel m;
    m.spec = spec_of(j.at("spec"));
    m.manifest_fingerprint = j.at("manifest_fingerprint").get<std::string>();
    m.input_columns = j.at("input_columns").get<std::vector<std::size_t>>();
    const auto& st = j.at("stats");
    m.imputation.means = st.at("imputation_means").get<std::vector<double>>();
    m.imputation.warnings = st.at("imputation_warnings").get<std::vector<std::string>>();
    m.standardizer.mean = st.at("standardizer_mean").get<std::vector<double>>();
    m.standardizer.stddev = st.at("standardizer_std").get<std::vector<double>>();
    m.selected = j.at("selected").get<std::vector<std::size_t>>();
    if (!j.at("pca").is_null()) m.pca = pca_of(j.at("pca"));
    m.pca_components = j.at("pca_components").get<std::size_t>();
    if (!j.at("autoencoder").is_null()) m.autoencoder = autoencoder_of(j.at("autoencoder"));
    if (!j.at("svm").is_null()) m.svm = svm_of(j.at("svm"));
    if (!j.at("powerset").is_null()) m.powerset = powerset_of(j.at("powerset"));
    m.chosen = hyper_of(j.at("chosen"));
    for (const auto& row : j.at("cv_table")) {
      CvRow r;
      r.params = hyper_of(row.at("params"));
      r.fold_scores = row.at("fold_scores").get<std::vector<double>>();
      r.mean_score = row.at("mean_score").get<double>();
      r.failed = row.at("failed").get<bool>();
      r.note = row.at("note").get<std::string>();
      m.cv_table.push_back(std::move(r));
    }
    const auto& tr = j.at("train");
    m.train_rows = tr.at("rows").get<std::size_t>();
    m.train_prevalence = tr.at("prevalence").get<double>();
    m.zeror_on_head = tr.at("zeror_on_head").get<bool>();
    m.zeror_code = tr.at("zeror_code").get<int>();
    m.warnings = j.at("warnings").get<std::vector<std::string>>();

    const bool reducer_ok = m.spec.variant == Variant::RfPcaSvm ? m.pca.has_value() : m.autoencoder.has_value();
    const bool head_ok = m.spec.task == Task::BinaryTouch ? m.svm.has_value() : m.powerset.has_value();
    if (!reducer_ok || !head_ok) throw Error(ErrorCode::CorruptModel, "model is missing a pipeline stage");
    return m;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::CorruptModel, std::string("model file is incomplete: ") + e.what());
  }
}

void save_model(const TrainedModel& model, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << model_to_string(model);
  if (!out) throw Error(ErrorCode::IoError, "failed writing " + path.string());
}

TrainedModel load_model(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingFile, "cannot open model " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return model_from_string(ss.str());
}

}  // namespace facetouch
