#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "facetouch/core/feature_matrix.hpp"
#include "facetouch/eval/stats.hpp"
#include "facetouch/learn/reduce.hpp"
#include "facetouch/learn/svm.hpp"
#include "facetouch/preprocess/preprocess.hpp"

namespace facetouch {

enum class Variant { RfPcaSvm, AutoencSvmI, AutoencSvmII };
enum class Task { BinaryTouch, MultiLabelRegions };

std::string variant_name(Variant v);  // "rf-pca-svm", "autoenc-svm-1", "autoenc-svm-2"
Variant variant_from_name(const std::string& name);
std::string task_name(Task t);  // "binary", "multilabel"
Task task_from_name(const std::string& name);

struct Grid {
  std::vector<double> pca_thresholds{0.90, 0.95, 0.99};
  std::vector<std::size_t> latent_sizes{16, 32, 64};
  std::vector<int> epochs{50, 100};
  std::vector<double> C{0.1, 1.0, 10.0, 100.0};
  // nullopt is the "scale" heuristic.
  std::vector<std::optional<double>> gammas{std::nullopt, 0.01, 0.1};
};

struct PipelineSpec {
  Variant variant = Variant::RfPcaSvm;
  Task task = Task::BinaryTouch;
  Grid grid;
  std::uint64_t seed = 0;
  std::size_t folds = 5;
  bool augment = true;
  ForestParams forest;
  AutoencoderParams autoencoder;  // latent and epochs come from the grid
  double svm_tol = 1e-3;

  void validate() const;
};

struct Hyperparameters {
  double pca_threshold = 0.0;   // RF-PCA-SVM only
  std::size_t latent = 0;       // autoencoder variants only
  int epochs = 0;
  double C = 1.0;
  std::optional<double> gamma;  // nullopt: scale

  bool operator==(const Hyperparameters&) const = default;
};

// Full grid in enumeration order: PCA threshold (or latent, epochs), then C,
// then gamma.
std::vector<Hyperparameters> enumerate_grid(const PipelineSpec& spec);

struct CvRow {
  Hyperparameters params;
  std::vector<double> fold_scores;
  double mean_score = 0.0;
  bool failed = false;  // some fold did not converge; never selected
  std::string note;
};

struct GroupedFolds {
  std::size_t k = 0;
  std::vector<std::string> videos;   // shuffled order
  std::vector<std::size_t> fold_of;  // parallel to videos

  std::vector<std::string> videos_in(std::size_t fold) const;
};

// Shuffles the distinct ids by seed, then deals them round-robin.
// Throws TooFewGroups when there are fewer ids than folds.
GroupedFolds make_grouped_folds(const std::vector<std::string>& video_ids, std::size_t k, std::uint64_t seed);

// Columns and rows the pipeline trains on: non-HOG columns for RF-PCA-SVM and
// AUTOENC-SVM-I, every column for AUTOENC-SVM-II (which requires HOG); for
// MultiLabelRegions only on-head rows. Throws InvalidArgument when a row is
// unlabelled or HOG is required but absent.
FeatureMatrix prepare_training(const PipelineSpec& spec, const FeatureMatrix& labelled);
std::vector<std::size_t> pipeline_columns(Variant variant, const FeatureManifest& manifest);

// Class targets: 0/1 on-head, or ascending powerset class ids.
std::vector<int> task_targets(Task task, const FeatureMatrix& m);

// Everything fitted on one fold's training rows before the SVM.
struct FoldStages {
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> validation_rows;
  ImputationStats imputation;
  Standardizer standardizer;
  std::vector<std::size_t> selected;                 // RF-PCA-SVM
  std::optional<PcaModel> pca;                       // full basis; thresholds pick k
  std::vector<Hyperparameters> autoencoder_keys;     // latent/epochs per model below
  std::vector<AutoencoderModel> autoencoders;
};

// Fits imputation, standardization and the reduction stage on the training
// rows of `fold` (flip-augmented when the spec asks for it). `prepared` is the
// output of prepare_training. Pass fold == folds.k to fit on every row.
FoldStages fit_fold_stages(const PipelineSpec& spec, const FeatureMatrix& prepared, const GroupedFolds& folds,
                           std::size_t fold);

// Canonical text of fitted statistics; equal strings mean bit-identical fits.
std::string serialize_stages(const FoldStages& stages);

struct GridResult {
  std::vector<CvRow> table;
  std::size_t best = 0;
};

// Exhaustive grouped-CV search. Scores are mean accuracy (binary) or mean
// macro accuracy over the regions (multi-label); ties keep the earlier config.
GridResult grid_search(const PipelineSpec& spec, const FeatureMatrix& prepared, const GroupedFolds& folds);

struct TrainedModel {
  int version = 1;
  PipelineSpec spec;
  std::string manifest_fingerprint;        // of the matrix handed to fit
  std::vector<std::size_t> input_columns;  // into that manifest
  ImputationStats imputation;
  Standardizer standardizer;
  std::vector<std::size_t> selected;
  std::optional<PcaModel> pca;
  std::size_t pca_components = 0;
  std::optional<AutoencoderModel> autoencoder;
  std::optional<SvmModel> svm;
  std::optional<PowersetModel> powerset;
  Hyperparameters chosen;
  std::vector<CvRow> cv_table;
  // Training label summary used for baselines.
  std::size_t train_rows = 0;
  double train_prevalence = 0.0;
  bool zeror_on_head = false;
  int zeror_code = 0;
  std::vector<std::string> warnings;
};

// Grid search (when the grid has more than one point) followed by a refit on
// all training rows. `labelled` must carry labels for every row.
TrainedModel fit(const PipelineSpec& spec, const FeatureMatrix& labelled);
// Refit with fixed hyperparameters, skipping the search.
TrainedModel fit_with(const PipelineSpec& spec, const FeatureMatrix& labelled, const Hyperparameters& params);

struct Predictions {
  std::vector<bool> on_head;          // BinaryTouch
  std::vector<RegionFlags> regions;   // MultiLabelRegions
};

// Throws ManifestFingerprintMismatch when the matrix manifest differs from
// the one used in training.
Predictions predict(const TrainedModel& model, const FeatureMatrix& matrix);

void save_model(const TrainedModel& model, const std::filesystem::path& path);
// Throws VersionMismatch or CorruptModel.
TrainedModel load_model(const std::filesystem::path& path);
std::string model_to_string(const TrainedModel& model);
TrainedModel model_from_string(const std::string& text);

// Grouped half split: videos shuffled by seed, the first floor(n/2) go to
// `first`.
struct HalfSplit {
  FeatureMatrix first;
  FeatureMatrix second;
};
HalfSplit split_by_video(const FeatureMatrix& matrix, std::uint64_t seed);

}  // namespace facetouch
