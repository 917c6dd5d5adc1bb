#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "facetouch/core/feature_matrix.hpp"

namespace facetouch {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// ---- standardization ------------------------------------------------------------

struct Standardizer {
  std::vector<double> mean;
  std::vector<double> stddev;  // population std; replaced by 1 below 1e-12

  static Standardizer fit(const RowMatrix& x);
  RowMatrix transform(const RowMatrix& x) const;
  void transform_inplace(RowMatrix& x) const;
};

// ---- random forest ----------------------------------------------------------------

struct ForestParams {
  int n_trees = 100;
  int max_depth = 12;
  int min_samples_leaf = 5;
  // Candidate thresholds per feature: all distinct values when there are at
  // most this many, otherwise this many quantile cut points.
  int max_bins = 256;
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;  // go left when x[feature] <= threshold
  int left = -1;
  int right = -1;
  std::vector<double> class_counts;  // leaves only
};

struct DecisionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  const std::vector<double>& leaf_for(const double* x) const;
};

struct ForestModel {
  ForestParams params;
  std::uint64_t seed = 0;
  int n_classes = 0;
  std::size_t n_features = 0;
  std::vector<DecisionTree> trees;
  std::vector<double> importances;
  double oob_accuracy = 0.0;
  std::size_t split_count = 0;

  int predict(const double* x) const;
};

// y holds class ids 0..K-1. Throws DegenerateLabels when only one class occurs.
ForestModel fit_forest(const RowMatrix& x, std::span<const int> y, const ForestParams& params, std::uint64_t seed);

// Indices with importance strictly above the mean; when that set is empty,
// the ten most important features (ties by index).
std::vector<std::size_t> select_features(const ForestModel& model);

// ---- PCA ----------------------------------------------------------------------

struct EigenResult {
  Vector values;   // descending
  Matrix vectors;  // columns, matching values
  int sweeps = 0;
};

// Cyclic Jacobi rotations until the off-diagonal Frobenius norm falls below
// tol times the matrix norm. Throws NoConvergence after max_sweeps.
EigenResult symmetric_eigen(const Matrix& a, double tol = 1e-12, int max_sweeps = 100);

struct PcaModel {
  std::vector<double> mean;
  Matrix components;  // rows, descending eigenvalue order
  std::vector<double> eigenvalues;
  std::vector<double> explained_variance_ratio;
  std::size_t retained_count = 0;

  // Smallest k whose cumulative ratio reaches threshold.
  std::size_t retained_for(double threshold) const;
  RowMatrix transform(const RowMatrix& x, std::size_t k) const;
  RowMatrix transform(const RowMatrix& x) const { return transform(x, retained_count); }
  RowMatrix inverse_transform(const RowMatrix& z) const;
};

// Sample covariance (divisor n-1); each component's largest-magnitude entry is
// made positive. retained_count is set for `threshold`. Throws TooFewRows.
PcaModel fit_pca(const RowMatrix& x, double threshold = 1.0);

// ---- autoencoder --------------------------------------------------------------

struct AutoencoderParams {
  std::size_t latent = 32;
  int epochs = 50;
  int batch_size = 64;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct DenseLayer {
  Matrix weight;  // out x in
  Vector bias;
};

struct AutoencoderModel {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  std::size_t latent_dim = 0;
  // encoder hidden, encoder latent, decoder hidden, decoder output
  std::array<DenseLayer, 4> layers;
  std::vector<double> loss_log;  // mean squared error per epoch

  RowMatrix encode(const RowMatrix& x) const;
  RowMatrix reconstruct(const RowMatrix& x) const;
};

// Trains once and returns a copy of the model after each epoch listed in
// `snapshots` (ascending, the last being the total epoch count); the result
// after e epochs is identical to a direct e-epoch fit. Throws NonFiniteLoss.
std::vector<AutoencoderModel> fit_autoencoder_snapshots(const RowMatrix& x, const AutoencoderParams& params,
                                                        std::span<const int> snapshots, std::uint64_t seed);

AutoencoderModel fit_autoencoder(const RowMatrix& x, const AutoencoderParams& params, std::uint64_t seed);

double reconstruction_mse(const AutoencoderModel& model, const RowMatrix& x);

}  // namespace facetouch
