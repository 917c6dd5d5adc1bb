#pragma once

#include <array>
#include <cstdint>
#include <list>
#include <memory>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "facetouch/core/error.hpp"
#include "facetouch/core/feature_matrix.hpp"

namespace facetouch {

// gamma = 1 / (d * Var(X)) with the variance taken over all entries.
double scale_gamma(const RowMatrix& x);

// RBF kernel rows over a fixed training matrix, kept in single precision with
// least-recently-used eviction. Shared between SVMs trained on the same rows
// and gamma (different C, one-vs-rest members).
class KernelCache {
 public:
  KernelCache(const RowMatrix& x, double gamma, std::size_t budget_bytes = std::size_t(768) << 20,
              std::size_t min_rows = 256);

  const float* row(std::size_t i);
  double gamma() const { return gamma_; }
  std::size_t size() const { return n_; }
  std::size_t capacity_rows() const { return capacity_; }
  std::size_t computed_rows() const { return computed_; }
  const RowMatrix& data() const { return x_; }

 private:
  const RowMatrix& x_;
  double gamma_;
  std::size_t n_;
  std::size_t capacity_;
  std::size_t computed_ = 0;
  Eigen::VectorXd sq_norms_;
  std::vector<float> storage_;
  std::vector<std::int64_t> slot_of_;  // -1 when not cached
  std::vector<std::size_t> row_of_slot_;
  std::list<std::size_t> lru_;  // slots, most recent first
  std::vector<std::list<std::size_t>::iterator> lru_pos_;
};

struct SvmParams {
  double C = 1.0;
  double gamma = 0.1;
  double tol = 1e-3;
  // Inverse-frequency weights n / (2 n_class) scale each class's box constraint.
  bool balanced_weights = true;
  // 0 selects max(100000, 100 n).
  long max_iterations = 0;
};

struct SvmModel {
  RowMatrix support_vectors;
  std::vector<double> dual_coef;  // alpha_i * y_i
  double bias = 0.0;
  double gamma = 0.0;
  double C = 0.0;
  double weight_negative = 1.0;
  double weight_positive = 1.0;

  // f(x) = sum alpha_i y_i K(x_i, x) + b
  double decision(const double* x) const;
  std::vector<double> decision_values(const RowMatrix& x) const;
  // +1 when f(x) >= 0, else -1. Throws DimensionMismatch.
  std::vector<int> predict(const RowMatrix& x) const;
};

struct SvmReport {
  std::vector<double> alpha;     // per training row
  std::vector<double> decision;  // f(x_i) on the training rows
  long iterations = 0;
  double final_gap = 0.0;  // maximal violating pair gap at exit
};

// SMO with maximal-violating-pair selection. y must contain both -1 and +1.
// Throws SingleClass, NoConvergence (with the final violation) or LengthMismatch.
SvmModel train_svm(const RowMatrix& x, std::span<const int> y, const SvmParams& params, SvmReport* report = nullptr,
                   KernelCache* cache = nullptr);

// One-vs-rest over class ids; prediction takes the largest decision value,
// lowest class id on ties.
struct OvrModel {
  std::vector<int> classes;
  std::vector<SvmModel> members;

  std::vector<int> predict(const RowMatrix& x) const;
};

OvrModel train_ovr(const RowMatrix& x, std::span<const int> y, const SvmParams& params, KernelCache* cache = nullptr);

// Label Powerset over the five region flags, encoded as 5-bit codes
// (bit r set when region r is flagged).
struct PowersetModel {
  std::vector<int> codes;  // class id -> code, ascending
  std::optional<int> constant_code;  // set when training saw a single combination
  OvrModel ovr;

  int class_of(int code) const;  // -1 when unseen
  std::vector<std::array<bool, kRegionCount>> predict(const RowMatrix& x) const;
  std::vector<int> predict_codes(const RowMatrix& x) const;
};

// Throws nothing for a single combination: the model becomes a constant
// predictor and a SingleCombination warning is added.
PowersetModel train_powerset(const RowMatrix& x, std::span<const int> codes, const SvmParams& params,
                             Warnings* warnings = nullptr, KernelCache* cache = nullptr);

}  // namespace facetouch
