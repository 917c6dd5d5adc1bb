#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "facetouch/core/types.hpp"
#include "facetouch/ingest/tables.hpp"

namespace facetouch {

// ---- metrics --------------------------------------------------------------------

struct ConfusionCounts {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  std::size_t total() const { return tp + fp + tn + fn; }
};

struct BinaryMetrics {
  double accuracy = 0.0;
  double precision = 0.0;  // 0 when nothing was predicted positive
  double recall = 0.0;     // 0 when there are no positives
  ConfusionCounts counts;
  bool precision_undefined = false;
  bool recall_undefined = false;
};

// Throws EmptyInput or LengthMismatch.
BinaryMetrics binary_metrics(const std::vector<bool>& predictions, const std::vector<bool>& labels);

using RegionFlags = std::array<bool, kRegionCount>;

struct MultiLabelMetrics {
  double accuracy = 0.0;   // macro averages over the five regions
  double precision = 0.0;
  double recall = 0.0;
  std::array<BinaryMetrics, kRegionCount> per_label;
};

MultiLabelMetrics multilabel_macro_metrics(std::span<const RegionFlags> predictions,
                                           std::span<const RegionFlags> labels);

// ---- baselines -------------------------------------------------------------------

// Majority class of the training labels; ties go to the negative class.
bool zeror_binary(const std::vector<bool>& train_labels);

// Most frequent training combination; ties go to the lowest code.
int zeror_combination(std::span<const int> train_codes);

struct ChanceMetrics {
  double accuracy = 0.5;
  double precision = 0.0;
  double recall = 0.5;
};

ChanceMetrics random_chance_expectation(double prevalence);

// Seeded Bernoulli(0.5) predictions used to pair random chance with McNemar.
std::vector<bool> random_predictions(std::size_t n, std::uint64_t seed);

// ---- significance tests --------------------------------------------------------------

enum class McNemarMethod { ExactBinomial, ChiSquareCC };

struct McNemarResult {
  std::size_t b = 0;  // model wrong, reference right
  std::size_t c = 0;  // model right, reference wrong
  double statistic = 0.0;
  double p_value = 1.0;
  McNemarMethod method = McNemarMethod::ExactBinomial;
};

McNemarResult mcnemar(const std::vector<bool>& model_correct, const std::vector<bool>& reference_correct);
McNemarResult mcnemar_counts(std::size_t b, std::size_t c);

// P(X <= k) for X ~ Binomial(n, 1/2).
double binomial_half_cdf(std::size_t k, std::size_t n);

// Regularized incomplete beta I_x(a, b) by continued fraction.
double incomplete_beta(double a, double b, double x);
// Two-sided Student-t tail P(|T| >= |t|).
double student_t_two_sided(double t, double df);
// Upper tail of chi-square with one degree of freedom.
double chi_square1_upper(double x);

struct CorrelationResult {
  double r = 0.0;
  std::size_t n = 0;
  double t_statistic = 0.0;
  double p_value = 1.0;
};

// Throws TooFewPoints (n < 3), ZeroVariance or LengthMismatch.
CorrelationResult pearson(std::span<const double> x, std::span<const double> y);

// ---- neurodevelopment ------------------------------------------------------------------

enum class MullenCategory { GrossMotor, FineMotor };

// OLS slope of raw score against age over visits at or before the cutoff.
// Throws InsufficientVisits with fewer than two qualifying visits.
double mullen_rate(std::span<const MullenRecord> records, MullenCategory category, double age_cutoff_months = 5.0);

// Fraction of frames predicted on head. Throws EmptyInput.
double touch_frequency(const std::vector<bool>& predictions);

}  // namespace facetouch
