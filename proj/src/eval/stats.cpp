#include "facetouch/eval/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "facetouch/core/error.hpp"
#include "facetouch/core/random.hpp"

namespace facetouch {

BinaryMetrics binary_metrics(const std::vector<bool>& predictions, const std::vector<bool>& labels) {
  if (predictions.size() != labels.size()) throw Error(ErrorCode::LengthMismatch, "predictions and labels differ in length");
  if (labels.empty()) throw Error(ErrorCode::EmptyInput, "no predictions to score");
  BinaryMetrics m;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (predictions[i]) {
      labels[i] ? ++m.counts.tp : ++m.counts.fp;
    } else {
      labels[i] ? ++m.counts.fn : ++m.counts.tn;
    }
  }
  const auto& c = m.counts;
  m.accuracy = double(c.tp + c.tn) / double(labels.size());
  m.precision_undefined = c.tp + c.fp == 0;
  m.recall_undefined = c.tp + c.fn == 0;
  m.precision = m.precision_undefined ? 0.0 : double(c.tp) / double(c.tp + c.fp);
  m.recall = m.recall_undefined ? 0.0 : double(c.tp) / double(c.tp + c.fn);
  return m;
}

MultiLabelMetrics multilabel_macro_metrics(std::span<const RegionFlags> predictions,
                                           std::span<const RegionFlags> labels) {
  if (predictions.size() != labels.size()) throw Error(ErrorCode::LengthMismatch, "predictions and labels differ in length");
  if (labels.empty()) throw Error(ErrorCode::EmptyInput, "no predictions to score");
  MultiLabelMetrics m;
  std::vector<bool> pr(labels.size()), lr(labels.size());
  for (std::size_t r = 0; r < kRegionCount; ++r) {
    for (std::size_t i = 0; i < labels.size(); ++i) {
      pr[i] = predictions[i][r];
      lr[i] = labels[i][r];
    }
    m.per_label[r] = binary_metrics(pr, lr);
    m.accuracy += m.per_label[r].accuracy / double(kRegionCount);
    m.precision += m.per_label[r].precision / double(kRegionCount);
    m.recall += m.per_label[r].recall / double(kRegionCount);
  }
  return m;
}

bool zeror_binary(const std::vector<bool>& train_labels) {
  if (train_labels.empty()) throw Error(ErrorCode::EmptyInput, "ZeroR needs training labels");
  const auto pos = std::size_t(std::count(train_labels.begin(), train_labels.end(), true));
  return pos > train_labels.size() - pos;
}

int zeror_combination(std::span<const int> train_codes) {
  if (train_codes.empty()) throw Error(ErrorCode::EmptyInput, "ZeroR needs training labels");
  std::map<int, std::size_t> freq;
  for (int c : train_codes) ++freq[c];
  int best = freq.begin()->first;
  std::size_t best_count = 0;
  for (const auto& [code, count] : freq) {
    if (count > best_count) {
      best = code;
      best_count = count;
    }
  }
  return best;
}

ChanceMetrics random_chance_expectation(double prevalence) {
  if (!(prevalence >= 0.0 && prevalence <= 1.0)) throw Error(ErrorCode::InvalidArgument, "prevalence must lie in [0, 1]");
  return {0.5, prevalence, 0.5};
}

std::vector<bool> random_predictions(std::size_t n, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  std::vector<bool> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = (rng() >> 63) != 0;
  return out;
}

double binomial_half_cdf(std::size_t k, std::size_t n) {
  if (k >= n) return 1.0;
  if (n < 60) {
    // Binomial coefficients stay exact in 64 bits here.
    std::uint64_t choose = 1, acc = 0;
    for (std::size_t i = 0; i <= k; ++i) {
      if (i > 0) choose = choose * (n - i + 1) / i;
      acc += choose;
    }
    return std::ldexp(double(acc), -int(n));
  }
  const double log_half_n = -double(n) * std::log(2.0);
  double sum = 0.0;
  for (std::size_t i = 0; i <= k; ++i) {
    const double log_choose = std::lgamma(double(n) + 1) - std::lgamma(double(i) + 1) - std::lgamma(double(n - i) + 1);
    sum += std::exp(log_choose + log_half_n);
  }
  return std::min(1.0, sum);
}

McNemarResult mcnemar_counts(std::size_t b, std::size_t c) {
  McNemarResult r;
  r.b = b;
  r.c = c;
  const std::size_t n = b + c;
  if (n == 0) {
    r.p_value = 1.0;
    return r;
  }
  if (n < 25) {
    r.method = McNemarMethod::ExactBinomial;
    const std::size_t k = std::min(b, c);
    r.statistic = double(k);
    r.p_value = std::min(1.0, 2.0 * binomial_half_cdf(k, n));
  } else {
    r.method = McNemarMethod::ChiSquareCC;
    const double diff = std::abs(double(b) - double(c)) - 1.0;
    r.statistic = diff * diff / double(n);
    r.p_value = chi_square1_upper(r.statistic);
  }
  return r;
}

McNemarResult mcnemar(const std::vector<bool>& model_correct, const std::vector<bool>& reference_correct) {
  if (model_correct.size() != reference_correct.size()) {
    throw Error(ErrorCode::LengthMismatch, "McNemar inputs differ in length");
  }
  std::size_t b = 0, c = 0;
  for (std::size_t i = 0; i < model_correct.size(); ++i) {
    if (!model_correct[i] && reference_correct[i]) ++b;
    if (model_correct[i] && !reference_correct[i]) ++c;
  }
  return mcnemar_counts(b, c);
}

namespace {

// Continued fraction for the incomplete beta (modified Lentz).
double beta_cf(double a, double b, double x) {
  constexpr double kTiny = 1e-300;
  constexpr double kEps = 1e-15;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 10000; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) return h;
  }
  throw Error(ErrorCode::NoConvergence, "incomplete beta continued fraction did not converge");
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0 && b > 0.0)) throw Error(ErrorCode::InvalidArgument, "incomplete beta needs positive parameters");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double log_front =
      std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  if (x < (a + 1.0) / (a + b + 2.0)) return std::exp(log_front) * beta_cf(a, b, x) / a;
  return 1.0 - std::exp(log_front) * beta_cf(b, a, 1.0 - x) / b;
}

double student_t_two_sided(double t, double df) {
  if (!(df > 0.0)) throw Error(ErrorCode::InvalidArgument, "degrees of freedom must be positive");
  if (std::isinf(t)) return 0.0;
  return incomplete_beta(0.5 * df, 0.5, df / (df + t * t));
}

double chi_square1_upper(double x) {
  if (x <= 0.0) return 1.0;
  return std::erfc(std::sqrt(0.5 * x));
}

CorrelationResult pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(ErrorCode::LengthMismatch, "correlation inputs differ in length");
  if (x.size() < 3) throw Error(ErrorCode::TooFewPoints, "correlation needs at least three points");
  const double n = double(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw Error(ErrorCode::ZeroVariance, "correlation input has zero variance");
  CorrelationResult r;
  r.n = x.size();
  r.r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  const double df = n - 2.0;
  if (std::abs(r.r) >= 1.0) {
    r.t_statistic = std::copysign(std::numeric_limits<double>::infinity(), r.r);
    r.p_value = 0.0;
  } else {
    r.t_statistic = r.r * std::sqrt(df / (1.0 - r.r * r.r));
    r.p_value = student_t_two_sided(r.t_statistic, df);
  }
  return r;
}

double mullen_rate(std::span<const MullenRecord> records, MullenCategory category, double age_cutoff_months) {
  std::vector<std::pair<double, double>> pts;
  for (const auto& rec : records) {
    if (rec.visit_age_months <= age_cutoff_months) {
      pts.emplace_back(rec.visit_age_months, category == MullenCategory::FineMotor ? rec.fm_raw : rec.gm_raw);
    }
  }
  const std::string who = records.empty() ? std::string("<none>") : records.front().infant_id;
  if (pts.size() < 2) {
    throw Error(ErrorCode::InsufficientVisits, "infant " + who + " has fewer than two visits within the age cutoff");
  }
  double ma = 0.0, ms = 0.0;
  for (const auto& [a, s] : pts) {
    ma += a;
    ms += s;
  }
  ma /= double(pts.size());
  ms /= double(pts.size());
  double saa = 0.0, sas = 0.0;
  for (const auto& [a, s] : pts) {
    saa += (a - ma) * (a - ma);
    sas += (a - ma) * (s - ms);
  }
  if (saa == 0.0) {
    throw Error(ErrorCode::InsufficientVisits, "infant " + who + " has no two visits at distinct ages");
  }
  return sas / saa;
}

double touch_frequency(const std::vector<bool>& predictions) {
  if (predictions.empty()) throw Error(ErrorCode::EmptyInput, "touch frequency needs predictions");
  return double(std::count(predictions.begin(), predictions.end(), true)) / double(predictions.size());
}

}  // namespace facetouch
