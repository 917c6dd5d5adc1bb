#include "facetouch/learn/svm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

namespace facetouch {

double scale_gamma(const RowMatrix& x) {
  const double count = double(x.size());
  if (count == 0) throw Error(ErrorCode::EmptyInput, "gamma=scale needs data");
  const double mean = x.sum() / count;
  const double var = (x.array() - mean).square().sum() / count;
  if (!(var > 0.0)) return 1.0;
  return 1.0 / (double(x.cols()) * var);
}

// ---- kernel cache ----------------------------------------------------------------

KernelCache::KernelCache(const RowMatrix& x, double gamma, std::size_t budget_bytes, std::size_t min_rows)
    : x_(x), gamma_(gamma), n_(std::size_t(x.rows())) {
  const std::size_t by_budget = n_ ? budget_bytes / (n_ * sizeof(float)) : 0;
  capacity_ = std::min(n_, std::max(min_rows, by_budget));
  sq_norms_ = x.rowwise().squaredNorm();
  storage_.resize(capacity_ * n_);
  slot_of_.assign(n_, -1);
  row_of_slot_.assign(capacity_, 0);
  lru_pos_.resize(capacity_);
}

const float* KernelCache::row(std::size_t i) {
  if (slot_of_[i] >= 0) {
    const std::size_t slot = std::size_t(slot_of_[i]);
    lru_.splice(lru_.begin(), lru_, lru_pos_[slot]);
    return &storage_[slot * n_];
  }
  std::size_t slot;
  if (lru_.size() < capacity_) {
    slot = lru_.size();
  } else {
    slot = lru_.back();
    lru_.pop_back();
    slot_of_[row_of_slot_[slot]] = -1;
  }
  lru_.push_front(slot);
  lru_pos_[slot] = lru_.begin();
  slot_of_[i] = std::int64_t(slot);
  row_of_slot_[slot] = i;

  const Eigen::VectorXd dots = x_ * x_.row(Eigen::Index(i)).transpose();
  float* out = &storage_[slot * n_];
  const double si = sq_norms_(Eigen::Index(i));
  for (std::size_t t = 0; t < n_; ++t) {
    const double d2 = std::max(0.0, si + sq_norms_(Eigen::Index(t)) - 2.0 * dots(Eigen::Index(t)));
    out[t] = float(std::exp(-gamma_ * d2));
  }
  out[i] = 1.0f;
  ++computed_;
  return out;
}

// ---- binary SVM ------------------------------------------------------------------

double SvmModel::decision(const double* x) const {
  RowMatrix one(1, support_vectors.cols());
  for (Eigen::Index c = 0; c < one.cols(); ++c) one(0, c) = x[c];
  return decision_values(one).front();
}

std::vector<double> SvmModel::decision_values(const RowMatrix& x) const {
  if (x.cols() != support_vectors.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "SVM expects " + std::to_string(support_vectors.cols()) +
                                                  " features, got " + std::to_string(x.cols()));
  }
  const Eigen::Index m = x.rows();
  const Eigen::Index s = support_vectors.rows();
  std::vector<double> out(std::size_t(m), bias);
  const Eigen::VectorXd sv_norms = support_vectors.rowwise().squaredNorm();
  constexpr Eigen::Index kBlock = 256;
  for (Eigen::Index start = 0; start < m; start += kBlock) {
    const Eigen::Index rows = std::min(kBlock, m - start);
    const auto block = x.middleRows(start, rows);
    const Eigen::VectorXd norms = block.rowwise().squaredNorm();
    const RowMatrix cross = block * support_vectors.transpose();
    for (Eigen::Index r = 0; r < rows; ++r) {
      double f = 0.0;
      for (Eigen::Index k = 0; k < s; ++k) {
        const double d2 = std::max(0.0, norms(r) + sv_norms(k) - 2.0 * cross(r, k));
        f += dual_coef[std::size_t(k)] * std::exp(-gamma * d2);
      }
      out[std::size_t(start + r)] += f;
    }
  }
  return out;
}

std::vector<int> SvmModel::predict(const RowMatrix& x) const {
  const auto f = decision_values(x);
  std::vector<int> out(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) out[i] = f[i] >= 0.0 ? 1 : -1;
  return out;
}

SvmModel train_svm(const RowMatrix& x, std::span<const int> y, const SvmParams& params, SvmReport* report,
                   KernelCache* cache) {
  const std::size_t n = std::size_t(x.rows());
  if (y.size() != n) throw Error(ErrorCode::LengthMismatch, "SVM labels do not match rows");
  if (!(params.C > 0.0) || !(params.gamma > 0.0) || !(params.tol > 0.0)) {
    throw Error(ErrorCode::InvalidConfig, "SVM needs positive C, gamma and tol");
  }
  std::size_t n_pos = 0, n_neg = 0;
  for (int v : y) {
    if (v == 1) {
      ++n_pos;
    } else if (v == -1) {
      ++n_neg;
    } else {
      throw Error(ErrorCode::InvalidArgument, "SVM labels must be -1 or +1");
    }
  }
  if (n_pos == 0 || n_neg == 0) throw Error(ErrorCode::SingleClass, "SVM training data holds a single class");
  if (!x.allFinite()) throw Error(ErrorCode::InvalidArgument, "SVM training data must be finite");

  std::unique_ptr<KernelCache> own;
  if (!cache || &cache->data() != &x || cache->gamma() != params.gamma) {
    own = std::make_unique<KernelCache>(x, params.gamma);
    cache = own.get();
  }

  SvmModel model;
  model.gamma = params.gamma;
  model.C = params.C;
  if (params.balanced_weights) {
    model.weight_negative = double(n) / (2.0 * double(n_neg));
    model.weight_positive = double(n) / (2.0 * double(n_pos));
  }
  const double c_pos = params.C * model.weight_positive;
  const double c_neg = params.C * model.weight_negative;
  auto bound = [&](std::size_t t) { return y[t] > 0 ? c_pos : c_neg; };

  std::vector<double> alpha(n, 0.0);
  std::vector<double> grad(n, -1.0);
  const long max_iter = params.max_iterations > 0 ? params.max_iterations : std::max<long>(100000, 100 * long(n));
  constexpr double kTau = 1e-12;
  long iter = 0;
  double gap = 0.0;

  while (true) {
    double gmax = -std::numeric_limits<double>::infinity();
    double gmax2 = -std::numeric_limits<double>::infinity();
    std::size_t i = n, j = n;
    for (std::size_t t = 0; t < n; ++t) {
      const double yg = -double(y[t]) * grad[t];
      const bool up = y[t] > 0 ? alpha[t] < bound(t) : alpha[t] > 0.0;
      const bool low = y[t] > 0 ? alpha[t] > 0.0 : alpha[t] < bound(t);
      if (up && yg >= gmax) {
        gmax = yg;
        i = t;
      }
      if (low && -yg >= gmax2) {
        gmax2 = -yg;
        j = t;
      }
    }
    gap = gmax + gmax2;
    if (i == n || j == n || gap < params.tol) break;
    if (iter >= max_iter) {
      throw Error(ErrorCode::NoConvergence, "SMO stopped after " + std::to_string(iter) +
                                                " iterations with KKT violation " + std::to_string(gap));
    }
    ++iter;

    const float* ki = cache->row(i);
    const float* kj = cache->row(j);
    const double yi = y[i], yj = y[j];
    const double ci = bound(i), cj = bound(j);
    const double qij = yi * yj * double(ki[j]);
    const double old_ai = alpha[i], old_aj = alpha[j];
    double& ai = alpha[i];
    double& aj = alpha[j];

    if (yi != yj) {
      double quad = 2.0 + 2.0 * qij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (-grad[i] - grad[j]) / quad;
      const double diff = ai - aj;
      ai += delta;
      aj += delta;
      if (diff > 0) {
        if (aj < 0) {
          aj = 0;
          ai = diff;
        }
      } else if (ai < 0) {
        ai = 0;
        aj = -diff;
      }
      if (diff > ci - cj) {
        if (ai > ci) {
          ai = ci;
          aj = ci - diff;
        }
      } else if (aj > cj) {
        aj = cj;
        ai = cj + diff;
      }
    } else {
      double quad = 2.0 - 2.0 * qij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (grad[i] - grad[j]) / quad;
      const double sum = ai + aj;
      ai -= delta;
      aj += delta;
      if (sum > ci) {
        if (ai > ci) {
          ai = ci;
          aj = sum - ci;
        }
      } else if (aj < 0) {
        aj = 0;
        ai = sum;
      }
      if (sum > cj) {
        if (aj > cj) {
          aj = cj;
          ai = sum - cj;
        }
      } else if (ai < 0) {
        ai = 0;
        aj = sum;
      }
    }

    const double dai = (ai - old_ai) * yi;
    const double daj = (aj - old_aj) * yj;
    for (std::size_t t = 0; t < n; ++t) {
      grad[t] += double(y[t]) * (double(ki[t]) * dai + double(kj[t]) * daj);
    }
  }

  // Bias from free vectors, or the midpoint of the feasible interval.
  double ub = std::numeric_limits<double>::infinity();
  double lb = -std::numeric_limits<double>::infinity();
  double sum_free = 0.0;
  std::size_t n_free = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const double yg = double(y[t]) * grad[t];
    if (alpha[t] >= bound(t)) {
      if (y[t] < 0) {
        ub = std::min(ub, yg);
      } else {
        lb = std::max(lb, yg);
      }
    } else if (alpha[t] <= 0.0) {
      if (y[t] > 0) {
        ub = std::min(ub, yg);
      } else {
        lb = std::max(lb, yg);
      }
    } else {
      ++n_free;
      sum_free += yg;
    }
  }
  const double rho = n_free > 0 ? sum_free / double(n_free) : 0.5 * (ub + lb);
  model.bias = -rho;

  std::vector<Eigen::Index> sv;
  for (std::size_t t = 0; t < n; ++t) {
    if (alpha[t] > 0.0) sv.push_back(Eigen::Index(t));
  }
  model.support_vectors.resize(Eigen::Index(sv.size()), x.cols());
  for (std::size_t k = 0; k < sv.size(); ++k) {
    model.support_vectors.row(Eigen::Index(k)) = x.row(sv[k]);
    model.dual_coef.push_back(alpha[std::size_t(sv[k])] * double(y[std::size_t(sv[k])]));
  }

  if (report) {
    report->alpha = alpha;
    report->decision = model.decision_values(x);
    report->iterations = iter;
    report->final_gap = gap;
  }
  return model;
}

// ---- one-vs-rest ----------------------------------------------------------------

std::vector<int> OvrModel::predict(const RowMatrix& x) const {
  std::vector<int> out(std::size_t(x.rows()), classes.empty() ? 0 : classes.front());
  std::vector<double> best(std::size_t(x.rows()), -std::numeric_limits<double>::infinity());
  for (std::size_t k = 0; k < members.size(); ++k) {
    const auto f = members[k].decision_values(x);
    for (std::size_t i = 0; i < f.size(); ++i) {
      if (f[i] > best[i]) {
        best[i] = f[i];
        out[i] = classes[k];
      }
    }
  }
  return out;
}

OvrModel train_ovr(const RowMatrix& x, std::span<const int> y, const SvmParams& params, KernelCache* cache) {
  OvrModel model;
  const std::set<int> distinct(y.begin(), y.end());
  if (distinct.size() < 2) throw Error(ErrorCode::SingleClass, "one-vs-rest needs at least two classes");
  model.classes.assign(distinct.begin(), distinct.end());
  std::unique_ptr<KernelCache> own;
  if (!cache || &cache->data() != &x || cache->gamma() != params.gamma) {
    own = std::make_unique<KernelCache>(x, params.gamma);
    cache = own.get();
  }
  std::vector<int> target(y.size());
  for (int c : model.classes) {
    for (std::size_t i = 0; i < y.size(); ++i) target[i] = y[i] == c ? 1 : -1;
    model.members.push_back(train_svm(x, target, params, nullptr, cache));
  }
  return model;
}

// ---- Label Powerset ---------------------------------------------------------------

int PowersetModel::class_of(int code) const {
  const auto it = std::lower_bound(codes.begin(), codes.end(), code);
  return it != codes.end() && *it == code ? int(it - codes.begin()) : -1;
}

std::vector<int> PowersetModel::predict_codes(const RowMatrix& x) const {
  if (constant_code) return std::vector<int>(std::size_t(x.rows()), *constant_code);
  std::vector<int> ids = ovr.predict(x);
  for (int& v : ids) v = codes[std::size_t(v)];
  return ids;
}

std::vector<std::array<bool, kRegionCount>> PowersetModel::predict(const RowMatrix& x) const {
  const auto c = predict_codes(x);
  std::vector<std::array<bool, kRegionCount>> out;
  out.reserve(c.size());
  for (int code : c) out.push_back(regions_from_code(code));
  return out;
}

PowersetModel train_powerset(const RowMatrix& x, std::span<const int> codes, const SvmParams& params,
                             Warnings* warnings, KernelCache* cache) {
  if (codes.size() != std::size_t(x.rows())) throw Error(ErrorCode::LengthMismatch, "powerset labels do not match rows");
  if (codes.empty()) throw Error(ErrorCode::EmptyInput, "powerset needs training rows");
  PowersetModel model;
  const std::set<int> distinct(codes.begin(), codes.end());
  model.codes.assign(distinct.begin(), distinct.end());
  if (model.codes.size() == 1) {
    model.constant_code = model.codes.front();
    if (warnings) {
      warnings->add(std::string(error_code_name(ErrorCode::SingleCombination)) +
                    ": every training row shares one label combination; predicting it constantly");
    }
    return model;
  }
  std::vector<int> ids(codes.size());
  for (std::size_t i = 0; i < codes.size(); ++i) ids[i] = model.class_of(codes[i]);
  model.ovr = train_ovr(x, ids, params, cache);
  return model;
}

}  // namespace facetouch
