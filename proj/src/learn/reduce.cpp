#include "facetouch/learn/reduce.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "facetouch/core/error.hpp"
#include "facetouch/core/random.hpp"

namespace facetouch {

// ---- standardization ------------------------------------------------------------

Standardizer Standardizer::fit(const RowMatrix& x) {
  Standardizer s;
  const Eigen::Index n = x.rows();
  s.mean.assign(std::size_t(x.cols()), 0.0);
  s.stddev.assign(std::size_t(x.cols()), 1.0);
  if (n == 0) return s;
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    double sum = 0.0;
    for (Eigen::Index r = 0; r < n; ++r) sum += x(r, c);
    const double mean = sum / double(n);
    double ss = 0.0;
    for (Eigen::Index r = 0; r < n; ++r) ss += (x(r, c) - mean) * (x(r, c) - mean);
    const double sd = std::sqrt(ss / double(n));
    s.mean[std::size_t(c)] = mean;
    s.stddev[std::size_t(c)] = sd < 1e-12 ? 1.0 : sd;
  }
  return s;
}

void Standardizer::transform_inplace(RowMatrix& x) const {
  if (std::size_t(x.cols()) != mean.size()) throw Error(ErrorCode::DimensionMismatch, "standardizer width mismatch");
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      x(r, c) = (x(r, c) - mean[std::size_t(c)]) / stddev[std::size_t(c)];
    }
  }
}

RowMatrix Standardizer::transform(const RowMatrix& x) const {
  RowMatrix out = x;
  transform_inplace(out);
  return out;
}

// ---- random forest ----------------------------------------------------------------

namespace {

struct BinnedData {
  std::size_t n = 0;
  std::size_t d = 0;
  std::vector<std::uint8_t> bins;  // column-major: bins[f * n + i]
  std::vector<std::vector<double>> cuts;  // per feature; bin b <=> x <= cuts[b]
};

BinnedData bin_features(const RowMatrix& x, int max_bins) {
  BinnedData b;
  b.n = std::size_t(x.rows());
  b.d = std::size_t(x.cols());
  b.bins.resize(b.n * b.d);
  b.cuts.resize(b.d);
  std::vector<double> col(b.n);
  for (std::size_t f = 0; f < b.d; ++f) {
    for (std::size_t i = 0; i < b.n; ++i) col[i] = x(Eigen::Index(i), Eigen::Index(f));
    std::vector<double> sorted = col;
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> distinct;
    for (double v : sorted) {
      if (distinct.empty() || v != distinct.back()) distinct.push_back(v);
    }
    auto& cuts = b.cuts[f];
    if (distinct.size() <= std::size_t(max_bins)) {
      for (std::size_t k = 0; k + 1 < distinct.size(); ++k) cuts.push_back(0.5 * (distinct[k] + distinct[k + 1]));
    } else {
      for (int q = 1; q < max_bins; ++q) {
        const double v = sorted[std::size_t(q) * b.n / std::size_t(max_bins)];
        const auto next = std::upper_bound(distinct.begin(), distinct.end(), v);
        if (next == distinct.end()) break;
        const double cut = 0.5 * (v + *next);
        if (cuts.empty() || cut > cuts.back()) cuts.push_back(cut);
      }
    }
    for (std::size_t i = 0; i < b.n; ++i) {
      b.bins[f * b.n + i] =
          std::uint8_t(std::lower_bound(cuts.begin(), cuts.end(), col[i]) - cuts.begin());
    }
  }
  return b;
}

double gini_sum(const double* counts, int k, double total) {
  // total * gini = total - sum(c^2)/total
  if (total <= 0.0) return 0.0;
  double sq = 0.0;
  for (int c = 0; c < k; ++c) sq += counts[c] * counts[c];
  return total - sq / total;
}

class TreeBuilder {
 public:
  TreeBuilder(const BinnedData& data, std::span<const int> y, int n_classes, const ForestParams& params, Rng& rng,
              std::vector<double>& importance, std::size_t& splits)
      : data_(data), y_(y), k_(n_classes), params_(params), rng_(rng), importance_(importance), splits_(splits) {
    mtry_ = std::max<std::size_t>(1, std::size_t(std::lround(std::sqrt(double(data.d)))));
    features_.resize(data.d);
    std::iota(features_.begin(), features_.end(), 0);
    hist_.resize(256 * std::size_t(k_));
  }

  DecisionTree build(std::vector<std::size_t>& samples) {
    DecisionTree tree;
    grow(tree, samples, 0, samples.size(), 0);
    return tree;
  }

 private:
  int grow(DecisionTree& tree, std::vector<std::size_t>& s, std::size_t lo, std::size_t hi, int depth) {
    const int id = int(tree.nodes.size());
    tree.nodes.emplace_back();
    std::vector<double> counts(std::size_t(k_), 0.0);
    for (std::size_t i = lo; i < hi; ++i) counts[std::size_t(y_[s[i]])] += 1.0;
    const double total = double(hi - lo);
    const double parent = gini_sum(counts.data(), k_, total);
    const std::size_t min_leaf = std::size_t(std::max(1, params_.min_samples_leaf));

    int best_feature = -1;
    int best_bin = -1;
    double best_gain = 1e-12;
    if (depth < params_.max_depth && parent > 0.0 && hi - lo >= 2 * min_leaf) {
      // Partial Fisher-Yates draw of mtry candidate features.
      for (std::size_t j = 0; j < mtry_; ++j) {
        std::swap(features_[j], features_[j + uniform_index(rng_, features_.size() - j)]);
      }
      for (std::size_t j = 0; j < mtry_; ++j) {
        const std::size_t f = features_[j];
        const std::uint8_t* col = &data_.bins[f * data_.n];
        int bmin = 255, bmax = 0;
        for (std::size_t i = lo; i < hi; ++i) {
          bmin = std::min<int>(bmin, col[s[i]]);
          bmax = std::max<int>(bmax, col[s[i]]);
        }
        if (bmin == bmax) continue;
        std::fill(hist_.begin() + std::ptrdiff_t(bmin) * k_, hist_.begin() + std::ptrdiff_t(bmax + 1) * k_, 0.0);
        for (std::size_t i = lo; i < hi; ++i) hist_[std::size_t(col[s[i]]) * std::size_t(k_) + std::size_t(y_[s[i]])] += 1.0;
        std::vector<double> left(std::size_t(k_), 0.0);
        std::vector<double> right(left.size());
        double nl = 0.0;
        for (int b = bmin; b < bmax; ++b) {
          for (int c = 0; c < k_; ++c) {
            const double h = hist_[std::size_t(b) * std::size_t(k_) + std::size_t(c)];
            left[std::size_t(c)] += h;
            nl += h;
          }
          const double nr = total - nl;
          if (nl < double(min_leaf) || nr < double(min_leaf)) continue;
          for (int c = 0; c < k_; ++c) right[std::size_t(c)] = counts[std::size_t(c)] - left[std::size_t(c)];
          const double gain = parent - gini_sum(left.data(), k_, nl) - gini_sum(right.data(), k_, nr);
          if (gain > best_gain) {
            best_gain = gain;
            best_feature = int(f);
            best_bin = b;
          }
        }
      }
    }

    if (best_feature < 0) {
      tree.nodes[std::size_t(id)].class_counts = std::move(counts);
      return id;
    }
    const std::uint8_t* col = &data_.bins[std::size_t(best_feature) * data_.n];
    const auto mid = std::partition(s.begin() + std::ptrdiff_t(lo), s.begin() + std::ptrdiff_t(hi),
                                    [&](std::size_t i) { return col[i] <= best_bin; });
    const std::size_t split = std::size_t(mid - s.begin());
    importance_[std::size_t(best_feature)] += best_gain;
    ++splits_;
    tree.nodes[std::size_t(id)].feature = best_feature;
    tree.nodes[std::size_t(id)].threshold = data_.cuts[std::size_t(best_feature)][std::size_t(best_bin)];
    const int l = grow(tree, s, lo, split, depth + 1);
    const int r = grow(tree, s, split, hi, depth + 1);
    tree.nodes[std::size_t(id)].left = l;
    tree.nodes[std::size_t(id)].right = r;
    return id;
  }

  const BinnedData& data_;
  std::span<const int> y_;
  int k_;
  const ForestParams& params_;
  Rng& rng_;
  std::vector<double>& importance_;
  std::size_t& splits_;
  std::size_t mtry_;
  std::vector<std::size_t> features_;
  std::vector<double> hist_;
};

std::size_t argmax_lowest(const std::vector<double>& v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

}  // namespace

const std::vector<double>& DecisionTree::leaf_for(const double* x) const {
  std::size_t node = 0;
  while (nodes[node].feature >= 0) {
    node = std::size_t(x[nodes[node].feature] <= nodes[node].threshold ? nodes[node].left : nodes[node].right);
  }
  return nodes[node].class_counts;
}

int ForestModel::predict(const double* x) const {
  std::vector<double> votes(std::size_t(n_classes), 0.0);
  for (const auto& tree : trees) {
    const auto& counts = tree.leaf_for(x);
    double total = 0.0;
    for (double c : counts) total += c;
    for (std::size_t c = 0; c < counts.size(); ++c) votes[c] += counts[c] / total;
  }
  return int(argmax_lowest(votes));
}

ForestModel fit_forest(const RowMatrix& x, std::span<const int> y, const ForestParams& params, std::uint64_t seed) {
  const std::size_t n = std::size_t(x.rows());
  if (y.size() != n) throw Error(ErrorCode::LengthMismatch, "forest labels do not match rows");
  if (n == 0) throw Error(ErrorCode::EmptyInput, "forest needs training rows");
  if (params.n_trees < 1 || params.max_depth < 0 || params.max_bins < 2 || params.max_bins > 256) {
    throw Error(ErrorCode::InvalidConfig, "invalid forest parameters");
  }
  int n_classes = 0;
  for (int v : y) {
    if (v < 0) throw Error(ErrorCode::InvalidArgument, "class ids must be non-negative");
    n_classes = std::max(n_classes, v + 1);
  }
  std::vector<int> seen(std::size_t(n_classes), 0);
  for (int v : y) seen[std::size_t(v)] = 1;
  if (std::accumulate(seen.begin(), seen.end(), 0) < 2) {
    throw Error(ErrorCode::DegenerateLabels, "random forest needs at least two classes");
  }

  ForestModel model;
  model.params = params;
  model.seed = seed;
  model.n_classes = n_classes;
  model.n_features = std::size_t(x.cols());
  model.importances.assign(model.n_features, 0.0);
  const BinnedData data = bin_features(x, params.max_bins);

  std::vector<std::vector<double>> oob_votes(n, std::vector<double>(std::size_t(n_classes), 0.0));
  std::vector<char> in_bag(n);
  std::vector<std::size_t> samples(n);
  for (int t = 0; t < params.n_trees; ++t) {
    Rng rng = make_rng(seed, std::uint64_t(t));
    std::fill(in_bag.begin(), in_bag.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      samples[i] = uniform_index(rng, n);
      in_bag[samples[i]] = 1;
    }
    TreeBuilder builder(data, y, n_classes, params, rng, model.importances, model.split_count);
    std::vector<std::size_t> work = samples;
    model.trees.push_back(builder.build(work));
    const DecisionTree& tree = model.trees.back();
    for (std::size_t i = 0; i < n; ++i) {
      if (in_bag[i]) continue;
      const auto& counts = tree.leaf_for(x.row(Eigen::Index(i)).data());
      double total = 0.0;
      for (double c : counts) total += c;
      for (std::size_t c = 0; c < counts.size(); ++c) oob_votes[i][c] += counts[c] / total;
    }
  }

  const double total_importance = std::accumulate(model.importances.begin(), model.importances.end(), 0.0);
  if (total_importance > 0.0) {
    for (double& v : model.importances) v /= total_importance;
  }
  std::size_t oob_n = 0, oob_hit = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (std::all_of(oob_votes[i].begin(), oob_votes[i].end(), [](double v) { return v == 0.0; })) continue;
    ++oob_n;
    if (int(argmax_lowest(oob_votes[i])) == y[i]) ++oob_hit;
  }
  model.oob_accuracy = oob_n ? double(oob_hit) / double(oob_n) : 0.0;
  return model;
}

std::vector<std::size_t> select_features(const ForestModel& model) {
  const auto& imp = model.importances;
  std::vector<std::size_t> out;
  if (imp.empty()) return out;
  const double mean = std::accumulate(imp.begin(), imp.end(), 0.0) / double(imp.size());
  for (std::size_t i = 0; i < imp.size(); ++i) {
    if (imp[i] > mean) out.push_back(i);
  }
  if (!out.empty()) return out;
  std::vector<std::size_t> order(imp.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return imp[a] > imp[b]; });
  order.resize(std::min<std::size_t>(10, order.size()));
  std::sort(order.begin(), order.end());
  return order;
}

// ---- PCA ----------------------------------------------------------------------

EigenResult symmetric_eigen(const Matrix& input, double tol, int max_sweeps) {
  if (input.rows() != input.cols()) throw Error(ErrorCode::DimensionMismatch, "eigen solver needs a square matrix");
  const Eigen::Index d = input.rows();
  Matrix a = 0.5 * (input + input.transpose());
  Matrix v = Matrix::Identity(d, d);
  const double norm = a.norm();
  auto off_norm = [&] {
    double s = 0.0;
    for (Eigen::Index j = 0; j < d; ++j) {
      for (Eigen::Index i = 0; i < d; ++i) {
        if (i != j) s += a(i, j) * a(i, j);
      }
    }
    return std::sqrt(s);
  };

  EigenResult result;
  int sweep = 0;
  while (off_norm() > tol * norm) {
    if (sweep == max_sweeps) {
      throw Error(ErrorCode::NoConvergence, "Jacobi eigen solver did not converge in " + std::to_string(max_sweeps) + " sweeps");
    }
    ++sweep;
    for (Eigen::Index p = 0; p < d - 1; ++p) {
      for (Eigen::Index q = p + 1; q < d; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        // A <- J^T A J with J the (p, q) rotation.
        for (Eigen::Index k = 0; k < d; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < d; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        for (Eigen::Index k = 0; k < d; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  result.sweeps = sweep;

  std::vector<Eigen::Index> order(static_cast<std::size_t>(d));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index i, Eigen::Index j) { return a(i, i) > a(j, j); });
  result.values.resize(d);
  result.vectors.resize(d, d);
  for (Eigen::Index k = 0; k < d; ++k) {
    result.values(k) = a(order[std::size_t(k)], order[std::size_t(k)]);
    result.vectors.col(k) = v.col(order[std::size_t(k)]);
  }
  return result;
}

std::size_t PcaModel::retained_for(double threshold) const {
  if (!(threshold > 0.0 && threshold <= 1.0)) {
    throw Error(ErrorCode::InvalidConfig, "variance threshold must lie in (0, 1]");
  }
  double cumulative = 0.0;
  for (std::size_t k = 0; k < explained_variance_ratio.size(); ++k) {
    cumulative += explained_variance_ratio[k];
    if (cumulative >= threshold - 1e-12) return k + 1;
  }
  return explained_variance_ratio.size();
}

RowMatrix PcaModel::transform(const RowMatrix& x, std::size_t k) const {
  if (std::size_t(x.cols()) != mean.size()) throw Error(ErrorCode::DimensionMismatch, "PCA input width mismatch");
  k = std::min<std::size_t>(k, std::size_t(components.rows()));
  const Eigen::Map<const Eigen::RowVectorXd> mu(mean.data(), Eigen::Index(mean.size()));
  RowMatrix centered = x.rowwise() - mu;
  return centered * components.topRows(Eigen::Index(k)).transpose();
}

RowMatrix PcaModel::inverse_transform(const RowMatrix& z) const {
  const Eigen::Map<const Eigen::RowVectorXd> mu(mean.data(), Eigen::Index(mean.size()));
  RowMatrix out = z * components.topRows(z.cols());
  out.rowwise() += mu;
  return out;
}

PcaModel fit_pca(const RowMatrix& x, double threshold) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  if (n < 2) throw Error(ErrorCode::TooFewRows, "PCA needs at least two rows");
  PcaModel model;
  const Eigen::RowVectorXd mu = x.colwise().mean();
  model.mean.assign(mu.data(), mu.data() + d);
  const RowMatrix centered = x.rowwise() - mu;
  const Matrix cov = (centered.transpose() * centered) / double(n - 1);
  const EigenResult eig = symmetric_eigen(cov);

  model.components.resize(d, d);
  double total = 0.0;
  for (Eigen::Index k = 0; k < d; ++k) total += std::max(0.0, eig.values(k));
  for (Eigen::Index k = 0; k < d; ++k) {
    Vector vec = eig.vectors.col(k);
    Eigen::Index arg;
    vec.cwiseAbs().maxCoeff(&arg);
    if (vec(arg) < 0) vec = -vec;
    model.components.row(k) = vec.transpose();
    const double lambda = std::max(0.0, eig.values(k));
    model.eigenvalues.push_back(eig.values(k));
    model.explained_variance_ratio.push_back(total > 0.0 ? lambda / total : 0.0);
  }
  model.retained_count = model.retained_for(threshold);
  return model;
}

// ---- autoencoder --------------------------------------------------------------

namespace {

struct AdamState {
  std::array<Matrix, 4> mw, vw;
  std::array<Vector, 4> mb, vb;
};

void init_layer(DenseLayer& layer, std::size_t in, std::size_t out, Rng& rng) {
  const double limit = std::sqrt(6.0 / double(in + out));
  layer.weight.resize(Eigen::Index(out), Eigen::Index(in));
  for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
    for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) layer.weight(r, c) = uniform(rng, -limit, limit);
  }
  layer.bias = Vector::Zero(Eigen::Index(out));
}

Matrix relu(const Matrix& m) { return m.cwiseMax(0.0); }

// Column-per-sample forward pass; returns activations of all four layers.
std::array<Matrix, 4> forward(const AutoencoderModel& m, const Matrix& x) {
  std::array<Matrix, 4> act;
  act[0] = relu((m.layers[0].weight * x).colwise() + m.layers[0].bias);
  act[1] = (m.layers[1].weight * act[0]).colwise() + m.layers[1].bias;
  act[2] = relu((m.layers[2].weight * act[1]).colwise() + m.layers[2].bias);
  act[3] = (m.layers[3].weight * act[2]).colwise() + m.layers[3].bias;
  return act;
}

}  // namespace

RowMatrix AutoencoderModel::encode(const RowMatrix& x) const {
  if (std::size_t(x.cols()) != input_dim) throw Error(ErrorCode::DimensionMismatch, "autoencoder input width mismatch");
  const Matrix xt = x.transpose();
  const Matrix h = relu((layers[0].weight * xt).colwise() + layers[0].bias);
  const Matrix z = (layers[1].weight * h).colwise() + layers[1].bias;
  return z.transpose();
}

RowMatrix AutoencoderModel::reconstruct(const RowMatrix& x) const {
  if (std::size_t(x.cols()) != input_dim) throw Error(ErrorCode::DimensionMismatch, "autoencoder input width mismatch");
  return forward(*this, x.transpose())[3].transpose();
}

double reconstruction_mse(const AutoencoderModel& model, const RowMatrix& x) {
  if (x.size() == 0) return 0.0;
  return (model.reconstruct(x) - x).squaredNorm() / double(x.size());
}

std::vector<AutoencoderModel> fit_autoencoder_snapshots(const RowMatrix& x, const AutoencoderParams& params,
                                                        std::span<const int> snapshots, std::uint64_t seed) {
  const std::size_t n = std::size_t(x.rows());
  const std::size_t d = std::size_t(x.cols());
  if (n == 0) throw Error(ErrorCode::EmptyInput, "autoencoder needs training rows");
  if (params.latent == 0 || params.latent >= d) {
    throw Error(ErrorCode::InvalidConfig, "autoencoder latent size must be in [1, d)");
  }
  if (snapshots.empty() || params.batch_size < 1) throw Error(ErrorCode::InvalidConfig, "invalid autoencoder schedule");
  for (std::size_t i = 0; i < snapshots.size(); ++i) {
    if (snapshots[i] < 1 || (i > 0 && snapshots[i] <= snapshots[i - 1])) {
      throw Error(ErrorCode::InvalidConfig, "autoencoder snapshot epochs must be positive and ascending");
    }
  }

  AutoencoderModel model;
  model.input_dim = d;
  model.latent_dim = params.latent;
  model.hidden_dim = std::size_t(std::lround(double(d + params.latent) / 2.0));
  const std::size_t h = model.hidden_dim;
  const std::size_t z = model.latent_dim;
  Rng rng = make_rng(seed);
  init_layer(model.layers[0], d, h, rng);
  init_layer(model.layers[1], h, z, rng);
  init_layer(model.layers[2], z, h, rng);
  init_layer(model.layers[3], h, d, rng);

  AdamState adam;
  for (std::size_t l = 0; l < 4; ++l) {
    adam.mw[l] = Matrix::Zero(model.layers[l].weight.rows(), model.layers[l].weight.cols());
    adam.vw[l] = adam.mw[l];
    adam.mb[l] = Vector::Zero(model.layers[l].bias.size());
    adam.vb[l] = adam.mb[l];
  }

  const Matrix xt = x.transpose();  // d x n
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<AutoencoderModel> out;
  long step = 0;
  const std::size_t batch = std::size_t(params.batch_size);
  Matrix xb;
  std::array<Matrix, 4> grad_w;
  std::array<Vector, 4> grad_b;

  for (int epoch = 1; epoch <= snapshots.back(); ++epoch) {
    shuffle(order, rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t bs = std::min(batch, n - start);
      xb.resize(Eigen::Index(d), Eigen::Index(bs));
      for (std::size_t j = 0; j < bs; ++j) xb.col(Eigen::Index(j)) = xt.col(Eigen::Index(order[start + j]));
      const auto act = forward(model, xb);
      const Matrix diff = act[3] - xb;
      const double loss = diff.squaredNorm() / double(bs * d);
      if (!std::isfinite(loss)) {
        throw Error(ErrorCode::NonFiniteLoss,
                    "autoencoder loss diverged at epoch " + std::to_string(epoch) + " (batch starting at " +
                        std::to_string(start) + ")");
      }
      epoch_loss += loss * double(bs);

      Matrix delta = diff * (2.0 / double(bs * d));  // dL/d(out)
      const Matrix* inputs[4] = {&xb, &act[0], &act[1], &act[2]};
      for (int l = 3; l >= 0; --l) {
        grad_w[std::size_t(l)] = delta * inputs[l]->transpose();
        grad_b[std::size_t(l)] = delta.rowwise().sum();
        if (l == 0) break;
        Matrix back = model.layers[std::size_t(l)].weight.transpose() * delta;
        if (l == 1 || l == 3) back = back.cwiseProduct((inputs[l]->array() > 0.0).cast<double>().matrix());
        delta = std::move(back);
      }

      ++step;
      const double c1 = 1.0 - std::pow(params.beta1, double(step));
      const double c2 = 1.0 - std::pow(params.beta2, double(step));
      for (std::size_t l = 0; l < 4; ++l) {
        adam.mw[l] = params.beta1 * adam.mw[l] + (1.0 - params.beta1) * grad_w[l];
        adam.vw[l] = params.beta2 * adam.vw[l] + (1.0 - params.beta2) * grad_w[l].cwiseAbs2();
        model.layers[l].weight.array() -= params.learning_rate * (adam.mw[l].array() / c1) /
                                          ((adam.vw[l].array() / c2).sqrt() + params.epsilon);
        adam.mb[l] = params.beta1 * adam.mb[l] + (1.0 - params.beta1) * grad_b[l];
        adam.vb[l] = params.beta2 * adam.vb[l] + (1.0 - params.beta2) * grad_b[l].cwiseAbs2();
        model.layers[l].bias.array() -= params.learning_rate * (adam.mb[l].array() / c1) /
                                        ((adam.vb[l].array() / c2).sqrt() + params.epsilon);
      }
    }
    model.loss_log.push_back(epoch_loss / double(n));
    if (std::find(snapshots.begin(), snapshots.end(), epoch) != snapshots.end()) out.push_back(model);
  }
  return out;
}

AutoencoderModel fit_autoencoder(const RowMatrix& x, const AutoencoderParams& params, std::uint64_t seed) {
  const int epochs[] = {params.epochs};
  return fit_autoencoder_snapshots(x, params, epochs, seed).front();
}

}  // namespace facetouch
