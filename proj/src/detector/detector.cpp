// Copyright 2026 The spectral-asrd Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "spectral_asrd/detector.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <unordered_map>

#include "spectral_asrd/hashing.hpp"

namespace spectral_asrd {

namespace {

using RowMatrixD = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void check_features(const SpectralFeatureSet& set) {
  if (set.size() == 0) throw ContractError("empty feature set");
  if (set.features.rank() != 2 || set.features.dim(0) != set.size()) {
    throw ContractError("feature matrix " + shape_string(set.features.shape()) + " does not match " +
                        std::to_string(set.size()) + " labels");
  }
  for (int y : set.labels) {
    if (y != 0 && y != 1) throw ContractError("detector labels must be 0 or 1");
  }
}

double sigmoid(double z) { return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }

void train_logreg(const Tensor& x, std::span<const int> labels, const DetectorHyper& h, DetectorModel& out) {
  const auto n = static_cast<Eigen::Index>(x.dim(0)), d = static_cast<Eigen::Index>(x.dim(1));
  const RowMatrixD a = x.matrix().cast<double>();
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) y[i] = labels[i];

  // Lipschitz constant of the mean log-loss gradient in (w, b): the loss
  // curvature is at most 1/4, so L = ||[A 1]||^2 / (4n) + l2.
  Eigen::VectorXd v = Eigen::VectorXd::Constant(d + 1, 1.0 / std::sqrt(double(d + 1)));
  double sigma2 = 0;
  for (int it = 0; it < 100; ++it) {
    const Eigen::VectorXd av = a * v.head(d) + Eigen::VectorXd::Constant(n, v[d]);
    Eigen::VectorXd atav(d + 1);
    atav.head(d) = a.transpose() * av;
    atav[d] = av.sum();
    const double norm = atav.norm();
    if (norm == 0) break;
    sigma2 = norm;
    v = atav / norm;
  }
  const double lipschitz = 1.01 * sigma2 / (4.0 * double(n)) + h.l2;
  const double step = 1.0 / lipschitz;
  const double kappa = lipschitz / std::max(h.l2, 1e-12);
  const double momentum = (std::sqrt(kappa) - 1.0) / (std::sqrt(kappa) + 1.0);

  Eigen::VectorXd w = Eigen::VectorXd::Zero(d), w_prev = w;
  double b = 0, b_prev = 0;
  for (int epoch = 0; epoch < h.max_epochs; ++epoch) {
    // Nesterov look-ahead point.
    const Eigen::VectorXd wl = w + momentum * (w - w_prev);
    const double bl = b + momentum * (b - b_prev);
    const Eigen::VectorXd z = a * wl + Eigen::VectorXd::Constant(n, bl);
    Eigen::VectorXd r(n);
    for (Eigen::Index i = 0; i < n; ++i) r[i] = sigmoid(z[i]) - y[i];
    const Eigen::VectorXd gw = a.transpose() * r / double(n) + h.l2 * wl;
    const double gb = r.mean();
    w_prev = w;
    b_prev = b;
    w = wl - step * gw;
    b = bl - step * gb;
    if (std::sqrt(gw.squaredNorm() + gb * gb) < h.tolerance) break;
  }
  out.weights.assign(w.data(), w.data() + d);
  out.bias = b;
}

class TreeBuilder {
 public:
  TreeBuilder(const Tensor& x, std::span<const int> labels, const DetectorHyper& h)
      : x_(x), labels_(labels), h_(h), d_(x.dim(1)),
        m_(std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(x.dim(1)))))) {}

  Tree build(const std::vector<std::pair<std::size_t, std::uint32_t>>& rows, std::uint64_t key) {
    Tree tree;
    grow(tree, rows, 0, key);
    return tree;
  }

 private:
  struct Split {
    bool found = false;
    std::size_t feature = 0;
    float threshold = 0;
    double score = -1;
  };

  float at(std::size_t row, std::size_t f) const { return x_[row * d_ + f]; }

  std::int32_t grow(Tree& tree, const std::vector<std::pair<std::size_t, std::uint32_t>>& rows, int depth,
                    std::uint64_t key) {
    const auto index = static_cast<std::int32_t>(tree.size());
    tree.emplace_back();
    std::uint64_t c0 = 0, c1 = 0;
    for (const auto& [r, wt] : rows) (labels_[r] ? c1 : c0) += wt;
    tree[index].count[0] = static_cast<std::uint32_t>(c0);
    tree[index].count[1] = static_cast<std::uint32_t>(c1);
    const bool pure = c0 == 0 || c1 == 0;
    const bool deep = h_.max_depth > 0 && depth >= h_.max_depth;
    if (pure || deep || rows.size() < 2 * static_cast<std::size_t>(h_.min_leaf)) return index;

    const Split s = best_split(rows, key);
    if (!s.found) return index;
    std::vector<std::pair<std::size_t, std::uint32_t>> left, right;
    for (const auto& e : rows) (at(e.first, s.feature) <= s.threshold ? left : right).push_back(e);
    const std::int32_t l = grow(tree, left, depth + 1, derive_seed(key, 1));
    const std::int32_t r = grow(tree, right, depth + 1, derive_seed(key, 2));
    tree[index].feature = static_cast<std::int32_t>(s.feature);
    tree[index].threshold = s.threshold;
    tree[index].left = l;
    tree[index].right = r;
    return index;
  }

  // Candidate features in a key-seeded random order until m non-constant
  // ones have been scored.
  Split best_split(const std::vector<std::pair<std::size_t, std::uint32_t>>& rows, std::uint64_t key) const {
    std::mt19937_64 rng(key);
    std::unordered_map<std::size_t, std::size_t> swapped;
    auto slot = [&](std::size_t i) {
      auto it = swapped.find(i);
      return it == swapped.end() ? i : it->second;
    };
    Split best;
    std::size_t scored = 0;
    std::vector<std::pair<float, std::size_t>> vals(rows.size());
    for (std::size_t drawn = 0; drawn < d_ && scored < m_; ++drawn) {
      std::uniform_int_distribution<std::size_t> pick(drawn, d_ - 1);
      const std::size_t j = pick(rng);
      const std::size_t f = slot(j);
      swapped[j] = slot(drawn);
      swapped[drawn] = f;

      for (std::size_t i = 0; i < rows.size(); ++i) vals[i] = {at(rows[i].first, f), i};
      std::sort(vals.begin(), vals.end());
      if (vals.front().first == vals.back().first) continue;
      ++scored;
      double total[2] = {0, 0};
      for (const auto& e : rows) total[labels_[e.first]] += e.second;
      double left[2] = {0, 0};
      for (std::size_t i = 0; i + 1 < vals.size(); ++i) {
        const auto& e = rows[vals[i].second];
        left[labels_[e.first]] += e.second;
        if (vals[i].first == vals[i + 1].first) continue;
        const double nl = left[0] + left[1];
        const double r0 = total[0] - left[0], r1 = total[1] - left[1], nr = r0 + r1;
        // Maximizing this is minimizing the weighted gini impurity of the children.
        const double score = (left[0] * left[0] + left[1] * left[1]) / nl + (r0 * r0 + r1 * r1) / nr;
        if (score > best.score) {
          float thr = 0.5f * (vals[i].first + vals[i + 1].first);
          if (!(thr < vals[i + 1].first)) thr = vals[i].first;
          best = {true, f, thr, score};
        }
      }
    }
    return best;
  }

  const Tensor& x_;
  std::span<const int> labels_;
  const DetectorHyper& h_;
  std::size_t d_;
  std::size_t m_;
};

void train_forest(const Tensor& raw, std::span<const int> labels, const DetectorHyper& h, std::uint64_t seed,
                  DetectorModel& out) {
  const std::size_t n = raw.dim(0);
  std::vector<std::uint64_t> row_keys(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = raw.slice(i);
    const std::string_view bytes(reinterpret_cast<const char*>(row.data()), row.size() * sizeof(float));
    row_keys[i] = fnv1a64(bytes, fnv1a64(std::string_view(labels[i] ? "1" : "0")));
  }
  TreeBuilder builder(raw, labels, h);
  out.trees.clear();
  for (int t = 0; t < h.n_trees; ++t) {
    const std::uint64_t tree_seed = derive_seed(seed, static_cast<std::uint64_t>(t));
    std::vector<std::pair<std::size_t, std::uint32_t>> rows;
    for (std::size_t i = 0; i < n; ++i) {
      std::uint32_t wt = 1;
      if (h.bootstrap) {
        std::mt19937_64 rng(derive_seed(tree_seed, row_keys[i]));
        wt = std::poisson_distribution<std::uint32_t>(1.0)(rng);
      }
      if (wt > 0) rows.emplace_back(i, wt);
    }
    out.trees.push_back(builder.build(rows, derive_seed(tree_seed, 0x7265656eULL)));
  }
}

}  // namespace

std::string_view source_name(FeatureSource source) { return source == FeatureSource::kBb ? "bb" : "wb"; }

FeatureSource parse_source(std::string_view name) {
  if (name == "bb") return FeatureSource::kBb;
  if (name == "wb") return FeatureSource::kWb;
  throw ConfigError("unknown feature source '" + std::string(name) + "' (expected bb or wb)");
}

std::string_view detector_name(DetectorKind kind) { return kind == DetectorKind::kLogreg ? "lr" : "rf"; }

DetectorKind parse_detector(std::string_view name) {
  if (name == "lr" || name == "logreg") return DetectorKind::kLogreg;
  if (name == "rf" || name == "random_forest") return DetectorKind::kRandomForest;
  throw ConfigError("unknown detector '" + std::string(name) + "' (expected lr or rf)");
}

Normalization Normalization::fit(const Tensor& features) {
  if (features.rank() != 2) throw ContractError("normalization needs an (N, D) matrix");
  const std::size_t n = features.dim(0), d = features.dim(1);
  Normalization out;
  out.mean.assign(d, 0.0);
  out.stddev.assign(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    auto row = features.slice(i);
    for (std::size_t j = 0; j < d; ++j) out.mean[j] += row[j];
  }
  for (double& m : out.mean) m /= double(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto row = features.slice(i);
    for (std::size_t j = 0; j < d; ++j) out.stddev[j] += (row[j] - out.mean[j]) * (row[j] - out.mean[j]);
  }
  for (double& s : out.stddev) {
    s = std::sqrt(s / double(n));
    if (s < 1e-12) s = 1.0;
  }
  return out;
}

Tensor Normalization::apply(const Tensor& features) const {
  if (features.rank() != 2 || features.dim(1) != mean.size()) {
    throw ContractError("features " + shape_string(features.shape()) + " do not match normalization of " +
                        std::to_string(mean.size()) + " features");
  }
  Tensor out(features.shape());
  for (std::size_t i = 0; i < features.dim(0); ++i) {
    auto src = features.slice(i);
    auto dst = out.slice(i);
    for (std::size_t j = 0; j < mean.size(); ++j) dst[j] = static_cast<float>((src[j] - mean[j]) / stddev[j]);
  }
  return out;
}

Tensor Normalization::invert(const Tensor& normalized) const {
  if (normalized.rank() != 2 || normalized.dim(1) != mean.size()) throw ContractError("normalization shape mismatch");
  Tensor out(normalized.shape());
  for (std::size_t i = 0; i < normalized.dim(0); ++i) {
    auto src = normalized.slice(i);
    auto dst = out.slice(i);
    for (std::size_t j = 0; j < mean.size(); ++j) dst[j] = static_cast<float>(src[j] * stddev[j] + mean[j]);
  }
  return out;
}

SpectralFeatureSet SpectralFeatureSet::subset(std::span<const std::size_t> rows) const {
  SpectralFeatureSet out;
  out.features = features.gather(rows);
  for (std::size_t r : rows) {
    out.labels.push_back(labels.at(r));
    out.pair_ids.push_back(pair_ids.at(r));
  }
  out.source = source;
  out.tap_ids = tap_ids;
  out.squared = squared;
  return out;
}

std::vector<float> extract_features(const TrainedModel* model, const Tensor& image, FeatureSource source,
                                    std::span<const std::size_t> tap_ids, bool squared) {
  if (source == FeatureSource::kBb) return extract_bb(image, squared);
  if (model == nullptr) throw ContractError("white-box features need the target model");
  return extract_wb(*model, image, tap_ids, squared);
}

SpectralFeatureSet build_feature_set(const TrainedModel* model, const AdversarialBatch& batch,
                                     std::span<const std::size_t> samples, FeatureSource source,
                                     std::span<const std::size_t> tap_ids, bool squared) {
  if (samples.empty()) throw ContractError("feature set needs at least one pair");
  SpectralFeatureSet out;
  out.source = source;
  out.tap_ids.assign(tap_ids.begin(), tap_ids.end());
  out.squared = squared;
  std::vector<float> flat;
  std::size_t d = 0;
  for (std::size_t s : samples) {
    for (int label : {0, 1}) {
      const Tensor image = (label ? batch.adversarial : batch.clean).item(s);
      const auto f = extract_features(model, image, source, tap_ids, squared);
      if (d == 0) d = f.size();
      flat.insert(flat.end(), f.begin(), f.end());
      out.labels.push_back(label);
      out.pair_ids.push_back(s);
    }
  }
  out.features = Tensor(Shape{out.labels.size(), d}, flat);
  return out;
}

std::pair<SpectralFeatureSet, SpectralFeatureSet> split_pairs(const SpectralFeatureSet& set, double train_fraction,
                                                              std::uint64_t seed) {
  std::vector<std::size_t> pairs;
  for (std::size_t p : set.pair_ids) {
    if (std::find(pairs.begin(), pairs.end(), p) == pairs.end()) pairs.push_back(p);
  }
  std::mt19937_64 rng(seed);
  for (std::size_t i = pairs.size(); i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(pairs[i - 1], pairs[pick(rng)]);
  }
  const auto n_train = static_cast<std::size_t>(std::lround(train_fraction * double(pairs.size())));
  std::unordered_map<std::size_t, bool> in_train;
  for (std::size_t i = 0; i < pairs.size(); ++i) in_train[pairs[i]] = i < n_train;
  std::vector<std::size_t> tr, te;
  for (std::size_t r = 0; r < set.size(); ++r) (in_train[set.pair_ids[r]] ? tr : te).push_back(r);
  return {tr.empty() ? SpectralFeatureSet{} : set.subset(tr), te.empty() ? SpectralFeatureSet{} : set.subset(te)};
}

DetectorModel train_detector(const SpectralFeatureSet& train, DetectorKind kind, const DetectorHyper& hyper,
                             std::uint64_t seed) {
  check_features(train);
  const bool has0 = std::count(train.labels.begin(), train.labels.end(), 0) > 0;
  const bool has1 = std::count(train.labels.begin(), train.labels.end(), 1) > 0;
  if (!has0 || !has1) throw ContractError("detector training set holds a single class");
  for (float v : train.features.data()) {
    if (!std::isfinite(v)) throw ContractError("detector features must be finite");
  }
  if (hyper.n_trees < 1 || hyper.min_leaf < 1 || hyper.max_depth < 0 || hyper.max_epochs < 1) {
    throw ConfigError("invalid detector hyper-parameters");
  }
  DetectorModel m;
  m.kind = kind;
  m.seed = seed;
  m.normalization = Normalization::fit(train.features);
  if (kind == DetectorKind::kLogreg) {
    train_logreg(m.normalization.apply(train.features), train.labels, hyper, m);
  } else {
    // Split thresholds are order-based, so trees see raw magnitudes; this
    // keeps them exactly independent of row order and duplication.
    train_forest(train.features, train.labels, hyper, seed, m);
  }
  return m;
}

std::vector<double> DetectorModel::predict_proba(const Tensor& features) const {
  const Tensor x = kind == DetectorKind::kLogreg ? normalization.apply(features) : features;
  if (x.rank() != 2 || x.dim(1) != n_features()) throw ContractError("feature width does not match the detector");
  const std::size_t n = x.dim(0), d = x.dim(1);
  std::vector<double> p(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    auto row = x.slice(i);
    if (kind == DetectorKind::kLogreg) {
      double z = bias;
      for (std::size_t j = 0; j < d; ++j) z += weights[j] * row[j];
      p[i] = sigmoid(z);
      continue;
    }
    double s = 0;
    for (const Tree& t : trees) {
      std::int32_t node = 0;
      while (t[node].feature >= 0) node = row[t[node].feature] <= t[node].threshold ? t[node].left : t[node].right;
      const double total = double(t[node].count[0]) + double(t[node].count[1]);
      s += total > 0 ? double(t[node].count[1]) / total : 0.5;
    }
    p[i] = trees.empty() ? 0.5 : s / double(trees.size());
  }
  return p;
}

std::vector<int> DetectorModel::predict(const Tensor& features) const {
  const auto p = predict_proba(features);
  std::vector<int> out(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) out[i] = p[i] > 0.5 ? 1 : 0;
  return out;
}

DetectionScore score_predictions(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.size() != truth.size()) throw ContractError("prediction and label counts differ");
  DetectionScore s;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] == 1) {
      (predicted[i] == 1 ? s.tp : s.fn)++;
    } else {
      (predicted[i] == 1 ? s.fp : s.tn)++;
    }
  }
  const double f1_den = 2.0 * double(s.tp) + double(s.fp) + double(s.fn);
  s.f1 = f1_den > 0 ? 2.0 * double(s.tp) / f1_den : 0.0;
  s.fnr = s.tp + s.fn > 0 ? double(s.fn) / double(s.fn + s.tp) : 0.0;
  s.fpr = s.fp + s.tn > 0 ? double(s.fp) / double(s.fp + s.tn) : 0.0;
  return s;
}

DetectionScore evaluate_detector(const DetectorModel& model, const SpectralFeatureSet& test) {
  check_features(test);
  return score_predictions(model.predict(test.features), test.labels);
}

}  // namespace spectral_asrd
