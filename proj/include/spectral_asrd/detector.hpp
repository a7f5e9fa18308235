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

#ifndef SPECTRAL_ASRD_DETECTOR_HPP
#define SPECTRAL_ASRD_DETECTOR_HPP

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "spectral_asrd/attacks.hpp"
#include "spectral_asrd/spectral.hpp"

namespace spectral_asrd {

enum class FeatureSource { kBb, kWb };
enum class DetectorKind { kLogreg, kRandomForest };

std::string_view source_name(FeatureSource source);
FeatureSource parse_source(std::string_view name);
std::string_view detector_name(DetectorKind kind);
DetectorKind parse_detector(std::string_view name);

/// Per-feature z-score record.
struct Normalization {
  std::vector<double> mean;
  std::vector<double> stddev;  // constant features get 1

  static Normalization fit(const Tensor& features);
  Tensor apply(const Tensor& features) const;
  Tensor invert(const Tensor& normalized) const;
  bool empty() const { return mean.empty(); }
};

/// Rows of raw spectral magnitudes labelled 0 (clean) or 1 (adversarial).
/// Clean and adversarial rows built from the same source image share a pair id.
struct SpectralFeatureSet {
  Tensor features;  // (N, D)
  std::vector<int> labels;
  std::vector<std::size_t> pair_ids;
  FeatureSource source = FeatureSource::kBb;
  std::vector<std::size_t> tap_ids;
  bool squared = false;

  std::size_t size() const { return labels.size(); }
  std::size_t dim() const { return features.empty() ? 0 : features.dim(1); }
  SpectralFeatureSet subset(std::span<const std::size_t> rows) const;
};

/// Features of one image (C, H, W) for the given source.
std::vector<float> extract_features(const TrainedModel* model, const Tensor& image, FeatureSource source,
                                    std::span<const std::size_t> tap_ids, bool squared = false);

/// One clean and one adversarial row for every listed sample of `batch`,
/// clean row first.
SpectralFeatureSet build_feature_set(const TrainedModel* model, const AdversarialBatch& batch,
                                     std::span<const std::size_t> samples, FeatureSource source,
                                     std::span<const std::size_t> tap_ids, bool squared = false);

/// Deterministic split by pair id: the first round(train_fraction * pairs)
/// pairs of a seeded permutation train, the rest test.
std::pair<SpectralFeatureSet, SpectralFeatureSet> split_pairs(const SpectralFeatureSet& set, double train_fraction,
                                                              std::uint64_t seed);

struct DetectorHyper {
  // logistic regression
  double l2 = 1e-2;
  int max_epochs = 3000;
  double tolerance = 1e-6;
  // random forest; max_depth 0 means unlimited
  int n_trees = 100;
  int max_depth = 0;
  int min_leaf = 1;
  bool bootstrap = true;  // false: every tree sees every row once
};

struct TreeNode {
  std::int32_t feature = -1;  // -1 marks a leaf
  float threshold = 0.0f;     // go left when x[feature] <= threshold
  std::int32_t left = -1;
  std::int32_t right = -1;
  std::uint32_t count[2] = {0, 0};  // bootstrap class counts reaching the node
};

using Tree = std::vector<TreeNode>;  // node 0 is the root

struct DetectorModel {
  DetectorKind kind = DetectorKind::kRandomForest;
  std::uint64_t seed = 0;
  Normalization normalization;
  // logistic regression
  std::vector<double> weights;
  double bias = 0.0;
  // random forest
  std::vector<Tree> trees;

  std::size_t n_features() const { return normalization.mean.size(); }
  /// Probability of the adversarial class for every row of raw features.
  std::vector<double> predict_proba(const Tensor& features) const;
  /// 1 (adversarial) when the probability exceeds 0.5.
  std::vector<int> predict(const Tensor& features) const;
};

/// Fits the z-score record on `train`, then either a logistic regression
/// (Nesterov-accelerated gradient descent with step 1/L on the L2-penalized
/// mean log-loss of normalized features) or a forest of CART trees on gini
/// impurity with sqrt(D) candidate features per split. Trees split raw
/// magnitudes. Bootstrap weights are Poisson(1) counts keyed by row content,
/// so row order and uniform duplication do not change the forest.
DetectorModel train_detector(const SpectralFeatureSet& train, DetectorKind kind, const DetectorHyper& hyper,
                             std::uint64_t seed);

struct DetectionScore {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  double f1 = 0.0;   // 2tp / (2tp + fp + fn); 0 when undefined
  double fnr = 0.0;  // fn / (fn + tp); 0 when there are no positives
  double fpr = 0.0;  // fp / (fp + tn); 0 when there are no negatives
  double recall() const { return tp + fn == 0 ? 0.0 : double(tp) / double(tp + fn); }
};

DetectionScore score_predictions(std::span<const int> predicted, std::span<const int> truth);
DetectionScore evaluate_detector(const DetectorModel& model, const SpectralFeatureSet& test);

/// Logistic regression as JSON; forests as the flat binary below.
///
/// Forest layout, little-endian: "SPRF", u16 version = 1, u64 seed,
/// u32 feature count D, D f64 means, D f64 stddevs, u32 tree count, then per
/// tree u32 node count and per node i32 feature, f32 threshold, i32 left,
/// i32 right, u32 clean count, u32 adversarial count.
void save_detector(const DetectorModel& model, const std::filesystem::path& path);
DetectorModel load_detector(const std::filesystem::path& path);

/// Features as SPDF ("features") plus a JSON manifest of labels and pairs.
void save_feature_set(const SpectralFeatureSet& set, const std::filesystem::path& dir);
SpectralFeatureSet load_feature_set(const std::filesystem::path& dir);

}  // namespace spectral_asrd

#endif  // SPECTRAL_ASRD_DETECTOR_HPP
