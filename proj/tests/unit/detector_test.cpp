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

#include <gtest/gtest.h>

#include <algorithm>
#include <complex>
#include <filesystem>
#include <numbers>
#include <numeric>
#include <random>

#include "desk_fixture.hpp"
#include "spectral_asrd/spdf.hpp"
#include "test_util.hpp"

namespace spectral_asrd {
namespace {

using testing::random_tensor;

// Direct evaluation of F(l, k) = sum_m sum_n exp(-2 pi i (l m / R + k n / C)) X(m, n).
std::vector<std::complex<double>> brute_dft(const Tensor& x) {
  const std::size_t r = x.dim(0), c = x.dim(1);
  std::vector<std::complex<double>> out(r * c);
  for (std::size_t l = 0; l < r; ++l)
    for (std::size_t k = 0; k < c; ++k) {
      std::complex<double> s = 0;
      for (std::size_t m = 0; m < r; ++m)
        for (std::size_t n = 0; n < c; ++n) {
          const double ang = -2.0 * std::numbers::pi * (double(l * m) / double(r) + double(k * n) / double(c));
          s += double(x[m * c + n]) * std::complex<double>(std::cos(ang), std::sin(ang));
        }
      out[l * c + k] = s;
    }
  return out;
}

SpectralFeatureSet make_set(const std::vector<std::vector<float>>& rows, const std::vector<int>& labels) {
  SpectralFeatureSet s;
  std::vector<float> flat;
  for (const auto& r : rows) flat.insert(flat.end(), r.begin(), r.end());
  s.features = Tensor(Shape{rows.size(), rows.front().size()}, flat);
  s.labels = labels;
  for (std::size_t i = 0; i < rows.size(); ++i) s.pair_ids.push_back(i / 2);
  return s;
}

// Gaussian blobs in d dimensions, class 1 shifted by `shift` along every axis.
SpectralFeatureSet blobs(std::size_t n, std::size_t d, float shift, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> g(0.0f, 1.0f);
  std::vector<std::vector<float>> rows;
  std::vector<int> labels;
  for (std::size_t i = 0; i < n; ++i) {
    const int y = static_cast<int>(i % 2);
    std::vector<float> r(d);
    for (float& v : r) v = std::abs(g(rng) + (y ? shift : 0.0f));
    rows.push_back(r);
    labels.push_back(y);
  }
  return make_set(rows, labels);
}

std::string forest_bytes(const DetectorModel& m) {
  const auto p = std::filesystem::temp_directory_path() / "spectral_asrd_forest_bytes.bin";
  save_detector(m, p);
  std::string b = read_file(p);
  std::filesystem::remove(p);
  return b;
}

TEST(DftTest, OnesAndDelta) {
  const auto ones = dft2d(Tensor(Shape{2, 2}, 1.0f));
  EXPECT_NEAR(std::abs(ones.at(0, 0) - 4.0), 0.0, 1e-12);
  for (std::size_t i = 1; i < 4; ++i) EXPECT_NEAR(std::abs(ones.data[i]), 0.0, 1e-12);
  Tensor delta(Shape{5, 5}, 0.0f);
  delta[0] = 1.0f;
  for (const auto& c : dft2d(delta).data) EXPECT_NEAR(std::abs(c - 1.0), 0.0, 1e-12);
}

TEST(DftTest, MatchesBruteForceUpToSixteen) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t r = 1 + rng() % 16, c = trial % 2 ? r : 1 + rng() % 16;
    const Tensor x = random_tensor(Shape{r, c}, 100 + trial);
    const auto got = dft2d(x);
    const auto want = brute_dft(x);
    for (std::size_t i = 0; i < want.size(); ++i) {
      ASSERT_LE(std::abs(got.data[i] - want[i]), 1e-4) << r << "x" << c << " coefficient " << i;
    }
  }
}

TEST(DftTest, OneDimensionalRadixAndDirectAgree) {
  for (std::size_t n : {8u, 12u}) {
    std::vector<std::complex<double>> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = {std::sin(double(i)), std::cos(3.0 * i)};
    std::vector<std::complex<double>> want(n);
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t m = 0; m < n; ++m) want[k] += x[m] * std::polar(1.0, -2.0 * std::numbers::pi * k * m / n);
    dft1d(x);
    for (std::size_t k = 0; k < n; ++k) EXPECT_LE(std::abs(x[k] - want[k]), 1e-9) << "n " << n << " k " << k;
  }
}

TEST(DftTest, EmptyGridIsContractError) {
  EXPECT_THROW(dft2d(std::span<const float>(), 0, 0), ContractError);
  EXPECT_THROW(dft2d(std::vector<float>(3), 2, 2), ContractError);
}

TEST(MagnitudeTest, ThreeFourFive) {
  ComplexGrid g{1, 1, {{3.0, 4.0}}};
  EXPECT_FLOAT_EQ(magnitude(g)[0], 5.0f);
  EXPECT_FLOAT_EQ(magnitude(g, true)[0], 25.0f);
}

TEST(MagnitudeTest, ConjugateSymmetryOfRealInput) {
  const std::size_t n = 8;
  const Tensor mag = magnitude(dft2d(random_tensor(Shape{n, n}, 7)));
  for (std::size_t l = 0; l < n; ++l)
    for (std::size_t k = 0; k < n; ++k) {
      EXPECT_NEAR(mag[l * n + k], mag[((n - l) % n) * n + (n - k) % n], 1e-5);
    }
}

TEST(MagnitudeTest, Parseval) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Tensor x = random_tensor(Shape{8, 8}, seed, -1.0f, 1.0f);
    double spatial = 0, spectral = 0;
    for (float v : x.data()) spatial += double(v) * v;
    for (const auto& c : dft2d(x).data) spectral += std::norm(c);
    EXPECT_NEAR(spectral / (64.0 * spatial), 1.0, 1e-3);
  }
}

TEST(ExtractBbTest, LengthZeroAndScaling) {
  const Tensor img = random_tensor(Shape{3, 32, 32}, 3);
  const auto f = extract_bb(img);
  EXPECT_EQ(f.size(), 3072u);
  for (float v : f) EXPECT_GE(v, 0.0f);
  for (float v : extract_bb(Tensor(Shape{3, 8, 8}, 0.0f))) EXPECT_EQ(v, 0.0f);
  Tensor scaled = img;
  for (float& v : scaled.data()) v *= 0.5f;
  const auto fs = extract_bb(scaled);
  for (std::size_t i = 0; i < f.size(); ++i) EXPECT_NEAR(fs[i], 0.5f * f[i], 1e-4f * (1.0f + f[i]));
  const auto sq = extract_bb(img, true);
  for (std::size_t i = 0; i < f.size(); ++i) EXPECT_NEAR(sq[i], f[i] * f[i], 1e-3f * (1.0f + sq[i]));
}

TEST(ExtractBbTest, ChannelOrderAndNonSquare) {
  Tensor img(Shape{2, 4, 4}, 0.0f);
  for (std::size_t i = 16; i < 32; ++i) img[i] = 1.0f;  // second channel constant 1
  const auto f = extract_bb(img);
  EXPECT_EQ(f[0], 0.0f);
  EXPECT_FLOAT_EQ(f[16], 16.0f);
  EXPECT_THROW(extract_bb(Tensor(Shape{3, 4, 5})), ContractError);
}

TEST(ExtractWbTest, EmptyTapsEqualsBlackBox) {
  const auto& m = testing::desk_fixture().model;
  const Tensor img = testing::desk_fixture().test_set.images.item(0);
  EXPECT_EQ(extract_wb(m, img, {}), extract_bb(img));
}

TEST(ExtractWbTest, LengthAndDeterminism) {
  const auto& m = testing::desk_fixture().model;
  const Tensor img = testing::desk_fixture().test_set.images.item(1);
  const std::vector<std::size_t> taps = m.tap_ids();
  const auto f = extract_wb(m, img, taps);
  // 3x16x16 input, then 16x16x16, 32x8x8 and 64x4x4 relu maps.
  EXPECT_EQ(f.size(), 768u + 4096u + 2048u + 1024u);
  EXPECT_EQ(f.size(), wb_feature_length(m, taps));
  EXPECT_EQ(f, extract_wb(m, img, taps));
  const std::vector<std::size_t> last{taps.back()};
  EXPECT_EQ(extract_wb(m, img, last).size(), 768u + 1024u);
  EXPECT_THROW(extract_wb(m, img, std::vector<std::size_t>{0}), std::exception);
}

TEST(NormalizationTest, RoundTripAndConstantFeatures) {
  Tensor x = random_tensor(Shape{20, 5}, 9, 0.0f, 10.0f);
  for (std::size_t i = 0; i < 20; ++i) x[i * 5 + 2] = 3.0f;
  const auto n = Normalization::fit(x);
  EXPECT_DOUBLE_EQ(n.stddev[2], 1.0);
  const Tensor back = n.invert(n.apply(x));
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(back[i], x[i], 1e-5);
  const Tensor z = n.apply(x);
  double mean0 = 0;
  for (std::size_t i = 0; i < 20; ++i) mean0 += z[i * 5];
  EXPECT_NEAR(mean0 / 20, 0.0, 1e-5);
}

TEST(LogregTest, SeparableToyReachesFullAccuracy) {
  // Two features, classes at least 0.5 from the line x0 + x1 = 2 (margin 1).
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<float> u(0.0f, 2.0f);
  std::vector<std::vector<float>> rows;
  std::vector<int> labels;
  while (rows.size() < 200) {
    const float a = u(rng), b = u(rng);
    const float s = a + b - 2.0f;
    if (std::abs(s) < 0.5f * std::sqrt(2.0f)) continue;
    rows.push_back({a, b});
    labels.push_back(s > 0);
  }
  const auto set = make_set(rows, labels);
  const auto m = train_detector(set, DetectorKind::kLogreg, {}, 0);
  const auto s = evaluate_detector(m, set);
  EXPECT_EQ(s.fp + s.fn, 0u);
  EXPECT_DOUBLE_EQ(s.f1, 1.0);
}

TEST(LogregTest, DeterministicAndPersistent) {
  const auto set = blobs(80, 6, 1.0f, 4);
  const auto m = train_detector(set, DetectorKind::kLogreg, {}, 1);
  const auto m2 = train_detector(set, DetectorKind::kLogreg, {}, 1);
  EXPECT_EQ(m.weights, m2.weights);
  const auto p = std::filesystem::temp_directory_path() / "spectral_asrd_logreg.json";
  save_detector(m, p);
  const auto r = load_detector(p);
  EXPECT_EQ(r.kind, DetectorKind::kLogreg);
  EXPECT_EQ(r.predict_proba(set.features), m.predict_proba(set.features));
  std::filesystem::remove(p);
}

TEST(ForestTest, StumpMatchesExhaustiveSplitSearch) {
  // Noisy one-feature threshold data; no bootstrap so the oracle sees the
  // same rows as the tree.
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  std::vector<std::vector<float>> rows;
  std::vector<int> labels;
  for (int i = 0; i < 60; ++i) {
    const float x = u(rng);
    rows.push_back({x});
    labels.push_back((x > 0.37f) != (u(rng) < 0.15f));
  }
  const auto set = make_set(rows, labels);

  std::vector<float> xs;
  for (const auto& r : rows) xs.push_back(r[0]);
  std::vector<float> sorted = xs;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  double best_gini = 1e9;
  float best_thr = 0;
  for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
    const float thr = 0.5f * (sorted[i] + sorted[i + 1]);
    double l[2] = {0, 0}, r[2] = {0, 0};
    for (std::size_t j = 0; j < xs.size(); ++j) (xs[j] <= thr ? l : r)[labels[j]] += 1;
    const double nl = l[0] + l[1], nr = r[0] + r[1];
    const double gini = nl * (1 - (l[0] * l[0] + l[1] * l[1]) / (nl * nl)) + nr * (1 - (r[0] * r[0] + r[1] * r[1]) / (nr * nr));
    if (gini < best_gini - 1e-12) {
      best_gini = gini;
      best_thr = thr;
    }
  }

  DetectorHyper h;
  h.n_trees = 1;
  h.max_depth = 1;
  h.bootstrap = false;
  const auto m = train_detector(set, DetectorKind::kRandomForest, h, 0);
  ASSERT_EQ(m.trees.size(), 1u);
  ASSERT_EQ(m.trees[0].size(), 3u);
  EXPECT_EQ(m.trees[0][0].feature, 0);
  EXPECT_FLOAT_EQ(m.trees[0][0].threshold, best_thr);
}

TEST(ForestTest, SeparableThresholdWithBootstrap) {
  std::vector<std::vector<float>> rows;
  std::vector<int> labels;
  for (int i = 0; i < 40; ++i) {
    const float x = i < 20 ? 0.01f * i : 0.6f + 0.01f * i;
    rows.push_back({x});
    labels.push_back(i >= 20);
  }
  DetectorHyper h;
  h.n_trees = 1;
  h.max_depth = 1;
  const auto m = train_detector(make_set(rows, labels), DetectorKind::kRandomForest, h, 3);
  const float thr = m.trees[0][0].threshold;
  EXPECT_GE(thr, 0.19f);
  EXPECT_LT(thr, 0.8f);
  const Tensor probe(Shape{2, 1}, {0.1f, 0.9f});
  EXPECT_EQ(m.predict(probe), (std::vector<int>{0, 1}));
}

TEST(ForestTest, InvariantToDuplicationAndShuffling) {
  const auto set = blobs(60, 9, 0.8f, 6);
  const auto test = blobs(30, 9, 0.8f, 7);
  const auto base = train_detector(set, DetectorKind::kRandomForest, {}, 11).predict_proba(test.features);

  std::vector<std::size_t> twice;
  for (std::size_t i = 0; i < set.size(); ++i) twice.insert(twice.end(), {i, i});
  EXPECT_EQ(train_detector(set.subset(twice), DetectorKind::kRandomForest, {}, 11).predict_proba(test.features), base);

  std::vector<std::size_t> perm(set.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), std::mt19937_64(2));
  EXPECT_EQ(train_detector(set.subset(perm), DetectorKind::kRandomForest, {}, 11).predict_proba(test.features), base);
}

TEST(ForestTest, DeterministicBySeedAndWellFormed) {
  const auto set = blobs(60, 9, 0.8f, 6);
  DetectorHyper h;
  h.n_trees = 10;
  const auto a = train_detector(set, DetectorKind::kRandomForest, h, 5);
  EXPECT_EQ(forest_bytes(a), forest_bytes(train_detector(set, DetectorKind::kRandomForest, h, 5)));
  EXPECT_NE(forest_bytes(a), forest_bytes(train_detector(set, DetectorKind::kRandomForest, h, 6)));
  for (const Tree& t : a.trees) {
    std::vector<int> seen(t.size(), 0);
    seen[0] = 1;
    for (const TreeNode& n : t) {
      if (n.feature < 0) continue;
      ASSERT_GT(n.left, 0);
      ASSERT_GT(n.right, 0);
      ++seen[n.left];
      ++seen[n.right];
    }
    for (int s : seen) EXPECT_EQ(s, 1);  // every node has exactly one parent
  }
}

TEST(ForestTest, LearnsShiftedBlobs) {
  const auto s = evaluate_detector(train_detector(blobs(200, 16, 1.5f, 1), DetectorKind::kRandomForest, {}, 2),
                                   blobs(100, 16, 1.5f, 3));
  EXPECT_GT(s.f1, 0.85);
}

TEST(ForestTest, PersistenceRoundTripAndCorruption) {
  const auto set = blobs(40, 5, 1.0f, 8);
  DetectorHyper h;
  h.n_trees = 7;
  const auto m = train_detector(set, DetectorKind::kRandomForest, h, 4);
  const auto p = std::filesystem::temp_directory_path() / "spectral_asrd_forest.bin";
  save_detector(m, p);
  const std::string bytes = read_file(p);
  const auto r = load_detector(p);
  EXPECT_EQ(r.predict_proba(set.features), m.predict_proba(set.features));
  EXPECT_EQ(forest_bytes(r), bytes);
  write_file(p, bytes.substr(0, bytes.size() - 3));
  EXPECT_THROW(load_detector(p), FormatError);
  std::string bad = bytes;
  bad[4] = 9;  // version
  write_file(p, bad);
  EXPECT_THROW(load_detector(p), FormatError);
  write_file(p, "{\"kind\": \"svm\"}");
  EXPECT_THROW(load_detector(p), FormatError);
  std::filesystem::remove(p);
}

TEST(TrainDetectorTest, RejectsSingleClassAndNonFinite) {
  auto one = make_set({{1.0f}, {2.0f}}, {0, 0});
  EXPECT_THROW(train_detector(one, DetectorKind::kLogreg, {}, 0), ContractError);
  EXPECT_THROW(train_detector(one, DetectorKind::kRandomForest, {}, 0), ContractError);
  auto nan = make_set({{1.0f}, {std::nanf("")}}, {0, 1});
  EXPECT_THROW(train_detector(nan, DetectorKind::kRandomForest, {}, 0), ContractError);
}

TEST(ScoreTest, PerfectAllCleanAndHandBuilt) {
  const std::vector<int> truth{0, 0, 1, 1};
  const auto perfect = score_predictions(truth, truth);
  EXPECT_DOUBLE_EQ(perfect.f1, 1.0);
  EXPECT_DOUBLE_EQ(perfect.fnr, 0.0);
  const auto clean = score_predictions(std::vector<int>{0, 0, 0, 0}, truth);
  EXPECT_DOUBLE_EQ(clean.fnr, 1.0);
  EXPECT_DOUBLE_EQ(clean.f1, 0.0);
  // tp=2 fp=1 tn=3 fn=1
  const std::vector<int> t{1, 1, 1, 0, 0, 0, 0};
  const std::vector<int> p{1, 1, 0, 1, 0, 0, 0};
  const auto s = score_predictions(p, t);
  EXPECT_EQ(s.tp, 2u);
  EXPECT_EQ(s.fp, 1u);
  EXPECT_EQ(s.tn, 3u);
  EXPECT_EQ(s.fn, 1u);
  EXPECT_EQ(s.tp + s.fp + s.tn + s.fn, t.size());
  EXPECT_NEAR(s.f1, 4.0 / 6.0, 1e-12);
  EXPECT_NEAR(s.fnr, 1.0 / 3.0, 1e-12);
  EXPECT_NEAR(s.fpr, 0.25, 1e-12);
  EXPECT_DOUBLE_EQ(s.fnr + s.recall(), 1.0);
  EXPECT_THROW(score_predictions(p, truth), ContractError);
}

TEST(FeatureSetTest, PairsCleanFirstAndSplitsByPair) {
  const auto& f = testing::desk_fixture();
  AdversarialBatch b;
  std::vector<std::size_t> idx{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  b.clean = f.test_set.images.gather(idx);
  b.adversarial = b.clean;
  for (float& v : b.adversarial.data()) v = 1.0f - v;
  const std::vector<std::size_t> chosen{1, 3, 4, 6, 7, 9};
  const auto set = build_feature_set(nullptr, b, chosen, FeatureSource::kBb, {});
  ASSERT_EQ(set.size(), 12u);
  EXPECT_EQ(set.dim(), 768u);
  for (std::size_t r = 0; r < set.size(); ++r) {
    EXPECT_EQ(set.labels[r], int(r % 2));
    EXPECT_EQ(set.pair_ids[r], chosen[r / 2]);
  }
  const auto want = extract_bb(b.adversarial.item(3));
  EXPECT_TRUE(std::equal(want.begin(), want.end(), set.features.slice(3).begin()));
  EXPECT_THROW(build_feature_set(nullptr, b, chosen, FeatureSource::kWb, f.model.tap_ids()), ContractError);

  const auto [tr, te] = split_pairs(set, 0.8, 3);
  EXPECT_EQ(tr.size(), 10u);  // round(0.8 * 6) = 5 pairs
  EXPECT_EQ(te.size(), 2u);
  for (std::size_t p : te.pair_ids) {
    EXPECT_EQ(std::count(tr.pair_ids.begin(), tr.pair_ids.end(), p), 0);
  }
  EXPECT_EQ(std::count(te.labels.begin(), te.labels.end(), 1), 1);
  const auto [tr2, te2] = split_pairs(set, 0.8, 3);
  EXPECT_EQ(te2.pair_ids, te.pair_ids);
}

TEST(FeatureSetTest, PersistenceRoundTrip) {
  auto set = blobs(10, 4, 1.0f, 2);
  set.source = FeatureSource::kWb;
  set.tap_ids = {1, 3};
  const auto dir = std::filesystem::temp_directory_path() / "spectral_asrd_features";
  std::filesystem::remove_all(dir);
  save_feature_set(set, dir);
  const auto r = load_feature_set(dir);
  EXPECT_EQ(r.features, set.features);
  EXPECT_EQ(r.labels, set.labels);
  EXPECT_EQ(r.pair_ids, set.pair_ids);
  EXPECT_EQ(r.source, set.source);
  EXPECT_EQ(r.tap_ids, set.tap_ids);
  std::filesystem::remove_all(dir);
}

TEST(NamesTest, SourcesAndDetectors) {
  EXPECT_EQ(parse_source(source_name(FeatureSource::kWb)), FeatureSource::kWb);
  EXPECT_EQ(parse_detector(detector_name(DetectorKind::kRandomForest)), DetectorKind::kRandomForest);
  EXPECT_THROW(parse_source("gray"), ConfigError);
  EXPECT_THROW(parse_detector("svm"), ConfigError);
}

}  // namespace
}  // namespace spectral_asrd
