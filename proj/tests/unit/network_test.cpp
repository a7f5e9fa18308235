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

#include "spectral_asrd/network.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "spectral_asrd/classifier.hpp"
#include "spectral_asrd/losses.hpp"
#include "test_util.hpp"

namespace spectral_asrd {
namespace {

using testing::random_tensor;
using testing::reference_forward;

NetworkSpec small_net(std::size_t classes = 5) {
  NetworkSpec spec;
  spec.input_shape = {2, 6, 6};
  spec.num_classes = classes;
  spec.layers = {Conv2d{3, 3, 1, 1}, Relu{}, MaxPool{2}, Conv2d{4, 2, 1, 0}, Relu{}, Flatten{}, Dense{classes}};
  return spec;
}

TEST(BuildModelTest, SameSeedGivesIdenticalParameters) {
  const auto spec = desk_cnn_spec(3, 32, 10);
  EXPECT_EQ(build_model(spec, 7).parameters(), build_model(spec, 7).parameters());
  EXPECT_NE(build_model(spec, 7).parameters(), build_model(spec, 8).parameters());
}

TEST(BuildModelTest, DenseOnFlattenedCifarInput) {
  NetworkSpec spec;
  spec.input_shape = {3, 32, 32};
  spec.num_classes = 10;
  spec.layers = {Flatten{}, Dense{10}};
  const auto model = build_model(spec, 1);
  EXPECT_EQ(model.parameter("layers.1.weight").shape(), (Shape{10, 3072}));
}

TEST(BuildModelTest, ConvShapeSamePadding) {
  NetworkSpec spec;
  spec.input_shape = {3, 32, 32};
  spec.num_classes = 2;
  spec.layers = {Conv2d{8, 3, 1, 1}, Flatten{}, Dense{2}};
  EXPECT_EQ(spec.layer_shapes().front(), (Shape{8, 32, 32}));
}

TEST(BuildModelTest, ConvShapeFormulaHoldsForRandomConfigs) {
  std::mt19937 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t h = 3 + rng() % 20, k = 1 + rng() % 5, s = 1 + rng() % 3, p = rng() % 3;
    if (h + 2 * p < k) continue;
    NetworkSpec spec;
    spec.input_shape = {1, h, h};
    spec.num_classes = 2;
    spec.layers = {Conv2d{2, k, s, p}, Flatten{}, Dense{2}};
    const std::size_t expected = static_cast<std::size_t>(std::floor(double(h + 2 * p - k) / double(s))) + 1;
    EXPECT_EQ(spec.layer_shapes().front(), (Shape{2, expected, expected}));
  }
}

TEST(BuildModelTest, IncompatibleLayerNamesIndex) {
  NetworkSpec spec;
  spec.input_shape = {3, 8, 8};
  spec.num_classes = 4;
  spec.layers = {Conv2d{4, 3, 2, 0}, Relu{}, Conv2d{4, 5, 1, 0}, Flatten{}, Dense{4}};
  try {
    spec.layer_shapes();
    FAIL() << "expected BuildError";
  } catch (const BuildError& e) {
    EXPECT_EQ(e.layer(), 2u);
  }
  spec.layers = {Dense{4}};
  EXPECT_THROW(build_model(spec, 0), BuildError);
}

TEST(BuildModelTest, DeskCnnHasAboutSixtyThousandParameters) {
  const auto model = build_model(desk_cnn_spec(3, 32, 10), 0);
  EXPECT_EQ(model.parameter_count(), 16u * 27 + 16 + 32 * 144 + 32 + 64 * 288 + 64 + 10 * 4096 + 10);
  EXPECT_EQ(model.tap_ids(), (std::vector<std::size_t>{1, 3, 5}));
}

TEST(ForwardTest, IdentityDenseLayer) {
  auto model = testing::linear_model({{1, 0}, {0, 1}}, {0, 0});
  const Tensor logits = forward(model, testing::vector_batch({{1, 2}}));
  EXPECT_EQ(logits, Tensor(Shape{1, 2}, {1, 2}));
}

TEST(ForwardTest, ZeroParametersGiveZeroLogitsAndClassZero) {
  auto model = build_model(desk_cnn_spec(3, 16, 4), 0);
  for (auto& p : model.mutable_parameters()) p.value.vec().setZero();
  const Tensor logits = forward(model, random_tensor({3, 3, 16, 16}, 1));
  EXPECT_EQ(logits.vec().cwiseAbs().maxCoeff(), 0.0f);
  EXPECT_EQ(argmax_rows(logits), (std::vector<int>{0, 0, 0}));
}

TEST(ForwardTest, MatchesStraightLineReference) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto model = build_model(small_net(), seed);
    const Tensor batch = random_tensor({2, 2, 6, 6}, seed + 10);
    const Tensor logits = forward(model, batch);
    for (std::size_t b = 0; b < 2; ++b) {
      const auto ref = reference_forward(model, batch.item(b));
      for (std::size_t j = 0; j < ref.size(); ++j) EXPECT_NEAR(logits.slice(b)[j], ref[j], 1e-5);
    }
  }
  const auto desk = build_model(desk_cnn_spec(3, 16, 4), 4);
  const Tensor image = random_tensor({1, 3, 16, 16}, 5);
  const auto ref = reference_forward(desk, image.item(0));
  const Tensor logits = forward(desk, image);
  for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(logits[j], ref[j], 1e-4);
}

TEST(ForwardTest, PureAcrossCalls) {
  const auto model = build_model(desk_cnn_spec(3, 16, 4), 9);
  const Tensor batch = random_tensor({4, 3, 16, 16}, 2);
  EXPECT_EQ(forward(model, batch), forward(model, batch));
}

TEST(ForwardTest, RowsIndependentOfBatchComposition) {
  const auto model = build_model(desk_cnn_spec(3, 16, 4), 9);
  const Tensor batch = random_tensor({5, 3, 16, 16}, 3);
  const Tensor all = forward(model, batch);
  const std::vector<std::size_t> pick{3, 1};
  const Tensor some = forward(model, batch.gather(pick));
  for (std::size_t k = 0; k < pick.size(); ++k) {
    const auto a = all.slice(pick[k]), b = some.slice(k);
    EXPECT_TRUE(std::equal(a.begin(), a.end(), b.begin()));
  }
  const std::vector<int> labels{0, 1, 2, 3, 0};
  const auto g_all = input_gradient(model, batch, labels, LossKind::kCrossEntropy).gradient;
  const auto g_one = input_gradient(model, batch.gather(std::vector<std::size_t>{3}), std::vector<int>{3},
                                    LossKind::kCrossEntropy).gradient;
  const auto a = g_all.slice(3), b = g_one.slice(0);
  EXPECT_TRUE(std::equal(a.begin(), a.end(), b.begin()));
}

TEST(LossTest, DlrAttackLossFlagsDegenerateRows) {
  const Tensor z(Shape{2, 4}, {1, 1, 1, 0, 3, 2, 1, 0});
  std::vector<bool> degenerate;
  const auto lg = dlr_attack_loss(z, std::vector<int>{0, 0}, &degenerate);
  EXPECT_EQ(degenerate, (std::vector<bool>{true, false}));
  EXPECT_EQ(lg.loss[0], 0.0);
  EXPECT_DOUBLE_EQ(lg.loss[1], -0.5);
  EXPECT_THROW(dlr_attack_loss(z, std::vector<int>{0, 0}), NumericError);
}

TEST(ForwardTest, RejectsWrongInputShape) {
  const auto model = build_model(desk_cnn_spec(3, 16, 4), 9);
  EXPECT_THROW(forward(model, random_tensor({1, 3, 8, 8}, 0)), ContractError);
}

TEST(ForwardTest, NonFiniteValueNamesLayer) {
  auto model = build_model(small_net(), 1);
  model.mutable_parameters()[2].value[0] = std::numeric_limits<float>::infinity();  // layers.3.weight
  try {
    forward(model, random_tensor({1, 2, 6, 6}, 0));
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("layer 3"), std::string::npos) << e.what();
  }
}

TEST(ArgmaxTest, TiesGoToLowestIndex) {
  EXPECT_EQ(argmax_rows(Tensor(Shape{2, 3}, {1, 3, 3, 2, 2, 2})), (std::vector<int>{1, 0}));
}

TEST(FeatureMapsTest, EmptyTapListGivesEmptyResult) {
  const auto model = build_model(small_net(), 1);
  EXPECT_TRUE(feature_maps(model, random_tensor({2, 6, 6}, 0), {}).empty());
}

TEST(FeatureMapsTest, UnknownTapIsLookupError) {
  const auto model = build_model(small_net(), 1);
  const std::vector<std::size_t> taps{0};
  EXPECT_THROW(feature_maps(model, random_tensor({2, 6, 6}, 0), taps), std::out_of_range);
}

TEST(FeatureMapsTest, AllNegativePreActivationGivesZeroMap) {
  auto model = build_model(small_net(), 1);
  model.mutable_parameters()[0].value.vec().setZero();
  model.mutable_parameters()[1].value.vec().setConstant(-1.0f);
  const std::vector<std::size_t> taps{1};
  const auto maps = feature_maps(model, random_tensor({2, 6, 6}, 0), taps);
  ASSERT_EQ(maps.size(), 1u);
  EXPECT_EQ(maps[0].shape(), (Shape{3, 6, 6}));
  EXPECT_EQ(maps[0].vec().cwiseAbs().maxCoeff(), 0.0f);
}

TEST(FeatureMapsTest, TapsEqualReferenceLayerOutputs) {
  const auto model = build_model(small_net(), 11);
  const Tensor image = random_tensor({2, 6, 6}, 4);
  std::vector<std::vector<double>> outputs;
  reference_forward(model, image, &outputs);
  const std::vector<std::size_t> taps{4, 1};
  const auto maps = feature_maps(model, image, taps);
  ASSERT_EQ(maps.size(), 2u);
  for (std::size_t t = 0; t < taps.size(); ++t) {
    const auto& ref = outputs[taps[t]];
    ASSERT_EQ(maps[t].size(), ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(maps[t][i], ref[i], 1e-5);
  }
}

TEST(LossTest, SoftmaxRowsSumToOneAndCrossEntropyNonNegative) {
  const Tensor logits = random_tensor({16, 7}, 3, -20.0f, 20.0f);
  const Tensor p = softmax(logits);
  for (std::size_t b = 0; b < 16; ++b) EXPECT_NEAR(p.matrix().row(b).cast<double>().sum(), 1.0, 1e-6);
  const auto ce = cross_entropy(logits, testing::random_labels(16, 7, 1));
  for (double l : ce.loss) EXPECT_GE(l, 0.0);
}

TEST(LossTest, UniformLogitsGiveLogK) {
  const auto ce = cross_entropy(Tensor(Shape{3, 10}), std::vector<int>{0, 4, 9});
  for (double l : ce.loss) EXPECT_NEAR(l, std::log(10.0), 1e-12);
}

TEST(LossTest, DlrWorkedExamples) {
  const auto a = dlr_loss(Tensor(Shape{1, 4}, {3, 2, 1, 0}), std::vector<int>{0});
  EXPECT_DOUBLE_EQ(a[0], 0.5);
  const auto b = dlr_loss(Tensor(Shape{1, 4}, {1, 3, 2, 0}), std::vector<int>{0});
  EXPECT_DOUBLE_EQ(b[0], -1.0);
}

TEST(LossTest, DlrShiftInvariant) {
  const Tensor z = random_tensor({8, 6}, 12, -3, 3);
  Tensor shifted = z;
  shifted.vec().array() += 2.5f;
  const auto labels = testing::random_labels(8, 6, 2);
  const auto a = dlr_loss(z, labels), b = dlr_loss(shifted, labels);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-5);
}

TEST(LossTest, DlrContractAndDegenerateErrors) {
  EXPECT_THROW(dlr_loss(Tensor(Shape{1, 3}, {1, 2, 3}), std::vector<int>{0}), ContractError);
  EXPECT_THROW(dlr_loss(Tensor(Shape{1, 4}, {1, 1, 1, 0}), std::vector<int>{0}), NumericError);
  EXPECT_THROW(cross_entropy(Tensor(Shape{1, 4}), std::vector<int>{4}), ContractError);
}

}  // namespace
}  // namespace spectral_asrd
