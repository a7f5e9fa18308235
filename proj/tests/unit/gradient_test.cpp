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

#include <gtest/gtest.h>

#include <cmath>

#include "gradient_check.hpp"
#include "spectral_asrd/classifier.hpp"
#include "test_util.hpp"

namespace spectral_asrd {
namespace {

using testing::check_input_gradient;
using testing::check_parameter_gradient;
using testing::random_labels;
using testing::random_tensor;

struct LayerCase {
  const char* name;
  NetworkSpec spec;
};

std::vector<LayerCase> layer_cases() {
  auto make = [](Shape in, std::size_t k, std::vector<Layer> layers) {
    NetworkSpec s;
    s.input_shape = std::move(in);
    s.num_classes = k;
    s.layers = std::move(layers);
    return s;
  };
  return {
      {"conv_stride2_pad1", make({2, 7, 7}, 4, {Conv2d{3, 3, 2, 1}, Flatten{}, Dense{4}})},
      {"conv_k1", make({3, 5, 5}, 4, {Conv2d{2, 1, 1, 0}, Flatten{}, Dense{4}})},
      {"relu", make({2, 6, 6}, 4, {Conv2d{4, 3, 1, 1}, Relu{}, Flatten{}, Dense{4}})},
      {"maxpool", make({2, 8, 8}, 5, {Conv2d{3, 3, 1, 1}, MaxPool{2}, Flatten{}, Dense{5}})},
      {"dense_stack", make({1, 1, 12}, 4, {Flatten{}, Dense{8}, Relu{}, Dense{4}})},
      {"desk_cnn", desk_cnn_spec(3, 16, 4)},
  };
}

TEST(GradientTest, LogisticClosedForm) {
  // Class 0 has a zero row, so the two-class cross-entropy is the logistic
  // loss of z = w.x + b and dL/dx = (sigmoid(z) - y) w.
  const std::vector<float> w{0.7f, -1.3f, 0.4f};
  const float b = 0.2f;
  auto model = testing::linear_model({{0, 0, 0}, w}, {0, b});
  const Tensor x = testing::vector_batch({{0.5f, 0.1f, -0.3f}, {-1.0f, 0.8f, 2.0f}});
  const std::vector<int> y{1, 0};
  const Tensor g = input_gradient(model, x, y, LossKind::kCrossEntropy).gradient;
  for (std::size_t s = 0; s < 2; ++s) {
    double z = b;
    for (std::size_t i = 0; i < 3; ++i) z += w[i] * x.slice(s)[i];
    const double sigma = 1.0 / (1.0 + std::exp(-z));
    for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(g.slice(s)[i], (sigma - y[s]) * w[i], 1e-6);
  }
}

TEST(GradientTest, InputGradientMatchesFiniteDifferencesPerLayerType) {
  std::uint64_t seed = 100;
  for (const auto& c : layer_cases()) {
    const auto model = build_model(c.spec, seed);
    Shape bs{2};
    bs.insert(bs.end(), c.spec.input_shape.begin(), c.spec.input_shape.end());
    const Tensor batch = random_tensor(bs, seed + 1);
    const auto labels = random_labels(2, c.spec.num_classes, seed + 2);
    const auto r = check_input_gradient(model, batch, labels, LossKind::kCrossEntropy, 10, seed + 3);
    EXPECT_LE(r.max_relative_error, 1e-3) << c.name;
    seed += 10;
  }
}

TEST(GradientTest, ParameterGradientMatchesFiniteDifferencesPerLayerType) {
  std::uint64_t seed = 200;
  for (const auto& c : layer_cases()) {
    const auto model = build_model(c.spec, seed);
    Shape bs{3};
    bs.insert(bs.end(), c.spec.input_shape.begin(), c.spec.input_shape.end());
    const Tensor batch = random_tensor(bs, seed + 1);
    const auto labels = random_labels(3, c.spec.num_classes, seed + 2);
    const auto r = check_parameter_gradient(model, batch, labels, 10, seed + 3);
    EXPECT_LE(r.max_relative_error, 1e-3) << c.name;
    seed += 10;
  }
}

TEST(GradientTest, DlrAttackLossMatchesFiniteDifferences) {
  const auto model = build_model(desk_cnn_spec(3, 16, 5), 31);
  const Tensor batch = random_tensor({2, 3, 16, 16}, 32);
  const auto labels = random_labels(2, 5, 33);
  const auto r = check_input_gradient(model, batch, labels, LossKind::kDlr, 10, 34);
  EXPECT_LE(r.max_relative_error, 1e-3);
}

TEST(GradientTest, DlrNeedsFourClasses) {
  const auto model = build_model(desk_cnn_spec(3, 16, 3), 1);
  EXPECT_THROW(input_gradient(model, random_tensor({1, 3, 16, 16}, 0), std::vector<int>{0}, LossKind::kDlr),
               ContractError);
}

TEST(GradientTest, ReportsPerSampleLossAndLogits) {
  const auto model = build_model(desk_cnn_spec(3, 16, 4), 5);
  const Tensor batch = random_tensor({3, 3, 16, 16}, 6);
  const std::vector<int> labels{0, 1, 2};
  const auto g = input_gradient(model, batch, labels, LossKind::kCrossEntropy);
  EXPECT_EQ(g.gradient.shape(), batch.shape());
  EXPECT_EQ(g.logits, forward(model, batch));
  const auto ce = cross_entropy(g.logits, labels);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(g.loss[i], ce.loss[i]);
}

}  // namespace
}  // namespace spectral_asrd
