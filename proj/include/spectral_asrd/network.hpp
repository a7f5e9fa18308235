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

#ifndef SPECTRAL_ASRD_NETWORK_HPP
#define SPECTRAL_ASRD_NETWORK_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "spectral_asrd/tensor.hpp"

namespace spectral_asrd {

struct Conv2d {
  std::size_t out_channels = 1;
  std::size_t kernel = 3;
  std::size_t stride = 1;
  std::size_t pad = 0;
};
struct Relu {};
struct MaxPool {
  std::size_t k = 2;
};
struct Flatten {};
struct Dense {
  std::size_t out = 1;
};

using Layer = std::variant<Conv2d, Relu, MaxPool, Flatten, Dense>;

std::string layer_name(const Layer& layer);

/// Layer list plus input geometry (C, H, W) and class count.
struct NetworkSpec {
  std::vector<Layer> layers;
  Shape input_shape;  // {C, H, W}
  std::size_t num_classes = 0;

  /// Per-sample output shape after every layer (size layers.size()).
  /// Throws BuildError naming the first incompatible layer.
  std::vector<Shape> layer_shapes() const;
};

/// conv(16)-relu-conv(32,s2)-relu-conv(64,s2)-relu-flatten-dense(K). Above
/// 32x32 a maxpool before the flatten keeps the dense input at 64x8x8.
NetworkSpec desk_cnn_spec(std::size_t channels, std::size_t resolution, std::size_t num_classes);

struct NamedTensor {
  std::string name;
  Tensor value;
  bool operator==(const NamedTensor&) const = default;
};

/// A built network. Immutable once trained; every const member is safe to
/// call concurrently.
class TrainedModel {
 public:
  TrainedModel() = default;
  TrainedModel(NetworkSpec spec, std::vector<NamedTensor> parameters);

  const NetworkSpec& spec() const noexcept { return spec_; }
  std::size_t num_classes() const noexcept { return spec_.num_classes; }
  const Shape& input_shape() const noexcept { return spec_.input_shape; }

  const std::vector<NamedTensor>& parameters() const noexcept { return params_; }
  std::vector<NamedTensor>& mutable_parameters() noexcept { return params_; }
  const Tensor& parameter(const std::string& name) const;
  std::size_t parameter_count() const;

  /// Indices of relu layers; their outputs are exposed as feature-map taps.
  const std::vector<std::size_t>& tap_ids() const noexcept { return tap_ids_; }

  /// Index into parameters() of the weight tensor for layer i, if any.
  std::optional<std::size_t> weight_index(std::size_t layer) const { return weight_index_.at(layer); }

 private:
  NetworkSpec spec_;
  std::vector<NamedTensor> params_;
  std::vector<std::size_t> tap_ids_;
  std::vector<std::optional<std::size_t>> weight_index_;
};

/// He fan-in normal weights, zero biases; bit-reproducible per seed.
TrainedModel build_model(const NetworkSpec& spec, std::uint64_t seed);

/// Activations recorded during a forward pass, reused by backward().
struct ForwardTrace {
  std::vector<Tensor> inputs;   // input of every layer
  Tensor output;                // logits (B, K)
  std::vector<std::vector<std::uint32_t>> pool_argmax;
};

/// Logits (B, K) for a batch (B, C, H, W). Throws NumericError naming the
/// layer that produced a non-finite value.
Tensor forward(const TrainedModel& model, const Tensor& batch);
ForwardTrace forward_traced(const TrainedModel& model, const Tensor& batch);

struct Gradients {
  Tensor input;                    // same shape as the batch
  std::vector<Tensor> parameters;  // parallel to model.parameters(); empty unless requested
};

/// Reverse pass of sum_b <logit_cotangent_b, z_b>.
Gradients backward(const TrainedModel& model, const ForwardTrace& trace, const Tensor& logit_cotangent,
                   bool parameter_gradients);

/// Predicted class per row; ties go to the lowest index.
std::vector<int> argmax_rows(const Tensor& logits);

/// Post-relu outputs at the requested taps for a single image (C, H, W) or
/// a batch. Result tensors keep the batch axis when given a batch.
std::vector<Tensor> feature_maps(const TrainedModel& model, const Tensor& image,
                                 std::span<const std::size_t> tap_ids);

}  // namespace spectral_asrd

#endif  // SPECTRAL_ASRD_NETWORK_HPP
