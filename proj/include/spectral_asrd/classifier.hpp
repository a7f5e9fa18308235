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

#ifndef SPECTRAL_ASRD_CLASSIFIER_HPP
#define SPECTRAL_ASRD_CLASSIFIER_HPP

#include <atomic>
#include <functional>
#include <span>
#include <vector>

#include "spectral_asrd/losses.hpp"
#include "spectral_asrd/network.hpp"

namespace spectral_asrd {

/// Builds one or more (B, K) logit cotangents from the logits of a forward pass.
using CotangentFn = std::function<std::vector<Tensor>(const Tensor& logits)>;

/// What an attack sees of the target network.
class Classifier {
 public:
  virtual ~Classifier() = default;

  virtual std::size_t num_classes() const = 0;
  virtual const Shape& input_shape() const = 0;

  /// Logits (B, K).
  virtual Tensor logits(const Tensor& batch) const = 0;

  /// One forward pass, then one reverse pass per cotangent returned by
  /// `cotangents`. Returns input gradients in cotangent order; writes the
  /// logits to `logits_out` when non-null.
  virtual std::vector<Tensor> input_vjp(const Tensor& batch, const CotangentFn& cotangents,
                                        Tensor* logits_out) const = 0;
};

/// Classifier view of a TrainedModel.
class ModelClassifier final : public Classifier {
 public:
  explicit ModelClassifier(const TrainedModel& model) : model_(&model) {}

  std::size_t num_classes() const override { return model_->num_classes(); }
  const Shape& input_shape() const override { return model_->input_shape(); }
  Tensor logits(const Tensor& batch) const override { return forward(*model_, batch); }
  std::vector<Tensor> input_vjp(const Tensor& batch, const CotangentFn& cotangents,
                                Tensor* logits_out) const override;

  const TrainedModel& model() const { return *model_; }

 private:
  const TrainedModel* model_;
};

/// Forwards to another classifier and counts the calls it receives.
class CountingClassifier final : public Classifier {
 public:
  explicit CountingClassifier(const Classifier& inner) : inner_(&inner) {}

  std::size_t num_classes() const override { return inner_->num_classes(); }
  const Shape& input_shape() const override { return inner_->input_shape(); }
  Tensor logits(const Tensor& batch) const override {
    ++forward_calls_;
    return inner_->logits(batch);
  }
  std::vector<Tensor> input_vjp(const Tensor& batch, const CotangentFn& cotangents,
                                Tensor* logits_out) const override {
    ++gradient_calls_;
    return inner_->input_vjp(batch, cotangents, logits_out);
  }

  std::size_t forward_calls() const { return forward_calls_; }
  std::size_t gradient_calls() const { return gradient_calls_; }

 private:
  const Classifier* inner_;
  mutable std::atomic<std::size_t> forward_calls_{0};
  mutable std::atomic<std::size_t> gradient_calls_{0};
};

struct InputGradient {
  Tensor gradient;            // same shape as the batch
  std::vector<double> loss;   // per sample
  Tensor logits;
};

/// Exact reverse-mode gradient of the summed per-sample loss with respect to
/// the input pixels. For LossKind::kDlr the loss is the attack objective -DLR.
InputGradient input_gradient(const Classifier& model, const Tensor& batch, std::span<const int> labels,
                             LossKind loss_kind);

inline InputGradient input_gradient(const TrainedModel& model, const Tensor& batch, std::span<const int> labels,
                                    LossKind loss_kind) {
  return input_gradient(ModelClassifier(model), batch, labels, loss_kind);
}

/// Predicted classes for a batch.
std::vector<int> predict(const Classifier& model, const Tensor& batch);

}  // namespace spectral_asrd

#endif  // SPECTRAL_ASRD_CLASSIFIER_HPP
