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

#include "spectral_asrd/classifier.hpp"

namespace spectral_asrd {

std::vector<Tensor> ModelClassifier::input_vjp(const Tensor& batch, const CotangentFn& cotangents,
                                               Tensor* logits_out) const {
  const ForwardTrace trace = forward_traced(*model_, batch);
  const std::vector<Tensor> seeds = cotangents(trace.output);
  std::vector<Tensor> grads;
  grads.reserve(seeds.size());
  for (const Tensor& seed : seeds) grads.push_back(backward(*model_, trace, seed, false).input);
  if (logits_out != nullptr) *logits_out = trace.output;
  return grads;
}

InputGradient input_gradient(const Classifier& model, const Tensor& batch, std::span<const int> labels,
                             LossKind loss_kind) {
  if (loss_kind == LossKind::kDlr && model.num_classes() < 4) {
    throw ContractError("DLR loss needs at least 4 classes, model has " + std::to_string(model.num_classes()));
  }
  InputGradient out;
  auto grads = model.input_vjp(
      batch,
      [&](const Tensor& logits) {
        LossAndGrad lg = loss_kind == LossKind::kCrossEntropy ? cross_entropy(logits, labels)
                                                              : dlr_attack_loss(logits, labels);
        out.loss = std::move(lg.loss);
        return std::vector<Tensor>{std::move(lg.grad)};
      },
      &out.logits);
  out.gradient = std::move(grads.front());
  return out;
}

std::vector<int> predict(const Classifier& model, const Tensor& batch) { return argmax_rows(model.logits(batch)); }

}  // namespace spectral_asrd
