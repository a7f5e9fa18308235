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

#include "spectral_asrd/training.hpp"

#include <numeric>
#include <random>

#include "spectral_asrd/hashing.hpp"
#include "spectral_asrd/losses.hpp"

namespace spectral_asrd {

TrainResult train(TrainedModel model, const Dataset& data, const TrainHyper& hyper,
                  const std::function<void(std::size_t, double)>& on_epoch) {
  if (hyper.lr < 0.0) throw ConfigError("learning rate must be non-negative");
  if (hyper.batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (hyper.momentum < 0.0 || hyper.momentum >= 1.0) throw ConfigError("momentum must be in [0, 1)");
  data.validate();
  if (data.num_classes != model.num_classes()) throw ContractError("dataset class count does not match the model");

  auto& params = model.mutable_parameters();
  std::vector<Tensor> velocity;
  for (const auto& p : params) velocity.emplace_back(p.value.shape());

  TrainResult result;
  std::vector<std::size_t> order(data.size());
  for (std::size_t epoch = 0; epoch < hyper.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(derive_seed(hyper.seed, epoch));
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += hyper.batch_size) {
      const std::size_t stop = std::min(order.size(), start + hyper.batch_size);
      std::span<const std::size_t> idx(order.data() + start, stop - start);
      const Tensor batch = data.images.gather(idx);
      std::vector<int> labels;
      for (std::size_t i : idx) labels.push_back(data.labels[i]);

      const ForwardTrace trace = forward_traced(model, batch);
      LossAndGrad lg = cross_entropy(trace.output, labels);
      const float scale = 1.0f / static_cast<float>(idx.size());
      lg.grad.vec() *= scale;
      for (double l : lg.loss) total += l;
      const Gradients grads = backward(model, trace, lg.grad, true);
      for (std::size_t p = 0; p < params.size(); ++p) {
        velocity[p].vec() = static_cast<float>(hyper.momentum) * velocity[p].vec() + grads.parameters[p].vec();
        params[p].value.vec() -= static_cast<float>(hyper.lr) * velocity[p].vec();
      }
    }
    const double mean = total / static_cast<double>(data.size());
    result.epoch_loss.push_back(mean);
    if (on_epoch) on_epoch(epoch, mean);
  }
  result.model = std::move(model);
  return result;
}

double accuracy(const TrainedModel& model, const Dataset& data, std::size_t batch_size) {
  data.validate();
  std::size_t correct = 0;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < data.size(); start += batch_size) {
    idx.clear();
    for (std::size_t i = start; i < std::min(data.size(), start + batch_size); ++i) idx.push_back(i);
    const auto pred = argmax_rows(forward(model, data.images.gather(idx)));
    for (std::size_t j = 0; j < idx.size(); ++j) correct += pred[j] == data.labels[idx[j]];
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

}  // namespace spectral_asrd
