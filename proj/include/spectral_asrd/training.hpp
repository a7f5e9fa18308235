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

#ifndef SPECTRAL_ASRD_TRAINING_HPP
#define SPECTRAL_ASRD_TRAINING_HPP

#include <cstdint>
#include <functional>
#include <vector>

#include "spectral_asrd/dataset.hpp"
#include "spectral_asrd/network.hpp"

namespace spectral_asrd {

struct TrainHyper {
  std::size_t epochs = 20;
  double lr = 0.05;
  double momentum = 0.9;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
};

struct TrainResult {
  TrainedModel model;
  std::vector<double> epoch_loss;  // mean cross-entropy per epoch
};

/// Minibatch SGD with momentum on mean cross-entropy. Shuffling is seeded per
/// epoch, so the result is a pure function of (model, data, hyper).
/// Throws ConfigError when lr < 0 or batch_size < 1.
TrainResult train(TrainedModel model, const Dataset& data, const TrainHyper& hyper,
                  const std::function<void(std::size_t epoch, double loss)>& on_epoch = {});

/// Fraction of samples whose argmax prediction equals the label.
double accuracy(const TrainedModel& model, const Dataset& data, std::size_t batch_size = 256);

}  // namespace spectral_asrd

#endif  // SPECTRAL_ASRD_TRAINING_HPP
