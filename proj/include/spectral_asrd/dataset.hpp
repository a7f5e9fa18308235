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

#ifndef SPECTRAL_ASRD_DATASET_HPP
#define SPECTRAL_ASRD_DATASET_HPP

#include <span>
#include <string>
#include <vector>

#include "spectral_asrd/tensor.hpp"

namespace spectral_asrd {

/// Labelled images (N, C, H, W) with pixels in [0, 1].
struct Dataset {
  Tensor images;
  std::vector<int> labels;
  std::string name;
  std::size_t num_classes = 0;

  std::size_t size() const { return labels.size(); }
  std::size_t channels() const { return images.dim(1); }
  std::size_t height() const { return images.dim(2); }
  std::size_t width() const { return images.dim(3); }

  /// Throws ContractError when labels are out of range or N == 0.
  void validate() const;

  Dataset subset(std::span<const std::size_t> indices) const;
};

/// Deterministic split: first `n_first` samples of a seeded permutation vs the rest.
std::pair<Dataset, Dataset> split(const Dataset& data, std::size_t n_first, std::uint64_t seed);

}  // namespace spectral_asrd

#endif  // SPECTRAL_ASRD_DATASET_HPP
