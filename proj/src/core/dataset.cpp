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

#include "spectral_asrd/dataset.hpp"

#include <numeric>
#include <random>

namespace spectral_asrd {

void Dataset::validate() const {
  if (labels.empty()) throw ContractError("dataset '" + name + "' is empty");
  if (images.rank() != 4 || images.dim(0) != labels.size()) {
    throw ContractError("dataset '" + name + "' images " + shape_string(images.shape()) + " do not match " +
                        std::to_string(labels.size()) + " labels");
  }
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= num_classes) {
      throw ContractError("dataset '" + name + "' label " + std::to_string(y) + " outside class count " +
                          std::to_string(num_classes));
    }
  }
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.images = images.gather(indices);
  out.labels.reserve(indices.size());
  for (std::size_t i : indices) out.labels.push_back(labels.at(i));
  out.name = name;
  out.num_classes = num_classes;
  return out;
}

std::pair<Dataset, Dataset> split(const Dataset& data, std::size_t n_first, std::uint64_t seed) {
  if (n_first == 0 || n_first >= data.size()) throw ContractError("split size must leave both parts nonempty");
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::span<const std::size_t> all(order);
  return {data.subset(all.first(n_first)), data.subset(all.subspan(n_first))};
}

}  // namespace spectral_asrd
