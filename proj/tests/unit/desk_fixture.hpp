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

#ifndef SPECTRAL_ASRD_TESTS_DESK_FIXTURE_HPP
#define SPECTRAL_ASRD_TESTS_DESK_FIXTURE_HPP

#include "spectral_asrd/datasets.hpp"
#include "spectral_asrd/training.hpp"

namespace spectral_asrd::testing {

/// A small desk CNN trained on 16x16 synthetic data, built once per process.
struct DeskFixture {
  Dataset train_set;
  Dataset test_set;
  TrainedModel model;
};

inline const DeskFixture& desk_fixture() {
  static const DeskFixture f = [] {
    Dataset tr = synth_dataset(16, 4, 400, 11);
    Dataset te = synth_dataset(16, 4, 40, 12);
    TrainedModel m = build_model(desk_cnn_spec(3, 16, 4), 13);
    m = train(std::move(m), tr, {.epochs = 8, .lr = 0.01, .momentum = 0.9, .batch_size = 32, .seed = 14}).model;
    return DeskFixture{std::move(tr), std::move(te), std::move(m)};
  }();
  return f;
}

}  // namespace spectral_asrd::testing

#endif  // SPECTRAL_ASRD_TESTS_DESK_FIXTURE_HPP
