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

#ifndef SPECTRAL_ASRD_LOSSES_HPP
#define SPECTRAL_ASRD_LOSSES_HPP

#include <span>
#include <string_view>
#include <vector>

#include "spectral_asrd/tensor.hpp"

namespace spectral_asrd {

enum class LossKind { kCrossEntropy, kDlr };

LossKind parse_loss_kind(std::string_view name);

/// Row-wise softmax of (B, K) logits.
Tensor softmax(const Tensor& logits);

/// Per-sample cross-entropy and its gradient with respect to the logits.
struct LossAndGrad {
  std::vector<double> loss;
  Tensor grad;  // (B, K)
};

LossAndGrad cross_entropy(const Tensor& logits, std::span<const int> labels);

/// Difference of logits ratio (z_y - max_{i!=y} z_i) / (z_pi1 - z_pi3), with pi
/// the decreasing order of the logits. Needs K >= 4; throws NumericError when
/// the denominator is below 1e-12.
std::vector<double> dlr_loss(const Tensor& logits, std::span<const int> labels);

/// The quantity attacks ascend for the DLR member: -DLR, with gradient.
/// With `degenerate` non-null, rows with a degenerate denominator get zero
/// loss and gradient and are flagged instead of throwing.
LossAndGrad dlr_attack_loss(const Tensor& logits, std::span<const int> labels,
                            std::vector<bool>* degenerate = nullptr);

/// Margin z_y - max_{i!=y} z_i per row (negative means misclassified).
std::vector<double> margins(const Tensor& logits, std::span<const int> labels);

/// Index of the largest logit other than `label` (lowest index on ties).
std::size_t runner_up(std::span<const float> row, int label);

inline constexpr double kDlrDenominatorFloor = 1e-12;

}  // namespace spectral_asrd

#endif  // SPECTRAL_ASRD_LOSSES_HPP
