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

#include "spectral_asrd/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace spectral_asrd {

namespace {

void check_labels(const Tensor& logits, std::span<const int> labels) {
  if (logits.rank() != 2) throw ContractError("logits must be (B, K), got " + shape_string(logits.shape()));
  if (labels.size() != logits.dim(0)) throw ContractError("label count does not match batch size");
  const int k = static_cast<int>(logits.dim(1));
  for (int y : labels) {
    if (y < 0 || y >= k) throw ContractError("label " + std::to_string(y) + " outside [0, " + std::to_string(k) + ")");
  }
}

// Stable descending order; equal logits keep index order.
std::vector<std::size_t> descending(std::span<const float> row) {
  std::vector<std::size_t> order(row.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return row[a] > row[b]; });
  return order;
}

}  // namespace

LossKind parse_loss_kind(std::string_view name) {
  if (name == "ce" || name == "cross_entropy") return LossKind::kCrossEntropy;
  if (name == "dlr") return LossKind::kDlr;
  throw ContractError("unknown loss kind '" + std::string(name) + "' (expected ce or dlr)");
}

Tensor softmax(const Tensor& logits) {
  Tensor out(logits.shape());
  const std::size_t k = logits.stride0();
  for (std::size_t b = 0; b < logits.dim(0); ++b) {
    auto row = logits.slice(b);
    auto dst = out.slice(b);
    const double m = *std::max_element(row.begin(), row.end());
    double z = 0;
    for (std::size_t j = 0; j < k; ++j) z += std::exp(double(row[j]) - m);
    for (std::size_t j = 0; j < k; ++j) dst[j] = static_cast<float>(std::exp(double(row[j]) - m) / z);
  }
  return out;
}

LossAndGrad cross_entropy(const Tensor& logits, std::span<const int> labels) {
  check_labels(logits, labels);
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  LossAndGrad out{std::vector<double>(n), Tensor(logits.shape())};
  for (std::size_t b = 0; b < n; ++b) {
    auto row = logits.slice(b);
    auto g = out.grad.slice(b);
    const double m = *std::max_element(row.begin(), row.end());
    double z = 0;
    for (std::size_t j = 0; j < k; ++j) z += std::exp(double(row[j]) - m);
    const double lse = m + std::log(z);
    out.loss[b] = lse - row[labels[b]];
    for (std::size_t j = 0; j < k; ++j) g[j] = static_cast<float>(std::exp(double(row[j]) - lse));
    g[labels[b]] -= 1.0f;
  }
  return out;
}

std::size_t runner_up(std::span<const float> row, int label) {
  std::size_t best = label == 0 ? 1 : 0;
  for (std::size_t j = 0; j < row.size(); ++j) {
    if (static_cast<int>(j) != label && row[j] > row[best]) best = j;
  }
  return best;
}

std::vector<double> margins(const Tensor& logits, std::span<const int> labels) {
  check_labels(logits, labels);
  std::vector<double> out(labels.size());
  for (std::size_t b = 0; b < labels.size(); ++b) {
    auto row = logits.slice(b);
    out[b] = double(row[labels[b]]) - double(row[runner_up(row, labels[b])]);
  }
  return out;
}

namespace {

// DLR value of one row; false when the denominator is degenerate.
bool dlr_row(std::span<const float> row, int label, double& value, std::vector<std::size_t>& order) {
  order = descending(row);
  const double denom = double(row[order[0]]) - double(row[order[2]]);
  if (denom < kDlrDenominatorFloor) return false;
  value = (double(row[label]) - double(row[runner_up(row, label)])) / denom;
  return true;
}

}  // namespace

std::vector<double> dlr_loss(const Tensor& logits, std::span<const int> labels) {
  check_labels(logits, labels);
  if (logits.dim(1) < 4) throw ContractError("DLR loss needs at least 4 classes");
  std::vector<double> out(labels.size());
  std::vector<std::size_t> order;
  for (std::size_t b = 0; b < labels.size(); ++b) {
    if (!dlr_row(logits.slice(b), labels[b], out[b], order)) {
      throw NumericError("degenerate logits for DLR loss at sample " + std::to_string(b));
    }
  }
  return out;
}

LossAndGrad dlr_attack_loss(const Tensor& logits, std::span<const int> labels, std::vector<bool>* degenerate) {
  check_labels(logits, labels);
  if (logits.dim(1) < 4) throw ContractError("DLR loss needs at least 4 classes");
  LossAndGrad out{std::vector<double>(labels.size()), Tensor(logits.shape())};
  if (degenerate != nullptr) degenerate->assign(labels.size(), false);
  std::vector<std::size_t> order;
  for (std::size_t b = 0; b < labels.size(); ++b) {
    auto row = logits.slice(b);
    double dlr = 0;
    if (!dlr_row(row, labels[b], dlr, order)) {
      if (degenerate == nullptr) throw NumericError("degenerate logits for DLR loss at sample " + std::to_string(b));
      (*degenerate)[b] = true;
      continue;
    }
    auto g = out.grad.slice(b);
    const double denom = double(row[order[0]]) - double(row[order[2]]);
    const std::size_t y = static_cast<std::size_t>(labels[b]);
    const std::size_t other = runner_up(row, labels[b]);
    // d(-DLR)/dz = -(e_y - e_other)/D + DLR/D * (e_pi1 - e_pi3)
    out.loss[b] = -dlr;
    g[y] -= static_cast<float>(1.0 / denom);
    g[other] += static_cast<float>(1.0 / denom);
    g[order[0]] += static_cast<float>(dlr / denom);
    g[order[2]] -= static_cast<float>(dlr / denom);
  }
  return out;
}

}  // namespace spectral_asrd
