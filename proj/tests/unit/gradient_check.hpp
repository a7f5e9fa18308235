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

#ifndef SPECTRAL_ASRD_TESTS_GRADIENT_CHECK_HPP
#define SPECTRAL_ASRD_TESTS_GRADIENT_CHECK_HPP

#include <random>
#include <vector>

#include "spectral_asrd/classifier.hpp"
#include "spectral_asrd/losses.hpp"
#include "spectral_asrd/network.hpp"

namespace spectral_asrd::testing {

struct ProbeResult {
  double max_relative_error = 0.0;
  std::size_t probes = 0;
};

inline double summed_loss(const TrainedModel& model, const Tensor& batch, const std::vector<int>& labels,
                          LossKind kind) {
  const Tensor logits = forward(model, batch);
  const auto losses = kind == LossKind::kCrossEntropy ? cross_entropy(logits, labels).loss
                                                      : dlr_attack_loss(logits, labels).loss;
  double s = 0;
  for (double l : losses) s += l;
  return s;
}

inline Tensor gaussian(const Shape& shape, std::mt19937_64& rng) {
  std::normal_distribution<float> n(0.0f, 1.0f);
  Tensor d(shape);
  for (float& v : d.data()) v = n(rng);
  return d;
}

inline Eigen::VectorXf probe_direction(const Eigen::VectorXf& gradient, std::mt19937_64& rng) {
  Eigen::VectorXf r = gaussian({static_cast<std::size_t>(gradient.size())}, rng).vec();
  Eigen::VectorXf d = r.normalized();
  if (gradient.norm() > 0) d += gradient.normalized();
  return d.normalized();
}

/// Central-difference directional derivatives compared with the analytic
/// reverse-mode gradient. Probe directions are unit vectors half along the
/// analytic gradient and half random, so a step of 1e-3 stays clear of most
/// ReLU kinks while the signal stays well above float32 rounding.
inline ProbeResult check_input_gradient(const TrainedModel& model, const Tensor& batch, const std::vector<int>& labels,
                                        LossKind kind, std::size_t probes, std::uint64_t seed, float step = 1e-3f) {
  const Tensor g = input_gradient(model, batch, labels, kind).gradient;
  std::mt19937_64 rng(seed);
  ProbeResult r;
  for (std::size_t p = 0; p < probes; ++p) {
    Tensor d(batch.shape());
    d.vec() = probe_direction(g.vec(), rng);
    Tensor plus = batch, minus = batch;
    plus.vec() += step * d.vec();
    minus.vec() -= step * d.vec();
    const double fd = (summed_loss(model, plus, labels, kind) - summed_loss(model, minus, labels, kind)) / (2.0 * step);
    const double an = g.vec().cast<double>().dot(d.vec().cast<double>());
    r.max_relative_error = std::max(r.max_relative_error, std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-8}));
    ++r.probes;
  }
  return r;
}

inline ProbeResult check_parameter_gradient(const TrainedModel& model, const Tensor& batch,
                                            const std::vector<int>& labels, std::size_t probes, std::uint64_t seed,
                                            float step = 1e-3f) {
  const ForwardTrace trace = forward_traced(model, batch);
  const auto ce = cross_entropy(trace.output, labels);
  const Gradients grads = backward(model, trace, ce.grad, true);
  std::mt19937_64 rng(seed);
  ProbeResult r;
  for (std::size_t p = 0; p < probes; ++p) {
    std::size_t total = 0;
    for (const auto& gp : grads.parameters) total += gp.size();
    Eigen::VectorXf flat(static_cast<Eigen::Index>(total));
    std::size_t off = 0;
    for (const auto& gp : grads.parameters) {
      flat.segment(off, gp.size()) = gp.vec();
      off += gp.size();
    }
    const Eigen::VectorXf dir = probe_direction(flat, rng);
    TrainedModel plus = model, minus = model;
    double an = 0;
    off = 0;
    for (std::size_t i = 0; i < model.parameters().size(); ++i) {
      Tensor d(model.parameters()[i].value.shape());
      d.vec() = dir.segment(off, d.size());
      off += d.size();
      plus.mutable_parameters()[i].value.vec() += step * d.vec();
      minus.mutable_parameters()[i].value.vec() -= step * d.vec();
      an += grads.parameters[i].vec().cast<double>().dot(d.vec().cast<double>());
    }
    const double fd = (summed_loss(plus, batch, labels, LossKind::kCrossEntropy) -
                       summed_loss(minus, batch, labels, LossKind::kCrossEntropy)) /
                      (2.0 * step);
    r.max_relative_error = std::max(r.max_relative_error, std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-8}));
    ++r.probes;
  }
  return r;
}

}  // namespace spectral_asrd::testing

#endif  // SPECTRAL_ASRD_TESTS_GRADIENT_CHECK_HPP
