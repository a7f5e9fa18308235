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

#ifndef SPECTRAL_ASRD_SPECTRAL_HPP
#define SPECTRAL_ASRD_SPECTRAL_HPP

#include <complex>
#include <span>
#include <vector>

#include "spectral_asrd/network.hpp"

namespace spectral_asrd {

/// Row-major grid of complex coefficients.
struct ComplexGrid {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::complex<double>> data;

  std::complex<double>& at(std::size_t l, std::size_t k) { return data[l * cols + k]; }
  const std::complex<double>& at(std::size_t l, std::size_t k) const { return data[l * cols + k]; }
};

/// In-place unnormalized 1-D DFT, sum_m x_m e^{-2 pi i k m / n}. Radix-2
/// for powers of two, direct summation otherwise.
void dft1d(std::span<std::complex<double>> x);

/// F(l, k) = sum_{m, n} X(m, n) e^{-2 pi i (l m / rows + k n / cols)}, computed
/// separably. For square inputs this is the usual N x N transform; other
/// shapes use each axis's own length.
ComplexGrid dft2d(std::span<const float> x, std::size_t rows, std::size_t cols);
ComplexGrid dft2d(const Tensor& x);

/// Elementwise modulus sqrt(re^2 + im^2), or its square when `squared`.
Tensor magnitude(const ComplexGrid& coeffs, bool squared = false);

/// Magnitude grid of every channel of a (C, H, W) image, concatenated in
/// channel order. Length C*H*W. Requires H == W.
std::vector<float> extract_bb(const Tensor& image, bool squared = false);

/// extract_bb of the image followed by the magnitude grids of every channel
/// of every tapped feature map, in tap order.
std::vector<float> extract_wb(const TrainedModel& model, const Tensor& image, std::span<const std::size_t> tap_ids,
                              bool squared = false);

/// Length of extract_wb's output.
std::size_t wb_feature_length(const TrainedModel& model, std::span<const std::size_t> tap_ids);

}  // namespace spectral_asrd

#endif  // SPECTRAL_ASRD_SPECTRAL_HPP
