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

#include "spectral_asrd/spectral.hpp"

#include <bit>
#include <cmath>
#include <numbers>

namespace spectral_asrd {

namespace {

void fft_radix2(std::span<std::complex<double>> x) {
  const std::size_t n = x.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(x[i], x[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * std::numbers::pi / static_cast<double>(len);
    for (std::size_t start = 0; start < n; start += len) {
      for (std::size_t k = 0; k < len / 2; ++k) {
        const std::complex<double> w = std::polar(1.0, ang * static_cast<double>(k));
        const auto a = x[start + k];
        const auto b = x[start + k + len / 2] * w;
        x[start + k] = a + b;
        x[start + k + len / 2] = a - b;
      }
    }
  }
}

void dft_direct(std::span<std::complex<double>> x) {
  const std::size_t n = x.size();
  std::vector<std::complex<double>> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    std::complex<double> s = 0;
    for (std::size_t m = 0; m < n; ++m) {
      // Reduce k*m mod n first so the angle stays exact for large products.
      const double ang = -2.0 * std::numbers::pi * static_cast<double>((k * m) % n) / static_cast<double>(n);
      s += x[m] * std::polar(1.0, ang);
    }
    out[k] = s;
  }
  std::copy(out.begin(), out.end(), x.begin());
}

void append_magnitudes(std::span<const float> plane, std::size_t h, std::size_t w, bool squared,
                       std::vector<float>& out) {
  const auto grid = dft2d(plane, h, w);
  for (const auto& c : grid.data) {
    const double m2 = c.real() * c.real() + c.imag() * c.imag();
    out.push_back(static_cast<float>(squared ? m2 : std::sqrt(m2)));
  }
}

}  // namespace

void dft1d(std::span<std::complex<double>> x) {
  if (x.size() <= 1) return;
  if (std::has_single_bit(x.size())) {
    fft_radix2(x);
  } else {
    dft_direct(x);
  }
}

ComplexGrid dft2d(std::span<const float> x, std::size_t rows, std::size_t cols) {
  if (rows == 0 || cols == 0) throw ContractError("dft2d of an empty grid");
  if (x.size() != rows * cols) throw ContractError("dft2d input length does not match its shape");
  ComplexGrid g{rows, cols, std::vector<std::complex<double>>(x.begin(), x.end())};
  for (std::size_t r = 0; r < rows; ++r) dft1d(std::span(g.data).subspan(r * cols, cols));
  std::vector<std::complex<double>> column(rows);
  for (std::size_t c = 0; c < cols; ++c) {
    for (std::size_t r = 0; r < rows; ++r) column[r] = g.at(r, c);
    dft1d(column);
    for (std::size_t r = 0; r < rows; ++r) g.at(r, c) = column[r];
  }
  return g;
}

ComplexGrid dft2d(const Tensor& x) {
  if (x.rank() != 2) throw ContractError("dft2d expects a 2-D tensor, got " + shape_string(x.shape()));
  return dft2d(x.data(), x.dim(0), x.dim(1));
}

Tensor magnitude(const ComplexGrid& coeffs, bool squared) {
  if (coeffs.rows == 0 || coeffs.cols == 0) throw ContractError("magnitude of an empty grid");
  Tensor out(Shape{coeffs.rows, coeffs.cols});
  for (std::size_t i = 0; i < coeffs.data.size(); ++i) {
    const double m2 = std::norm(coeffs.data[i]);
    out[i] = static_cast<float>(squared ? m2 : std::sqrt(m2));
  }
  return out;
}

std::vector<float> extract_bb(const Tensor& image, bool squared) {
  if (image.rank() != 3) throw ContractError("extract_bb expects (C, H, W), got " + shape_string(image.shape()));
  const std::size_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
  if (h != w) throw ContractError("extract_bb needs square images, got " + shape_string(image.shape()));
  std::vector<float> out;
  out.reserve(c * h * w);
  for (std::size_t ch = 0; ch < c; ++ch) append_magnitudes(image.data().subspan(ch * h * w, h * w), h, w, squared, out);
  return out;
}

std::vector<float> extract_wb(const TrainedModel& model, const Tensor& image, std::span<const std::size_t> tap_ids,
                              bool squared) {
  std::vector<float> out = extract_bb(image, squared);
  if (tap_ids.empty()) return out;
  const auto maps = feature_maps(model, image, tap_ids);
  for (const Tensor& m : maps) {
    const std::size_t c = m.dim(0), h = m.dim(1), w = m.dim(2);
    if (h != w) throw ContractError("white-box tap map is not square: " + shape_string(m.shape()));
    for (std::size_t ch = 0; ch < c; ++ch) append_magnitudes(m.data().subspan(ch * h * w, h * w), h, w, squared, out);
  }
  return out;
}

std::size_t wb_feature_length(const TrainedModel& model, std::span<const std::size_t> tap_ids) {
  std::size_t n = shape_size(model.input_shape());
  const auto shapes = model.spec().layer_shapes();
  for (std::size_t t : tap_ids) n += shape_size(shapes.at(t));
  return n;
}

}  // namespace spectral_asrd
