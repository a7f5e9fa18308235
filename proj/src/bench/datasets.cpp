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

#include "spectral_asrd/datasets.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>
#include <random>

#include "spectral_asrd/hashing.hpp"
#include "spectral_asrd/spdf.hpp"

namespace spectral_asrd {

Dataset parse_cifar10(std::string_view bytes, std::string name) {
  if (bytes.empty() || bytes.size() % kCifarRecordBytes != 0) {
    throw FormatError("CIFAR-10 data of " + std::to_string(bytes.size()) + " bytes is not a whole number of " +
                      std::to_string(kCifarRecordBytes) + "-byte records");
  }
  const std::size_t n = bytes.size() / kCifarRecordBytes;
  Dataset d;
  d.name = std::move(name);
  d.num_classes = 10;
  d.images = Tensor(Shape{n, 3, 32, 32});
  d.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto* rec = reinterpret_cast<const unsigned char*>(bytes.data()) + i * kCifarRecordBytes;
    if (rec[0] > 9) throw FormatError("CIFAR-10 record " + std::to_string(i) + " has label " + std::to_string(rec[0]));
    d.labels[i] = rec[0];
    auto px = d.images.slice(i);
    for (std::size_t j = 0; j < 3072; ++j) px[j] = static_cast<float>(rec[1 + j]) / 255.0f;
  }
  return d;
}

std::string encode_cifar10(const Dataset& data) {
  if (data.images.rank() != 4 || data.images.stride0() != 3072) throw ContractError("CIFAR-10 images are 3x32x32");
  std::string out;
  out.reserve(data.size() * kCifarRecordBytes);
  for (std::size_t i = 0; i < data.size(); ++i) {
    out.push_back(static_cast<char>(data.labels[i]));
    for (float v : data.images.slice(i)) out.push_back(static_cast<char>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f)));
  }
  return out;
}

Dataset load_cifar10(const std::filesystem::path& dir, bool train) {
  std::vector<std::string> files;
  if (train) {
    for (int i = 1; i <= 5; ++i) files.push_back("data_batch_" + std::to_string(i) + ".bin");
  } else {
    files.push_back("test_batch.bin");
  }
  std::string bytes;
  for (const auto& f : files) bytes += read_file(dir / f);
  return parse_cifar10(bytes, train ? "cifar10-train" : "cifar10-test");
}

Tensor parse_ppm(std::string_view bytes) {
  std::size_t pos = 0;
  auto token = [&]() {
    for (;;) {
      while (pos < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
      if (pos < bytes.size() && bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
        continue;
      }
      break;
    }
    const std::size_t start = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    return std::string(bytes.substr(start, pos - start));
  };
  auto number = [&](const char* what) {
    const std::string t = token();
    if (t.empty() || !std::all_of(t.begin(), t.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
      throw FormatError(std::string("PPM header has a bad ") + what);
    }
    return static_cast<std::size_t>(std::stoul(t));
  };
  if (token() != "P6") throw FormatError("PPM magic is not P6");
  const std::size_t w = number("width"), h = number("height"), maxval = number("maxval");
  if (maxval != 255) throw FormatError("PPM maxval " + std::to_string(maxval) + " is not 255");
  if (w == 0 || h == 0) throw FormatError("PPM has a zero dimension");
  ++pos;  // single whitespace byte before the raster
  if (bytes.size() < pos || bytes.size() - pos != 3 * w * h) throw FormatError("PPM raster size mismatch");
  Tensor img(Shape{3, h, w});
  const auto* raster = reinterpret_cast<const unsigned char*>(bytes.data()) + pos;
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t c = 0; c < 3; ++c) img[(c * h + y) * w + x] = raster[(y * w + x) * 3 + c] / 255.0f;
    }
  }
  return img;
}

Dataset load_ppm_dir(const std::filesystem::path& dir, const std::vector<std::string>& class_names) {
  std::vector<std::string> classes = class_names;
  if (classes.empty()) {
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
      if (e.is_directory()) classes.push_back(e.path().filename().string());
    }
    std::sort(classes.begin(), classes.end());
  }
  if (classes.empty()) throw FormatError("no class subdirectories in " + dir.string());
  std::vector<Tensor> images;
  Dataset d;
  d.name = dir.filename().string();
  d.num_classes = classes.size();
  for (std::size_t k = 0; k < classes.size(); ++k) {
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(dir / classes[k])) {
      if (e.is_regular_file()) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      Tensor img = parse_ppm(read_file(f));
      if (!images.empty() && img.shape() != images.front().shape()) {
        throw FormatError("PPM " + f.string() + " is " + shape_string(img.shape()) + ", expected " +
                          shape_string(images.front().shape()));
      }
      images.push_back(std::move(img));
      d.labels.push_back(static_cast<int>(k));
    }
  }
  if (images.empty()) throw FormatError("no PPM images under " + dir.string());
  d.images = stack<float>(images);
  return d;
}

namespace {

constexpr std::size_t kNative = 128;
constexpr double kOctaveSigma = 0.02;

// Sum of bilinearly upsampled white-noise grids of side 2, 4, ..., kNative
// with equal variance per octave: a periodic texture whose power falls off
// roughly as 1/f^2, like natural images. Overwrites `out` (3 planes).
void fractal_texture(std::mt19937_64& rng, std::vector<double>& out) {
  std::normal_distribution<double> g(0.0, kOctaveSigma);
  std::fill(out.begin(), out.end(), 0.0);
  std::vector<double> grid;
  std::vector<std::size_t> i0(kNative), i1(kNative);
  std::vector<double> t(kNative);
  for (std::size_t side = 2; side <= kNative; side *= 2) {
    const double scale = double(side) / double(kNative);
    // Interpolation taps are the same along both axes.
    for (std::size_t p = 0; p < kNative; ++p) {
      const double g_pos = (p + 0.5) * scale - 0.5;
      const double fl = std::floor(g_pos);
      t[p] = g_pos - fl;
      i0[p] = static_cast<std::size_t>(fl + double(side)) % side;
      i1[p] = (i0[p] + 1) % side;
    }
    for (std::size_t c = 0; c < 3; ++c) {
      grid.resize(side * side);
      for (double& v : grid) v = g(rng);
      for (std::size_t y = 0; y < kNative; ++y) {
        const double* r0 = &grid[i0[y] * side];
        const double* r1 = &grid[i1[y] * side];
        double* dst = &out[(c * kNative + y) * kNative];
        for (std::size_t x = 0; x < kNative; ++x) {
          const double top = r0[i0[x]] * (1 - t[x]) + r0[i1[x]] * t[x];
          const double bottom = r1[i0[x]] * (1 - t[x]) + r1[i1[x]] * t[x];
          dst[x] += top * (1 - t[y]) + bottom * t[y];
        }
      }
    }
  }
}

}  // namespace

Dataset synth_dataset(std::size_t resolution, std::size_t n_classes, std::size_t n_samples, std::uint64_t seed) {
  if (resolution != 16 && resolution != 32 && resolution != 64 && resolution != 128) {
    throw ContractError("synthetic resolution must be 16, 32, 64 or 128");
  }
  if (n_classes < 2 || n_samples == 0) throw ContractError("synthetic data needs >= 2 classes and >= 1 sample");
  constexpr double kPi = std::numbers::pi;
  // Every image is rendered at 128x128 and box-filtered down to the requested
  // size, the way downsampled photo datasets are made.
  const std::size_t r = resolution, f = kNative / r;
  Dataset d;
  d.name = "synth" + std::to_string(r);
  d.num_classes = n_classes;
  d.images = Tensor(Shape{n_samples, 3, r, r});
  d.labels.resize(n_samples);
  std::vector<double> native(3 * kNative * kNative);
  for (std::size_t i = 0; i < n_samples; ++i) {
    std::mt19937_64 rng(derive_seed(seed, i));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const auto k = static_cast<int>(i % n_classes);
    d.labels[i] = k;
    const double theta = kPi * k / n_classes + (u(rng) - 0.5) * 0.2;
    const double freq = 3.0 + 2.0 * (k % 2);  // cycles per image
    const double phase = 2.0 * kPi * u(rng);
    const double cx = 0.3 + 0.4 * u(rng), cy = 0.3 + 0.4 * u(rng);
    const double width = 0.25 + 0.15 * u(rng);
    const double amp = 0.12 + 0.05 * u(rng);
    // A class-independent grating the classifier has to learn to ignore.
    const double d_theta = kPi * u(rng), d_freq = 2.0 + 4.0 * u(rng), d_phase = 2.0 * kPi * u(rng);
    const double d_amp = 0.05 + 0.03 * u(rng);
    double base[3], gain[3];
    for (int c = 0; c < 3; ++c) {
      base[c] = 0.35 + 0.3 * u(rng);
      gain[c] = 0.6 + 0.4 * u(rng);
    }
    fractal_texture(rng, native);
    for (std::size_t y = 0; y < kNative; ++y) {
      for (std::size_t x = 0; x < kNative; ++x) {
        const double uu = (x + 0.5) / kNative, vv = (y + 0.5) / kNative;
        const double env = std::exp(-((uu - cx) * (uu - cx) + (vv - cy) * (vv - cy)) / (2 * width * width));
        const double wave = std::cos(2 * kPi * freq * (uu * std::cos(theta) + vv * std::sin(theta)) + phase);
        const double distractor =
            d_amp * std::cos(2 * kPi * d_freq * (uu * std::cos(d_theta) + vv * std::sin(d_theta)) + d_phase);
        for (std::size_t c = 0; c < 3; ++c) {
          double& v = native[(c * kNative + y) * kNative + x];
          v = std::clamp(v + base[c] + amp * gain[c] * env * wave + distractor, 0.0, 1.0);
        }
      }
    }
    auto px = d.images.slice(i);
    for (std::size_t c = 0; c < 3; ++c) {
      for (std::size_t y = 0; y < r; ++y) {
        for (std::size_t x = 0; x < r; ++x) {
          double s = 0;
          for (std::size_t dy = 0; dy < f; ++dy) {
            for (std::size_t dx = 0; dx < f; ++dx) s += native[(c * kNative + y * f + dy) * kNative + x * f + dx];
          }
          px[(c * r + y) * r + x] = static_cast<float>(s / double(f * f));
        }
      }
    }
  }
  return d;
}

Dataset downsample(const Dataset& data, std::size_t factor) {
  if (factor == 0) throw ContractError("downsample factor must be >= 1");
  const std::size_t n = data.images.dim(0), c = data.images.dim(1), h = data.images.dim(2), w = data.images.dim(3);
  if (h % factor != 0 || w % factor != 0) {
    throw ContractError("image " + std::to_string(h) + "x" + std::to_string(w) + " not divisible by " +
                        std::to_string(factor));
  }
  const std::size_t oh = h / factor, ow = w / factor;
  Dataset out = data;
  out.images = Tensor(Shape{n, c, oh, ow});
  const double inv = 1.0 / static_cast<double>(factor * factor);
  for (std::size_t b = 0; b < n; ++b) {
    auto src = data.images.slice(b);
    auto dst = out.images.slice(b);
    for (std::size_t ch = 0; ch < c; ++ch) {
      for (std::size_t y = 0; y < oh; ++y) {
        for (std::size_t x = 0; x < ow; ++x) {
          double s = 0;
          for (std::size_t dy = 0; dy < factor; ++dy) {
            for (std::size_t dx = 0; dx < factor; ++dx) s += src[(ch * h + y * factor + dy) * w + x * factor + dx];
          }
          dst[(ch * oh + y) * ow + x] = static_cast<float>(std::min(s * inv, 1.0));
        }
      }
    }
  }
  return out;
}

}  // namespace spectral_asrd
