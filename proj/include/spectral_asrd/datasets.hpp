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

#ifndef SPECTRAL_ASRD_DATASETS_HPP
#define SPECTRAL_ASRD_DATASETS_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "spectral_asrd/dataset.hpp"

namespace spectral_asrd {

inline constexpr std::size_t kCifarRecordBytes = 3073;

/// Parses CIFAR-10 binary records: one label byte then 3072 pixel bytes,
/// channel-major (R, G, B), each plane row-major 32x32. Pixels map to v/255.
Dataset parse_cifar10(std::string_view bytes, std::string name = "cifar10");
/// Inverse of parse_cifar10 for images that sit on the v/255 grid.
std::string encode_cifar10(const Dataset& data);

/// data_batch_1..5.bin when `train`, else test_batch.bin.
Dataset load_cifar10(const std::filesystem::path& dir, bool train = false);

/// Binary PPM (P6, maxval 255) images, one subdirectory per class. Classes
/// follow `class_names` when given, else sorted subdirectory names.
Dataset load_ppm_dir(const std::filesystem::path& dir, const std::vector<std::string>& class_names = {});
/// Decodes one P6 image into (3, H, W).
Tensor parse_ppm(std::string_view bytes);

/// Class-conditional oriented textures: each class owns an orientation and a
/// spatial frequency (cycles per image, so classes look alike at every
/// resolution); samples vary phase, envelope position, colour and a fractal
/// background texture.
Dataset synth_dataset(std::size_t resolution, std::size_t n_classes, std::size_t n_samples, std::uint64_t seed);

/// Box-filter average pooling by `factor` along both spatial axes.
Dataset downsample(const Dataset& data, std::size_t factor);

}  // namespace spectral_asrd

#endif  // SPECTRAL_ASRD_DATASETS_HPP
