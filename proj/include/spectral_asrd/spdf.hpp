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

#ifndef SPECTRAL_ASRD_SPDF_HPP
#define SPECTRAL_ASRD_SPDF_HPP

#include <filesystem>
#include <string>
#include <vector>

#include "spectral_asrd/network.hpp"

namespace spectral_asrd {

// SPDF tensor container, little-endian, no padding:
//   "SPDF" | u16 version (=1) | u32 tensor count
//   per tensor: u16 name length | UTF-8 name | u8 rank | u32 dims[rank] | f32 payload

inline constexpr std::uint16_t kSpdfVersion = 1;

std::string encode_spdf(const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> decode_spdf(std::string_view bytes);

void write_spdf(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> read_spdf(const std::filesystem::path& path);

void save_weights(const TrainedModel& model, const std::filesystem::path& path);

/// Loads parameters for `spec`; names, count and shapes must match a freshly
/// built model of the same spec, otherwise FormatError.
TrainedModel load_weights(const NetworkSpec& spec, const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace spectral_asrd

#endif  // SPECTRAL_ASRD_SPDF_HPP
