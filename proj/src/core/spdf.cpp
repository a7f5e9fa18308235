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

#include "spectral_asrd/spdf.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace spectral_asrd {

namespace {

static_assert(std::endian::native == std::endian::little, "SPDF I/O assumes a little-endian host");

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <typename T>
  T get(const char* what) {
    need(sizeof(T), what);
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  std::string_view take(std::size_t n, const char* what) {
    need(n, what);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) {
      throw FormatError(std::string("SPDF truncated while reading ") + what + " at byte " + std::to_string(pos_));
    }
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_spdf(const std::vector<NamedTensor>& tensors) {
  std::string out = "SPDF";
  put<std::uint16_t>(out, kSpdfVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    if (t.name.size() > 0xffff) throw ContractError("tensor name too long: " + t.name.substr(0, 32));
    if (t.value.rank() > 0xff) throw ContractError("tensor rank too large");
    put<std::uint16_t>(out, static_cast<std::uint16_t>(t.name.size()));
    out += t.name;
    put<std::uint8_t>(out, static_cast<std::uint8_t>(t.value.rank()));
    for (std::size_t d : t.value.shape()) put<std::uint32_t>(out, static_cast<std::uint32_t>(d));
    out.append(reinterpret_cast<const char*>(t.value.data().data()), t.value.size() * sizeof(float));
  }
  return out;
}

std::vector<NamedTensor> decode_spdf(std::string_view bytes) {
  Reader r(bytes);
  if (r.take(4, "magic") != "SPDF") throw FormatError("SPDF magic mismatch");
  const auto version = r.get<std::uint16_t>("version");
  if (version != kSpdfVersion) throw FormatError("SPDF version " + std::to_string(version) + " unsupported");
  const auto count = r.get<std::uint32_t>("tensor count");
  std::vector<NamedTensor> out;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = r.get<std::uint16_t>("name length");
    std::string name(r.take(name_len, "name"));
    const auto rank = r.get<std::uint8_t>("rank");
    Shape shape(rank);
    for (auto& d : shape) {
      d = r.get<std::uint32_t>("dims");
      if (d == 0) throw FormatError("SPDF tensor '" + name + "' has a zero dimension");
    }
    const std::size_t n = shape_size(shape);
    auto payload = r.take(n * sizeof(float), "payload");
    Tensor::Storage data(n);
    std::memcpy(data.data(), payload.data(), payload.size());
    out.push_back({std::move(name), Tensor(std::move(shape), std::move(data))});
  }
  if (!r.done()) throw FormatError("SPDF has trailing bytes after " + std::to_string(count) + " tensors");
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

void write_spdf(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors) {
  write_file(path, encode_spdf(tensors));
}

std::vector<NamedTensor> read_spdf(const std::filesystem::path& path) { return decode_spdf(read_file(path)); }

void save_weights(const TrainedModel& model, const std::filesystem::path& path) {
  write_spdf(path, model.parameters());
}

TrainedModel load_weights(const NetworkSpec& spec, const std::filesystem::path& path) {
  auto tensors = read_spdf(path);
  const TrainedModel reference = build_model(spec, 0);
  if (tensors.size() != reference.parameters().size()) {
    throw FormatError("weight file holds " + std::to_string(tensors.size()) + " tensors, network needs " +
                      std::to_string(reference.parameters().size()));
  }
  return TrainedModel(spec, std::move(tensors));
}

}  // namespace spectral_asrd
