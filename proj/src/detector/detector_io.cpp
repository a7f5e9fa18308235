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

#include <bit>
#include <cstring>
#include <json.hpp>

#include "spectral_asrd/detector.hpp"
#include "spectral_asrd/spdf.hpp"

namespace spectral_asrd {

namespace {

static_assert(std::endian::native == std::endian::little, "detector I/O assumes a little-endian host");

constexpr std::uint16_t kForestVersion = 1;

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

class Cursor {
 public:
  explicit Cursor(std::string_view bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    if (bytes_.size() - pos_ < sizeof(T)) throw FormatError("forest file truncated at byte " + std::to_string(pos_));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

std::string encode_forest(const DetectorModel& m) {
  std::string out = "SPRF";
  put<std::uint16_t>(out, kForestVersion);
  put<std::uint64_t>(out, m.seed);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(m.n_features()));
  for (double v : m.normalization.mean) put<double>(out, v);
  for (double v : m.normalization.stddev) put<double>(out, v);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(m.trees.size()));
  for (const Tree& t : m.trees) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.size()));
    for (const TreeNode& n : t) {
      put<std::int32_t>(out, n.feature);
      put<float>(out, n.threshold);
      put<std::int32_t>(out, n.left);
      put<std::int32_t>(out, n.right);
      put<std::uint32_t>(out, n.count[0]);
      put<std::uint32_t>(out, n.count[1]);
    }
  }
  return out;
}

DetectorModel decode_forest(std::string_view bytes) {
  Cursor c(bytes.substr(4));
  if (c.get<std::uint16_t>() != kForestVersion) throw FormatError("unsupported forest file version");
  DetectorModel m;
  m.kind = DetectorKind::kRandomForest;
  m.seed = c.get<std::uint64_t>();
  const auto d = c.get<std::uint32_t>();
  m.normalization.mean.resize(d);
  m.normalization.stddev.resize(d);
  for (auto& v : m.normalization.mean) v = c.get<double>();
  for (auto& v : m.normalization.stddev) v = c.get<double>();
  const auto n_trees = c.get<std::uint32_t>();
  m.trees.resize(n_trees);
  for (Tree& t : m.trees) {
    t.resize(c.get<std::uint32_t>());
    if (t.empty()) throw FormatError("forest holds an empty tree");
    for (TreeNode& n : t) {
      n.feature = c.get<std::int32_t>();
      n.threshold = c.get<float>();
      n.left = c.get<std::int32_t>();
      n.right = c.get<std::int32_t>();
      n.count[0] = c.get<std::uint32_t>();
      n.count[1] = c.get<std::uint32_t>();
    }
    const auto size = static_cast<std::int32_t>(t.size());
    for (const TreeNode& n : t) {
      if (n.feature < 0) continue;
      if (n.feature >= static_cast<std::int32_t>(d) || n.left <= 0 || n.right <= 0 || n.left >= size ||
          n.right >= size) {
        throw FormatError("forest node references outside its tree");
      }
    }
  }
  if (!c.done()) throw FormatError("forest file has trailing bytes");
  return m;
}

}  // namespace

void save_detector(const DetectorModel& model, const std::filesystem::path& path) {
  if (model.kind == DetectorKind::kRandomForest) {
    write_file(path, encode_forest(model));
    return;
  }
  nlohmann::json j;
  j["kind"] = "logreg";
  j["seed"] = model.seed;
  j["bias"] = model.bias;
  j["weights"] = model.weights;
  j["mean"] = model.normalization.mean;
  j["stddev"] = model.normalization.stddev;
  write_file(path, j.dump() + "\n");
}

DetectorModel load_detector(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  if (bytes.rfind("SPRF", 0) == 0) return decode_forest(bytes);
  try {
    const auto j = nlohmann::json::parse(bytes);
    if (j.at("kind") != "logreg") throw FormatError("unknown detector kind in " + path.string());
    DetectorModel m;
    m.kind = DetectorKind::kLogreg;
    m.seed = j.at("seed").get<std::uint64_t>();
    m.bias = j.at("bias").get<double>();
    m.weights = j.at("weights").get<std::vector<double>>();
    m.normalization.mean = j.at("mean").get<std::vector<double>>();
    m.normalization.stddev = j.at("stddev").get<std::vector<double>>();
    if (m.weights.size() != m.normalization.mean.size() || m.weights.size() != m.normalization.stddev.size()) {
      throw FormatError("logistic detector arrays disagree in length");
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("bad detector file " + path.string() + ": " + e.what());
  }
}

void save_feature_set(const SpectralFeatureSet& set, const std::filesystem::path& dir) {
  nlohmann::json j;
  j["source"] = std::string(source_name(set.source));
  j["tap_ids"] = set.tap_ids;
  j["squared"] = set.squared;
  j["labels"] = set.labels;
  j["pair_ids"] = set.pair_ids;
  std::filesystem::create_directories(dir);
  write_file(dir / "manifest.json", j.dump(2) + "\n");
  write_spdf(dir / "features.spdf", {{"features", set.features}});
}

SpectralFeatureSet load_feature_set(const std::filesystem::path& dir) {
  SpectralFeatureSet set;
  try {
    const auto j = nlohmann::json::parse(read_file(dir / "manifest.json"));
    set.source = parse_source(j.at("source").get<std::string>());
    set.tap_ids = j.at("tap_ids").get<std::vector<std::size_t>>();
    set.squared = j.at("squared").get<bool>();
    set.labels = j.at("labels").get<std::vector<int>>();
    set.pair_ids = j.at("pair_ids").get<std::vector<std::size_t>>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("bad feature manifest in " + dir.string() + ": " + e.what());
  }
  auto tensors = read_spdf(dir / "features.spdf");
  if (tensors.size() != 1 || tensors[0].name != "features") throw FormatError("feature file must hold 'features'");
  set.features = std::move(tensors[0].value);
  if (set.features.rank() != 2 || set.features.dim(0) != set.labels.size() || set.pair_ids.size() != set.labels.size()) {
    throw FormatError("feature set in " + dir.string() + " is inconsistent");
  }
  return set;
}

}  // namespace spectral_asrd
