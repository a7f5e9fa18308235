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

#include <json.hpp>

#include "spectral_asrd/attacks.hpp"
#include "spectral_asrd/spdf.hpp"

namespace spectral_asrd {

namespace {

constexpr const char* kManifest = "manifest.json";
constexpr const char* kTensors = "tensors.spdf";

}  // namespace

void save_adversarial(const AdversarialBatch& batch, const std::filesystem::path& dir) {
  nlohmann::json j;
  j["method"] = batch.method;
  j["epsilon"] = batch.epsilon;
  j["norm"] = std::string(norm_name(batch.norm));
  j["seed"] = batch.seed;
  j["labels"] = batch.labels;
  j["success"] = batch.success;
  j["queries"] = batch.queries;
  j["stage"] = batch.stage;
  j["errored"] = batch.errored;
  std::filesystem::create_directories(dir);
  write_file(dir / kManifest, j.dump(2) + "\n");
  write_spdf(dir / kTensors, {{"clean", batch.clean}, {"adversarial", batch.adversarial}});
}

AdversarialBatch load_adversarial(const std::filesystem::path& dir) {
  AdversarialBatch out;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(dir / kManifest));
    out.method = j.at("method").get<std::string>();
    out.epsilon = j.at("epsilon").get<double>();
    out.norm = parse_norm(j.at("norm").get<std::string>());
    out.seed = j.at("seed").get<std::uint64_t>();
    out.labels = j.at("labels").get<std::vector<int>>();
    out.success = j.at("success").get<std::vector<bool>>();
    out.queries = j.at("queries").get<std::vector<std::size_t>>();
    out.stage = j.value("stage", std::vector<std::string>{});
    out.errored = j.value("errored", std::vector<bool>(out.labels.size(), false));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("bad adversarial manifest in " + dir.string() + ": " + e.what());
  } catch (const ConfigError& e) {
    throw FormatError("bad adversarial manifest in " + dir.string() + ": " + e.what());
  }
  auto tensors = read_spdf(dir / kTensors);
  for (auto& t : tensors) {
    if (t.name == "clean") out.clean = std::move(t.value);
    if (t.name == "adversarial") out.adversarial = std::move(t.value);
  }
  const std::size_t n = out.labels.size();
  if (out.clean.empty() || out.adversarial.empty() || out.clean.shape() != out.adversarial.shape() ||
      out.clean.dim(0) != n || out.success.size() != n || out.queries.size() != n) {
    throw FormatError("adversarial batch in " + dir.string() + " is inconsistent");
  }
  return out;
}

}  // namespace spectral_asrd
