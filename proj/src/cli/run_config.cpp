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

#include <algorithm>
#include <cctype>
#include <charconv>

#include "spectral_asrd/bench.hpp"
#include "spectral_asrd/cli.hpp"
#include "spectral_asrd/errors.hpp"

namespace spectral_asrd {

namespace {

constexpr ConfigKey kKeys[] = {
    {"seed", "0", "cell seed: sample subset, pair split and detector"},
    {"dataset.kind", "synth", "synth | cifar10 | ppm"},
    {"dataset.path", "", "cifar10: directory of the binary batches; ppm: directory of class subdirectories"},
    {"dataset.resolution", "32", "image side; cifar10 and ppm images are box-filtered down to it"},
    {"dataset.classes", "4", "synth class count"},
    {"dataset.train_samples", "2000", "synth training images"},
    {"dataset.test_samples", "300", "synth test images; ppm images held out for testing"},
    {"dataset.train_seed", "1", "synth training seed"},
    {"dataset.test_seed", "2", "synth test seed and ppm split seed"},
    {"model.path", "model.spdf", "weight file written by train and read by attack and evaluate"},
    {"model.seed", "3", "initialization seed"},
    {"model.epochs", "10", "SGD epochs"},
    {"model.lr", "0.01", "SGD learning rate"},
    {"model.momentum", "0.9", "SGD momentum"},
    {"model.batch_size", "32", "SGD minibatch size"},
    {"model.train_seed", "4", "shuffling seed"},
    {"attack.method", "pgd", "fgsm | bim | pgd | deepfool | cw | apgd_ce | apgd_dlr | square | autoattack"},
    {"attack.epsilon", "8/255", "l-inf budget"},
    {"attack.alpha", "auto", "bim/pgd step; auto means epsilon * sweep.alpha_fraction"},
    {"attack.n_iters", "10", "bim/pgd iterations"},
    {"attack.apgd_iters", "100", "apgd iterations, also inside autoattack"},
    {"attack.square_queries", "5000", "square attack query budget"},
    {"attack.square_p_init", "0.8", "square attack initial fraction"},
    {"attack.cw_c_init", "0.001", "cw initial trade-off constant"},
    {"attack.cw_steps", "9", "cw binary-search steps"},
    {"attack.cw_inner_iters", "100", "cw Adam iterations per step"},
    {"attack.cw_lr", "0.01", "cw Adam learning rate"},
    {"attack.deepfool_max_iter", "50", "deepfool iteration cap"},
    {"attack.deepfool_overshoot", "0.02", "deepfool overshoot"},
    {"attack.seed", "5", "attack randomness"},
    {"attack.samples", "300", "test images attacked per cell"},
    {"attack.output", "attack", "directory of the adversarial artifacts"},
    {"detector.kinds", "lr,rf", "lr | rf, comma-separated"},
    {"detector.sources", "bb", "bb | wb, comma-separated"},
    {"detector.taps", "", "white-box relu layer indices; empty means all"},
    {"detector.trees", "100", "forest size"},
    {"detector.max_depth", "0", "tree depth cap, 0 for none"},
    {"detector.min_leaf", "1", "minimum rows per leaf"},
    {"detector.l2", "0.01", "logistic regression penalty"},
    {"detector.train_fraction", "0.8", "fraction of pairs used for training"},
    {"sweep.epsilons", "8/255,4/255,2/255,1/255,0.5/255", "epsilon grid"},
    {"sweep.resolutions", "16,32,64", "resolution grid"},
    {"sweep.attacks", "pgd,autoattack,deepfool,cw", "attack methods"},
    {"sweep.seeds", "", "cell seeds; empty means the seed key"},
    {"sweep.alpha_fraction", "0.25", "bim/pgd step as a fraction of epsilon"},
    {"sweep.cache", "cache", "cell cache directory; SPECTRAL_ASRD_CACHE overrides"},
    {"output.dir", "out", "directory for reports and resolved configs"},
    {"output.format", "csv,svg", "csv and/or svg"},
    {"output.group_by", "attack", "bar chart grouping: dataset | attack | epsilon | source | detector"},
};

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void bad_value(std::string_view key, const std::string& value, const char* what) {
  throw ConfigError(std::string(key) + ": '" + value + "' is not " + what);
}

}  // namespace

std::span<const ConfigKey> config_keys() { return kKeys; }

RunConfig::RunConfig() {
  for (const auto& k : kKeys) values_.emplace(std::string(k.name), std::string(k.default_value));
}

void RunConfig::set(std::string_view key, std::string_view value) {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown key '" + std::string(key) + "'");
  it->second = trim(value);
}

void RunConfig::merge_text(std::string_view text, std::string_view origin) {
  std::size_t line_no = 0, p = 0;
  while (p <= text.size()) {
    std::size_t q = text.find('\n', p);
    if (q == std::string_view::npos) q = text.size();
    std::string_view line = text.substr(p, q - p);
    p = q + 1;
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(std::string(origin) + ":" + std::to_string(line_no) + ": expected key=value");
    }
    try {
      set(trim(t.substr(0, eq)), t.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(std::string(origin) + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

const std::string& RunConfig::get(std::string_view key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown key '" + std::string(key) + "'");
  return it->second;
}

long long RunConfig::get_int(std::string_view key) const {
  const std::string& v = get(key);
  long long out = 0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || r.ec != std::errc() || r.ptr != v.data() + v.size()) bad_value(key, v, "an integer");
  return out;
}

std::uint64_t RunConfig::get_u64(std::string_view key) const {
  const std::string& v = get(key);
  std::uint64_t out = 0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || r.ec != std::errc() || r.ptr != v.data() + v.size()) bad_value(key, v, "an unsigned integer");
  return out;
}

double RunConfig::get_double(std::string_view key) const {
  const std::string& v = get(key);
  try {
    const auto d = parse_epsilon(v);
    if (d) return *d;
  } catch (const FormatError&) {
  }
  bad_value(key, v, "a number");
}

bool RunConfig::get_bool(std::string_view key) const {
  const std::string& v = get(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  bad_value(key, v, "a boolean");
}

std::vector<std::string> RunConfig::get_list(std::string_view key) const {
  std::vector<std::string> out;
  const std::string& v = get(key);
  std::size_t p = 0;
  while (p <= v.size()) {
    std::size_t q = v.find(',', p);
    if (q == std::string::npos) q = v.size();
    std::string item = trim(std::string_view(v).substr(p, q - p));
    if (!item.empty()) out.push_back(std::move(item));
    p = q + 1;
  }
  return out;
}

std::string RunConfig::resolved_text() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + "=" + v + "\n";
  return out;
}

}  // namespace spectral_asrd
