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
#include <atomic>
#include <map>
#include <thread>

#include <json.hpp>

#include "spectral_asrd/bench.hpp"
#include "spectral_asrd/errors.hpp"
#include "spectral_asrd/hashing.hpp"
#include "spectral_asrd/spdf.hpp"

namespace spectral_asrd {

namespace {

using nlohmann::json;

bool is_minimal_norm(AttackMethod m) { return m == AttackMethod::kDeepfool || m == AttackMethod::kCw; }

AttackConfig cell_attack(const SweepSpec& spec, AttackMethod method, std::optional<double> epsilon,
                         std::uint64_t seed) {
  AttackConfig c = spec.attack;
  c.method = method;
  c.norm = native_norm(method);
  c.seed = seed;
  if (epsilon) {
    c.epsilon = *epsilon;
    c.alpha = *epsilon * spec.alpha_fraction;
  }
  return c;
}

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> opt_from(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

json row_to_json(const EvalRow& r) {
  return {{"dataset", r.dataset},
          {"attack", r.attack},
          {"epsilon", opt(r.epsilon)},
          {"source", source_name(r.source)},
          {"detector", detector_name(r.detector)},
          {"asr", opt(r.asr)},
          {"f1", opt(r.f1)},
          {"fnr", opt(r.fnr)},
          {"asrd", opt(r.asrd)},
          {"n_samples", r.n_samples},
          {"seed", r.seed},
          {"note", r.note}};
}

EvalRow row_from_json(const json& j) {
  EvalRow r;
  r.dataset = j.at("dataset").get<std::string>();
  r.attack = j.at("attack").get<std::string>();
  r.epsilon = opt_from(j.at("epsilon"));
  r.source = parse_source(j.at("source").get<std::string>());
  r.detector = parse_detector(j.at("detector").get<std::string>());
  r.asr = opt_from(j.at("asr"));
  r.f1 = opt_from(j.at("f1"));
  r.fnr = opt_from(j.at("fnr"));
  r.asrd = opt_from(j.at("asrd"));
  r.n_samples = j.at("n_samples").get<std::size_t>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.note = j.at("note").get<std::string>();
  return r;
}

struct Cell {
  std::string config;
  std::string key;
  FeatureSource source;
  DetectorKind detector;
  std::optional<EvalRow> row;
};

struct Group {
  std::size_t resolution;
  AttackMethod method;
  std::optional<double> epsilon;
  std::uint64_t seed;
  std::vector<Cell> cells;
  bool pending() const {
    return std::any_of(cells.begin(), cells.end(), [](const Cell& c) { return !c.row; });
  }
};

std::optional<EvalRow> load_cached(const std::filesystem::path& dir, const Cell& cell) {
  const auto path = dir / (cell.key + ".json");
  if (dir.empty() || !std::filesystem::exists(path)) return std::nullopt;
  try {
    const json j = json::parse(read_file(path));
    if (j.at("config").get<std::string>() != cell.config) return std::nullopt;
    return row_from_json(j.at("row"));
  } catch (const std::exception&) {
    return std::nullopt;  // unreadable entries are recomputed
  }
}

void store_cached(const std::filesystem::path& dir, const Cell& cell) {
  if (dir.empty()) return;
  std::filesystem::create_directories(dir);
  const json j = {{"config", cell.config}, {"row", row_to_json(*cell.row)}};
  const auto path = dir / (cell.key + ".json");
  auto tmp = path;
  tmp += ".tmp";
  write_file(tmp, j.dump(2) + "\n");
  std::filesystem::rename(tmp, path);
}

EvalRow failed_row(const std::string& dataset, const Group& g, const Cell& c, const std::string& what) {
  EvalRow r;
  r.dataset = dataset;
  r.attack = std::string(method_name(g.method));
  r.epsilon = g.epsilon;
  r.source = c.source;
  r.detector = c.detector;
  r.seed = g.seed;
  r.note = "error: " + what;
  return r;
}

}  // namespace

void SweepSpec::validate() const {
  if (epsilons.empty() || resolutions.empty() || attacks.empty() || detectors.empty() || sources.empty() ||
      seeds.empty()) {
    throw ConfigError("sweep lists must be nonempty");
  }
  for (double e : epsilons) {
    if (!(e > 0.0)) throw ConfigError("sweep epsilons must be positive");
  }
  if (!(alpha_fraction > 0.0 && alpha_fraction <= 1.0)) throw ConfigError("alpha_fraction must lie in (0, 1]");
}

std::string cell_config_json(const SweepSpec& spec, std::size_t resolution, AttackMethod method,
                             std::optional<double> epsilon, std::uint64_t seed, FeatureSource source,
                             DetectorKind detector) {
  const AttackConfig a = cell_attack(spec, method, epsilon, seed);
  const CellOptions& o = spec.cell;
  json j = {{"tag", spec.tag},
            {"resolution", resolution},
            {"method", method_name(method)},
            {"epsilon", opt(epsilon)},
            {"seed", seed},
            {"source", source_name(source)},
            {"detector", detector_name(detector)},
            {"n_samples", o.n_samples},
            {"train_fraction", o.train_fraction},
            {"custom_predictor", static_cast<bool>(o.predictor)}};
  if (epsilon) {
    j["alpha"] = a.alpha;
  }
  switch (method) {
    case AttackMethod::kBim:
    case AttackMethod::kPgd:
      j["n_iters"] = a.n_iters;
      break;
    case AttackMethod::kApgdCe:
    case AttackMethod::kApgdDlr:
      j["apgd_iters"] = a.apgd_iters;
      break;
    case AttackMethod::kSquare:
      j["square"] = {a.square_n_queries, a.square_p_init};
      break;
    case AttackMethod::kAutoAttack:
      j["apgd_iters"] = a.apgd_iters;
      j["square"] = {a.square_n_queries, a.square_p_init};
      break;
    case AttackMethod::kDeepfool:
      j["deepfool"] = {a.deepfool_max_iter, a.deepfool_overshoot};
      break;
    case AttackMethod::kCw:
      j["cw"] = {a.cw_c_init, a.cw_binary_search_steps, a.cw_inner_iters, a.cw_lr};
      break;
    case AttackMethod::kFgsm:
      break;
  }
  if (source == FeatureSource::kWb) j["tap_ids"] = o.tap_ids;
  if (detector == DetectorKind::kLogreg) {
    j["hyper"] = {o.hyper.l2, o.hyper.max_epochs, o.hyper.tolerance};
  } else {
    j["hyper"] = {o.hyper.n_trees, o.hyper.max_depth, o.hyper.min_leaf, o.hyper.bootstrap};
  }
  return j.dump();
}

std::string cell_key(std::string_view config_json) { return hex16(fnv1a64(config_json)); }

SweepResult run_sweep(const SweepSpec& spec, const TargetProvider& targets, const SweepOptions& options) {
  spec.validate();
  if (!targets) throw ConfigError("sweep needs a target provider");

  std::vector<Group> groups;
  for (std::size_t res : spec.resolutions) {
    for (AttackMethod m : spec.attacks) {
      std::vector<std::optional<double>> eps;
      if (is_minimal_norm(m)) {
        eps.push_back(std::nullopt);
      } else {
        eps.assign(spec.epsilons.begin(), spec.epsilons.end());
      }
      for (const auto& e : eps) {
        for (std::uint64_t seed : spec.seeds) {
          Group g{res, m, e, seed, {}};
          for (FeatureSource src : spec.sources) {
            for (DetectorKind det : spec.detectors) {
              Cell c;
              c.config = cell_config_json(spec, res, m, e, seed, src, det);
              c.key = cell_key(c.config);
              c.source = src;
              c.detector = det;
              c.row = load_cached(options.cache_dir, c);
              g.cells.push_back(std::move(c));
            }
          }
          groups.push_back(std::move(g));
        }
      }
    }
  }

  // Targets are built up front and only for resolutions with work left.
  std::map<std::size_t, SweepTarget> built;
  std::map<std::size_t, std::string> target_errors;
  for (const Group& g : groups) {
    if (!g.pending() || built.count(g.resolution) || target_errors.count(g.resolution)) continue;
    try {
      built.emplace(g.resolution, targets(g.resolution));
    } catch (const std::exception& e) {
      target_errors.emplace(g.resolution, e.what());
    }
  }

  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> computed{0};
  auto work = [&] {
    for (std::size_t gi = next++; gi < groups.size(); gi = next++) {
      Group& g = groups[gi];
      if (!g.pending()) continue;
      const std::string dataset = built.count(g.resolution) ? built.at(g.resolution).dataset : "";
      std::optional<AttackedCell> attacked;
      std::string attack_error;
      const AttackConfig cfg = cell_attack(spec, g.method, g.epsilon, g.seed);
      if (auto it = target_errors.find(g.resolution); it != target_errors.end()) {
        attack_error = it->second;
      } else {
        try {
          attacked = attack_cell(built.at(g.resolution).model, built.at(g.resolution).data, cfg, g.seed, spec.cell);
        } catch (const std::exception& e) {
          attack_error = e.what();
        }
      }
      for (Cell& c : g.cells) {
        if (c.row) continue;
        ++computed;
        if (!attacked) {
          c.row = failed_row(dataset, g, c, attack_error);
          continue;
        }
        try {
          c.row = detect_cell(built.at(g.resolution).model, dataset, cfg, *attacked, c.detector, c.source, g.seed,
                              spec.cell);
        } catch (const std::exception& e) {
          c.row = failed_row(dataset, g, c, e.what());
          continue;
        }
        try {
          store_cached(options.cache_dir, c);
        } catch (const std::exception& e) {
          c.row->note = "cache write failed: " + std::string(e.what());
        }
      }
    }
  };
  const std::size_t n_workers = std::max<std::size_t>(1, options.workers);
  if (n_workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < n_workers; ++i) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }

  SweepResult out;
  out.computed_cells = computed;
  for (const Group& g : groups) {
    for (const Cell& c : g.cells) out.report.rows.push_back(*c.row);
  }
  return out;
}

}  // namespace spectral_asrd
