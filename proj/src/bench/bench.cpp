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

#include "spectral_asrd/bench.hpp"

#include <algorithm>
#include <cmath>

#include "spectral_asrd/errors.hpp"
#include "spectral_asrd/hashing.hpp"

namespace spectral_asrd {

double asr(const AdversarialBatch& batch) {
  if (batch.size() == 0) throw ContractError("asr of an empty batch");
  const auto hits = std::count(batch.success.begin(), batch.success.end(), true);
  return 100.0 * static_cast<double>(hits) / static_cast<double>(batch.size());
}

double asrd(double fnr, double asr_percent) {
  if (!(fnr >= 0.0 && fnr <= 1.0)) throw ContractError("fnr must lie in [0, 1]");
  if (!(asr_percent >= 0.0 && asr_percent <= 100.0)) throw ContractError("asr must lie in [0, 100]");
  return fnr * asr_percent;
}

namespace {

constexpr double kRowSlack = 0.02;
constexpr double kTiny = 1e-9;

bool is_minimal_norm(AttackMethod m) { return m == AttackMethod::kDeepfool || m == AttackMethod::kCw; }

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

}  // namespace

std::string row_violation(const EvalRow& row) {
  const std::pair<const char*, const std::optional<double>*> fields[] = {
      {"asr", &row.asr}, {"f1", &row.f1}, {"fnr", &row.fnr}, {"asrd", &row.asrd}};
  for (const auto& [name, v] : fields) {
    if (*v && !(**v >= 0.0 && **v <= 100.0)) return std::string(name) + " " + fmt(**v) + " outside [0, 100]";
  }
  if (!row.asrd) return {};
  if (row.asr && *row.asrd > *row.asr + kTiny) return "asrd " + fmt(*row.asrd) + " exceeds asr " + fmt(*row.asr);
  if (row.fnr && *row.asrd > *row.fnr + kTiny) return "asrd " + fmt(*row.asrd) + " exceeds fnr " + fmt(*row.fnr);
  if (row.asr && row.fnr) {
    const double expect = *row.fnr * *row.asr / 100.0;
    if (std::abs(*row.asrd - expect) > kRowSlack + kTiny) {
      return "asrd " + fmt(*row.asrd) + " differs from fnr*asr = " + fmt(expect);
    }
  }
  return {};
}

AttackedCell attack_cell(const TrainedModel& model, const Dataset& data, const AttackConfig& attack,
                         std::uint64_t seed, const CellOptions& options) {
  attack.validate();
  if (options.n_samples == 0) throw ConfigError("a cell needs at least one sample");
  const Dataset d = data.size() > options.n_samples ? split(data, options.n_samples, derive_seed(seed, 0)).first : data;
  d.validate();

  ModelClassifier clf(model);
  AttackedCell cell;
  cell.clean_predictions = predict(clf, d.images);
  cell.batch = run_attack(clf, d.images, d.labels, attack);
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (cell.batch.success[i] && cell.clean_predictions[i] == d.labels[i]) cell.pool.push_back(i);
  }
  return cell;
}

EvalRow detect_cell(const TrainedModel& model, const std::string& dataset, const AttackConfig& attack,
                    const AttackedCell& cell, DetectorKind detector, FeatureSource source, std::uint64_t seed,
                    const CellOptions& options) {
  EvalRow row;
  row.dataset = dataset;
  row.attack = std::string(method_name(attack.method));
  if (!is_minimal_norm(attack.method)) row.epsilon = attack.epsilon;
  row.source = source;
  row.detector = detector;
  row.n_samples = cell.batch.size();
  row.seed = seed;
  row.asr = asr(cell.batch);

  if (*row.asr == 0.0) {
    row.asrd = 0.0;
    row.note = "attack produced no successful sample";
    return row;
  }
  if (cell.pool.size() < 2) {
    row.note = "only " + std::to_string(cell.pool.size()) + " successful clean-correct pairs";
    return row;
  }

  std::vector<std::size_t> taps = options.tap_ids;
  if (source == FeatureSource::kWb && taps.empty()) taps = model.tap_ids();
  if (source == FeatureSource::kBb) taps.clear();
  const SpectralFeatureSet features = build_feature_set(&model, cell.batch, cell.pool, source, taps);
  auto [train_set, test_set] = split_pairs(features, options.train_fraction, derive_seed(seed, 2));
  if (train_set.size() == 0 || test_set.size() == 0) {
    row.note = "pair split left an empty side";
    return row;
  }

  std::vector<int> predicted;
  if (options.predictor) {
    predicted = options.predictor(train_set, test_set);
  } else {
    const DetectorModel det = train_detector(train_set, detector, options.hyper, derive_seed(seed, 3));
    predicted = det.predict(test_set.features);
  }
  const DetectionScore s = score_predictions(predicted, test_set.labels);
  row.f1 = 100.0 * s.f1;
  row.fnr = 100.0 * s.fnr;
  row.asrd = asrd(s.fnr, *row.asr);
  return row;
}

EvalRow run_cell(const TrainedModel& model, const Dataset& data, const AttackConfig& attack, DetectorKind detector,
                 FeatureSource source, std::uint64_t seed, const CellOptions& options) {
  const AttackedCell cell = attack_cell(model, data, attack, seed, options);
  return detect_cell(model, data.name, attack, cell, detector, source, seed, options);
}

}  // namespace spectral_asrd
