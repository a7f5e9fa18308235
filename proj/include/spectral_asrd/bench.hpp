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

#ifndef SPECTRAL_ASRD_BENCH_HPP
#define SPECTRAL_ASRD_BENCH_HPP

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "spectral_asrd/attacks.hpp"
#include "spectral_asrd/dataset.hpp"
#include "spectral_asrd/detector.hpp"

namespace spectral_asrd {

/// Percentage of samples whose post-attack prediction differs from the label.
/// Clean-misclassified samples count as perturbed.
double asr(const AdversarialBatch& batch);
/// fnr is a fraction, asr and the result are percentages.
double asrd(double fnr, double asr_percent);

inline constexpr std::size_t kDeskCellSamples = 300;

/// One (dataset, attack, epsilon, source, detector) result. Percentages
/// throughout. Absent values print as '*' and never as 0.
struct EvalRow {
  std::string dataset;
  std::string attack;
  std::optional<double> epsilon;  // absent for the minimal-norm attacks
  FeatureSource source = FeatureSource::kBb;
  DetectorKind detector = DetectorKind::kRandomForest;
  std::optional<double> asr;
  std::optional<double> f1;
  std::optional<double> fnr;
  std::optional<double> asrd;
  std::size_t n_samples = 0;
  std::uint64_t seed = 0;
  std::string note;  // why detector fields are absent, or the cell error

  bool operator==(const EvalRow&) const = default;
};

/// Empty when the row satisfies |asrd - fnr*asr/100| <= 0.02,
/// asrd <= asr, asrd <= fnr and every percentage lies in [0, 100];
/// otherwise a description of the first violation.
std::string row_violation(const EvalRow& row);

struct EvalReport {
  std::vector<EvalRow> rows;
};

/// Attack stage of a cell, shared by every detector and source evaluated on it.
struct AttackedCell {
  AdversarialBatch batch;
  std::vector<int> clean_predictions;
  std::vector<std::size_t> pool;  // successful and clean-correct samples
};

/// Labels for `test` from a detector fitted on `train`.
using DetectorPredictor =
    std::function<std::vector<int>(const SpectralFeatureSet& train, const SpectralFeatureSet& test)>;

struct CellOptions {
  std::size_t n_samples = kDeskCellSamples;
  double train_fraction = 0.8;
  DetectorHyper hyper;
  std::vector<std::size_t> tap_ids;  // white-box taps; empty means every relu
  DetectorPredictor predictor;       // replaces train_detector when set
};

/// Seeded subset of at most options.n_samples images, attacked with `attack`.
AttackedCell attack_cell(const TrainedModel& model, const Dataset& data, const AttackConfig& attack,
                         std::uint64_t seed, const CellOptions& options = {});

/// Features of the pool, pair split, detector fit and score. A pool too small
/// to give both a train and a test pair leaves the detector fields absent.
EvalRow detect_cell(const TrainedModel& model, const std::string& dataset, const AttackConfig& attack,
                    const AttackedCell& cell, DetectorKind detector, FeatureSource source, std::uint64_t seed,
                    const CellOptions& options = {});

/// attack_cell followed by detect_cell.
EvalRow run_cell(const TrainedModel& model, const Dataset& data, const AttackConfig& attack, DetectorKind detector,
                 FeatureSource source, std::uint64_t seed, const CellOptions& options = {});

struct SweepSpec {
  std::vector<double> epsilons = {8.0 / 255, 4.0 / 255, 2.0 / 255, 1.0 / 255, 0.5 / 255};
  std::vector<std::size_t> resolutions = {16, 32, 64};
  std::vector<AttackMethod> attacks = {AttackMethod::kPgd};
  std::vector<DetectorKind> detectors = {DetectorKind::kLogreg, DetectorKind::kRandomForest};
  std::vector<FeatureSource> sources = {FeatureSource::kBb};
  std::vector<std::uint64_t> seeds = {0};
  /// Budgets for every attack; method and epsilon are set per cell, and the
  /// l-inf step size becomes epsilon * alpha_fraction.
  AttackConfig attack;
  double alpha_fraction = 0.25;
  CellOptions cell;
  /// Folded into every cache key; name the model and data behind the targets.
  std::string tag;

  /// Throws ConfigError on empty lists or non-positive epsilons.
  void validate() const;
};

/// Model and data for one resolution.
struct SweepTarget {
  std::string dataset;
  TrainedModel model;
  Dataset data;
};
using TargetProvider = std::function<SweepTarget(std::size_t resolution)>;

struct SweepOptions {
  std::filesystem::path cache_dir;  // empty disables caching
  std::size_t workers = 1;
};

struct SweepResult {
  EvalReport report;
  std::size_t computed_cells = 0;  // cells not served from the cache
};

/// Cartesian product resolution x attack x epsilon x seed x source x detector,
/// rows in that order. Minimal-norm attacks ignore epsilon and get one row
/// group. Each finished cell is cached as <cache_dir>/<16-hex key>.json; a
/// warm cache skips the provider and the attack. A failing cell records its
/// error in the row and the sweep continues.
SweepResult run_sweep(const SweepSpec& spec, const TargetProvider& targets, const SweepOptions& options = {});

/// Canonical description of a cell and its 16-hex cache key.
std::string cell_config_json(const SweepSpec& spec, std::size_t resolution, AttackMethod method,
                             std::optional<double> epsilon, std::uint64_t seed, FeatureSource source,
                             DetectorKind detector);
std::string cell_key(std::string_view config_json);

/// Half-up rounding to 2 decimals, for emission only.
double round2(double v);
/// "8/255", "0.5/255"; "-" when absent.
std::string format_epsilon(std::optional<double> epsilon);
std::optional<double> parse_epsilon(std::string_view text);

inline constexpr std::string_view kCsvHeader = "dataset,attack,epsilon,source,detector,asr,f1,fnr,asrd,n_samples,seed";

std::string format_csv(const EvalReport& report);
EvalReport parse_csv(std::string_view text);
void emit_csv(const EvalReport& report, const std::filesystem::path& path);
EvalReport read_csv(const std::filesystem::path& path);

/// Fields a bar chart can group by.
inline constexpr std::string_view kGroupFields[] = {"dataset", "attack", "epsilon", "source", "detector"};

/// Grouped bar chart of asrd: one group per distinct `group_by` value, one
/// bar per remaining row label within it. Bars carry data-value attributes.
std::string format_svg_bars(const EvalReport& report, std::string_view group_by);
void emit_svg_bars(const EvalReport& report, std::string_view group_by, const std::filesystem::path& path);

}  // namespace spectral_asrd

#endif  // SPECTRAL_ASRD_BENCH_HPP
