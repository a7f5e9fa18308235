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

#include <CLI11.hpp>

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <optional>

#include "spectral_asrd/bench.hpp"
#include "spectral_asrd/cli.hpp"
#include "spectral_asrd/datasets.hpp"
#include "spectral_asrd/errors.hpp"
#include "spectral_asrd/hashing.hpp"
#include "spectral_asrd/spdf.hpp"
#include "spectral_asrd/training.hpp"

namespace spectral_asrd {

namespace {

namespace fs = std::filesystem;

struct Context {
  RunConfig cfg;
  fs::path workdir = ".";
  std::size_t workers = 1;
  std::ostream* out = nullptr;
  std::ostream* err = nullptr;
  std::string command;

  fs::path path(std::string_view key) const {
    const std::string& v = cfg.get(key);
    if (v.empty()) throw ConfigError(std::string(key) + " is required");
    const fs::path p(v);
    return p.is_absolute() ? p : workdir / p;
  }
  std::size_t size(std::string_view key) const {
    const long long v = cfg.get_int(key);
    if (v < 0) throw ConfigError(std::string(key) + " must not be negative");
    return static_cast<std::size_t>(v);
  }
};

struct Data {
  Dataset train;
  Dataset test;
  std::size_t classes = 0;
};

std::uint64_t item_u64(std::string_view key, const std::string& item) {
  std::uint64_t v = 0;
  const auto r = std::from_chars(item.data(), item.data() + item.size(), v);
  if (r.ec != std::errc() || r.ptr != item.data() + item.size()) {
    throw ConfigError(std::string(key) + ": '" + item + "' is not an unsigned integer");
  }
  return v;
}

double item_double(std::string_view key, const std::string& item) {
  try {
    if (const auto v = parse_epsilon(item)) return *v;
  } catch (const FormatError&) {
  }
  throw ConfigError(std::string(key) + ": '" + item + "' is not a number");
}

Dataset to_resolution(const Dataset& d, std::size_t res) {
  if (d.height() != d.width()) throw ConfigError("dataset images are not square");
  if (res == 0 || d.height() % res != 0) {
    throw ConfigError("dataset.resolution " + std::to_string(res) + " does not divide the image side " +
                      std::to_string(d.height()));
  }
  return d.height() == res ? d : downsample(d, d.height() / res);
}

Data load_data(const Context& ctx, std::size_t res, bool need_train) {
  const RunConfig& c = ctx.cfg;
  const std::string& kind = c.get("dataset.kind");
  Data out;
  if (kind == "synth") {
    if (res != 16 && res != 32 && res != 64 && res != 128) {
      throw ConfigError("dataset.resolution must be 16, 32, 64 or 128 for synth data");
    }
    out.classes = ctx.size("dataset.classes");
    if (out.classes < 2) throw ConfigError("dataset.classes must be at least 2");
    if (need_train) out.train = synth_dataset(res, out.classes, ctx.size("dataset.train_samples"), c.get_u64("dataset.train_seed"));
    out.test = synth_dataset(res, out.classes, ctx.size("dataset.test_samples"), c.get_u64("dataset.test_seed"));
  } else if (kind == "cifar10") {
    const fs::path dir = ctx.path("dataset.path");
    out.classes = 10;
    if (need_train) out.train = to_resolution(load_cifar10(dir, true), res);
    out.test = to_resolution(load_cifar10(dir, false), res);
    const std::string name = res == 32 ? "cifar10" : "cifar10_" + std::to_string(res);
    out.train.name = out.test.name = name;
  } else if (kind == "ppm") {
    const fs::path dir = ctx.path("dataset.path");
    const Dataset all = load_ppm_dir(dir);
    const std::size_t n_test = ctx.size("dataset.test_samples");
    if (n_test == 0 || n_test >= all.size()) {
      throw ConfigError("dataset.test_samples must leave images on both sides of the split");
    }
    auto [train, test] = split(all, all.size() - n_test, c.get_u64("dataset.test_seed"));
    out.classes = all.num_classes;
    out.train = to_resolution(train, res);
    out.test = to_resolution(test, res);
    out.train.name = out.test.name = all.name + std::to_string(res);
  } else {
    throw ConfigError("dataset.kind must be synth, cifar10 or ppm, not '" + kind + "'");
  }
  return out;
}

NetworkSpec model_spec(std::size_t res, std::size_t classes) { return desk_cnn_spec(3, res, classes); }

TrainHyper train_hyper(const Context& ctx) {
  TrainHyper h;
  h.epochs = ctx.size("model.epochs");
  h.lr = ctx.cfg.get_double("model.lr");
  h.momentum = ctx.cfg.get_double("model.momentum");
  h.batch_size = ctx.size("model.batch_size");
  h.seed = ctx.cfg.get_u64("model.train_seed");
  return h;
}

TrainedModel load_model(const Context& ctx, std::size_t res, std::size_t classes) {
  const fs::path p = ctx.path("model.path");
  if (!fs::exists(p)) throw ConfigError("model.path '" + p.string() + "' does not exist; run train first");
  return load_weights(model_spec(res, classes), p);
}

AttackConfig attack_config(const Context& ctx) {
  const RunConfig& c = ctx.cfg;
  AttackConfig a = AttackConfig::defaults(parse_attack_method(c.get("attack.method")));
  a.epsilon = c.get_double("attack.epsilon");
  a.alpha = c.get("attack.alpha") == "auto" ? a.epsilon * c.get_double("sweep.alpha_fraction")
                                            : c.get_double("attack.alpha");
  a.n_iters = static_cast<int>(c.get_int("attack.n_iters"));
  a.apgd_iters = static_cast<int>(c.get_int("attack.apgd_iters"));
  a.square_n_queries = static_cast<int>(c.get_int("attack.square_queries"));
  a.square_p_init = c.get_double("attack.square_p_init");
  a.cw_c_init = c.get_double("attack.cw_c_init");
  a.cw_binary_search_steps = static_cast<int>(c.get_int("attack.cw_steps"));
  a.cw_inner_iters = static_cast<int>(c.get_int("attack.cw_inner_iters"));
  a.cw_lr = c.get_double("attack.cw_lr");
  a.deepfool_max_iter = static_cast<int>(c.get_int("attack.deepfool_max_iter"));
  a.deepfool_overshoot = c.get_double("attack.deepfool_overshoot");
  a.seed = c.get_u64("attack.seed");
  a.validate();
  return a;
}

void require_classes(AttackMethod m, std::size_t classes) {
  if ((m == AttackMethod::kAutoAttack || m == AttackMethod::kApgdDlr) && classes < 4) {
    throw ConfigError(std::string(method_name(m)) + " needs a model with at least 4 classes, this one has " +
                      std::to_string(classes));
  }
}

CellOptions cell_options(const Context& ctx) {
  CellOptions o;
  o.n_samples = ctx.size("attack.samples");
  o.train_fraction = ctx.cfg.get_double("detector.train_fraction");
  o.hyper.n_trees = static_cast<int>(ctx.cfg.get_int("detector.trees"));
  o.hyper.max_depth = static_cast<int>(ctx.cfg.get_int("detector.max_depth"));
  o.hyper.min_leaf = static_cast<int>(ctx.cfg.get_int("detector.min_leaf"));
  o.hyper.l2 = ctx.cfg.get_double("detector.l2");
  for (const auto& t : ctx.cfg.get_list("detector.taps")) o.tap_ids.push_back(item_u64("detector.taps", t));
  if (!(o.train_fraction > 0.0 && o.train_fraction < 1.0)) throw ConfigError("detector.train_fraction must lie in (0, 1)");
  if (o.hyper.n_trees < 1) throw ConfigError("detector.trees must be at least 1");
  return o;
}

std::vector<DetectorKind> detector_kinds(const Context& ctx) {
  std::vector<DetectorKind> out;
  for (const auto& k : ctx.cfg.get_list("detector.kinds")) out.push_back(parse_detector(k));
  if (out.empty()) throw ConfigError("detector.kinds is empty");
  return out;
}

std::vector<FeatureSource> feature_sources(const Context& ctx) {
  std::vector<FeatureSource> out;
  for (const auto& s : ctx.cfg.get_list("detector.sources")) out.push_back(parse_source(s));
  if (out.empty()) throw ConfigError("detector.sources is empty");
  return out;
}

struct Formats {
  bool csv = false;
  bool svg = false;
};

Formats output_formats(const Context& ctx) {
  Formats f;
  for (const auto& s : ctx.cfg.get_list("output.format")) {
    if (s == "csv") {
      f.csv = true;
    } else if (s == "svg") {
      f.svg = true;
    } else {
      throw ConfigError("output.format items must be csv or svg, not '" + s + "'");
    }
  }
  const std::string& g = ctx.cfg.get("output.group_by");
  if (std::find(std::begin(kGroupFields), std::end(kGroupFields), g) == std::end(kGroupFields)) {
    throw ConfigError("output.group_by must be dataset, attack, epsilon, source or detector");
  }
  return f;
}

void write_resolved(const Context& ctx, const fs::path& dir) {
  fs::create_directories(dir);
  write_file(dir / (ctx.command + ".resolved.conf"), ctx.cfg.resolved_text());
}

std::string cell_text(const std::optional<double>& v) {
  if (!v) return "*";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", round2(*v));
  return buf;
}

void print_table(const EvalReport& report, std::ostream& out) {
  char line[256];
  std::snprintf(line, sizeof(line), "%-12s %-10s %-8s %-3s %-3s %7s %7s %7s %7s  %s\n", "dataset", "attack", "eps",
                "src", "det", "asr", "f1", "fnr", "asrd", "note");
  out << line;
  for (const EvalRow& r : report.rows) {
    std::snprintf(line, sizeof(line), "%-12s %-10s %-8s %-3s %-3s %7s %7s %7s %7s  %s\n", r.dataset.c_str(),
                  r.attack.c_str(), format_epsilon(r.epsilon).c_str(), std::string(source_name(r.source)).c_str(),
                  std::string(detector_name(r.detector)).c_str(), cell_text(r.asr).c_str(), cell_text(r.f1).c_str(),
                  cell_text(r.fnr).c_str(), cell_text(r.asrd).c_str(), r.note.c_str());
    out << line;
  }
}

void write_reports(const Context& ctx, const EvalReport& report, const Formats& f) {
  const fs::path dir = ctx.path("output.dir");
  fs::create_directories(dir);
  if (f.csv) emit_csv(report, dir / "report.csv");
  if (f.svg) {
    try {
      emit_svg_bars(report, ctx.cfg.get("output.group_by"), dir / "report.svg");
    } catch (const ContractError& e) {
      *ctx.err << "no chart written: " << e.what() << "\n";
    }
  }
}

int cmd_train(Context& ctx) {
  const std::size_t res = ctx.size("dataset.resolution");
  const TrainHyper hyper = train_hyper(ctx);
  const fs::path model_path = ctx.path("model.path");
  const Data data = load_data(ctx, res, true);
  TrainedModel model = build_model(model_spec(res, data.classes), ctx.cfg.get_u64("model.seed"));
  std::ostream& out = *ctx.out;
  model = train(std::move(model), data.train, hyper, [&](std::size_t epoch, double loss) {
            char buf[64];
            std::snprintf(buf, sizeof(buf), "epoch %zu loss %.4f\n", epoch + 1, loss);
            out << buf << std::flush;
          }).model;
  if (model_path.has_parent_path()) fs::create_directories(model_path.parent_path());
  save_weights(model, model_path);
  write_resolved(ctx, model_path.parent_path());
  char buf[64];
  std::snprintf(buf, sizeof(buf), "test accuracy %.4f\n", accuracy(model, data.test));
  out << buf;
  return kExitOk;
}

int cmd_attack(Context& ctx) {
  const std::size_t res = ctx.size("dataset.resolution");
  const AttackConfig cfg = attack_config(ctx);
  const CellOptions opts = cell_options(ctx);
  const fs::path dir = ctx.path("attack.output");
  const Data data = load_data(ctx, res, false);
  require_classes(cfg.method, data.classes);
  const TrainedModel model = load_model(ctx, res, data.classes);
  const AttackedCell cell = attack_cell(model, data.test, cfg, ctx.cfg.get_u64("seed"), opts);
  save_adversarial(cell.batch, dir);
  write_resolved(ctx, dir);
  char buf[64];
  std::snprintf(buf, sizeof(buf), "asr %.2f\n", round2(asr(cell.batch)));
  *ctx.out << buf;
  return kExitOk;
}

int cmd_evaluate(Context& ctx) {
  const std::size_t res = ctx.size("dataset.resolution");
  const Formats formats = output_formats(ctx);
  const CellOptions opts = cell_options(ctx);
  const auto kinds = detector_kinds(ctx);
  const auto sources = feature_sources(ctx);
  const fs::path dir = ctx.path("attack.output");
  if (!fs::exists(dir / "manifest.json")) {
    throw ConfigError("attack.output '" + dir.string() + "' holds no attack artifacts; run attack first");
  }
  const Data data = load_data(ctx, res, false);
  const TrainedModel model = load_model(ctx, res, data.classes);

  AttackedCell cell;
  cell.batch = load_adversarial(dir);
  cell.clean_predictions = predict(ModelClassifier(model), cell.batch.clean);
  for (std::size_t i = 0; i < cell.batch.size(); ++i) {
    if (cell.batch.success[i] && cell.clean_predictions[i] == cell.batch.labels[i]) cell.pool.push_back(i);
  }
  AttackConfig cfg = AttackConfig::defaults(parse_attack_method(cell.batch.method));
  cfg.epsilon = cell.batch.epsilon;

  EvalReport report;
  const std::uint64_t seed = ctx.cfg.get_u64("seed");
  for (FeatureSource s : sources) {
    for (DetectorKind k : kinds) report.rows.push_back(detect_cell(model, data.test.name, cfg, cell, k, s, seed, opts));
  }
  write_reports(ctx, report, formats);
  write_resolved(ctx, ctx.path("output.dir"));
  print_table(report, *ctx.out);
  return kExitOk;
}

std::string model_tag(const RunConfig& cfg) {
  std::string text;
  for (const auto& k : config_keys()) {
    const std::string_view n = k.name;
    if ((n.starts_with("dataset.") && n != "dataset.resolution") || n.starts_with("model.")) {
      if (n == "model.path") continue;
      text += std::string(n) + "=" + cfg.get(n) + "\n";
    }
  }
  return hex16(fnv1a64(text));
}

int cmd_sweep(Context& ctx) {
  const RunConfig& c = ctx.cfg;
  const Formats formats = output_formats(ctx);
  SweepSpec spec;
  spec.epsilons.clear();
  for (const auto& e : c.get_list("sweep.epsilons")) spec.epsilons.push_back(item_double("sweep.epsilons", e));
  spec.resolutions.clear();
  for (const auto& r : c.get_list("sweep.resolutions")) spec.resolutions.push_back(item_u64("sweep.resolutions", r));
  spec.attacks.clear();
  for (const auto& a : c.get_list("sweep.attacks")) spec.attacks.push_back(parse_attack_method(a));
  spec.detectors = detector_kinds(ctx);
  spec.sources = feature_sources(ctx);
  spec.seeds.clear();
  for (const auto& s : c.get_list("sweep.seeds")) spec.seeds.push_back(item_u64("sweep.seeds", s));
  if (spec.seeds.empty()) spec.seeds.push_back(c.get_u64("seed"));
  spec.attack = attack_config(ctx);
  spec.alpha_fraction = c.get_double("sweep.alpha_fraction");
  spec.cell = cell_options(ctx);
  spec.tag = model_tag(c);
  spec.validate();
  for (std::size_t res : spec.resolutions) load_data(ctx, res, false);  // config errors before any work

  SweepOptions opts;
  opts.workers = ctx.workers;
  if (const char* env = std::getenv("SPECTRAL_ASRD_CACHE"); env && *env) {
    opts.cache_dir = env;
  } else {
    opts.cache_dir = ctx.path("sweep.cache");
  }

  std::ostream& out = *ctx.out;
  const TargetProvider provider = [&](std::size_t res) {
    Data data = load_data(ctx, res, true);
    for (AttackMethod m : spec.attacks) require_classes(m, data.classes);
    const fs::path weights = ctx.workdir / "models" / (data.test.name + "-" + spec.tag + ".spdf");
    const NetworkSpec ns = model_spec(res, data.classes);
    TrainedModel model;
    if (fs::exists(weights)) {
      model = load_weights(ns, weights);
    } else {
      out << "training " << data.test.name << "\n" << std::flush;
      model = train(build_model(ns, c.get_u64("model.seed")), data.train, train_hyper(ctx)).model;
      fs::create_directories(weights.parent_path());
      save_weights(model, weights);
    }
    return SweepTarget{data.test.name, std::move(model), std::move(data.test)};
  };
  const SweepResult result = run_sweep(spec, provider, opts);
  write_reports(ctx, result.report, formats);
  write_resolved(ctx, ctx.path("output.dir"));
  print_table(result.report, out);
  out << "computed " << result.computed_cells << " of " << result.report.rows.size() << " cells\n";
  return kExitOk;
}

int cmd_report(Context& ctx, const std::string& input) {
  const Formats formats = output_formats(ctx);
  const fs::path in = input.empty() ? ctx.path("output.dir") / "report.csv"
                                    : (fs::path(input).is_absolute() ? fs::path(input) : ctx.workdir / input);
  if (!fs::exists(in)) throw ConfigError("report input '" + in.string() + "' does not exist");
  const EvalReport report = read_csv(in);
  print_table(report, *ctx.out);
  std::size_t bad = 0;
  for (std::size_t i = 0; i < report.rows.size(); ++i) {
    const std::string v = row_violation(report.rows[i]);
    if (!v.empty()) {
      *ctx.out << "row " << i + 1 << ": " << v << "\n";
      ++bad;
    }
  }
  if (formats.svg) {
    const fs::path dir = ctx.path("output.dir");
    fs::create_directories(dir);
    emit_svg_bars(report, ctx.cfg.get("output.group_by"), dir / "report.svg");
  }
  write_resolved(ctx, ctx.path("output.dir"));
  return bad == 0 ? kExitOk : kExitRuntime;
}

std::string keys_footer() {
  std::string s = "\nConfiguration keys (config file lines or --set key=value):\n";
  for (const auto& k : config_keys()) {
    std::string left = "  " + std::string(k.name) + " = " + std::string(k.default_value);
    if (left.size() < 46) left.resize(46, ' ');
    s += left + "  " + std::string(k.help) + "\n";
  }
  return s;
}

}  // namespace

int run_cli(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app("Spectral detection of adversarial examples: train, attack, evaluate, sweep, report.",
               "spectral_asrd");
  app.require_subcommand(1);
  app.footer("Exit codes: 0 ok, 1 runtime error, 2 usage or configuration error.");

  struct Common {
    std::string config_file;
    std::vector<std::string> sets;
    std::string workdir = ".";
    std::size_t workers = 1;
    std::optional<std::string> epochs, method, epsilon, format;
    std::string input;
  } common;

  const std::string footer = keys_footer();
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config_file, "key=value configuration file");
    sub->add_option("--set", common.sets, "override one key, key=value (repeatable)");
    sub->add_option("--workdir", common.workdir, "base directory for every relative path");
    sub->add_option("--workers", common.workers, "concurrent sweep cells")->check(CLI::PositiveNumber);
    sub->footer(footer);
  };
  auto* train_cmd = app.add_subcommand("train", "train the desk CNN and save its weights");
  add_common(train_cmd);
  train_cmd->add_option("--epochs", common.epochs, "same as --set model.epochs=N");
  auto* attack_cmd = app.add_subcommand("attack", "attack the test split and save adversarial artifacts");
  add_common(attack_cmd);
  attack_cmd->add_option("--method", common.method, "same as --set attack.method=NAME");
  attack_cmd->add_option("--epsilon", common.epsilon, "same as --set attack.epsilon=E");
  auto* eval_cmd = app.add_subcommand("evaluate", "train and score detectors on saved attack artifacts");
  add_common(eval_cmd);
  eval_cmd->add_option("--format", common.format, "same as --set output.format=LIST");
  auto* sweep_cmd = app.add_subcommand("sweep", "run the attack x epsilon x resolution x detector grid");
  add_common(sweep_cmd);
  sweep_cmd->add_option("--format", common.format, "same as --set output.format=LIST");
  auto* report_cmd = app.add_subcommand("report", "check a report CSV and redraw its chart");
  add_common(report_cmd);
  report_cmd->add_option("--input", common.input, "CSV to read (default output.dir/report.csv)");
  report_cmd->add_option("--format", common.format, "same as --set output.format=LIST");

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  Context ctx;
  ctx.out = &out;
  ctx.err = &err;
  ctx.workdir = common.workdir;
  ctx.workers = common.workers;
  ctx.command = app.get_subcommands().front()->get_name();
  try {
    if (!common.config_file.empty()) {
      fs::path p(common.config_file);
      if (!p.is_absolute()) p = ctx.workdir / p;
      if (!fs::exists(p)) throw ConfigError("config file '" + p.string() + "' does not exist");
      ctx.cfg.merge_text(read_file(p), p.string());
    }
    for (const auto& s : common.sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
      ctx.cfg.set(s.substr(0, eq), s.substr(eq + 1));
    }
    if (common.epochs) ctx.cfg.set("model.epochs", *common.epochs);
    if (common.method) ctx.cfg.set("attack.method", *common.method);
    if (common.epsilon) ctx.cfg.set("attack.epsilon", *common.epsilon);
    if (common.format) ctx.cfg.set("output.format", *common.format);

    if (ctx.command == "train") return cmd_train(ctx);
    if (ctx.command == "attack") return cmd_attack(ctx);
    if (ctx.command == "evaluate") return cmd_evaluate(ctx);
    if (ctx.command == "sweep") return cmd_sweep(ctx);
    return cmd_report(ctx, common.input);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace spectral_asrd
