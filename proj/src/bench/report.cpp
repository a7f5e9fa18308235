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

#include <charconv>
#include <cmath>
#include <map>
#include <set>

#include "spectral_asrd/bench.hpp"
#include "spectral_asrd/errors.hpp"
#include "spectral_asrd/spdf.hpp"

namespace spectral_asrd {

double round2(double v) {
  const double a = std::floor(std::abs(v) * 100.0 + 0.5 + 1e-9) / 100.0;
  return v < 0 ? -a : a;
}

std::string format_epsilon(std::optional<double> epsilon) {
  if (!epsilon) return "-";
  const double n = std::round(*epsilon * 255.0 * 1e6) / 1e6;
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), n);
  return std::string(buf, res.ptr) + "/255";
}

namespace {

double parse_number(std::string_view text, const char* what) {
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw FormatError(std::string("bad ") + what + " '" + std::string(text) + "'");
  }
  return v;
}

std::string percent(const std::optional<double>& v) {
  if (!v) return "*";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", round2(*v));
  return buf;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t p = 0;
  while (true) {
    const std::size_t q = line.find(',', p);
    out.push_back(line.substr(p, q == std::string_view::npos ? std::string_view::npos : q - p));
    if (q == std::string_view::npos) break;
    p = q + 1;
  }
  return out;
}

void check_field(const std::string& s) {
  if (s.find_first_of(",\n\r\"") != std::string::npos) throw ContractError("CSV field '" + s + "' needs quoting");
}

}  // namespace

std::optional<double> parse_epsilon(std::string_view text) {
  if (text == "-") return std::nullopt;
  const std::size_t slash = text.find('/');
  if (slash == std::string_view::npos) return parse_number(text, "epsilon");
  const double num = parse_number(text.substr(0, slash), "epsilon");
  const double den = parse_number(text.substr(slash + 1), "epsilon");
  if (den == 0.0) throw FormatError("epsilon with zero denominator");
  return num / den;
}

std::string format_csv(const EvalReport& report) {
  std::string out(kCsvHeader);
  out += '\n';
  for (const EvalRow& r : report.rows) {
    check_field(r.dataset);
    check_field(r.attack);
    out += r.dataset + ',' + r.attack + ',' + format_epsilon(r.epsilon) + ',' + std::string(source_name(r.source)) +
           ',' + std::string(detector_name(r.detector)) + ',' + percent(r.asr) + ',' + percent(r.f1) + ',' +
           percent(r.fnr) + ',' + percent(r.asrd) + ',' + std::to_string(r.n_samples) + ',' + std::to_string(r.seed) +
           '\n';
  }
  return out;
}

EvalReport parse_csv(std::string_view text) {
  EvalReport report;
  std::size_t line_no = 0;
  std::size_t p = 0;
  while (p < text.size()) {
    std::size_t q = text.find('\n', p);
    if (q == std::string_view::npos) q = text.size();
    std::string_view line = text.substr(p, q - p);
    p = q + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    ++line_no;
    if (line_no == 1) {
      if (line != kCsvHeader) throw FormatError("unexpected CSV header '" + std::string(line) + "'");
      continue;
    }
    if (line.empty()) continue;
    const auto f = split_fields(line);
    if (f.size() != 11) throw FormatError("CSV line " + std::to_string(line_no) + " has " + std::to_string(f.size()) + " fields");
    auto opt = [&](std::string_view s, const char* what) -> std::optional<double> {
      if (s == "*") return std::nullopt;
      return parse_number(s, what);
    };
    EvalRow r;
    r.dataset = std::string(f[0]);
    r.attack = std::string(f[1]);
    try {
      r.epsilon = parse_epsilon(f[2]);
      r.source = parse_source(f[3]);
      r.detector = parse_detector(f[4]);
    } catch (const ConfigError& e) {
      throw FormatError("CSV line " + std::to_string(line_no) + ": " + e.what());
    }
    r.asr = opt(f[5], "asr");
    r.f1 = opt(f[6], "f1");
    r.fnr = opt(f[7], "fnr");
    r.asrd = opt(f[8], "asrd");
    const double n = parse_number(f[9], "n_samples");
    if (n < 0 || n != std::floor(n)) throw FormatError("bad n_samples on CSV line " + std::to_string(line_no));
    r.n_samples = static_cast<std::size_t>(n);
    std::uint64_t seed = 0;
    const auto sres = std::from_chars(f[10].data(), f[10].data() + f[10].size(), seed);
    if (sres.ec != std::errc() || sres.ptr != f[10].data() + f[10].size()) {
      throw FormatError("bad seed on CSV line " + std::to_string(line_no));
    }
    r.seed = seed;
    report.rows.push_back(std::move(r));
  }
  if (line_no == 0) throw FormatError("empty CSV");
  return report;
}

void emit_csv(const EvalReport& report, const std::filesystem::path& path) {
  if (report.rows.empty()) throw ContractError("cannot emit an empty report");
  write_file(path, format_csv(report));
}

EvalReport read_csv(const std::filesystem::path& path) { return parse_csv(read_file(path)); }

namespace {

std::string field_value(const EvalRow& r, std::string_view field) {
  if (field == "dataset") return r.dataset;
  if (field == "attack") return r.attack;
  if (field == "epsilon") return format_epsilon(r.epsilon);
  if (field == "source") return std::string(source_name(r.source));
  if (field == "detector") return std::string(detector_name(r.detector));
  return "seed " + std::to_string(r.seed);
}

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

constexpr const char* kPalette[] = {"#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f",
                                    "#edc948", "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac"};

}  // namespace

std::string format_svg_bars(const EvalReport& report, std::string_view group_by) {
  if (report.rows.empty()) throw ContractError("cannot chart an empty report");
  bool known = false;
  for (auto f : kGroupFields) known = known || f == group_by;
  if (!known) throw ContractError("cannot group bars by '" + std::string(group_by) + "'");

  // Series labels use only the fields that vary across the report.
  std::vector<std::string_view> label_fields;
  for (auto f : kGroupFields) {
    if (f == group_by) continue;
    std::set<std::string> seen;
    for (const auto& r : report.rows) seen.insert(field_value(r, f));
    if (seen.size() > 1) label_fields.push_back(f);
  }
  {
    std::set<std::uint64_t> seeds;
    for (const auto& r : report.rows) seeds.insert(r.seed);
    if (seeds.size() > 1) label_fields.push_back("seed");
  }
  auto series_label = [&](const EvalRow& r) {
    std::string s;
    for (auto f : label_fields) s += (s.empty() ? "" : " ") + field_value(r, f);
    return s.empty() ? std::string("asrd") : s;
  };

  std::vector<std::string> groups, series;
  std::map<std::string, std::size_t> group_ix, series_ix;
  struct Bar {
    std::size_t g, s;
    double value;
  };
  std::vector<Bar> bars;
  for (const auto& r : report.rows) {
    if (!r.asrd) continue;
    const std::string g = field_value(r, group_by), s = series_label(r);
    if (!group_ix.count(g)) {
      group_ix[g] = groups.size();
      groups.push_back(g);
    }
    if (!series_ix.count(s)) {
      series_ix[s] = series.size();
      series.push_back(s);
    }
    bars.push_back({group_ix[g], series_ix[s], *r.asrd});
  }
  if (bars.empty()) throw ContractError("no row has an asrd value to chart");

  const double bar_w = 18, gap = 24, left = 64, top = 20, plot_h = 250, legend_w = 220;
  const double group_w = bar_w * static_cast<double>(series.size()) + gap;
  const double plot_w = group_w * static_cast<double>(groups.size());
  const double width = left + plot_w + 20 + legend_w;
  const double height = top + plot_h + 70;
  const double base = top + plot_h;
  const double scale = plot_h / 100.0;

  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width) + "\" height=\"" +
                    num(std::max(height, top + 20.0 * static_cast<double>(series.size()) + 20)) +
                    "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  // axes, ticks and labels
  svg += "<line class=\"axis\" x1=\"" + num(left) + "\" y1=\"" + num(top) + "\" x2=\"" + num(left) + "\" y2=\"" +
         num(base) + "\" stroke=\"black\"/>\n";
  svg += "<line class=\"axis\" x1=\"" + num(left) + "\" y1=\"" + num(base) + "\" x2=\"" + num(left + plot_w) +
         "\" y2=\"" + num(base) + "\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 100; t += 25) {
    const double y = base - t * scale;
    svg += "<line x1=\"" + num(left - 4) + "\" y1=\"" + num(y) + "\" x2=\"" + num(left) + "\" y2=\"" + num(y) +
           "\" stroke=\"black\"/>\n";
    svg += "<text x=\"" + num(left - 6) + "\" y=\"" + num(y + 4) + "\" text-anchor=\"end\">" + std::to_string(t) +
           "</text>\n";
  }
  svg += "<text class=\"axis-label\" transform=\"translate(16," + num(top + plot_h / 2) +
         ") rotate(-90)\" text-anchor=\"middle\">ASRD (%)</text>\n";
  svg += "<text class=\"axis-label\" x=\"" + num(left + plot_w / 2) + "\" y=\"" + num(base + 40) +
         "\" text-anchor=\"middle\">" + xml_escape(group_by) + "</text>\n";
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const double cx = left + group_w * static_cast<double>(g) + group_w / 2;
    svg += "<text x=\"" + num(cx) + "\" y=\"" + num(base + 16) + "\" text-anchor=\"middle\">" +
           xml_escape(groups[g]) + "</text>\n";
  }
  for (const Bar& b : bars) {
    const double h = b.value * scale;
    const double x = left + group_w * static_cast<double>(b.g) + gap / 2 + bar_w * static_cast<double>(b.s);
    char value[32];
    std::snprintf(value, sizeof(value), "%.2f", round2(b.value));
    svg += "<rect class=\"bar\" x=\"" + num(x) + "\" y=\"" + num(base - h) + "\" width=\"" + num(bar_w) +
           "\" height=\"" + num(h) + "\" fill=\"" + kPalette[b.s % std::size(kPalette)] + "\" data-group=\"" +
           xml_escape(groups[b.g]) + "\" data-series=\"" + xml_escape(series[b.s]) + "\" data-value=\"" + value +
           "\"/>\n";
  }
  // legend
  const double lx = left + plot_w + 20;
  for (std::size_t s = 0; s < series.size(); ++s) {
    const double y = top + 20.0 * static_cast<double>(s);
    svg += "<rect class=\"legend\" x=\"" + num(lx) + "\" y=\"" + num(y) + "\" width=\"12\" height=\"12\" fill=\"" +
           kPalette[s % std::size(kPalette)] + "\"/>\n";
    svg += "<text x=\"" + num(lx + 18) + "\" y=\"" + num(y + 10) + "\">" + xml_escape(series[s]) + "</text>\n";
  }
  svg += "</svg>\n";
  return svg;
}

void emit_svg_bars(const EvalReport& report, std::string_view group_by, const std::filesystem::path& path) {
  write_file(path, format_svg_bars(report, group_by));
}

}  // namespace spectral_asrd
