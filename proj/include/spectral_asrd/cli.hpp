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

#ifndef SPECTRAL_ASRD_CLI_HPP
#define SPECTRAL_ASRD_CLI_HPP

#include <cstdint>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace spectral_asrd {

struct ConfigKey {
  std::string_view name;
  std::string_view default_value;
  std::string_view help;
};

/// Every accepted key, in documentation order.
std::span<const ConfigKey> config_keys();

/// Flat dotted key=value configuration. Starts from the documented defaults;
/// unknown keys are a ConfigError.
class RunConfig {
 public:
  RunConfig();

  /// key=value lines; '#' starts a comment, blank lines are skipped.
  void merge_text(std::string_view text, std::string_view origin = "config");
  void set(std::string_view key, std::string_view value);

  const std::string& get(std::string_view key) const;
  long long get_int(std::string_view key) const;
  std::uint64_t get_u64(std::string_view key) const;
  /// Accepts "a/b" fractions such as 8/255.
  double get_double(std::string_view key) const;
  bool get_bool(std::string_view key) const;
  /// Comma-separated, trimmed, empty items dropped.
  std::vector<std::string> get_list(std::string_view key) const;

  /// Every key in sorted order, one key=value per line.
  std::string resolved_text() const;

 private:
  std::map<std::string, std::string, std::less<>> values_;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// Entry point of the command-line tool. args[0] is the program name.
int run_cli(std::span<const std::string> args, std::ostream& out, std::ostream& err);

}  // namespace spectral_asrd

#endif  // SPECTRAL_ASRD_CLI_HPP
