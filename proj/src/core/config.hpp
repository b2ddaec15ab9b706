/*
 *  Copyright 2026 The EIM Authors
 *
 *  Licensed under the Apache License, Version 2.0 (the "License");
 *  you may not use this file except in compliance with the License.
 *  You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 *  Unless required by applicable law or agreed to in writing, software
 *  distributed under the License is distributed on an "AS IS" BASIS,
 *  WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 *  See the License for the specific language governing permissions and
 *  limitations under the License.
 */

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace eim {

struct ConfigKey {
  const char* key;
  const char* default_value;
  const char* doc;
};

/// The documented schema: every valid key with its default.
const std::vector<ConfigKey>& config_schema();

/// Flat key-value configuration with `section.key` names. Text form accepts
/// `[section]` headers followed by `key = value` lines, or fully dotted keys;
/// `#` and `;` start comments. Unknown keys are rejected with the list of
/// valid keys.
class Config {
 public:
  Config();

  static Config from_file(const std::string& path);
  static Config from_text(const std::string& text, const std::string& origin = "<text>");

  void merge_text(const std::string& text, const std::string& origin = "<text>");
  void merge_file(const std::string& path);
  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const;

  const std::string& get(const std::string& key) const;
  int get_int(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::vector<int> get_ints(const std::string& key) const;
  std::vector<std::string> get_strings(const std::string& key) const;

  /// Every key, grouped by section, in schema order. Feeding the snapshot
  /// back reproduces this configuration.
  std::string snapshot() const;
  /// FNV-1a of the snapshot, as 16 hex digits.
  std::string hash() const;

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

std::string valid_keys_message();

}  // namespace eim
