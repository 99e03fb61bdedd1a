// Copyright 2026 The fsbv Authors
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

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "fsbv/confidence.hpp"
#include "fsbv/relation_net.hpp"
#include "fsbv/verification.hpp"

namespace fsbv {

/// Flat "dotted.key = value" settings. Blank lines and '#' comments are ignored.
class Config {
 public:
  static Config Parse(const std::string& text, const std::string& source = "<config>");
  static Config Load(const std::filesystem::path& path);

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  bool has(const std::string& key) const { return values_.count(key) != 0; }
  /// Applies every entry of `other` on top of this one.
  void merge(const Config& other);

  double get_double(const std::string& key, double fallback) const;
  std::size_t get_size(const std::string& key, std::size_t fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;

  const std::map<std::string, std::string>& values() const { return values_; }
  /// Sorted "key=value" lines.
  std::string canonical() const;

 private:
  std::map<std::string, std::string> values_;
};

/// Every tunable of the verification pipeline.
struct SystemConfig {
  RelationNetConfig net;
  EnrollConfig enroll;
  ScalingConfig scaling;

  /// Unknown keys are rejected so typos do not pass silently.
  static SystemConfig FromConfig(const Config& config);
  Config to_config() const;
};

}  // namespace fsbv
