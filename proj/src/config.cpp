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

#include "fsbv/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "fsbv/error.hpp"

namespace fsbv {
namespace {

std::string Trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string FormatDouble(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

const std::set<std::string>& KnownKeys() {
  static const std::set<std::string> keys = {
      "net.input_channels", "net.input_size",     "net.width",             "net.hidden",
      "orb.fast_threshold", "orb.max_keypoints",  "bovw.clusters",         "pca.variance_target",
      "ocsvm.nu",           "ocsvm.gamma",        "ocsvm.tolerance",       "ocsvm.max_iterations",
      "enroll.min_images",  "enroll.seed",        "enroll.stored_supports", "scaling.inner_limit",
      "scaling.tanh_gain",
  };
  return keys;
}

}  // namespace

Config Config::Parse(const std::string& text, const std::string& source) {
  Config out;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = Trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string key = eq == std::string::npos ? std::string() : Trim(line.substr(0, eq));
    if (key.empty()) {
      Fail(ErrorKind::kInvalidArgument,
           source + ":" + std::to_string(lineno) + ": expected 'key = value'");
    }
    out.values_[key] = Trim(line.substr(eq + 1));
  }
  return out;
}

Config Config::Load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) Fail(ErrorKind::kIo, "cannot read config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return Parse(text.str(), path.string());
}

void Config::merge(const Config& other) {
  for (const auto& [k, v] : other.values_) values_[k] = v;
}

double Config::get_double(const std::string& key, double fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(it->second, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != it->second.size()) {
    Fail(ErrorKind::kInvalidArgument, "config " + key + ": '" + it->second + "' is not a number");
  }
  return v;
}

std::uint64_t Config::get_u64(const std::string& key, std::uint64_t fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::uint64_t v = 0;
  const char* b = it->second.data();
  const char* e = b + it->second.size();
  auto [ptr, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || ptr != e) {
    Fail(ErrorKind::kInvalidArgument,
         "config " + key + ": '" + it->second + "' is not a non-negative integer");
  }
  return v;
}

std::size_t Config::get_size(const std::string& key, std::size_t fallback) const {
  return static_cast<std::size_t>(get_u64(key, fallback));
}

std::string Config::canonical() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + "=" + v + "\n";
  return out;
}

SystemConfig SystemConfig::FromConfig(const Config& c) {
  for (const auto& [k, v] : c.values()) {
    if (!KnownKeys().count(k)) Fail(ErrorKind::kInvalidArgument, "unknown config key '" + k + "'");
  }
  SystemConfig s;
  s.net.input_channels = c.get_size("net.input_channels", s.net.input_channels);
  s.net.input_size = c.get_size("net.input_size", s.net.input_size);
  s.net.width = c.get_size("net.width", s.net.width);
  s.net.hidden = c.get_size("net.hidden", s.net.hidden);
  s.net.validate();

  EnrollConfig& e = s.enroll;
  e.orb.fast_threshold = c.get_double("orb.fast_threshold", e.orb.fast_threshold);
  e.orb.max_keypoints = c.get_size("orb.max_keypoints", e.orb.max_keypoints);
  e.clusters = c.get_size("bovw.clusters", e.clusters);
  e.variance_target = c.get_double("pca.variance_target", e.variance_target);
  e.ocsvm.nu = c.get_double("ocsvm.nu", e.ocsvm.nu);
  if (c.has("ocsvm.gamma") && c.values().at("ocsvm.gamma") != "auto") {
    e.ocsvm.gamma = c.get_double("ocsvm.gamma", 0.0);
  }
  e.ocsvm.tolerance = c.get_double("ocsvm.tolerance", e.ocsvm.tolerance);
  e.ocsvm.max_iterations = c.get_size("ocsvm.max_iterations", e.ocsvm.max_iterations);
  e.min_images = c.get_size("enroll.min_images", e.min_images);
  e.seed = c.get_u64("enroll.seed", e.seed);
  e.stored_supports = c.get_size("enroll.stored_supports", e.stored_supports);

  s.scaling.inner_limit = c.get_double("scaling.inner_limit", s.scaling.inner_limit);
  s.scaling.tanh_gain = c.has("scaling.tanh_gain") ? c.get_double("scaling.tanh_gain", 0.0)
                                                   : ContinuousTanhGain(s.scaling.inner_limit);
  s.scaling.validate();
  return s;
}

Config SystemConfig::to_config() const {
  Config c;
  c.set("net.input_channels", std::to_string(net.input_channels));
  c.set("net.input_size", std::to_string(net.input_size));
  c.set("net.width", std::to_string(net.width));
  c.set("net.hidden", std::to_string(net.hidden));
  c.set("orb.fast_threshold", FormatDouble(enroll.orb.fast_threshold));
  c.set("orb.max_keypoints", std::to_string(enroll.orb.max_keypoints));
  c.set("bovw.clusters", std::to_string(enroll.clusters));
  c.set("pca.variance_target", FormatDouble(enroll.variance_target));
  c.set("ocsvm.nu", FormatDouble(enroll.ocsvm.nu));
  c.set("ocsvm.gamma", enroll.ocsvm.gamma ? FormatDouble(*enroll.ocsvm.gamma) : "auto");
  c.set("ocsvm.tolerance", FormatDouble(enroll.ocsvm.tolerance));
  c.set("ocsvm.max_iterations", std::to_string(enroll.ocsvm.max_iterations));
  c.set("enroll.min_images", std::to_string(enroll.min_images));
  c.set("enroll.seed", std::to_string(enroll.seed));
  c.set("enroll.stored_supports", std::to_string(enroll.stored_supports));
  c.set("scaling.inner_limit", FormatDouble(scaling.inner_limit));
  c.set("scaling.tanh_gain", FormatDouble(scaling.tanh_gain));
  return c;
}

}  // namespace fsbv
