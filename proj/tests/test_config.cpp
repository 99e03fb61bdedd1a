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

#include <doctest.h>

#include "fsbv/config.hpp"
#include "fsbv/error.hpp"

using namespace fsbv;

TEST_CASE("config parsing") {
  const Config c = Config::Parse(
      "# scaling\n"
      "scaling.tanh_gain = 2.34445\n"
      "\n"
      "  ocsvm.nu=0.2   # inline comment\n");
  CHECK(c.values().size() == 2);
  CHECK(c.get_double("scaling.tanh_gain", 0) == 2.34445);
  CHECK(c.get_double("ocsvm.nu", 0) == 0.2);
  CHECK(c.get_double("absent", 7.5) == 7.5);
  CHECK(c.canonical() == "ocsvm.nu=0.2\nscaling.tanh_gain=2.34445\n");
  CHECK_THROWS_AS(Config::Parse("no equals sign"), Error);
  CHECK_THROWS_AS(Config::Parse("= value"), Error);
  CHECK_THROWS_AS(Config::Parse("a = x").get_double("a", 0), Error);
  CHECK_THROWS_AS(Config::Parse("a = -3").get_size("a", 0), Error);
  CHECK_THROWS_AS(Config::Parse("a = 1.5").get_size("a", 0), Error);
}

TEST_CASE("later sources win") {
  Config file = Config::Parse("ocsvm.nu = 0.2\nbovw.clusters = 50\n");
  Config flags;
  flags.set("ocsvm.nu", "0.3");
  file.merge(flags);
  const SystemConfig s = SystemConfig::FromConfig(file);
  CHECK(s.enroll.ocsvm.nu == 0.3);
  CHECK(s.enroll.clusters == 50);
}

TEST_CASE("system config round trip and validation") {
  SystemConfig s;
  s.enroll.ocsvm.gamma = 0.25;
  s.net.width = 16;
  const SystemConfig back = SystemConfig::FromConfig(s.to_config());
  CHECK(back.to_config().canonical() == s.to_config().canonical());
  CHECK(back.enroll.fingerprint() == s.enroll.fingerprint());
  CHECK(*back.enroll.ocsvm.gamma == 0.25);
  CHECK(back.net == s.net);

  CHECK_FALSE(SystemConfig::FromConfig(Config()).enroll.ocsvm.gamma.has_value());
  CHECK_THROWS_AS(SystemConfig::FromConfig(Config::Parse("ocsvm.nuu = 0.1")), Error);
  CHECK_THROWS_AS(SystemConfig::FromConfig(Config::Parse("net.input_size = 100")), Error);
  // A gain far from the continuous value breaks the piecewise mapping.
  CHECK_THROWS_AS(SystemConfig::FromConfig(Config::Parse("scaling.tanh_gain = 5")), Error);
  // Changing the inner limit alone keeps the branches continuous.
  const SystemConfig limit = SystemConfig::FromConfig(Config::Parse("scaling.inner_limit = 0.9"));
  CHECK(limit.scaling.continuity_gap() < 1e-9);
}
