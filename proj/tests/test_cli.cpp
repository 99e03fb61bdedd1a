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

#include <algorithm>
#include <sstream>

#include "fsbv/cli.hpp"
#include "fsbv/model_file.hpp"
#include "temp_dir.hpp"

using namespace fsbv;
using fsbv::testing::TempDir;

namespace {

struct Run {
  int status = 0;
  std::string out, err;
};

Run Cli(std::vector<std::string> args) {
  args.insert(args.begin(), "fsbv");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Run r;
  r.status = cli_dispatch(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string LastLine(const std::string& s) {
  std::string t = s;
  while (!t.empty() && t.back() == '\n') t.pop_back();
  const auto nl = t.rfind('\n');
  return nl == std::string::npos ? t : t.substr(nl + 1);
}

std::size_t Lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST_CASE("usage errors") {
  Run r = Cli({});
  CHECK(r.status == 2);
  r = Cli({"verify", "--subject", "a", "--query", "q.png"});
  CHECK(r.status == 2);
  CHECK(r.err.find("Usage") != std::string::npos);
  CHECK(LastLine(r.err).rfind("error kind=usage message=", 0) == 0);
  CHECK(LastLine(r.err).find("--model") != std::string::npos);
  r = Cli({"synth", "--out", "x", "--bogus", "1"});
  CHECK(r.status == 2);
  r = Cli({"frobnicate"});
  CHECK(r.status == 2);
  r = Cli({"--help"});
  CHECK(r.status == 0);
  CHECK(r.out.find("evaluate") != std::string::npos);
}

TEST_CASE("runtime errors are one machine-readable line") {
  TempDir dir;
  Run r = Cli({"evaluate", "--model", (dir / "none.fsbv").string(), "--data", dir.path().string(),
               "--report", (dir / "r.kv").string()});
  CHECK(r.status == 1);
  CHECK(Lines(r.err) == 1);
  CHECK(r.err.rfind("error kind=io message=", 0) == 0);
  CHECK(r.out.empty());
  CHECK_FALSE(std::filesystem::exists(dir / "r.kv"));

  r = Cli({"train", "--data", (dir / "missing").string(), "--out", (dir / "m.fsbv").string()});
  CHECK(r.status == 1);
  CHECK(r.err.rfind("error kind=not_found message=", 0) == 0);
}

TEST_CASE("pipeline on a tiny network") {
  TempDir dir;
  const std::string data = (dir / "data").string(), model = (dir / "m.fsbv").string();
  Run r = Cli({"synth", "--out", data, "--classes", "4", "--genuine", "10", "--forged", "4", "--seed", "3"});
  REQUIRE(r.status == 0);
  CHECK(r.out.find("subjects=4 genuine=40 forged=16") != std::string::npos);

  const std::vector<std::string> tiny = {"--set", "net.width=4", "--set", "net.hidden=4"};
  std::vector<std::string> train = {"train", "--data", data, "--out", model, "--episodes", "4",
                                    "--way", "2", "--shot", "1", "--queries", "1",
                                    "--seed", "1", "--validate-every", "2", "--validation-trials", "4"};
  train.insert(train.end(), tiny.begin(), tiny.end());
  r = Cli(train);
  REQUIRE(r.status == 0);
  CHECK(r.out.find("progress stage=train episode=2 loss=") != std::string::npos);
  CHECK(r.out.find("val_acc=") != std::string::npos);
  CHECK(load_model(model).weights.config.width == 4);

  r = Cli({"finetune", "--data", data, "--model", model, "--episodes", "2", "--shot", "2",
           "--validation-trials", "2"});
  REQUIRE(r.status == 0);
  CHECK(LastLine(r.out).rfind("finetune out=", 0) == 0);

  r = Cli({"enroll", "--data", data, "--subject", "s003", "--model", model});
  REQUIRE(r.status == 0);
  CHECK(r.out.find("enroll subject=s003 images=5") != std::string::npos);
  CHECK(load_model(model).find_subject("s003") != nullptr);

  const std::string query = (dir / "data" / "s003" / "genuine" / "009.png").string();
  r = Cli({"verify", "--model", model, "--subject", "s003", "--query", query, "--support-k", "5"});
  REQUIRE(r.status == 0);
  CHECK(r.out.rfind("verdict subject=s003 decision=", 0) == 0);
  CHECK(r.out.find("support_k=5") != std::string::npos);

  r = Cli({"verify", "--model", model, "--subject", "s001", "--query", query});
  CHECK(r.status == 1);
  CHECK(r.err.rfind("error kind=not_found", 0) == 0);
  r = Cli({"verify", "--model", model, "--subject", "s003", "--query", query, "--support-k", "6"});
  CHECK(r.status == 1);

  const std::string r1 = (dir / "r1.kv").string(), r2 = (dir / "r2.kv").string();
  r = Cli({"evaluate", "--model", model, "--data", data, "--episodes", "20", "--support-k", "1",
           "--seed", "7", "--report", r1});
  REQUIRE(r.status == 0);
  CHECK(r.out.find("accuracy") != std::string::npos);
  r = Cli({"evaluate", "--model", model, "--data", data, "--episodes", "20", "--support-k", "1",
           "--seed", "7", "--report", r2});
  REQUIRE(r.status == 0);
  const std::string report = ReadFileBytes(r1);
  CHECK(report == ReadFileBytes(r2));
  for (const char* key : {"accuracy=", "far=", "frr=", "eer=", "tp=", "tn=", "fp=", "fn=", "episodes=20", "seed=7"}) {
    CHECK(report.find(key) != std::string::npos);
  }

  // Unknown config keys are rejected before any work.
  r = Cli({"evaluate", "--model", model, "--data", data, "--set", "ocsvm.nuu=1"});
  CHECK(r.status == 1);
  CHECK(r.err.rfind("error kind=invalid_argument", 0) == 0);
}
