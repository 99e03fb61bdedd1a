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
#include <random>
#include <vector>

namespace fsbv {

/// Seeded generator with distributions that are identical on every
/// platform. The standard <random> distributions are implementation
/// defined, so only the raw mt19937_64 stream is used.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  /// Uniform integer in [0, n). Rejection sampling keeps it unbiased.
  std::size_t uniform_index(std::size_t n);

  /// Standard normal via Box-Muller (one value per call, no caching).
  double normal();

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  /// `count` distinct indices from [0, n) in sampled order.
  std::vector<std::size_t> sample_without_replacement(std::size_t n,
                                                      std::size_t count);

 private:
  std::mt19937_64 engine_;
};

/// Derive an independent stream seed from (master, index) with splitmix64.
std::uint64_t DeriveSeed(std::uint64_t master, std::uint64_t index);

}  // namespace fsbv
