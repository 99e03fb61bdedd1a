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

#include <cmath>

#include "fsbv/autograd.hpp"
#include "fsbv/error.hpp"
#include "oracles/conv_oracle.hpp"
#include "oracles/finite_diff.hpp"

using namespace fsbv;
using fsbv::testing::NaiveConv;
using fsbv::testing::RandomTensor;

TEST_CASE("tensor construction validates shape") {
  CHECK_THROWS_AS(Tensor(Shape{2, 2}, std::vector<double>{1, 2, 3}), Error);
  Tensor t(Shape{2, 3}, 1.5);
  CHECK(t.size() == 6);
  CHECK(t.reshaped(Shape{3, 2}).shape() == Shape{3, 2});
  CHECK_THROWS_AS(t.reshaped(Shape{4}), Error);
}

TEST_CASE("conv2d identity kernel reproduces input") {
  Rng rng(1);
  Tensor input = RandomTensor({1, 6, 7}, rng);
  Tensor kernel(Shape{1, 1, 3, 3}, 0.0);
  kernel[4] = 1.0;
  Tensor out = Conv2d(input, kernel, Tensor(Shape{1}, 0.0), 1);
  REQUIRE(out.shape() == input.shape());
  for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i] == input[i]);
}

TEST_CASE("conv2d constant input with all-ones kernel") {
  Tensor input(Shape{1, 5, 5}, 2.0);
  Tensor kernel(Shape{1, 1, 3, 3}, 1.0);
  Tensor bias(Shape{1}, 0.0);
  Tensor out = Conv2d(input, kernel, bias, 1);
  Tensor oracle = NaiveConv(input, kernel, bias, 1);
  // Interior cells see all nine taps: 9 * 2.0.
  CHECK(oracle.at(0, 2, 2) == doctest::Approx(18.0));
  for (std::size_t y = 1; y < 4; ++y)
    for (std::size_t x = 1; x < 4; ++x) CHECK(out.at(0, y, x) == doctest::Approx(18.0));
  CHECK(out.at(0, 0, 0) == doctest::Approx(8.0));
}

TEST_CASE("conv2d zero input yields per-channel bias") {
  Rng rng(2);
  Tensor input(Shape{3, 4, 4}, 0.0);
  Tensor kernel = RandomTensor({2, 3, 3, 3}, rng);
  Tensor bias(Shape{2}, std::vector<double>{0.25, -1.5});
  Tensor out = Conv2d(input, kernel, bias, 1);
  for (std::size_t y = 0; y < 4; ++y)
    for (std::size_t x = 0; x < 4; ++x) {
      CHECK(out.at(0, y, x) == 0.25);
      CHECK(out.at(1, y, x) == -1.5);
    }
}

TEST_CASE("conv2d output size follows padding") {
  Tensor input(Shape{1, 8, 8}, 1.0);
  Tensor kernel(Shape{4, 1, 3, 3}, 0.1);
  CHECK(Conv2d(input, kernel, Tensor(Shape{4}, 0.0), 0).shape() == Shape{4, 6, 6});
  CHECK(Conv2d(input, kernel, Tensor(Shape{4}, 0.0), 1).shape() == Shape{4, 8, 8});
}

TEST_CASE("conv2d rejects channel mismatch and unsupported geometry") {
  Tensor input(Shape{2, 5, 5}, 1.0);
  Tensor kernel(Shape{1, 3, 3, 3}, 1.0);
  try {
    Conv2d(input, kernel, Tensor(Shape{1}, 0.0), 1);
    FAIL("expected shape mismatch");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kShapeMismatch);
    CHECK(std::string(e.what()).find("channels") != std::string::npos);
  }
  Tensor good(Shape{1, 2, 3, 3}, 1.0);
  CHECK_THROWS_AS(Conv2d(input, good, Tensor(Shape{1}, 0.0), 2), Error);
  CHECK_THROWS_AS(Conv2d(input, good, Tensor(Shape{1}, 0.0), 1, 2), Error);
}

TEST_CASE("conv2d matches nested-loop oracle on random 5x5 inputs") {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t cin = 1 + rng.uniform_index(3), cout = 1 + rng.uniform_index(4);
    const std::size_t pad = rng.uniform_index(2);
    Tensor input = RandomTensor({cin, 5, 5}, rng);
    Tensor kernel = RandomTensor({cout, cin, 3, 3}, rng);
    Tensor bias = RandomTensor({cout}, rng);
    Tensor got = Conv2d(input, kernel, bias, pad);
    Tensor want = NaiveConv(input, kernel, bias, static_cast<int>(pad));
    REQUIRE(got.shape() == want.shape());
    for (std::size_t i = 0; i < got.size(); ++i) CHECK(std::abs(got[i] - want[i]) < 1e-10);
  }
}

TEST_CASE("batch_norm2d train mode standardizes each channel") {
  Rng rng(4);
  Tensor input = RandomTensor({3, 2, 4, 4}, rng, 3.0);
  for (std::size_t i = 0; i < input.size(); ++i) input[i] += 5.0;
  RunningStats stats;
  Tensor out = BatchNorm2d(input, Tensor(Shape{2}, 1.0), Tensor(Shape{2}, 0.0), Mode::kTrain,
                           stats);
  for (std::size_t c = 0; c < 2; ++c) {
    double s = 0.0, ss = 0.0;
    for (std::size_t n = 0; n < 3; ++n)
      for (std::size_t j = 0; j < 16; ++j) s += out[(n * 2 + c) * 16 + j];
    const double mean = s / 48.0;
    for (std::size_t n = 0; n < 3; ++n)
      for (std::size_t j = 0; j < 16; ++j) {
        const double d = out[(n * 2 + c) * 16 + j] - mean;
        ss += d * d;
      }
    CHECK(std::abs(mean) < 1e-12);
    CHECK(ss / 48.0 == doctest::Approx(1.0).epsilon(1e-4));
  }
  REQUIRE(stats.ready());
}

TEST_CASE("batch_norm2d degenerate cases") {
  Rng rng(5);
  Tensor input = RandomTensor({2, 2, 3, 3}, rng);
  Tensor beta(Shape{2}, std::vector<double>{0.5, -2.0});
  RunningStats stats;
  Tensor out = BatchNorm2d(input, Tensor(Shape{2}, 0.0), beta, Mode::kTrain, stats);
  for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i] == beta[(i / 9) % 2]);

  // Constant channel: x - mean = 0 exactly, so gamma * 0 / sqrt(0 + 1e-5) + beta.
  Tensor constant(Shape{2, 2, 3, 3}, 7.0);
  RunningStats stats2;
  Tensor out2 = BatchNorm2d(constant, Tensor(Shape{2}, 3.0), beta, Mode::kTrain, stats2);
  for (std::size_t i = 0; i < out2.size(); ++i) CHECK(out2[i] == beta[(i / 9) % 2]);
}

TEST_CASE("batch_norm2d eval mode uses running statistics") {
  RunningStats empty;
  Tensor input(Shape{1, 2, 2, 2}, 1.0);
  CHECK_THROWS_AS(BatchNorm2d(input, Tensor(Shape{2}, 1.0), Tensor(Shape{2}, 0.0), Mode::kEval,
                              empty),
                  Error);
  RunningStats stats{Tensor(Shape{2}, std::vector<double>{1.0, 0.0}),
                     Tensor(Shape{2}, std::vector<double>{4.0, 1.0})};
  Tensor x(Shape{1, 2, 1, 1}, std::vector<double>{5.0, 2.0});
  Tensor out = BatchNorm2d(x, Tensor(Shape{2}, 1.0), Tensor(Shape{2}, 0.0), Mode::kEval, stats);
  CHECK(out[0] == doctest::Approx(4.0 / std::sqrt(4.0 + 1e-5)));
  CHECK(out[1] == doctest::Approx(2.0 / std::sqrt(1.0 + 1e-5)));
  CHECK_THROWS_AS(
      BatchNorm2d(x, Tensor(Shape{3}, 1.0), Tensor(Shape{3}, 0.0), Mode::kTrain, stats), Error);
}

TEST_CASE("relu") {
  Tensor out = Relu(Tensor(Shape{3}, std::vector<double>{-1.0, 0.0, 2.0}));
  CHECK(out.values() == std::vector<double>{0.0, 0.0, 2.0});
  Tensor neg = Relu(Tensor(Shape{4}, -0.5));
  for (double v : neg.values()) CHECK(v == 0.0);
}

TEST_CASE("max_pool2d") {
  Tensor small(Shape{1, 2, 2}, std::vector<double>{1, 2, 3, 4});
  CHECK(MaxPool2d(small).values() == std::vector<double>{4});

  Tensor ramp(Shape{1, 4, 4});
  for (std::size_t i = 0; i < 16; ++i) ramp[i] = static_cast<double>(i);
  // Window maxima are the bottom-right cells: 5, 7, 13, 15.
  CHECK(MaxPool2d(ramp).values() == std::vector<double>{5, 7, 13, 15});

  CHECK_THROWS_AS(MaxPool2d(Tensor(Shape{1, 3, 4}, 0.0)), Error);
}

TEST_CASE("linear") {
  Tensor x(Shape{2}, std::vector<double>{1, 1});
  Tensor w(Shape{2, 2}, std::vector<double>{1, 2, 3, 4});
  CHECK(Linear(x, w, Tensor(Shape{2}, 0.0)).values() == std::vector<double>{3, 7});
  Tensor eye(Shape{3, 3}, std::vector<double>{1, 0, 0, 0, 1, 0, 0, 0, 1});
  Tensor v(Shape{3}, std::vector<double>{0.5, -2, 9});
  CHECK(Linear(v, eye, Tensor(Shape{3}, 0.0)).values() == v.values());
  Tensor b(Shape{3}, std::vector<double>{1, 2, 3});
  CHECK(Linear(Tensor(Shape{3}, 0.0), eye, b).values() == b.values());
  CHECK_THROWS_AS(Linear(Tensor(Shape{4}, 0.0), eye, b), Error);
}

TEST_CASE("sigmoid") {
  CHECK(SigmoidScalar(0.0) == 0.5);
  Rng rng(6);
  for (int i = 0; i < 100; ++i) {
    const double x = 20.0 * rng.normal();
    CHECK(SigmoidScalar(x) + SigmoidScalar(-x) == doctest::Approx(1.0).epsilon(1e-12));
  }
  for (double x : {-1000.0, -40.0, -30.0, 30.0, 40.0, 1000.0}) {
    const double y = SigmoidScalar(x);
    CHECK(std::isfinite(y));
    CHECK(y > 0.0);
    CHECK(y < 1.0);
  }
}

TEST_CASE("mse_loss") {
  Tensor p(Shape{2}, std::vector<double>{1, 0});
  CHECK(MseLoss(p, p) == 0.0);
  CHECK(MseLoss(p, Tensor(Shape{2}, 0.0)) == 0.5);
  CHECK_THROWS_AS(MseLoss(p, Tensor(Shape{3}, 0.0)), Error);
}

TEST_CASE("operations stay finite on bounded inputs") {
  Rng rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    Tensor x(Shape{1, 2, 6, 6});
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = 1e3 * (2.0 * rng.uniform01() - 1.0);
    Tensor k = RandomTensor({2, 2, 3, 3}, rng);
    RunningStats stats;
    Tensor y = Conv2d(x, k, Tensor(Shape{2}, 0.0), 1);
    y = BatchNorm2d(y, Tensor(Shape{2}, 1.0), Tensor(Shape{2}, 0.0), Mode::kTrain, stats);
    y = MaxPool2d(Relu(y));
    Tensor s = Sigmoid(x);
    CHECK(y.all_finite());
    CHECK(s.all_finite());
  }
}

TEST_CASE("forward passes are bit-deterministic") {
  Rng rng(8);
  Tensor x = RandomTensor({3, 8, 8}, rng);
  Tensor k = RandomTensor({4, 3, 3, 3}, rng);
  Tensor b = RandomTensor({4}, rng);
  CHECK(Conv2d(x, k, b, 1) == Conv2d(x, k, b, 1));
}
