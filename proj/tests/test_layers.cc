// tests/test_layers.cc

// Copyright 2026  mqnet authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "mq/layers.h"
#include "mq/tensor.h"

using namespace mq;

namespace {

// Independent reference: per-channel K-tap conv with zero padding and tap
// spacing = dilation.
Tensor depthwise_reference(const Tensor& x, const Tensor& kernel,
                           int dilation) {
  const int t_len = x.dim(0), c_len = x.dim(1), k_len = kernel.dim(0);
  const int half = k_len / 2;
  Tensor y = Tensor::zeros({t_len, c_len});
  for (int t = 0; t < t_len; ++t) {
    for (int c = 0; c < c_len; ++c) {
      double acc = 0.0;
      for (int k = 0; k < k_len; ++k) {
        const int src = t + dilation * (k - half);
        if (src >= 0 && src < t_len) acc += kernel(k, c) * x(src, c);
      }
      y(t, c) = acc;
    }
  }
  return y;
}

}  // namespace

TEST_SUITE("layers") {

TEST_CASE("depthwise conv hand-computed case") {
  std::mt19937_64 rng(1);
  DepthwiseConv1d conv(3, 1, 1, rng);
  conv.kernel().data()[0] = 10.0;
  conv.kernel().data()[1] = 100.0;
  conv.kernel().data()[2] = 1000.0;
  Tensor x = Tensor::from_data({3, 1}, {1, 2, 3});

  Tensor y = conv.forward(x);
  CHECK(y(0, 0) == 2100.0);  // pad + 100*1 + 1000*2
  CHECK(y(1, 0) == 3210.0);
  CHECK(y(2, 0) == 320.0);

  DepthwiseConv1d dilated(3, 1, 2, rng);
  dilated.kernel().data()[0] = 10.0;
  dilated.kernel().data()[1] = 100.0;
  dilated.kernel().data()[2] = 1000.0;
  Tensor z = dilated.forward(x);  // taps at t-2, t, t+2
  CHECK(z(0, 0) == 3100.0);
  CHECK(z(1, 0) == 200.0);
  CHECK(z(2, 0) == 310.0);
}

TEST_CASE("depthwise conv matches reference for dilations 1..4") {
  std::mt19937_64 rng(7);
  for (int dilation = 1; dilation <= 4; ++dilation) {
    DepthwiseConv1d conv(5, 3, dilation, rng);
    Tensor x = Tensor::uniform({12, 3}, -1, 1, rng);
    Tensor y = conv.forward(x);
    Tensor ref = depthwise_reference(x, conv.kernel(), dilation);
    REQUIRE(y.shape() == x.shape());  // same-padding keeps T for any dilation
    for (int t = 0; t < 12; ++t) {
      for (int c = 0; c < 3; ++c) {
        CHECK(y(t, c) == doctest::Approx(ref(t, c)).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("depthwise conv validation") {
  std::mt19937_64 rng(1);
  CHECK_THROWS(DepthwiseConv1d(4, 2, 1, rng));  // even kernel
  CHECK_THROWS(DepthwiseConv1d(3, 2, 0, rng));  // dilation < 1
  DepthwiseConv1d conv(3, 2, 1, rng);
  CHECK_THROWS(conv.forward(Tensor::zeros({5, 3})));  // channel mismatch
  CHECK(conv.param_count() == 6);
}

TEST_CASE("depthwise conv gradients, input and kernel, dilations 1..4") {
  std::mt19937_64 rng(21);
  for (int dilation = 1; dilation <= 4; ++dilation) {
    DepthwiseConv1d conv(3, 2, dilation, rng);
    Tensor x = Tensor::uniform({9, 2}, -1, 1, rng);
    const double ex = check_gradient(
        [&](const Tensor& t) { return sum(sigmoid(conv.forward(t))); }, x,
        1e-5);
    CHECK(ex < 1e-4);
    // The kernel tensor aliases the layer's storage, so perturbing it
    // exercises the weight gradient.
    const double ew = check_gradient(
        [&](const Tensor&) { return sum(sigmoid(conv.forward(x))); },
        conv.kernel(), 1e-5);
    CHECK(ew < 1e-4);
  }
}

TEST_CASE("pointwise conv equals a per-frame affine map") {
  std::mt19937_64 rng(3);
  PointwiseConv1d conv(3, 2, /*with_bias=*/true, rng);
  conv.bias().data()[0] = 0.25;
  conv.bias().data()[1] = -1.5;
  Tensor x = Tensor::uniform({4, 3}, -1, 1, rng);
  Tensor y = conv.forward(x);
  REQUIRE(y.shape() == std::vector<int>{4, 2});
  for (int t = 0; t < 4; ++t) {
    for (int o = 0; o < 2; ++o) {
      double acc = conv.bias()(o);
      for (int i = 0; i < 3; ++i) acc += conv.weight()(o, i) * x(t, i);
      CHECK(y(t, o) == doctest::Approx(acc).epsilon(1e-12));
    }
  }
  CHECK(conv.param_count() == 8);
  PointwiseConv1d no_bias(3, 2, false, rng);
  CHECK(!no_bias.has_bias());
  CHECK(no_bias.param_count() == 6);
  CHECK_THROWS(conv.forward(Tensor::zeros({4, 2})));
}

TEST_CASE("pointwise conv gradients") {
  std::mt19937_64 rng(31);
  PointwiseConv1d conv(4, 3, true, rng);
  Tensor x = Tensor::uniform({6, 4}, -1, 1, rng);
  CHECK(check_gradient(
            [&](const Tensor& t) { return sum(sigmoid(conv.forward(t))); }, x,
            1e-5) < 1e-4);
  CHECK(check_gradient(
            [&](const Tensor&) { return sum(sigmoid(conv.forward(x))); },
            conv.weight(), 1e-5) < 1e-4);
  CHECK(check_gradient(
            [&](const Tensor&) { return sum(sigmoid(conv.forward(x))); },
            conv.bias(), 1e-5) < 1e-4);
}

TEST_CASE("batch norm train mode normalizes with biased variance") {
  BatchNorm1d bn(2);
  Tensor x = Tensor::from_data({4, 2}, {1, 10, 2, 20, 3, 30, 4, 40});
  Tensor y = bn.forward(x, /*training=*/true);
  for (int c = 0; c < 2; ++c) {
    double mean = 0.0, var = 0.0;
    for (int t = 0; t < 4; ++t) mean += y(t, c);
    mean /= 4;
    for (int t = 0; t < 4; ++t) var += (y(t, c) - mean) * (y(t, c) - mean);
    var /= 4;
    CHECK(std::abs(mean) < 1e-12);
    CHECK(var == doctest::Approx(1.0).epsilon(1e-3));  // eps shrinks it a bit
  }
  // Running stats moved toward the batch stats with momentum 0.1.
  CHECK(bn.running_mean()(0) == doctest::Approx(0.1 * 2.5));
  CHECK(bn.running_var()(0) == doctest::Approx(0.9 * 1.0 + 0.1 * 1.25));

  CHECK_THROWS(bn.forward(Tensor::zeros({1, 2}), true));  // needs T >= 2
  CHECK_THROWS(bn.forward(Tensor::zeros({4, 3}), true));
}

TEST_CASE("batch norm eval mode uses running statistics") {
  BatchNorm1d bn(2);
  bn.running_mean().data()[0] = 1.0;
  bn.running_mean().data()[1] = -1.0;
  bn.running_var().data()[0] = 4.0;
  bn.running_var().data()[1] = 0.25;
  bn.gamma().data()[0] = 2.0;
  bn.beta().data()[1] = 5.0;
  Tensor x = Tensor::from_data({1, 2}, {3.0, 0.0});
  Tensor y = bn.forward(x, /*training=*/false);
  CHECK(y(0, 0) == doctest::Approx(2.0 * (3.0 - 1.0) / std::sqrt(4.0 + 1e-5)));
  CHECK(y(0, 1) == doctest::Approx(5.0 + (0.0 + 1.0) / std::sqrt(0.25 + 1e-5)));
}

TEST_CASE("batch norm eval mode does not touch running stats") {
  BatchNorm1d bn(1);
  Tensor x = Tensor::from_data({3, 1}, {5.0, 6.0, 7.0});
  (void)bn.forward(x, false);
  CHECK(bn.running_mean()(0) == 0.0);
  CHECK(bn.running_var()(0) == 1.0);
  (void)bn.forward(x, true);
  CHECK(bn.running_mean()(0) != 0.0);
}

TEST_CASE("batch norm gradients in both modes") {
  std::mt19937_64 rng(41);
  BatchNorm1d bn(3);
  bn.gamma().data()[1] = 1.7;
  bn.beta().data()[2] = -0.3;
  Tensor x = Tensor::uniform({7, 3}, -2, 2, rng);
  for (bool training : {true, false}) {
    CHECK(check_gradient(
              [&](const Tensor& t) {
                return sum(sigmoid(bn.forward(t, training)));
              },
              x, 1e-5) < 1e-4);
    CHECK(check_gradient(
              [&](const Tensor&) {
                return sum(sigmoid(bn.forward(x, training)));
              },
              bn.gamma(), 1e-5) < 1e-4);
    CHECK(check_gradient(
              [&](const Tensor&) {
                return sum(sigmoid(bn.forward(x, training)));
              },
              bn.beta(), 1e-5) < 1e-4);
  }
}

TEST_CASE("plain conv as affine map at kernel 1") {
  std::mt19937_64 rng(9);
  PlainConv1d conv(3, 2, 1, 1, /*with_bias=*/true, rng);
  Tensor x = Tensor::uniform({5, 3}, -1, 1, rng);
  Tensor y = conv.forward(x);
  REQUIRE(y.shape() == std::vector<int>{5, 2});
  for (int t = 0; t < 5; ++t) {
    for (int o = 0; o < 2; ++o) {
      double acc = conv.bias()(o);
      // weight is C_out x C_in x K, K = 1, laid out row-major
      for (int i = 0; i < 3; ++i) acc += conv.weight().data()[o * 3 + i] * x(t, i);
      CHECK(y(t, o) == doctest::Approx(acc).epsilon(1e-12));
    }
  }
}

TEST_CASE("plain conv same-padding and stride arithmetic") {
  std::mt19937_64 rng(10);
  PlainConv1d conv(1, 1, 3, 2, false, rng);
  conv.weight().data()[0] = 1.0;  // taps read x(2t'-1), x(2t'), x(2t'+1)
  conv.weight().data()[1] = 10.0;
  conv.weight().data()[2] = 100.0;
  Tensor x = Tensor::from_data({5, 1}, {1, 2, 3, 4, 5});
  Tensor y = conv.forward(x);
  REQUIRE(y.shape() == std::vector<int>{3, 1});  // ceil(5/2)
  CHECK(y(0, 0) == 1 * 0 + 10 * 1 + 100 * 2);    // left pad of 1
  CHECK(y(1, 0) == 1 * 2 + 10 * 3 + 100 * 4);
  CHECK(y(2, 0) == 1 * 4 + 10 * 5 + 100 * 0);

  CHECK(PlainConv1d(4, 8, 3, 1, true, rng).param_count() == 4 * 8 * 3 + 8);
  CHECK_THROWS(PlainConv1d(4, 8, 3, 0, true, rng));
}

TEST_CASE("plain conv gradients") {
  std::mt19937_64 rng(51);
  for (int stride : {1, 2}) {
    PlainConv1d conv(3, 2, 3, stride, true, rng);
    Tensor x = Tensor::uniform({7, 3}, -1, 1, rng);
    CHECK(check_gradient(
              [&](const Tensor& t) { return sum(sigmoid(conv.forward(t))); },
              x, 1e-5) < 1e-4);
    CHECK(check_gradient(
              [&](const Tensor&) { return sum(sigmoid(conv.forward(x))); },
              conv.weight(), 1e-5) < 1e-4);
    CHECK(check_gradient(
              [&](const Tensor&) { return sum(sigmoid(conv.forward(x))); },
              conv.bias(), 1e-5) < 1e-4);
  }
}

}  // TEST_SUITE
