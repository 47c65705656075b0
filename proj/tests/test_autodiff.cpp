// Copyright 2026 The Artic Authors
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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "artic/autodiff.hpp"
#include "artic/rng.hpp"
#include "artic/tensor.hpp"

using namespace artic;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0,
                     bool requires_grad = true) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor::from(std::move(shape), std::move(v), requires_grad);
}

bool all_finite(std::span<const double> v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("matmul identity and hand-computed product") {
  Graph g;
  Tensor a = Tensor::from({3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  Tensor eye = Tensor::from({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  Tensor prod = matmul(g, a, eye);
  for (std::size_t i = 0; i < 9; ++i) {
    CHECK(prod.values()[i] == a.values()[i]);
  }

  Tensor m = Tensor::from({2, 2}, {1, 2, 3, 4});
  Tensor ones = Tensor::from({2, 1}, {1, 1});
  Tensor r = matmul(g, m, ones);
  CHECK(r.values()[0] == 3.0);
  CHECK(r.values()[1] == 7.0);
}

TEST_CASE("matmul rejects mismatched shapes with both shapes in the message") {
  Graph g;
  Tensor a = Tensor::zeros({2, 3});
  Tensor b = Tensor::zeros({2, 3});
  CHECK_THROWS_WITH_AS(matmul(g, a, b),
                       doctest::Contains("[2x3]"), std::invalid_argument);
}

TEST_CASE("matmul gradient matches central differences") {
  Rng rng(7);
  Tensor a = random_tensor({3, 2}, rng);
  Tensor b = random_tensor({2, 4}, rng);
  auto f = [&](Graph& g) { return sum(g, matmul(g, a, b)); };
  CHECK(grad_check(f, {a, b}, 1e-5) < 1e-6);
}

TEST_CASE("elementwise identities") {
  Graph g;
  Rng rng(3);
  Tensor x = random_tensor({4, 3}, rng);
  Tensor zero = Tensor::zeros({4, 3});
  Tensor one = Tensor::full({4, 3}, 1.0);
  Tensor s = add(g, x, zero);
  Tensor p = mul(g, x, one);
  for (std::size_t i = 0; i < x.numel(); ++i) {
    CHECK(s.values()[i] == x.values()[i]);
    CHECK(p.values()[i] == x.values()[i]);
  }
}

TEST_CASE("relu clamps negatives") {
  Graph g;
  Tensor x = Tensor::from({3}, {-1, 0, 2});
  Tensor y = relu(g, x);
  CHECK(y.values()[0] == 0.0);
  CHECK(y.values()[1] == 0.0);
  CHECK(y.values()[2] == 2.0);
}

TEST_CASE("elementwise backward matches central differences") {
  Rng rng(11);
  Tensor a = random_tensor({3, 4}, rng);
  Tensor b = random_tensor({3, 4}, rng);
  Tensor bias = random_tensor({4}, rng);
  Tensor c = random_tensor({3, 4}, rng, 0.5, 1.5, false);

  auto f_mul = [&](Graph& g) { return sum(g, mul(g, a, b)); };
  CHECK(grad_check(f_mul, {a, b}, 1e-5) < 1e-6);

  auto f_mix = [&](Graph& g) {
    Tensor t = add(g, mul(g, a, c), bias);       // bias broadcast over rows
    t = sub(g, t, b);
    t = relu(g, t);
    t = scale(g, t, 0.7);
    return sum(g, t);
  };
  CHECK(grad_check(f_mix, {a, b, bias}, 1e-5) < 1e-6);
}

TEST_CASE("elementwise rejects non-broadcastable shapes") {
  Graph g;
  Tensor a = Tensor::zeros({3, 4});
  Tensor b = Tensor::zeros({2, 4});
  CHECK_THROWS_AS(add(g, a, b), std::invalid_argument);
  Tensor v = Tensor::zeros({3});  // does not match the last axis (4)
  CHECK_THROWS_AS(mul(g, a, v), std::invalid_argument);
}

TEST_CASE("softmax of equal logits is uniform") {
  Graph g;
  Tensor x = Tensor::full({4}, 2.5);
  Tensor p = softmax(g, x, 0);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(p.values()[i] == doctest::Approx(0.25).epsilon(1e-12));
  }
}

TEST_CASE("softmax is shift-stable for huge logits") {
  Graph g;
  Tensor x = Tensor::from({2}, {1000.0, 1000.0});
  Tensor p = softmax(g, x, 0);
  CHECK(p.values()[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(p.values()[1] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(all_finite(p.values()));
}

TEST_CASE("softmax rows sum to one for random inputs") {
  Rng rng(23);
  Graph g;
  Tensor x = random_tensor({5, 4}, rng, -30.0, 30.0, false);
  Tensor p = softmax(g, x, 1);
  for (std::size_t r = 0; r < 5; ++r) {
    double s = 0.0;
    for (std::size_t j = 0; j < 4; ++j) s += p.values()[r * 4 + j];
    CHECK(std::abs(s - 1.0) < 1e-12);
  }
  Tensor p0 = softmax(g, x, 0);
  for (std::size_t j = 0; j < 4; ++j) {
    double s = 0.0;
    for (std::size_t r = 0; r < 5; ++r) s += p0.values()[r * 4 + j];
    CHECK(std::abs(s - 1.0) < 1e-12);
  }
}

TEST_CASE("softmax gradient matches central differences") {
  Rng rng(5);
  Tensor x = random_tensor({3, 5}, rng);
  Tensor c = random_tensor({3, 5}, rng, -1.0, 1.0, false);
  auto f = [&](Graph& g) { return sum(g, mul(g, softmax(g, x, 1), c)); };
  CHECK(grad_check(f, {x}, 1e-5) < 1e-6);
}

TEST_CASE("layer_norm zeroes a constant row via eps") {
  Graph g;
  Tensor x = Tensor::full({1, 6}, 3.25);
  Tensor gamma = Tensor::full({6}, 1.0);
  Tensor beta = Tensor::zeros({6});
  Tensor y = layer_norm(g, x, gamma, beta, 1e-5);
  for (double v : y.values()) CHECK(v == 0.0);
}

TEST_CASE("layer_norm output has zero mean") {
  Graph g;
  Tensor x = Tensor::from({3}, {1, 2, 3});
  Tensor gamma = Tensor::full({3}, 1.0);
  Tensor beta = Tensor::zeros({3});
  Tensor y = layer_norm(g, x, gamma, beta, 1e-8);
  double mean = (y.values()[0] + y.values()[1] + y.values()[2]) / 3.0;
  CHECK(std::abs(mean) < 1e-12);
}

TEST_CASE("layer_norm gradient matches central differences") {
  Rng rng(17);
  Tensor x = random_tensor({4, 5}, rng);
  Tensor gamma = random_tensor({5}, rng, 0.5, 1.5);
  Tensor beta = random_tensor({5}, rng, -0.5, 0.5);
  Tensor c = random_tensor({4, 5}, rng, -1.0, 1.0, false);
  auto f = [&](Graph& g) {
    return sum(g, mul(g, layer_norm(g, x, gamma, beta, 1e-5), c));
  };
  CHECK(grad_check(f, {x, gamma, beta}, 1e-5) < 1e-5);
}

TEST_CASE("dropout is identity in eval mode and at p=0") {
  Graph g;
  Rng rng(1);
  Tensor x = random_tensor({4, 4}, rng);
  Tensor eval_out = dropout(g, x, 0.5, false, rng);
  Tensor p0_out = dropout(g, x, 0.0, true, rng);
  for (std::size_t i = 0; i < x.numel(); ++i) {
    CHECK(eval_out.values()[i] == x.values()[i]);
    CHECK(p0_out.values()[i] == x.values()[i]);
  }
}

TEST_CASE("dropout rejects p outside [0,1)") {
  Graph g;
  Rng rng(1);
  Tensor x = Tensor::zeros({2});
  CHECK_THROWS_AS(dropout(g, x, 1.0, true, rng), std::invalid_argument);
  CHECK_THROWS_AS(dropout(g, x, -0.1, true, rng), std::invalid_argument);
}

TEST_CASE("dropout empirical zero-fraction at p=0.5 over 1e6 elements") {
  Graph g;
  Rng rng(42);
  Tensor x = Tensor::full({1000, 1000}, 1.0);
  Tensor y = dropout(g, x, 0.5, true, rng);
  std::size_t zeros = 0;
  for (double v : y.values()) {
    if (v == 0.0) {
      ++zeros;
    } else {
      CHECK(v == 2.0);  // inverted scaling 1/(1-p)
    }
  }
  const double frac = static_cast<double>(zeros) / 1e6;
  CHECK(frac == doctest::Approx(0.5).epsilon(0.02));
  CHECK(std::abs(frac - 0.5) < 0.01);
}

TEST_CASE("dropout backward reuses the forward mask") {
  Graph g;
  Rng rng(9);
  Tensor x = Tensor::full({100}, 1.0, true);
  Tensor y = dropout(g, x, 0.5, true, rng);
  Tensor loss = sum(g, y);
  g.backward(loss);
  for (std::size_t i = 0; i < 100; ++i) {
    const double expect = y.values()[i] == 0.0 ? 0.0 : 2.0;
    CHECK(x.grad()[i] == expect);
  }
}

TEST_CASE("mse_loss basics") {
  Graph g;
  Tensor p = Tensor::from({2}, {1, 2}, true);
  Tensor t = Tensor::from({2}, {0, 0});
  Tensor mask = Tensor::full({2}, 1.0);
  Tensor l = mse_loss(g, p, t, mask);
  CHECK(l.item() == doctest::Approx(2.5).epsilon(1e-15));

  Tensor same = mse_loss(g, t, t, mask);
  CHECK(same.item() == 0.0);

  Tensor none = Tensor::zeros({2});
  CHECK_THROWS_AS(mse_loss(g, p, t, none), std::invalid_argument);
}

TEST_CASE("mse_loss ignores masked frames") {
  Graph g;
  Tensor p = Tensor::from({3, 2}, {1, 1, 50, 50, 2, 2}, true);
  Tensor t = Tensor::zeros({3, 2});
  Tensor mask = Tensor::from({3}, {1, 0, 1});
  Tensor l = mse_loss(g, p, t, mask);
  CHECK(l.item() == doctest::Approx((1 + 1 + 4 + 4) / 4.0).epsilon(1e-15));
}

TEST_CASE("mse_loss gradient matches central differences") {
  Rng rng(29);
  Tensor p = random_tensor({4, 3}, rng);
  Tensor t = random_tensor({4, 3}, rng, -1.0, 1.0, false);
  Tensor mask = Tensor::from({4}, {1, 1, 0, 1});
  auto f = [&](Graph& g) { return mse_loss(g, p, t, mask); };
  CHECK(grad_check(f, {p}, 1e-5) < 1e-6);
}

TEST_CASE("cross_entropy_loss of uniform logits is ln K") {
  Graph g;
  Tensor z = Tensor::zeros({3, 8});
  Tensor mask = Tensor::full({3}, 1.0);
  Tensor l = cross_entropy_loss(g, z, {0, 3, 7}, mask);
  CHECK(l.item() == doctest::Approx(std::log(8.0)).epsilon(1e-12));
}

TEST_CASE("cross_entropy_loss saturates for confident correct logits") {
  Graph g;
  std::vector<double> z(2 * 4, 0.0);
  z[0 * 4 + 1] = 30.0;
  z[1 * 4 + 2] = 30.0;
  Tensor logits = Tensor::from({2, 4}, std::move(z));
  Tensor mask = Tensor::full({2}, 1.0);
  Tensor l = cross_entropy_loss(g, logits, {1, 2}, mask);
  CHECK(l.item() < 1e-9);
}

TEST_CASE("cross_entropy_loss rejects out-of-range labels with frame index") {
  Graph g;
  Tensor z = Tensor::zeros({3, 4});
  Tensor mask = Tensor::full({3}, 1.0);
  CHECK_THROWS_WITH_AS(cross_entropy_loss(g, z, {0, 4, 1}, mask),
                       doctest::Contains("frame 1"), std::invalid_argument);
}

TEST_CASE("cross_entropy_loss gradient matches central differences") {
  Rng rng(31);
  Tensor z = random_tensor({5, 4}, rng, -2.0, 2.0);
  Tensor mask = Tensor::from({5}, {1, 1, 0, 1, 1});
  std::vector<int> labels = {0, 2, 1, 3, 1};
  auto f = [&](Graph& g) { return cross_entropy_loss(g, z, labels, mask); };
  CHECK(grad_check(f, {z}, 1e-5) < 1e-6);
}

TEST_CASE("backward on a disconnected constant leaves parameter grads zero") {
  Graph g;
  Tensor x = Tensor::scalar(2.0, true);
  Tensor y = mul(g, x, x);  // builds a node, but the loss below ignores it
  (void)y;
  Tensor constant = Tensor::scalar(5.0);
  g.backward(constant);
  CHECK_FALSE(x.has_grad());
  CHECK(x.grad_mut()[0] == 0.0);
}

TEST_CASE("backward accumulates fan-in: x + x has gradient 2") {
  Graph g;
  Tensor x = Tensor::scalar(3.0, true);
  Tensor y = add(g, x, x);
  g.backward(y);
  CHECK(x.grad()[0] == 2.0);
}

TEST_CASE("backward on a diamond graph matches hand computation") {
  // loss = (x*y + x) + x*y, with the x*y node shared by both branches:
  // dloss/dx = 2y + 1, dloss/dy = 2x.
  Graph g;
  Tensor x = Tensor::scalar(1.5, true);
  Tensor y = Tensor::scalar(-2.0, true);
  Tensor t = mul(g, x, y);
  Tensor loss = add(g, add(g, t, x), t);
  g.backward(loss);
  CHECK(x.grad()[0] == doctest::Approx(2.0 * -2.0 + 1.0).epsilon(1e-15));
  CHECK(y.grad()[0] == doctest::Approx(2.0 * 1.5).epsilon(1e-15));
}

TEST_CASE("backward is deterministic and rejects non-scalar losses") {
  Rng rng(41);
  Tensor a = random_tensor({4, 4}, rng);
  Tensor b = random_tensor({4, 4}, rng);
  Graph g;
  Tensor loss = sum(g, mul(g, matmul(g, a, b), b));
  Tensor nonscalar = matmul(g, a, b);
  CHECK_THROWS_AS(g.backward(nonscalar), std::invalid_argument);

  g.backward(loss);
  std::vector<double> first(a.grad().begin(), a.grad().end());
  g.backward(loss);
  for (std::size_t i = 0; i < first.size(); ++i) {
    CHECK(a.grad()[i] == first[i]);
  }
}

TEST_CASE("grad_check is near-exact on a quadratic") {
  Tensor x = Tensor::from({3}, {1, 2, 3}, true);
  auto f = [&](Graph& g) { return sum(g, mul(g, x, x)); };
  CHECK(grad_check(f, {x}, 1e-5) < 1e-10);
}

TEST_CASE("grad_check flags a corrupted backward") {
  Rng rng(13);
  Tensor a = random_tensor({3, 3}, rng);
  Tensor b = random_tensor({3, 3}, rng);
  auto f = [&](Graph& g) {
    g.corrupt_matmul_backward = true;
    return sum(g, matmul(g, a, b));
  };
  CHECK(grad_check(f, {a, b}, 1e-5) > 1e-6);
}

TEST_CASE("values and gradients stay finite through a composed graph") {
  Rng rng(53);
  for (int trial = 0; trial < 10; ++trial) {
    Tensor a = random_tensor({5, 4}, rng, -3.0, 3.0);
    Tensor w = random_tensor({4, 4}, rng, -2.0, 2.0);
    Tensor gamma = random_tensor({4}, rng, 0.5, 2.0);
    Tensor beta = random_tensor({4}, rng, -1.0, 1.0);
    Tensor mask = Tensor::full({5}, 1.0);
    Graph g;
    Tensor h = layer_norm(g, matmul(g, a, w), gamma, beta, 1e-5);
    Tensor p = softmax(g, h, 1);
    Tensor loss = add(g, sum(g, p), mse_loss(g, h, a, mask));
    g.backward(loss);
    CHECK(all_finite(h.values()));
    CHECK(all_finite(p.values()));
    CHECK(all_finite(a.grad()));
    CHECK(all_finite(w.grad()));
  }
}

TEST_CASE("transpose and slicing have exact adjoints") {
  Rng rng(61);
  Tensor x = random_tensor({4, 6}, rng);
  Tensor c = random_tensor({3, 4}, rng, -1.0, 1.0, false);
  auto f = [&](Graph& g) {
    Tensor t = transpose(g, slice_cols(g, x, 2, 5));  // [3x4]
    return sum(g, mul(g, t, c));
  };
  CHECK(grad_check(f, {x}, 1e-5) < 1e-6);
}

TEST_CASE("concat ops invert slicing") {
  Rng rng(67);
  Tensor a = random_tensor({2, 3}, rng);
  Tensor b = random_tensor({2, 2}, rng);
  Tensor r = random_tensor({3, 3}, rng);
  auto f = [&](Graph& g) {
    Tensor wide = concat_cols(g, {a, b});       // [2x5]
    Tensor tall = concat_rows(g, {slice_cols(g, wide, 0, 3), r});  // [5x3]
    return sum(g, mul(g, tall, tall));
  };
  CHECK(grad_check(f, {a, b, r}, 1e-5) < 1e-6);

  Graph g;
  Tensor wide = concat_cols(g, {a, b});
  CHECK(wide.dim(0) == 2);
  CHECK(wide.dim(1) == 5);
  CHECK(wide.values()[3] == b.values()[0]);
}
