/*
 * Copyright 2026 The mitml Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <catch2/catch_amalgamated.hpp>

#include "mitml/gradcheck.hpp"
#include "mitml/ops.hpp"
#include "mitml/tensor.hpp"
#include "test_helpers.hpp"

using mitml::Tensor;

TEST_CASE("tensor construction validates shape against data") {
  CHECK_THROWS(Tensor::from_data({2, 3}, {1.0, 2.0}));
  CHECK_THROWS(Tensor::from_data({0}, {}));
  CHECK_THROWS(Tensor::zeros({2, -1}));
  const Tensor t = Tensor::from_data({2, 2}, {1, 2, 3, 4});
  CHECK(t.rank() == 2);
  CHECK(t.dim(0) == 2);
  CHECK(t.size() == 4);
  CHECK(t[3] == 4.0);
  CHECK_THROWS(t.item());
  CHECK(Tensor::scalar(7.0).item() == 7.0);
  CHECK(Tensor::full({3}, 2.5).data() == std::vector<double>{2.5, 2.5, 2.5});
}

TEST_CASE("copies alias storage, detach copies it") {
  Tensor a = Tensor::from_data({2}, {1.0, 2.0});
  Tensor b = a;
  b.mutable_data()[0] = 9.0;
  CHECK(a[0] == 9.0);
  Tensor c = a.detach();
  c.mutable_data()[0] = 5.0;
  CHECK(a[0] == 9.0);
  CHECK_FALSE(c.tracks_grad());
}

TEST_CASE("elementwise forward values") {
  const Tensor a = Tensor::from_data({3}, {1, 2, 3});
  const Tensor b = Tensor::from_data({3}, {4, 5, 6});
  CHECK(mul(a, b).data() == std::vector<double>{4, 10, 18});
  CHECK(add(a, b).data() == std::vector<double>{5, 7, 9});
  CHECK(sub(b, a).data() == std::vector<double>{3, 3, 3});
  CHECK(sigmoid(Tensor::zeros({2})).data() == std::vector<double>{0.5, 0.5});
  CHECK(relu(Tensor::from_data({2}, {-1, 2})).data() ==
        std::vector<double>{0, 2});
  CHECK(scale(a, 2.0).data() == std::vector<double>{2, 4, 6});
  CHECK(add_const(a, 1.0).data() == std::vector<double>{2, 3, 4});
}

TEST_CASE("binary ops reject shape mismatches with both shapes reported") {
  const Tensor a = Tensor::zeros({2, 3});
  const Tensor b = Tensor::zeros({3, 2});
  try {
    (void)add(a, b);
    FAIL("expected a shape error");
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2x3]") != std::string::npos);
    CHECK(msg.find("[3x2]") != std::string::npos);
  }
}

TEST_CASE("relu backward applies the zero subgradient convention") {
  Tensor x = Tensor::from_data({2}, {-1.0, 2.0});
  x.set_requires_grad(true);
  sum_all(relu(x)).backward();
  CHECK(x.grad() == std::vector<double>{0.0, 1.0});

  // Exactly at the origin the subgradient is 0.
  Tensor z = Tensor::from_data({1}, {0.0});
  z.set_requires_grad(true);
  sum_all(relu(z)).backward();
  CHECK(z.grad() == std::vector<double>{0.0});
}

TEST_CASE("matmul forward hand cases") {
  const Tensor eye = Tensor::from_data({2, 2}, {1, 0, 0, 1});
  const Tensor m = Tensor::from_data({2, 2}, {1, 2, 3, 4});
  CHECK(matmul(eye, m).data() == m.data());
  const Tensor row = Tensor::from_data({1, 2}, {1, 2});
  const Tensor col = Tensor::from_data({2, 1}, {3, 4});
  CHECK(matmul(row, col).data() == std::vector<double>{11});
  CHECK_THROWS(matmul(row, row));
}

TEST_CASE("matmul gradients match finite differences below 1e-6") {
  for (std::uint64_t seed : {1, 2, 3}) {
    mitml::Rng rng(seed);
    std::vector<Tensor> in{testutil::random_tensor(rng, {3, 4}),
                           testutil::random_tensor(rng, {4, 2})};
    const auto res = mitml::grad_check(
        [](const std::vector<Tensor>& v) {
          return sum_all(mul(matmul(v[0], v[1]), matmul(v[0], v[1])));
        },
        in);
    INFO(res.describe());
    CHECK(res.ok(1e-6));
  }
}

TEST_CASE("grad_check on sum of squares reproduces the analytic gradient") {
  Tensor x = Tensor::from_data({2}, {1.0, 2.0});
  std::vector<Tensor> in{x};
  const auto res = mitml::grad_check(
      [](const std::vector<Tensor>& v) { return sum_all(mul(v[0], v[0])); },
      in);
  CHECK(res.coords_checked == 2);
  CHECK(res.max_rel_err < 1e-8);
  REQUIRE(x.has_grad());
  CHECK_THAT(x.grad()[0], Catch::Matchers::WithinAbs(2.0, 1e-12));
  CHECK_THAT(x.grad()[1], Catch::Matchers::WithinAbs(4.0, 1e-12));
}

TEST_CASE("constant functions have zero gradients") {
  Tensor x = Tensor::from_data({3}, {0.3, -0.2, 0.9});
  std::vector<Tensor> in{x};
  const auto res = mitml::grad_check(
      [](const std::vector<Tensor>&) { return mitml::Tensor::scalar(4.0); },
      in);
  CHECK(res.max_rel_err == 0.0);
  for (std::size_t i = 0; i < 3; ++i) CHECK(x.grad_at(static_cast<int>(i)) == 0.0);
}

TEST_CASE("backward sums contributions from repeated uses of a tensor") {
  mitml::Rng rng(11);
  const Tensor base = testutil::random_tensor(rng, {2, 3});
  const Tensor a = testutil::random_tensor(rng, {2, 3});
  const Tensor b = testutil::random_tensor(rng, {2, 3});

  Tensor x1 = base.detach();
  x1.set_requires_grad(true);
  sum_all(add(mul(x1, a), mul(x1, b))).backward();

  // Algebraic rewrite with a single use of x: x*(a+b).
  Tensor x2 = base.detach();
  x2.set_requires_grad(true);
  sum_all(mul(x2, add(a, b))).backward();

  CHECK(testutil::max_abs_diff(x1.grad(), x2.grad()) < 1e-15);
}

TEST_CASE("forward passes are pure") {
  mitml::Rng rng(5);
  const Tensor x = testutil::random_tensor(rng, {4, 4});
  const Tensor w = testutil::random_tensor(rng, {4, 4});
  const auto once = sum_all(sigmoid(matmul(x, w))).item();
  const auto twice = sum_all(sigmoid(matmul(x, w))).item();
  CHECK(once == twice);
}

TEST_CASE("gradients accumulate across backward calls until zeroed") {
  Tensor x = Tensor::from_data({2}, {1.0, 1.0});
  x.set_requires_grad(true);
  sum_all(mul(x, x)).backward();
  sum_all(mul(x, x)).backward();
  CHECK(x.grad() == std::vector<double>{4.0, 4.0});
  x.zero_grad();
  CHECK(x.grad() == std::vector<double>{0.0, 0.0});
}

TEST_CASE("untracked graphs allocate no gradient buffers") {
  const Tensor a = Tensor::from_data({2}, {1, 2});
  const Tensor y = mul(a, a);
  CHECK_FALSE(y.has_node());
  CHECK_FALSE(a.has_grad());
  sum_all(y).backward();  // scalar without a graph: a no-op beyond the seed
  CHECK_FALSE(a.has_grad());
}

TEST_CASE("backward requires a scalar") {
  Tensor x = Tensor::from_data({2}, {1, 2});
  x.set_requires_grad(true);
  CHECK_THROWS(mul(x, x).backward());
}
