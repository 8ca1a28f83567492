#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "nsm/adam.hpp"
#include "nsm/ops.hpp"
#include "nsm/tensor.hpp"

using namespace nsm;

TEST_CASE("elementwise forward values") {
  auto a = Tensor<double>::from_data({3}, {1.0, -2.0, 3.0}, true);
  auto b = Tensor<double>::from_data({3}, {0.5, 4.0, -1.0}, true);
  CHECK(add(a, b).data() == std::vector<double>{1.5, 2.0, 2.0});
  CHECK(sub(a, b).data() == std::vector<double>{0.5, -6.0, 4.0});
  CHECK(mul(a, b).data() == std::vector<double>{0.5, -8.0, -3.0});
  CHECK(scale(a, 2.0).data() == std::vector<double>{2.0, -4.0, 6.0});
  CHECK(add_scalar(a, 1.0).data() == std::vector<double>{2.0, -1.0, 4.0});
  CHECK(relu(a).data() == std::vector<double>{1.0, 0.0, 3.0});
  CHECK(leaky_relu(a, 0.1).data() == std::vector<double>{1.0, -0.2, 3.0});
  CHECK(sum(a).item() == doctest::Approx(2.0));
  CHECK(mean(a).item() == doctest::Approx(2.0 / 3.0));
  CHECK(sigmoid(Tensor<double>::scalar(0.0, true)).item() == doctest::Approx(0.5));
  CHECK(tanh_op(Tensor<double>::scalar(0.0, true)).item() == doctest::Approx(0.0));
}

TEST_CASE("shape mismatch is a shape error") {
  auto a = Tensor<double>::zeros({2, 2});
  auto b = Tensor<double>::zeros({4});
  CHECK_THROWS_AS(add(a, b), Error);
  try {
    add(a, b);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::shape);
  }
}

TEST_CASE("backward through a diamond accumulates both paths") {
  // y = sum(a*a + 3a): dy/da = 2a + 3
  auto a = Tensor<double>::from_data({2}, {1.5, -0.5}, true);
  auto y = sum(add(mul(a, a), scale(a, 3.0)));
  y.backward();
  CHECK(a.grad()[0] == doctest::Approx(2 * 1.5 + 3));
  CHECK(a.grad()[1] == doctest::Approx(2 * -0.5 + 3));
}

TEST_CASE("shared subexpression is visited once, gradient still correct") {
  auto a = Tensor<double>::from_data({1}, {2.0}, true);
  auto s = mul(a, a);       // a^2
  auto y = sum(mul(s, s));  // a^4, dy/da = 4a^3
  y.backward();
  CHECK(a.grad()[0] == doctest::Approx(4 * 8.0));
}

TEST_CASE("detach blocks gradient flow") {
  auto a = Tensor<double>::from_data({2}, {1.0, 2.0}, true);
  auto y = sum(mul(a.detach(), a));
  y.backward();
  // only the non-detached factor sees gradient: dy/da = a.detach()
  CHECK(a.grad()[0] == doctest::Approx(1.0));
  CHECK(a.grad()[1] == doctest::Approx(2.0));
}

TEST_CASE("grad accumulates across backward calls until zero_grad") {
  auto a = Tensor<double>::from_data({1}, {3.0}, true);
  auto y1 = sum(scale(a, 2.0));
  y1.backward();
  auto y2 = sum(scale(a, 2.0));
  y2.backward();
  CHECK(a.grad()[0] == doctest::Approx(4.0));
  a.zero_grad();
  auto y3 = sum(scale(a, 2.0));
  y3.backward();
  CHECK(a.grad()[0] == doctest::Approx(2.0));
}

TEST_CASE("backward on non-scalar root is rejected") {
  auto a = Tensor<double>::from_data({2}, {1.0, 2.0}, true);
  auto y = mul(a, a);
  CHECK_THROWS_AS(y.backward(), Error);
}

TEST_CASE("l1 / l2 / mse reductions") {
  auto a = Tensor<double>::from_data({2}, {1.0, -3.0}, true);
  auto b = Tensor<double>::from_data({2}, {0.0, 1.0}, true);
  CHECK(l1_distance(a, b).item() == doctest::Approx((1.0 + 4.0) / 2));
  CHECK(squared_l2_distance(a, b).item() == doctest::Approx(1.0 + 16.0));
  CHECK(mse(a, b).item() == doctest::Approx((1.0 + 16.0) / 2));
}

TEST_CASE("adam step matches a hand-computed first update") {
  // After one step from zero moments, update = lr * g/(1-b1) /
  // (sqrt(g^2/(1-b2)) + eps) ~= lr * sign(g).
  AdamState<double> st;
  st.learning_rate = 0.1;
  auto p = Tensor<double>::from_data({2}, {1.0, -2.0}, true);
  std::vector<double> g = {0.5, -0.25};

  // independent oracle: explicit formulas
  const double b1 = st.beta1, b2 = st.beta2, eps = st.epsilon;
  std::vector<double> expect(2);
  for (int i = 0; i < 2; ++i) {
    const double m = (1 - b1) * g[i];
    const double v = (1 - b2) * g[i] * g[i];
    const double mh = m / (1 - b1);
    const double vh = v / (1 - b2);
    expect[i] = p.data()[i] - 0.1 * mh / (std::sqrt(vh) + eps);
  }
  p.grad() = g;
  adam_step(p, p.grad(), st);
  CHECK(p.data()[0] == doctest::Approx(expect[0]).epsilon(1e-12));
  CHECK(p.data()[1] == doctest::Approx(expect[1]).epsilon(1e-12));
  CHECK(st.step_count == 1);
}

TEST_CASE("adam converges on a quadratic") {
  auto p = Tensor<double>::from_data({1}, {5.0}, true);
  AdamState<double> st;
  st.learning_rate = 0.2;
  for (int i = 0; i < 500; ++i) {
    p.zero_grad();
    auto l = sum(mul(p, p));
    l.backward();
    adam_step(p, p.grad(), st);
  }
  CHECK(std::abs(p.data()[0]) < 1e-2);
}

TEST_CASE("adam rejects non-finite gradients before touching the parameter") {
  auto p = Tensor<float>::from_data({1}, {1.0f}, true);
  AdamState<float> st;
  p.grad() = {std::numeric_limits<float>::quiet_NaN()};
  CHECK_THROWS_AS(adam_step(p, p.grad(), st), Error);
  CHECK(p.data()[0] == 1.0f);
  CHECK(st.step_count == 0);
}

TEST_CASE("optimizer steps only parameters that received gradients") {
  auto a = Tensor<float>::from_data({1}, {1.0f}, true);
  auto b = Tensor<float>::from_data({1}, {1.0f}, true);
  Optimizer<float> opt({{"a", a}, {"b", b}}, 0.1f);
  auto l = sum(mul(a, a));
  opt.zero_grad();
  l.backward();
  opt.step();
  CHECK(a.data()[0] != 1.0f);
  CHECK(b.data()[0] == 1.0f);
}

TEST_CASE("conv2d known 1x1x2x2 case") {
  // input [[1,2],[3,4]], kernel [[1,0],[0,1]] valid stride 1 -> 1+4 = 5
  auto x = Tensor<double>::from_data({1, 1, 2, 2}, {1, 2, 3, 4}, true);
  auto k = Tensor<double>::from_data({1, 1, 2, 2}, {1, 0, 0, 1}, true);
  auto y = conv2d(x, k, 1, 0);
  CHECK(y.shape() == Shape{1, 1, 1, 1});
  CHECK(y.item() == doctest::Approx(5.0));
}

TEST_CASE("max_pool picks maxima and routes gradient to them") {
  auto x = Tensor<double>::from_data({1, 1, 2, 2}, {1, 7, 3, 4}, true);
  auto y = max_pool(x, 2, 2);
  CHECK(y.item() == doctest::Approx(7.0));
  sum(y).backward();
  CHECK(x.grad() == std::vector<double>{0, 1, 0, 0});
}

TEST_CASE("upsample_nearest repeats cells") {
  auto x = Tensor<double>::from_data({1, 1, 1, 2}, {1, 2}, true);
  auto y = upsample_nearest(x, 2);
  CHECK(y.shape() == Shape{1, 1, 2, 4});
  CHECK(y.data() == std::vector<double>{1, 1, 2, 2, 1, 1, 2, 2});
}
