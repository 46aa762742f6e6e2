#include <doctest.h>

#include "inimnet/dynamics.hpp"
#include "inimnet/jacobian.hpp"

#include <cmath>

using namespace inim;

TEST_CASE("exact_sensitivity_step: zero field derivative leaves J unchanged") {
  Mat j(2, 2);
  j << 1.0, 0.5, -0.5, 2.0;
  CHECK((exact_sensitivity_step(j, Mat::Zero(2, 2), 0.1) - j).norm() == 0.0);
}

TEST_CASE("exact_sensitivity_step: scalar first Euler step is 1 + a h") {
  Mat j(1, 1), a(1, 1);
  j << 1.0;
  a << 2.0;
  CHECK(exact_sensitivity_step(j, a, 0.05)(0, 0) == doctest::Approx(1.1));
}

TEST_CASE("exact_sensitivity_step: 1000 steps over unit interval approach e") {
  Mat j = Mat::Identity(1, 1), a(1, 1);
  a << 1.0;
  const double h = 1e-3;
  for (int i = 0; i < 1000; ++i) j = exact_sensitivity_step(j, a, h);
  CHECK(std::abs(j(0, 0) - std::exp(1.0)) / std::exp(1.0) < 2e-3);
}

TEST_CASE("cropped_jacobian_step follows the direct formula") {
  Mat j(1, 1), g(1, 1);
  j << 1.0;
  g << 3.0;
  CHECK(cropped_jacobian_step(j, Mat::Zero(1, 1), 0.1)(0, 0) == doctest::Approx(1.0));
  CHECK(cropped_jacobian_step(j, g, 0.1)(0, 0) == doctest::Approx(0.7));
}

TEST_CASE("symmetric_diff_bundle: identity map gives the identity Jacobian") {
  Vec x(3);
  x << 1.0, -2.0, 0.5;
  auto out = symmetric_diff_bundle([](const Vec& v) { return v; }, x,
                                   Vec::Constant(3, 1e-3));
  CHECK((out.value - x).norm() == 0.0);
  CHECK((out.jacobian - Mat::Identity(3, 3)).norm() < 1e-12);
}

TEST_CASE("symmetric_diff_bundle: centred quotient is exact on quadratics") {
  Vec x(1);
  x << 1.0;
  auto out = symmetric_diff_bundle(
      [](const Vec& v) { return Vec(v.array().square()); }, x,
      Vec::Constant(1, 0.1));
  // (1.21 - 0.81) / 0.2 = 2 with no truncation error
  CHECK(out.jacobian(0, 0) == doctest::Approx(2.0).epsilon(1e-13));
}

TEST_CASE("symmetric_diff_bundle matches the matrix on linear maps") {
  Mat a(2, 2);
  a << 0.3, -1.2, 0.7, 0.1;
  Vec x(2);
  x << 0.5, -0.25;
  auto out = symmetric_diff_bundle([&](const Vec& v) { return Vec(a * v); }, x,
                                   Vec::Constant(2, 0.05));
  CHECK((out.jacobian - a).norm() < 1e-12);
}

TEST_CASE("newton_diff_bundle: identity and linear maps are exact") {
  Vec x(2);
  x << 0.4, 1.3;
  auto id = newton_diff_bundle([](const Vec& v) { return v; }, x,
                               Vec::Constant(2, 1e-3));
  CHECK((id.jacobian - Mat::Identity(2, 2)).norm() < 1e-12);

  Mat a(2, 2);
  a << 1.0, 2.0, 3.0, 4.0;
  auto lin = newton_diff_bundle([&](const Vec& v) { return Vec(a * v); }, x,
                                Vec::Constant(2, 1e-2));
  CHECK((lin.jacobian - a).norm() < 1e-10);
}

TEST_CASE("newton_diff_bundle carries the forward-quotient bias on quadratics") {
  Vec x(1);
  x << 1.0;
  auto out = newton_diff_bundle(
      [](const Vec& v) { return Vec(v.array().square()); }, x,
      Vec::Constant(1, 0.1));
  // (1.21 - 1) / 0.1 = 2.1: first-order bias delta * f'' / 2
  CHECK(out.jacobian(0, 0) == doctest::Approx(2.1).epsilon(1e-13));
}

TEST_CASE("newton bias scales linearly in delta") {
  Vec x(1);
  x << 1.0;
  double prev = 0.0;
  for (int k = 0; k < 3; ++k) {
    const double d = 0.1 / (1 << k);
    auto out = newton_diff_bundle(
        [](const Vec& v) { return Vec(v.array().square()); }, x,
        Vec::Constant(1, d));
    const double bias = out.jacobian(0, 0) - 2.0;
    if (k > 0) CHECK(prev / bias == doctest::Approx(2.0).epsilon(1e-6));
    prev = bias;
  }
}

TEST_CASE("finite_difference_jacobian recovers an analytic Jacobian") {
  Vec x(2);
  x << 0.3, -0.8;
  auto fn = [](const Vec& v) {
    Vec out(2);
    out << std::sin(v[0]) * v[1], std::exp(v[1]);
    return out;
  };
  Mat j = finite_difference_jacobian(fn, x);
  Mat expected(2, 2);
  expected << std::cos(x[0]) * x[1], std::sin(x[0]), 0.0, std::exp(x[1]);
  CHECK((j - expected).norm() < 1e-7);
}

TEST_CASE("finite_difference_gradient recovers an analytic gradient") {
  Vec x(2);
  x << 1.0, 2.0;
  auto fn = [](const Vec& v) { return v[0] * v[0] + 3.0 * v[1]; };
  Vec g = finite_difference_gradient(fn, x);
  CHECK(g[0] == doctest::Approx(2.0).epsilon(1e-7));
  CHECK(g[1] == doctest::Approx(3.0).epsilon(1e-7));
}
