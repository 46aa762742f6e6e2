#include <doctest.h>

#include "inimnet/dynamics.hpp"
#include "inimnet/jacobian.hpp"

#include <cmath>
#include <random>

using namespace inim;

namespace {

// Finite-difference contract: analytic partials match central differences to
// 1e-4 relative with a 1e-8 absolute floor.
void check_partials(const DynamicsModel& f, double t, const Vec& z, const Vec& theta) {
  const Mat dz_fd = finite_difference_jacobian(
      [&](const Vec& zz) { return f.eval(t, zz, theta); }, z);
  const Mat dz = f.d_dz(t, z, theta);
  CHECK((dz - dz_fd).norm() <= 1e-4 * (1.0 + dz_fd.norm()) + 1e-8);

  if (f.param_count() > 0) {
    const Mat dth_fd = finite_difference_jacobian(
        [&](const Vec& th) { return f.eval(t, z, th); }, theta);
    const Mat dth = f.d_dtheta(t, z, theta);
    CHECK((dth - dth_fd).norm() <= 1e-4 * (1.0 + dth_fd.norm()) + 1e-8);
  }
}

}  // namespace

TEST_CASE("linear_closed_form: zero dynamics returns the input") {
  Vec x(2);
  x << 0.7, -0.3;
  Vec out = linear_closed_form(Mat::Zero(2, 2), Vec::Zero(2), x, -1.0, 0.0);
  CHECK((out - x).norm() < 1e-14);
}

TEST_CASE("linear_closed_form: scalar a=1 gives e") {
  Mat a(1, 1);
  a << 1.0;
  Vec x(1);
  x << 1.0;
  Vec out = linear_closed_form(a, Vec::Zero(1), x, 0.0, 1.0);
  CHECK(out[0] == doctest::Approx(std::exp(1.0)).epsilon(1e-10));
}

TEST_CASE("linear_closed_form: scalar a=1, b=1, x=0 gives e-1") {
  Mat a(1, 1);
  a << 1.0;
  Vec b(1), x(1);
  b << 1.0;
  x << 0.0;
  Vec out = linear_closed_form(a, b, x, 0.0, 1.0);
  CHECK(out[0] == doctest::Approx(std::exp(1.0) - 1.0).epsilon(1e-10));
}

TEST_CASE("projectile_closed_form matches hand values") {
  Vec x(2);
  x << 0.0, 5.0;
  Vec out = projectile_closed_form(9.81, x, 0.0, 1.0);
  CHECK(out[0] == doctest::Approx(0.095).epsilon(1e-12));
  CHECK(out[1] == doctest::Approx(-4.81).epsilon(1e-12));

  Vec x2(2);
  x2 << 10.0, 0.0;
  Vec out2 = projectile_closed_form(9.81, x2, 0.5, 1.0);
  CHECK(out2[0] == doctest::Approx(8.77375).epsilon(1e-12));
  CHECK(out2[1] == doctest::Approx(-4.905).epsilon(1e-12));
}

TEST_CASE("projectile_closed_form: zero elapsed depth is the identity") {
  Vec x(2);
  x << 4.2, -1.1;
  Vec out = projectile_closed_form(9.81, x, 0.3, 0.3);
  CHECK((out - x).norm() == 0.0);
}

TEST_CASE("LinearDynamics evaluates A z + b and reports A as d_dz") {
  Mat a(2, 2);
  a << 0.0, 1.0, -1.0, 0.0;
  Vec b(2);
  b << 0.5, -0.5;
  LinearDynamics f(a, b);
  Vec z(2);
  z << 1.0, 2.0;
  Vec out = f.eval(0.0, z, Vec());
  CHECK(out[0] == doctest::Approx(2.5));
  CHECK(out[1] == doctest::Approx(-1.5));
  CHECK((f.d_dz(0.0, z, Vec()) - a).norm() == 0.0);
  CHECK(f.param_count() == 0);
}

TEST_CASE("LinearDynamics single-argument constructor zeroes b") {
  Mat a(2, 2);
  a << 1.0, 0.0, 0.0, 1.0;
  LinearDynamics f(a);
  Vec z(2);
  z << 3.0, -4.0;
  CHECK((f.eval(0.0, z, Vec()) - z).norm() == 0.0);
}

TEST_CASE("LinearParamDynamics pack/eval and partial contract") {
  Mat a(2, 2);
  a << 0.2, -0.3, 0.1, 0.4;
  Vec b(2);
  b << 0.5, -0.1;
  LinearParamDynamics f(2);
  Vec theta = LinearParamDynamics::pack(a, b);
  CHECK(theta.size() == f.param_count());
  Vec z(2);
  z << 1.5, -0.7;
  CHECK((f.eval(0.0, z, theta) - (a * z + b)).norm() < 1e-14);
  check_partials(f, 0.0, z, theta);
}

TEST_CASE("ProjectileDynamics rejects non-positive g") {
  CHECK_THROWS_AS(ProjectileDynamics(-1.0), Error);
}

TEST_CASE("ConstantControlDynamics is the scalar control field") {
  ConstantControlDynamics f;
  Vec z(1), theta(1);
  z << 0.3;
  theta << 0.8;
  CHECK(f.eval(0.0, z, theta)[0] == doctest::Approx(0.8));
  CHECK(f.d_dz(0.0, z, theta)(0, 0) == 0.0);
  CHECK(f.d_dtheta(0.0, z, theta)(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("MlpDynamics: all-zero parameters give the zero map") {
  MlpDynamics f({2, 4, 2});
  Vec z(2);
  z << 1.0, -2.0;
  Vec out = f.eval(0.0, z, Vec::Zero(f.param_count()));
  CHECK(out.norm() == 0.0);
}

TEST_CASE("MlpDynamics: single linear layer with identity weights is identity") {
  MlpDynamics f({2, 2});
  REQUIRE(f.param_count() == 6);
  Vec theta = Vec::Zero(6);
  theta[0] = 1.0;  // W row-major: [1 0; 0 1], b = 0
  theta[3] = 1.0;
  Vec z(2);
  z << 1.0, 2.0;
  CHECK((f.eval(0.0, z, theta) - z).norm() < 1e-14);
}

TEST_CASE("MlpDynamics rejects wrong parameter length") {
  MlpDynamics f({2, 4, 2});
  Vec z(2);
  z << 0.1, 0.2;
  try {
    f.eval(0.0, z, Vec::Zero(3));
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ParamLengthMismatch);
  }
}

TEST_CASE("MlpDynamics partials satisfy the finite-difference contract") {
  MlpDynamics f({2, 5, 3, 2});
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Vec theta = f.init_params(4, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    Vec z(2);
    z << u(rng), u(rng);
    check_partials(f, 0.0, z, theta);
  }
}

TEST_CASE("MlpDynamics with time feature is time-dependent and d_dt matches FD") {
  MlpDynamics f({2, 4, 2}, true);
  CHECK(f.time_dependent());
  Vec theta = f.init_params(9, 1.0);
  Vec z(2);
  z << 0.4, -0.6;
  const double t0 = 0.3, dt = 1e-6;
  Vec fd = (f.eval(t0 + dt, z, theta) - f.eval(t0 - dt, z, theta)) / (2.0 * dt);
  CHECK((f.d_dt(t0, z, theta) - fd).norm() < 1e-6);
}

TEST_CASE("MlpDynamics init_params is seeded and bounded by scale/sqrt(fan_in)") {
  MlpDynamics f({2, 8, 2});
  Vec a = f.init_params(42, 0.5);
  Vec b = f.init_params(42, 0.5);
  Vec c = f.init_params(43, 0.5);
  CHECK((a - b).norm() == 0.0);
  CHECK((a - c).norm() > 0.0);
  CHECK(a.cwiseAbs().maxCoeff() <= 0.5 / std::sqrt(2.0) + 1e-12);
}

TEST_CASE("MlpDynamics checkpoint JSON round-trips") {
  MlpDynamics f({2, 3, 2});
  Vec theta = f.init_params(7, 1.0);
  std::string text = f.to_checkpoint_json(theta);
  auto [g, theta2] = MlpDynamics::from_checkpoint_json(text);
  CHECK(g.layer_sizes() == f.layer_sizes());
  CHECK((theta2 - theta).norm() == 0.0);
}

TEST_CASE("Euler solve of linear dynamics converges to closed form at order 1") {
  Mat a(1, 1);
  a << 1.0;
  LinearDynamics f(a);
  Vec x(1);
  x << 1.0;
  const double target = std::exp(1.0);
  double prev_err = 0.0;
  for (int k = 0; k < 4; ++k) {
    const int steps = 100 << k;
    Vec z = x;
    const double h = 1.0 / steps;
    for (int i = 0; i < steps; ++i) z += h * f.eval(i * h, z, Vec());
    const double err = std::abs(z[0] - target);
    if (k > 0) {
      const double ratio = prev_err / err;
      CHECK(ratio > 1.8);
      CHECK(ratio < 2.2);
    }
    prev_err = err;
  }
}
