#include <doctest.h>

#include "inimnet/core.hpp"
#include "inimnet/dynamics.hpp"

using namespace inim;

TEST_CASE("validate_grid accepts strictly increasing points") {
  CHECK(!validate_grid({-1.0, -0.5, 0.0}).has_value());
}

TEST_CASE("validate_grid rejects duplicate points") {
  auto err = validate_grid({0.0, 0.0});
  REQUIRE(err.has_value());
  CHECK(*err == ErrorCode::NonMonotoneGrid);
}

TEST_CASE("validate_grid rejects decreasing points") {
  auto err = validate_grid({0.0, -1.0});
  REQUIRE(err.has_value());
  CHECK(*err == ErrorCode::NonMonotoneGrid);
}

TEST_CASE("validate_grid rejects single point") {
  auto err = validate_grid({0.0});
  REQUIRE(err.has_value());
  CHECK(*err == ErrorCode::TooFewPoints);
}

TEST_CASE("validate_grid rejects non-finite entries") {
  auto err = validate_grid({0.0, std::nan("")});
  REQUIRE(err.has_value());
  CHECK(*err == ErrorCode::NonFiniteEntry);
}

TEST_CASE("DepthGrid constructor throws typed errors") {
  CHECK_THROWS_AS(DepthGrid({0.0}), Error);
  try {
    DepthGrid g({1.0, 0.0});
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonMonotoneGrid);
  }
}

TEST_CASE("DepthGrid uniform spacing and accessors") {
  DepthGrid g = DepthGrid::uniform(-1.0, 0.0, 5);
  CHECK(g.size() == 5);
  CHECK(g.layers() == 4);
  CHECK(g.p_min() == doctest::Approx(-1.0));
  CHECK(g.q() == doctest::Approx(0.0));
  CHECK(g.step(0) == doctest::Approx(0.25));
  CHECK(g[2] == doctest::Approx(-0.5));
}

TEST_CASE("DepthGrid index_of locates grid points and rejects others") {
  DepthGrid g({0.0, 0.25, 0.5, 0.75, 1.0});
  auto idx = g.index_of(0.5);
  REQUIRE(idx.has_value());
  CHECK(*idx == 2);
  CHECK(!g.index_of(0.3).has_value());
}

TEST_CASE("phi_coefficient is f at the invariant input") {
  ProjectileDynamics f(9.81);
  Vec x(2);
  x << 3.0, -1.0;
  Vec phi = phi_coefficient(f, 0.0, x, Vec());
  CHECK(phi[0] == doctest::Approx(-1.0));
  CHECK(phi[1] == doctest::Approx(-9.81));
}

TEST_CASE("mse_terminal value and gradient") {
  Vec y(2);
  y << 1.0, -1.0;
  LossSpec loss = LossSpec::mse_terminal(y);
  Vec z(2);
  z << 2.0, 1.0;
  // |z - y|^2 / (2N) = (1 + 4) / 4
  CHECK(loss.terminal(z) == doctest::Approx(1.25));
  Vec g = loss.terminal_grad(z);
  CHECK(g[0] == doctest::Approx(0.5));
  CHECK(g[1] == doctest::Approx(1.0));
}

TEST_CASE("quadratic_terminal value and gradient") {
  Vec y(1);
  y << 0.5;
  LossSpec loss = LossSpec::quadratic_terminal(y);
  Vec z(1);
  z << 2.0;
  CHECK(loss.terminal(z) == doctest::Approx(1.125));
  CHECK(loss.terminal_grad(z)[0] == doctest::Approx(1.5));
}

TEST_CASE("LossSpec running helpers default to zero") {
  LossSpec loss = LossSpec::quadratic_terminal(Vec::Zero(2));
  CHECK(!loss.has_running());
  CHECK(loss.running_or_zero(0.0, Vec::Zero(2), Vec()) == 0.0);
  CHECK(loss.running_grad_z_or_zero(0.0, Vec::Zero(2), Vec()).isZero());
}

TEST_CASE("JacobianMode names round-trip") {
  for (JacobianMode m : {JacobianMode::Exact, JacobianMode::SymmetricDiff,
                         JacobianMode::NewtonDiff, JacobianMode::Cropped}) {
    auto parsed = parse_jacobian_mode(to_string(m));
    REQUIRE(parsed.has_value());
    CHECK(*parsed == m);
  }
  CHECK(!parse_jacobian_mode("bogus").has_value());
}

TEST_CASE("JacobianScheme default deltas follow 1e-3 * (1 + |x|)") {
  JacobianScheme scheme;
  Vec x(2);
  x << 3.0, -1.0;
  Vec d = scheme.deltas_for(x);
  CHECK(d[0] == doctest::Approx(4e-3));
  CHECK(d[1] == doctest::Approx(2e-3));

  scheme.deltas = Vec::Constant(2, 1e-2);
  Vec d2 = scheme.deltas_for(x);
  CHECK(d2[0] == doctest::Approx(1e-2));
}

TEST_CASE("error codes have printable names") {
  CHECK(std::string(to_string(ErrorCode::NonMonotoneGrid)).size() > 0);
  CHECK(std::string(to_string(ErrorCode::DivergedTraining)).size() > 0);
  CHECK(std::string(to_string(ErrorCode::UnknownSuite)).size() > 0);
}
