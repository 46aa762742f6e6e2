#include "inimnet/verify.hpp"

#include "inimnet/adjoint.hpp"
#include "inimnet/dynamics.hpp"
#include "inimnet/jacobian.hpp"
#include "inimnet/propagate.hpp"
#include "inimnet/train.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace inim {

namespace {

double rel_error(const Vec& got, const Vec& want) {
  const double denom = std::max(want.norm(), 1e-12);
  return (got - want).norm() / denom;
}

double rel_error(double got, double want) {
  return std::abs(got - want) / std::max(std::abs(want), 1e-12);
}

struct SuiteBuilder {
  SuiteReport report;
  std::optional<double> tol_override;

  // A tolerance check: pass when measured < tol (the CLI override wins).
  void check(const std::string& name, double measured, double default_tol) {
    const double tol = tol_override.value_or(default_tol);
    report.checks.push_back({name, measured, tol, measured < tol});
  }

  // A structural check with a fixed built-in threshold.
  void structural(const std::string& name, double measured, double threshold,
                  bool pass) {
    report.checks.push_back({name, measured, threshold, pass});
  }
};

Mat random_matrix(std::mt19937_64& rng, int rows, int cols) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Mat m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) m(r, c) = u(rng);
  }
  return m;
}

Vec random_vector(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Vec v(n);
  for (int i = 0; i < n; ++i) v[i] = u(rng);
  return v;
}

// Pinned small MLP benchmark: 2 -> 8 -> 2 tanh net. The difference
// schemes carry a closure bias that grows with the network's higher
// derivatives, so the gradient tolerances are stated for this fixed
// instance rather than arbitrary draws.
struct MlpBench {
  MlpDynamics model{{2, 8, 2}};
  Vec theta;
  Vec x;
  Vec y;

  MlpBench() {
    theta = model.init_params(0, 0.5);
    x = Vec(2);
    x << 0.35, -0.2;
    y = Vec(2);
    y << -0.1, 0.25;
  }
};

void suite_theorem1(SuiteBuilder& b, std::uint64_t seed) {
  // Scalar a = 1 on [-1, 0]: z(q; p, x) = e^{q-p} x.
  LinearDynamics scalar(Mat::Identity(1, 1));
  LayerParams none = LayerParams::shared(Vec());
  Vec x1 = Vec::Ones(1);
  JacobianScheme exact;

  auto scalar_error = [&](std::size_t layers) {
    DepthGrid grid = DepthGrid::uniform(-1.0, 0.0, layers + 1);
    StateBundle fwd = forward_imbed(scalar, none, x1, grid, exact);
    return rel_error(fwd.outputs.front()[0], std::exp(1.0));
  };
  b.check("scalar_exact_vs_closed_form", scalar_error(1000), 1e-2);

  std::mt19937_64 rng(seed);
  Mat a = random_matrix(rng, 2, 2);
  Vec bias = random_vector(rng, 2);
  Vec x2 = random_vector(rng, 2);
  LinearDynamics linear(a, bias);
  DepthGrid grid = DepthGrid::uniform(-1.0, 0.0, 1001);
  StateBundle fwd = forward_imbed(linear, none, x2, grid, exact);
  Vec want = linear_closed_form(a, bias, x2, -1.0, 0.0);
  b.check("matrix_linear_vs_closed_form", rel_error(fwd.outputs.front(), want), 1e-2);

  // Order-1 ladder: halving h should halve the error.
  double worst = 0.0;
  bool ok = true;
  double prev = scalar_error(125);
  for (std::size_t layers : {250u, 500u, 1000u, 2000u}) {
    const double cur = scalar_error(layers);
    const double ratio = prev / cur;
    worst = std::max(worst, std::abs(ratio - 2.0) / 2.0);
    ok = ok && ratio > 1.6 && ratio < 2.4;
    prev = cur;
  }
  b.structural("order_one_ladder", worst, 0.2, ok);
}

void suite_theorem2(SuiteBuilder& b, std::uint64_t seed) {
  LayerParams none = LayerParams::shared(Vec());

  // Scalar closed form: lambda(p) = e^{q-p} (e^{q-p} x - y).
  {
    const double x = 1.3, y = 0.4;
    LinearDynamics scalar(Mat::Identity(1, 1));
    LossSpec loss = LossSpec::quadratic_terminal(Vec::Constant(1, y));
    DepthGrid grid = DepthGrid::uniform(-1.0, 0.0, 2001);
    JacobianScheme exact;
    AdjointBundle adj =
        backward_imbed(scalar, none, grid, Vec::Constant(1, x), loss, exact);
    const double want = std::exp(1.0) * (std::exp(1.0) * x - y);
    b.check("scalar_imbed_vs_closed_form", rel_error(adj.lambda.front()[0], want),
            1e-2);
    b.check("trivial_anchor", std::abs(adj.lambda.back()[0] - (x - y)), 1e-12);
  }

  // MLP: imbedded adjoint against the forward-then-backward oracle.
  {
    MlpBench bench;
    LayerParams layers = LayerParams::shared(bench.theta);
    DepthGrid grid = DepthGrid::uniform(-0.5, 0.0, 1001);
    LossSpec loss = LossSpec::quadratic_terminal(bench.y);
    JacobianScheme sym;
    sym.mode = JacobianMode::SymmetricDiff;
    AdjointBundle adj = backward_imbed(bench.model, layers, grid, bench.x, loss, sym);

    ThetaSchedule sched = constant_schedule(bench.theta);
    Trajectory traj = forward_direct_path(bench.model, sched, bench.x, -0.5, 0.0, 1000);
    std::vector<Vec> lam = adjoint_direct(bench.model, sched, traj, loss);
    b.check("mlp_imbed_vs_direct", rel_error(adj.lambda.front(), lam.front()), 1e-2);
  }
}

void suite_theorem3(SuiteBuilder& b, std::uint64_t) {
  // f = theta, R = theta^2 / 2, T = (z(q) - y)^2 / 2 over [0, 1]:
  // J(theta) = theta^2/2 + (x + theta - y)^2/2, optimal at (y - x) / 2.
  const double x = 0.3, y = 1.1;
  const double theta_star = (y - x) / 2.0;
  ConstantControlDynamics control;
  DepthGrid grid({0.0, 1.0});
  LossSpec loss = LossSpec::quadratic_terminal(Vec::Constant(1, y));
  loss.running = [](double, const Vec&, const Vec& th) {
    return 0.5 * th.squaredNorm();
  };
  loss.running_grad_z = [](double, const Vec& z, const Vec&) {
    return Vec(Vec::Zero(z.size()));
  };
  loss.running_grad_theta = [](double, const Vec&, const Vec& th) { return th; };
  JacobianScheme exact;

  auto residual_at = [&](double theta) {
    LayerParams layers = LayerParams::shared(Vec::Constant(1, theta));
    AdjointBundle adj =
        backward_imbed(control, layers, grid, Vec::Constant(1, x), loss, exact);
    return optimality_residual(control, layers, grid, Vec::Constant(1, x), loss, adj)
        .front();
  };
  b.check("residual_at_optimum", residual_at(theta_star), 1e-6);
  const double off = residual_at(theta_star + 0.1);
  b.structural("residual_off_optimum", off, 0.1, off > 0.1);
}

void suite_imbedding_rule(SuiteBuilder& b, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);

  Mat a = random_matrix(rng, 2, 2);
  Vec bias = random_vector(rng, 2);
  LinearDynamics linear(a, bias);
  ProjectileDynamics projectile;
  ThetaSchedule none = constant_schedule(Vec());

  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const double q = 0.0;
    const double p2 = -1.0 + 0.3 * u(rng);
    const double p1 = p2 + (q - p2) * (0.2 + 0.6 * u(rng));
    Vec x = random_vector(rng, 2);
    for (const DynamicsModel* model : {static_cast<const DynamicsModel*>(&linear),
                                       static_cast<const DynamicsModel*>(&projectile)}) {
      auto [lhs, rhs] = compose_imbedding(*model, none, x, p2, p1, q, 400,
                                          SolveMethod::RK4);
      worst = std::max(worst, rel_error(lhs, rhs));
    }
  }
  b.check("composition_agreement", worst, 1e-8);
}

void suite_gradients(SuiteBuilder& b, std::uint64_t seed) {
  MlpBench bench;
  LayerParams layers = LayerParams::shared(bench.theta);
  const double p = -0.5, q = 0.0;
  DepthGrid grid = DepthGrid::uniform(p, q, 1001);
  LossSpec loss = LossSpec::quadratic_terminal(bench.y);
  ThetaSchedule sched = constant_schedule(bench.theta);
  JacobianScheme sym;
  sym.mode = JacobianMode::SymmetricDiff;

  auto loss_of = [&](const Vec& x0, const Vec& th, double p0) {
    return total_loss_direct(bench.model, constant_schedule(th), x0, p0, q, loss, 2000);
  };

  // Input gradient.
  {
    AdjointBundle adj = backward_imbed(bench.model, layers, grid, bench.x, loss, sym);
    Vec fd = finite_difference_gradient(
        [&](const Vec& x0) { return loss_of(x0, bench.theta, p); }, bench.x, 1e-6);
    b.check("lambda_vs_fd_x", rel_error(adj.lambda.front(), fd), 1e-3);
  }

  // Parameter and depth gradients from the augmented blocks.
  {
    AdjointBundle adj =
        backward_augmented(bench.model, layers, grid, bench.x, loss, sym);
    Vec fd_theta = finite_difference_gradient(
        [&](const Vec& th) { return loss_of(bench.x, th, p); }, bench.theta, 1e-6);
    b.check("lambda_theta_vs_fd", rel_error(adj.lambda_theta.front(), fd_theta), 1e-3);

    const double dp = 1e-5;
    const double fd_p = (loss_of(bench.x, bench.theta, p + dp) -
                         loss_of(bench.x, bench.theta, p - dp)) /
                        (2.0 * dp);
    // Lambda_t carries the depth sensitivity with the opposite orientation:
    // deepening the network means decreasing p.
    b.check("lambda_t_vs_fd", rel_error(adj.lambda_t.front(), -fd_p), 1e-2);
  }

  // Reverse mode through the discrete recursion against finite differences
  // of the same discrete loss.
  {
    DepthGrid small = DepthGrid::uniform(p, q, 9);
    Dataset batch;
    std::mt19937_64 rng(seed ^ 0x9e3779b9ULL);
    for (int s = 0; s < 3; ++s) {
      batch.push_back({random_vector(rng, 2), random_vector(rng, 2), {}});
    }
    SupervisedCost cost = SupervisedCost::mse();
    JacobianScheme exact;
    std::vector<Vec> grads =
        grad_through_system(bench.model, layers, small, batch, cost, exact);
    Vec fd = finite_difference_gradient(
        [&](const Vec& th) {
          return batch_loss(bench.model, LayerParams::shared(th), small, batch, cost,
                            exact);
        },
        bench.theta, 1e-6);
    b.check("through_system_vs_fd", rel_error(grads.front(), fd), 1e-5);
  }
}

void suite_convergence(SuiteBuilder& b, std::uint64_t seed) {
  LayerParams none = LayerParams::shared(Vec());

  // Difference quotients reproduce the exact scheme on linear dynamics.
  {
    std::mt19937_64 rng(seed);
    Mat a = random_matrix(rng, 2, 2);
    Vec bias = random_vector(rng, 2);
    Vec x = random_vector(rng, 2);
    LinearDynamics linear(a, bias);
    DepthGrid grid = DepthGrid::uniform(-1.0, 0.0, 201);
    JacobianScheme exact;
    JacobianScheme sym;
    sym.mode = JacobianMode::SymmetricDiff;
    StateBundle fe = forward_imbed(linear, none, x, grid, exact);
    StateBundle fs = forward_imbed(linear, none, x, grid, sym);
    double worst = 0.0;
    for (std::size_t i = 0; i < fe.size(); ++i) {
      worst = std::max(worst, rel_error(fs.outputs[i], fe.outputs[i]));
    }
    b.check("symdiff_matches_exact_linear", worst, 1e-8);
  }

  // One-sided quotient bias is first order in delta (nonlinear model).
  {
    MlpDynamics model({1, 4, 1});
    Vec theta = model.init_params(seed, 1.5);
    LayerParams layers = LayerParams::shared(theta);
    Vec x = Vec::Constant(1, 0.7);
    DepthGrid grid = DepthGrid::uniform(-1.0, 0.0, 201);
    JacobianScheme sym;
    sym.mode = JacobianMode::SymmetricDiff;
    Vec reference = forward_imbed(model, layers, x, grid, sym).outputs.front();

    auto bias_at = [&](double delta) {
      JacobianScheme newton;
      newton.mode = JacobianMode::NewtonDiff;
      newton.deltas = Vec::Constant(1, delta);
      Vec out = forward_imbed(model, layers, x, grid, newton).outputs.front();
      return (out - reference).norm();
    };
    double worst = 0.0;
    bool ok = true;
    double prev = bias_at(2e-2);
    for (double delta : {1e-2, 5e-3, 2.5e-3}) {
      const double cur = bias_at(delta);
      const double ratio = prev / cur;
      worst = std::max(worst, std::abs(ratio - 2.0) / 2.0);
      ok = ok && ratio > 1.5 && ratio < 2.5;
      prev = cur;
    }
    b.structural("newton_bias_first_order", worst, 0.3, ok);
  }

  // Deepening the grid keeps improving the cropped scheme.
  {
    MlpDynamics model({2, 6, 2});
    Vec theta = model.init_params(seed + 1, 1.0);
    LayerParams layers = LayerParams::shared(theta);
    std::mt19937_64 rng(seed + 2);
    Vec x = random_vector(rng, 2);
    Vec reference =
        forward_direct(model, constant_schedule(theta), x, -1.0, 0.0, 4000,
                       SolveMethod::RK4);
    JacobianScheme cropped;
    cropped.mode = JacobianMode::Cropped;
    double prev_err = std::numeric_limits<double>::infinity();
    bool decreasing = true;
    double last = 0.0;
    for (std::size_t layers_n : {10u, 100u, 1000u}) {
      DepthGrid grid = DepthGrid::uniform(-1.0, 0.0, layers_n + 1);
      Vec out = forward_imbed(model, layers, x, grid, cropped).outputs.front();
      last = rel_error(out, reference);
      decreasing = decreasing && last < prev_err;
      prev_err = last;
    }
    b.structural("cropped_error_decreases", last, 1.0, decreasing);
  }
}

}  // namespace

std::vector<std::string> suite_names() {
  return {"theorem1", "theorem2",  "theorem3",
          "imbedding_rule", "gradients", "convergence"};
}

SuiteReport run_suite(const std::string& name, std::optional<double> tol,
                      std::uint64_t seed) {
  SuiteBuilder b;
  b.report.suite = name;
  b.tol_override = tol;
  if (name == "theorem1") {
    suite_theorem1(b, seed);
  } else if (name == "theorem2") {
    suite_theorem2(b, seed);
  } else if (name == "theorem3") {
    suite_theorem3(b, seed);
  } else if (name == "imbedding_rule") {
    suite_imbedding_rule(b, seed);
  } else if (name == "gradients") {
    suite_gradients(b, seed);
  } else if (name == "convergence") {
    suite_convergence(b, seed);
  } else {
    fail(ErrorCode::UnknownSuite, "unknown verification suite: " + name);
  }
  return b.report;
}

}  // namespace inim
