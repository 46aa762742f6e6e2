#include "inimnet/adjoint.hpp"

#include "inimnet/jacobian.hpp"

#include <algorithm>
#include <map>

namespace inim {

std::vector<Vec> adjoint_direct(const DynamicsModel& f, const ThetaSchedule& theta,
                                const Trajectory& trajectory, const LossSpec& loss) {
  const auto& t = trajectory.times;
  const auto& zs = trajectory.states;
  if (t.size() < 2 || t.size() != zs.size()) {
    fail(ErrorCode::LengthMismatch, "adjoint_direct: malformed trajectory");
  }
  std::vector<Vec> lam(t.size());
  lam.back() = loss.terminal_grad(zs.back());
  for (std::size_t k = t.size() - 1; k > 0; --k) {
    const double dt = t[k] - t[k - 1];
    const Vec th = theta(t[k]);
    lam[k - 1] = lam[k] + dt * (f.d_dz(t[k], zs[k], th).transpose() * lam[k] +
                                loss.running_grad_z_or_zero(t[k], zs[k], th));
    if (!all_finite(lam[k - 1])) {
      fail(ErrorCode::NonFinite, "adjoint_direct: adjoint blew up");
    }
  }
  return lam;
}

double total_loss_direct(const DynamicsModel& f, const ThetaSchedule& theta,
                         const Vec& x, double p, double q, const LossSpec& loss,
                         int steps, SolveMethod method) {
  Trajectory traj = forward_direct_path(f, theta, x, p, q, steps, method);
  double acc = 0.0;
  if (loss.has_running()) {
    // Left-endpoint rule, matching the Euler layer structure.
    for (std::size_t k = 0; k + 1 < traj.times.size(); ++k) {
      const double h = traj.times[k + 1] - traj.times[k];
      acc += h * loss.running(traj.times[k], traj.states[k], theta(traj.times[k]));
    }
  }
  if (loss.terminal) acc += loss.terminal(traj.states.back());
  return acc;
}

namespace {

// Central-difference Hessians of the loss pieces; analytic second derivatives
// are not part of LossSpec.
Mat terminal_hessian_fd(const LossSpec& loss, const Vec& x) {
  const Eigen::Index n = x.size();
  Mat h(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double d = 1e-5 * (1.0 + std::abs(x[i]));
    Vec xp = x;
    Vec xm = x;
    xp[i] += d;
    xm[i] -= d;
    h.col(i) = (loss.terminal_grad(xp) - loss.terminal_grad(xm)) / (2.0 * d);
  }
  return 0.5 * (h + h.transpose());
}

Mat running_hessian_fd(const LossSpec& loss, double t, const Vec& x, const Vec& theta) {
  const Eigen::Index n = x.size();
  if (!loss.running_grad_z) return Mat::Zero(n, n);
  Mat h(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double d = 1e-5 * (1.0 + std::abs(x[i]));
    Vec xp = x;
    Vec xm = x;
    xp[i] += d;
    xm[i] -= d;
    h.col(i) = (loss.running_grad_z(t, xp, theta) - loss.running_grad_z(t, xm, theta)) /
               (2.0 * d);
  }
  return 0.5 * (h + h.transpose());
}

void check_layer_count(const LayerParams& layers, const DepthGrid& grid) {
  if (!layers.is_shared() && layers.count() != grid.layers()) {
    fail(ErrorCode::LengthMismatch, "layer parameter count != grid layer count");
  }
}

// Exact / Cropped reverse pass: the adjoint's input Jacobian is carried as a
// matrix updated from the model's analytic d_dz. Exact keeps the symmetric
// pair of transport terms plus the running Hessian; Cropped keeps only the
// first-order transport, mirroring the forward cropping.
AdjointBundle exact_backward(const DynamicsModel& f, const LayerParams& layers,
                             const DepthGrid& grid, const Vec& x,
                             const LossSpec& loss, const JacobianScheme& scheme,
                             const AdjointOptions& options) {
  const std::size_t n = grid.size();
  AdjointBundle bundle;
  bundle.input = x;
  bundle.depths = grid.points();
  bundle.lambda.assign(n, Vec());
  bundle.lambda_grad.assign(n, Mat());

  Vec lam = loss.terminal_grad(x);
  Mat hgrad = terminal_hessian_fd(loss, x);
  bundle.lambda[n - 1] = lam;
  bundle.lambda_grad[n - 1] = hgrad;

  for (std::size_t i = n - 1; i-- > 0;) {
    const Vec& theta = layers.at(i);
    const int k = options.substeps;
    const double hs = grid.step(i) / k;
    for (int m = 1; m <= k; ++m) {
      const double pe = grid[i + 1] - hs * m;
      const Vec phi = phi_coefficient(f, pe, x, theta);
      const Mat a = f.d_dz(pe, x, theta);
      const Vec rz = loss.running_grad_z_or_zero(pe, x, theta);
      Mat h_next;
      if (scheme.mode == JacobianMode::Exact) {
        h_next = hgrad + hs * (hgrad * a + a.transpose() * hgrad +
                               running_hessian_fd(loss, pe, x, theta));
      } else {
        h_next = cropped_jacobian_step(hgrad, hgrad * a, -hs);
      }
      const Mat& h_use = options.use_updated_jacobian ? h_next : hgrad;
      lam = lam + hs * (h_use * phi + a.transpose() * lam + rz);
      hgrad = h_next;
    }
    if (!all_finite(lam) || !all_finite(hgrad)) {
      fail(ErrorCode::NonFinite, "backward_imbed: adjoint diverged");
    }
    bundle.lambda[i] = lam;
    bundle.lambda_grad[i] = hgrad;
  }
  return bundle;
}

struct DiffEngineConfig {
  bool with_theta = false;
  bool with_t = false;
  const std::vector<std::pair<double, Vec>>* observations = nullptr;
  const PairGrad* cost_grad = nullptr;
};

// Difference-scheme reverse pass. All adjoint blocks are co-evolved at the
// central input and at the shifted inputs x +/- delta e_j; every gradient
// with respect to x is a difference quotient across those branches, with the
// shifted branches closing on the central quotient (zeroth-order closure).
// In observation mode a forward co-state per branch supplies the z(q; p, x)
// values and Jacobian factors the per-depth impulses need.
AdjointBundle diff_backward(const DynamicsModel& f, const LayerParams& layers,
                            const DepthGrid& grid, const Vec& x,
                            const LossSpec& loss, const JacobianScheme& scheme,
                            int substeps, bool use_updated,
                            const DiffEngineConfig& cfg) {
  const Eigen::Index n_dim = x.size();
  const std::size_t n = grid.size();
  const Eigen::Index n_param = f.param_count();
  const bool sym = scheme.mode == JacobianMode::SymmetricDiff;
  const bool obs_mode = cfg.observations != nullptr;
  const Vec deltas = scheme.deltas_for(x);

  // Branch inputs: central, then +shifts, then -shifts (symmetric only).
  const std::size_t n_branch = 1 + static_cast<std::size_t>(sym ? 2 * n_dim : n_dim);
  std::vector<Vec> xb(n_branch);
  xb[0] = x;
  for (Eigen::Index j = 0; j < n_dim; ++j) {
    Vec s = x;
    s[j] += deltas[j];
    xb[1 + j] = s;
  }
  if (sym) {
    for (Eigen::Index j = 0; j < n_dim; ++j) {
      Vec s = x;
      s[j] -= deltas[j];
      xb[1 + n_dim + j] = s;
    }
  }

  auto quotient = [&](auto&& value_of, Eigen::Index rows) {
    Mat q(rows, n_dim);
    for (Eigen::Index j = 0; j < n_dim; ++j) {
      if (sym) {
        q.col(j) = (value_of(1 + j) - value_of(1 + n_dim + j)) / (2.0 * deltas[j]);
      } else {
        q.col(j) = (value_of(1 + j) - value_of(0)) / deltas[j];
      }
    }
    return q;
  };

  // Observation table: grid index -> targets at that depth.
  std::map<std::size_t, std::vector<const Vec*>> obs_at;
  if (obs_mode) {
    for (const auto& [p_obs, y] : *cfg.observations) {
      auto idx = grid.index_of(p_obs);
      if (!idx) {
        fail(ErrorCode::ObservationOffGrid, "observation depth not on the grid");
      }
      if (y.size() != n_dim) {
        fail(ErrorCode::LengthMismatch, "observation target has wrong dimension");
      }
      obs_at[*idx].push_back(&y);
    }
  }

  // Branch states.
  std::vector<Vec> lam(n_branch);
  std::vector<Vec> lth;
  std::vector<double> lt;
  std::vector<Vec> fz;  // forward co-states, observation mode only
  for (std::size_t b = 0; b < n_branch; ++b) {
    lam[b] = obs_mode ? Vec(Vec::Zero(n_dim)) : Vec(loss.terminal_grad(xb[b]));
  }
  if (cfg.with_theta) {
    lth.assign(n_branch, Vec(Vec::Zero(n_param)));
  }
  if (obs_mode) {
    fz = xb;
    // The trivial network's Jacobian is the identity, so an observation at
    // q contributes its raw cost gradient.
    if (auto it = obs_at.find(n - 1); it != obs_at.end()) {
      for (std::size_t b = 0; b < n_branch; ++b) {
        for (const Vec* y : it->second) lam[b] += (*cfg.cost_grad)(xb[b], *y);
      }
    }
  }
  const Vec& theta_top = layers.at(grid.layers() - 1);
  if (cfg.with_t) {
    lt.resize(n_branch);
    for (std::size_t b = 0; b < n_branch; ++b) {
      lt[b] = lam[b].dot(phi_coefficient(f, grid.q(), xb[b], theta_top));
    }
  }

  AdjointBundle bundle;
  bundle.input = x;
  bundle.depths = grid.points();
  bundle.lambda.assign(n, Vec());
  bundle.lambda_grad.assign(n, Mat());
  if (cfg.with_theta) bundle.lambda_theta.assign(n, Vec());
  if (cfg.with_t) bundle.lambda_t.assign(n, 0.0);

  auto record = [&](std::size_t i) {
    bundle.lambda[i] = lam[0];
    bundle.lambda_grad[i] = quotient([&](std::size_t b) { return lam[b]; }, n_dim);
    if (cfg.with_theta) bundle.lambda_theta[i] = lth[0];
    if (cfg.with_t) bundle.lambda_t[i] = lt[0];
    if (!all_finite(bundle.lambda[i]) || !all_finite(bundle.lambda_grad[i]) ||
        (cfg.with_theta && !all_finite(bundle.lambda_theta[i])) ||
        (cfg.with_t && !std::isfinite(bundle.lambda_t[i]))) {
      fail(ErrorCode::NonFinite, "imbedded adjoint diverged");
    }
  };
  record(n - 1);

  std::vector<Vec> lam_new(n_branch), lth_new, fz_new;
  std::vector<double> lt_new;
  if (cfg.with_theta) lth_new.resize(n_branch);
  if (cfg.with_t) lt_new.resize(n_branch);
  if (obs_mode) fz_new.resize(n_branch);

  for (std::size_t i = n - 1; i-- > 0;) {
    const Vec& theta = layers.at(i);
    const double hs = grid.step(i) / substeps;
    for (int m = 1; m <= substeps; ++m) {
      const double pe = grid[i + 1] - hs * m;

      auto step_branches = [&](const Mat& hq, const Mat& hthq, const Mat& jfq,
                               std::size_t b_begin, std::size_t b_end) {
        for (std::size_t b = b_begin; b < b_end; ++b) {
          const bool shifted = b != 0;
          const double sign =
              (shifted && scheme.mode == JacobianMode::NewtonDiff &&
               scheme.newton_negation)
                  ? -1.0
                  : 1.0;
          const Vec phi = phi_coefficient(f, pe, xb[b], theta);
          const Mat a = f.d_dz(pe, xb[b], theta);
          const Vec rz = obs_mode ? Vec(Vec::Zero(n_dim))
                                  : loss.running_grad_z_or_zero(pe, xb[b], theta);
          lam_new[b] = lam[b] + hs * (sign * (hq * phi) + a.transpose() * lam[b] + rz);
          if (cfg.with_theta) {
            const Vec rth = obs_mode
                                ? Vec(Vec::Zero(n_param))
                                : loss.running_grad_theta_or_zero(pe, xb[b], theta);
            lth_new[b] = lth[b] + hs * (sign * (hthq * phi) +
                                        f.d_dtheta(pe, xb[b], theta).transpose() * lam[b] +
                                        rth);
          }
          if (cfg.with_t && b == 0) {
            // For autonomous f with constant theta the depth block satisfies
            // Lambda_t = <Lambda, Phi> + accumulated running terms, so its
            // step is the p-derivative of that inner product; no co-states
            // of its own are needed.
            lt_new[b] = lt[b] + hs * (phi.dot(hq * phi) + lam[b].dot(a * phi) +
                                      rz.dot(phi));
          }
          if (obs_mode) {
            fz_new[b] = fz[b] + hs * (sign * (jfq * phi));
          }
        }
      };

      auto all_quotients = [&](const std::vector<Vec>& l, const std::vector<Vec>& t,
                               const std::vector<Vec>& z, Mat& hq, Mat& hthq,
                               Mat& jfq) {
        hq = quotient([&](std::size_t b) { return l[b]; }, n_dim);
        if (cfg.with_theta) {
          hthq = quotient([&](std::size_t b) { return t[b]; }, n_param);
        }
        if (obs_mode) jfq = quotient([&](std::size_t b) { return z[b]; }, n_dim);
      };

      Mat hq, hthq, jfq;
      all_quotients(lam, lth, fz, hq, hthq, jfq);
      step_branches(hq, hthq, jfq, 0, n_branch);
      if (use_updated) {
        // Variant step: refresh the quotient from the freshly advanced
        // branches and redo the central update with it.
        all_quotients(lam_new, lth_new, fz_new, hq, hthq, jfq);
        step_branches(hq, hthq, jfq, 0, 1);
      }
      lam.swap(lam_new);
      if (cfg.with_theta) lth.swap(lth_new);
      if (cfg.with_t) lt.swap(lt_new);
      if (obs_mode) fz.swap(fz_new);
    }

    if (obs_mode) {
      if (auto it = obs_at.find(i); it != obs_at.end()) {
        // Per-depth impulse J^T grad C, the central Jacobian quotient
        // standing in for every branch's own.
        const Mat jfq = quotient([&](std::size_t b) { return fz[b]; }, n_dim);
        for (std::size_t b = 0; b < n_branch; ++b) {
          for (const Vec* y : it->second) {
            lam[b] += jfq.transpose() * (*cfg.cost_grad)(fz[b], *y);
          }
        }
      }
    }
    record(i);
  }
  return bundle;
}

bool is_diff_mode(const JacobianScheme& scheme) {
  return scheme.mode == JacobianMode::SymmetricDiff ||
         scheme.mode == JacobianMode::NewtonDiff;
}

}  // namespace

AdjointBundle backward_imbed(const DynamicsModel& f, const LayerParams& layers,
                             const DepthGrid& grid, const Vec& x,
                             const LossSpec& loss, const JacobianScheme& scheme,
                             const AdjointOptions& options) {
  check_layer_count(layers, grid);
  if (options.substeps < 1) fail(ErrorCode::LengthMismatch, "substeps must be >= 1");
  if (is_diff_mode(scheme)) {
    return diff_backward(f, layers, grid, x, loss, scheme, options.substeps,
                         options.use_updated_jacobian, DiffEngineConfig{});
  }
  return exact_backward(f, layers, grid, x, loss, scheme, options);
}

AdjointBundle backward_augmented(const DynamicsModel& f, const LayerParams& layers,
                                 const DepthGrid& grid, const Vec& x,
                                 const LossSpec& loss, const JacobianScheme& scheme,
                                 const AdjointOptions& options) {
  check_layer_count(layers, grid);
  if (options.substeps < 1) fail(ErrorCode::LengthMismatch, "substeps must be >= 1");
  if (!is_diff_mode(scheme)) {
    fail(ErrorCode::SchemeUnavailable,
         "augmented adjoint needs a difference scheme for its gradient blocks");
  }
  if (options.with_depth_gradient && f.time_dependent()) {
    fail(ErrorCode::AssumptionViolated,
         "depth gradient requires an autonomous dynamics function");
  }
  DiffEngineConfig cfg;
  cfg.with_theta = true;
  cfg.with_t = options.with_depth_gradient;
  return diff_backward(f, layers, grid, x, loss, scheme, options.substeps,
                       options.use_updated_jacobian, cfg);
}

AdjointBundle backward_timeseries(const DynamicsModel& f, const LayerParams& layers,
                                  const DepthGrid& grid, const Vec& x,
                                  const std::vector<std::pair<double, Vec>>& observations,
                                  const PairGrad& cost_grad,
                                  const JacobianScheme& scheme,
                                  const TimeseriesOptions& options) {
  check_layer_count(layers, grid);
  if (options.substeps < 1) fail(ErrorCode::LengthMismatch, "substeps must be >= 1");
  if (!is_diff_mode(scheme)) {
    fail(ErrorCode::SchemeUnavailable,
         "time-series adjoint needs a difference scheme for its co-states");
  }
  if (!cost_grad) fail(ErrorCode::LengthMismatch, "cost_grad must be provided");
  DiffEngineConfig cfg;
  cfg.with_theta = options.augmented;
  cfg.observations = &observations;
  cfg.cost_grad = &cost_grad;
  LossSpec unused;
  return diff_backward(f, layers, grid, x, unused, scheme, options.substeps,
                       false, cfg);
}

std::vector<double> optimality_residual(const DynamicsModel& f,
                                        const LayerParams& layers,
                                        const DepthGrid& grid, const Vec& x,
                                        const LossSpec& loss,
                                        const AdjointBundle& adjoint) {
  if (f.param_count() == 0) {
    fail(ErrorCode::SchemeUnavailable, "dynamics has no parameter block");
  }
  if (adjoint.size() != grid.size()) {
    fail(ErrorCode::LengthMismatch, "adjoint bundle does not match the grid");
  }
  check_layer_count(layers, grid);
  std::vector<double> out(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const std::size_t layer = std::min(i, grid.layers() - 1);
    const Vec& theta = layers.at(layer);
    const Vec r = loss.running_grad_theta_or_zero(grid[i], x, theta) +
                  f.d_dtheta(grid[i], x, theta).transpose() * adjoint.lambda[i];
    out[i] = r.norm();
  }
  return out;
}

}  // namespace inim
