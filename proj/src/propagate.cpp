#include "inimnet/propagate.hpp"

#include "inimnet/jacobian.hpp"

#include <algorithm>

namespace inim {

LayerParams LayerParams::shared(Vec theta) {
  std::vector<Vec> blocks;
  blocks.push_back(std::move(theta));
  return LayerParams(std::move(blocks), true);
}

LayerParams LayerParams::per_layer(std::vector<Vec> thetas) {
  if (thetas.empty()) fail(ErrorCode::LengthMismatch, "LayerParams: no blocks");
  return LayerParams(std::move(thetas), false);
}

const Vec& LayerParams::at(std::size_t layer) const {
  return shared_ ? thetas_.front() : thetas_.at(layer);
}

ThetaSchedule schedule_from_layers(const DepthGrid& grid, const LayerParams& layers) {
  if (!layers.is_shared() && layers.count() != grid.layers()) {
    fail(ErrorCode::LengthMismatch, "layer parameter count != grid layer count");
  }
  std::vector<double> pts = grid.points();
  std::vector<Vec> blocks = layers.blocks();
  const bool shared = layers.is_shared();
  return [pts, blocks, shared](double t) -> Vec {
    if (shared) return blocks.front();
    auto it = std::upper_bound(pts.begin(), pts.end(), t);
    std::size_t idx = it == pts.begin() ? 0 : static_cast<std::size_t>(it - pts.begin()) - 1;
    idx = std::min(idx, blocks.size() - 1);
    return blocks[idx];
  };
}

ThetaSchedule constant_schedule(Vec theta) {
  return [theta](double) { return theta; };
}

namespace {

Vec rhs(const DynamicsModel& f, const ThetaSchedule& theta, double t, const Vec& z) {
  return f.eval(t, z, theta(t));
}

}  // namespace

Trajectory forward_direct_path(const DynamicsModel& f, const ThetaSchedule& theta,
                               const Vec& x, double p, double q, int steps,
                               SolveMethod method) {
  if (steps < 1) fail(ErrorCode::LengthMismatch, "forward_direct: steps must be >= 1");
  Trajectory traj;
  traj.times.reserve(steps + 1);
  traj.states.reserve(steps + 1);
  const double h = (q - p) / steps;
  Vec z = x;
  traj.times.push_back(p);
  traj.states.push_back(z);
  for (int k = 0; k < steps; ++k) {
    const double t = p + k * h;
    if (method == SolveMethod::Euler) {
      z = z + h * rhs(f, theta, t, z);
    } else {
      Vec k1 = rhs(f, theta, t, z);
      Vec k2 = rhs(f, theta, t + 0.5 * h, z + 0.5 * h * k1);
      Vec k3 = rhs(f, theta, t + 0.5 * h, z + 0.5 * h * k2);
      Vec k4 = rhs(f, theta, t + h, z + h * k3);
      z = z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    if (!all_finite(z)) fail(ErrorCode::NonFinite, "forward_direct: state blew up");
    traj.times.push_back(p + (k + 1) * h);
    traj.states.push_back(z);
  }
  traj.times.back() = q;
  return traj;
}

Vec forward_direct(const DynamicsModel& f, const ThetaSchedule& theta, const Vec& x,
                   double p, double q, int steps, SolveMethod method) {
  if (steps < 1) fail(ErrorCode::LengthMismatch, "forward_direct: steps must be >= 1");
  const double h = (q - p) / steps;
  Vec z = x;
  for (int k = 0; k < steps; ++k) {
    const double t = p + k * h;
    if (method == SolveMethod::Euler) {
      z = z + h * rhs(f, theta, t, z);
    } else {
      Vec k1 = rhs(f, theta, t, z);
      Vec k2 = rhs(f, theta, t + 0.5 * h, z + 0.5 * h * k1);
      Vec k3 = rhs(f, theta, t + 0.5 * h, z + 0.5 * h * k2);
      Vec k4 = rhs(f, theta, t + h, z + h * k3);
      z = z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    if (!all_finite(z)) fail(ErrorCode::NonFinite, "forward_direct: state blew up");
  }
  return z;
}

StateBundle forward_imbed(const DynamicsModel& f, const LayerParams& layers,
                          const Vec& x, const DepthGrid& grid,
                          const JacobianScheme& scheme, const ImbedOptions& options) {
  const Eigen::Index n_dim = x.size();
  const std::size_t n = grid.size();
  if (!layers.is_shared() && layers.count() != grid.layers()) {
    fail(ErrorCode::LengthMismatch, "layer parameter count != grid layer count");
  }
  if (options.substeps < 1) {
    fail(ErrorCode::LengthMismatch, "substeps must be >= 1");
  }

  StateBundle bundle;
  bundle.input = x;
  bundle.depths = grid.points();
  bundle.outputs.assign(n, Vec());
  bundle.jacobians.assign(n, Mat());

  const bool diff_mode = scheme.mode == JacobianMode::SymmetricDiff ||
                         scheme.mode == JacobianMode::NewtonDiff;
  const Vec deltas = scheme.deltas_for(x);

  Vec z = x;
  Mat jac = Mat::Identity(n_dim, n_dim);
  std::vector<Vec> zp, zm;
  if (diff_mode) {
    for (Eigen::Index j = 0; j < n_dim; ++j) {
      Vec s = x;
      s[j] += deltas[j];
      zp.push_back(s);
    }
    if (scheme.mode == JacobianMode::SymmetricDiff) {
      for (Eigen::Index j = 0; j < n_dim; ++j) {
        Vec s = x;
        s[j] -= deltas[j];
        zm.push_back(s);
      }
    }
  }

  auto quotient_jacobian = [&]() {
    Mat j(n_dim, n_dim);
    for (Eigen::Index c = 0; c < n_dim; ++c) {
      if (scheme.mode == JacobianMode::SymmetricDiff) {
        j.col(c) = (zp[c] - zm[c]) / (2.0 * deltas[c]);
      } else {
        j.col(c) = (zp[c] - z) / deltas[c];
      }
    }
    return j;
  };

  // Trivial network at p = q.
  bundle.outputs[n - 1] = z;
  bundle.jacobians[n - 1] = jac;

  for (std::size_t i = n - 1; i-- > 0;) {
    const Vec& theta = layers.at(i);
    const double h_total = grid.step(i);
    const int k = options.substeps;
    const double hs = h_total / k;
    for (int m = 1; m <= k; ++m) {
      const double pe = grid[i + 1] - hs * m;  // deeper sub-point, per the
                                               // discrete update's convention
      switch (scheme.mode) {
        case JacobianMode::Exact: {
          Vec phi = phi_coefficient(f, pe, x, theta);
          Mat a = f.d_dz(pe, x, theta);
          z = z + hs * (jac * phi);
          jac = exact_sensitivity_step(jac, a, hs);
          break;
        }
        case JacobianMode::Cropped: {
          Vec phi = phi_coefficient(f, pe, x, theta);
          Mat a = f.d_dz(pe, x, theta);
          z = z + hs * (jac * phi);
          // Signed step p_i - p_{i+1}; the cropped update keeps the
          // first-order transport J . grad_x(Phi) and nothing above it.
          jac = cropped_jacobian_step(jac, jac * a, -hs);
          break;
        }
        case JacobianMode::SymmetricDiff: {
          jac = quotient_jacobian();
          Vec z_next = z + hs * (jac * phi_coefficient(f, pe, x, theta));
          for (Eigen::Index j = 0; j < n_dim; ++j) {
            Vec sp = x;
            sp[j] += deltas[j];
            zp[j] = zp[j] + hs * (jac * phi_coefficient(f, pe, sp, theta));
            Vec sm = x;
            sm[j] -= deltas[j];
            zm[j] = zm[j] + hs * (jac * phi_coefficient(f, pe, sm, theta));
          }
          z = z_next;
          break;
        }
        case JacobianMode::NewtonDiff: {
          jac = quotient_jacobian();
          Vec z_next = z + hs * (jac * phi_coefficient(f, pe, x, theta));
          const Mat shift_jac = scheme.newton_negation ? Mat(-jac) : jac;
          for (Eigen::Index j = 0; j < n_dim; ++j) {
            Vec sp = x;
            sp[j] += deltas[j];
            zp[j] = zp[j] + hs * (shift_jac * phi_coefficient(f, pe, sp, theta));
          }
          z = z_next;
          break;
        }
      }
    }
    if (diff_mode) jac = quotient_jacobian();
    if (!all_finite(z) || !all_finite(jac)) {
      fail(ErrorCode::NonFinite, "forward_imbed: state or Jacobian diverged");
    }
    bundle.outputs[i] = z;
    bundle.jacobians[i] = jac;
  }
  return bundle;
}

std::pair<Vec, Vec> compose_imbedding(const DynamicsModel& f, const ThetaSchedule& theta,
                                      const Vec& x, double p2, double p1, double q,
                                      int steps, SolveMethod method) {
  if (!(p2 < p1 && p1 < q)) {
    fail(ErrorCode::NonMonotoneGrid, "compose_imbedding: need p2 < p1 < q");
  }
  Vec lhs = forward_direct(f, theta, x, p2, q, steps, method);
  Vec mid = forward_direct(f, theta, x, p2, p1, steps, method);
  Vec rhs_val = forward_direct(f, theta, mid, p1, q, steps, method);
  return {lhs, rhs_val};
}

std::vector<double> depth_profile(const StateBundle& bundle, const LossSpec& loss) {
  std::vector<double> profile;
  profile.reserve(bundle.size());
  for (const Vec& z : bundle.outputs) profile.push_back(loss.terminal(z));
  return profile;
}

std::vector<double> depth_profile(const StateBundle& bundle, const PairCost& cost,
                                  const std::vector<Vec>& targets) {
  if (targets.size() != bundle.size()) {
    fail(ErrorCode::LengthMismatch, "depth_profile: target count != bundle depth count");
  }
  std::vector<double> profile;
  profile.reserve(bundle.size());
  for (std::size_t i = 0; i < bundle.size(); ++i) {
    profile.push_back(cost(bundle.outputs[i], targets[i]));
  }
  return profile;
}

}  // namespace inim
