#pragma once

#include "inimnet/core.hpp"
#include "inimnet/propagate.hpp"

#include <functional>
#include <vector>

namespace inim {

/// Euler-Lagrange oracle: integrates the classical adjoint ODE
/// lambda' = -(grad_z f^T lambda + grad_z R) backward in t along a stored
/// forward trajectory. Returns lambda at every trajectory node;
/// front() is the loss gradient with respect to the input.
std::vector<Vec> adjoint_direct(const DynamicsModel& f, const ThetaSchedule& theta,
                                const Trajectory& trajectory, const LossSpec& loss);

/// Total loss J = int R dt + T(z(q)) by direct solve, the reference for
/// finite-difference gradient oracles.
double total_loss_direct(const DynamicsModel& f, const ThetaSchedule& theta,
                         const Vec& x, double p, double q, const LossSpec& loss,
                         int steps, SolveMethod method = SolveMethod::RK4);

struct AdjointOptions {
  int substeps = 1;

  // The discrete reverse step as printed references the Jacobian estimate at
  // the layer being computed; the default substitutes the previous layer's
  // estimate, keeping the step explicit. Setting this flag updates the
  // estimate first and uses it in the same step (Exact mode only).
  bool use_updated_jacobian = false;

  // Whether backward_augmented also carries the depth block Lambda_t, which
  // is only defined for autonomous dynamics.
  bool with_depth_gradient = true;
};

/// Imbedded adjoint: propagates Lambda(p, x) from Lambda(q, x) = grad T(x)
/// down the depth grid with no forward pass of the z-state.
AdjointBundle backward_imbed(const DynamicsModel& f, const LayerParams& layers,
                             const DepthGrid& grid, const Vec& x,
                             const LossSpec& loss, const JacobianScheme& scheme,
                             const AdjointOptions& options = {});

/// Augmented variant: additionally carries Lambda_theta (loss gradient with
/// respect to the constant parameter block) and Lambda_t (with respect to
/// depth). Requires a difference scheme; Lambda_t requires autonomous f.
AdjointBundle backward_augmented(const DynamicsModel& f, const LayerParams& layers,
                                 const DepthGrid& grid, const Vec& x,
                                 const LossSpec& loss, const JacobianScheme& scheme,
                                 const AdjointOptions& options = {});

using PairGrad = std::function<Vec(const Vec&, const Vec&)>;

struct TimeseriesOptions {
  int substeps = 1;
  bool augmented = false;  // carry Lambda_theta alongside
};

/// Endpoint-observation adjoint: per-depth observation gradients are folded
/// in as running-loss impulses, with a co-running forward bundle supplying
/// the z(q; p, x) values and Jacobian factors they need.
AdjointBundle backward_timeseries(const DynamicsModel& f, const LayerParams& layers,
                                  const DepthGrid& grid, const Vec& x,
                                  const std::vector<std::pair<double, Vec>>& observations,
                                  const PairGrad& cost_grad,
                                  const JacobianScheme& scheme,
                                  const TimeseriesOptions& options = {});

/// Norm of the first-order optimality condition
/// grad_theta R + grad_theta f^T . Lambda at each depth; zero at an optimum.
std::vector<double> optimality_residual(const DynamicsModel& f,
                                        const LayerParams& layers,
                                        const DepthGrid& grid, const Vec& x,
                                        const LossSpec& loss,
                                        const AdjointBundle& adjoint);

}  // namespace inim
