#pragma once

#include "inimnet/core.hpp"

#include <functional>
#include <utility>
#include <vector>

namespace inim {

// Per-layer parameter block Psi(p_i): either one vector per layer or a
// single block shared by every layer.
class LayerParams {
 public:
  static LayerParams shared(Vec theta);
  static LayerParams per_layer(std::vector<Vec> thetas);

  const Vec& at(std::size_t layer) const;
  bool is_shared() const { return shared_; }
  std::size_t count() const { return thetas_.size(); }

  std::vector<Vec>& blocks() { return thetas_; }
  const std::vector<Vec>& blocks() const { return thetas_; }

 private:
  LayerParams(std::vector<Vec> thetas, bool shared)
      : thetas_(std::move(thetas)), shared_(shared) {}
  std::vector<Vec> thetas_;
  bool shared_;
};

using ThetaSchedule = std::function<Vec(double)>;

/// Piecewise-constant t-schedule taking each layer's block over its interval.
ThetaSchedule schedule_from_layers(const DepthGrid& grid, const LayerParams& layers);

ThetaSchedule constant_schedule(Vec theta);

enum class SolveMethod { Euler, RK4 };

/// Classical t-integration of z' = f(t, z, theta(t)) from (p, x) to q.
/// The oracle against which the imbedded pass is checked.
Vec forward_direct(const DynamicsModel& f, const ThetaSchedule& theta,
                   const Vec& x, double p, double q, int steps,
                   SolveMethod method = SolveMethod::Euler);

struct Trajectory {
  std::vector<double> times;
  std::vector<Vec> states;
};

/// Same solve, retaining the whole path for the adjoint oracle.
Trajectory forward_direct_path(const DynamicsModel& f, const ThetaSchedule& theta,
                               const Vec& x, double p, double q, int steps,
                               SolveMethod method = SolveMethod::Euler);

struct ImbedOptions {
  // Euler sub-steps per grid interval; reported depths are unchanged.
  int substeps = 1;
};

/// Depth recursion for the forward state: starts from the trivial network
/// z(q; q, x) = x, J = I and unwinds one layer at a time, the input-Jacobian
/// estimate maintained by the chosen scheme.
StateBundle forward_imbed(const DynamicsModel& f, const LayerParams& layers,
                          const Vec& x, const DepthGrid& grid,
                          const JacobianScheme& scheme,
                          const ImbedOptions& options = {});

/// Both sides of the interval-composition rule
/// z(q; p2, x) = z(q; p1, z(p1; p2, x)), each computed independently by
/// direct solves. Their agreement is the test.
std::pair<Vec, Vec> compose_imbedding(const DynamicsModel& f,
                                      const ThetaSchedule& theta, const Vec& x,
                                      double p2, double p1, double q, int steps,
                                      SolveMethod method = SolveMethod::Euler);

using PairCost = std::function<double(const Vec&, const Vec&)>;

/// Terminal loss evaluated at every depth of the bundle.
std::vector<double> depth_profile(const StateBundle& bundle, const LossSpec& loss);

/// Per-depth cost against per-depth targets (extrapolation plots).
std::vector<double> depth_profile(const StateBundle& bundle, const PairCost& cost,
                                  const std::vector<Vec>& targets);

}  // namespace inim
