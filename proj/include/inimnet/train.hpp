#pragma once

#include "inimnet/adjoint.hpp"
#include "inimnet/core.hpp"
#include "inimnet/propagate.hpp"

#include <functional>
#include <string>
#include <vector>

namespace inim {

enum class TrainMode { ThroughSystem, AdjointUpdate };
enum class OptimizerKind { SGD, Adam };
enum class SharingMode { PerLayer, Shared };
enum class LrScheduleKind { Constant, ExpDecay };

struct TrainConfig {
  TrainMode mode = TrainMode::ThroughSystem;
  OptimizerKind optimizer = OptimizerKind::SGD;
  double learning_rate = 1e-3;
  int epochs = 1;
  int batch_size = 1;
  SharingMode parameter_sharing = SharingMode::Shared;
  JacobianScheme scheme;
  LrScheduleKind lr_schedule = LrScheduleKind::Constant;
  double lr_decay_factor = 0.5;
  int lr_step_epochs = 30;
  std::uint64_t seed = 0;

  void validate() const;  // learning_rate > 0, epochs >= 1, batch_size >= 1
  double lr_at(int epoch) const;
};

// One supervised example: either a terminal target y for the deepest output
// z(q; p_min, x), or per-depth endpoint observations (p_i, y_i).
struct Sample {
  Vec x;
  Vec y;
  std::vector<std::pair<double, Vec>> observations;

  bool timeseries() const { return !observations.empty(); }
};
using Dataset = std::vector<Sample>;

// Pointwise cost C(z, y) with its z-gradient; the batch loss is the mean
// over samples of C at p_min (terminal) or the sum of C over observations.
struct SupervisedCost {
  PairCost cost;
  PairGrad grad;

  static SupervisedCost mse();        // |z - y|^2 / (2N)
  static SupervisedCost quadratic();  // |z - y|^2 / 2
};

/// Reverse-mode gradients of the batch loss through the discrete depth
/// recursion, the scheme's Jacobian updates included in the graph.
/// Exact and Cropped modes only. Returns one gradient block per parameter
/// block (a single block when shared).
std::vector<Vec> grad_through_system(const DynamicsModel& f, const LayerParams& layers,
                                     const DepthGrid& grid, const Dataset& batch,
                                     const SupervisedCost& cost,
                                     const JacobianScheme& scheme);

double batch_loss(const DynamicsModel& f, const LayerParams& layers,
                  const DepthGrid& grid, const Dataset& batch,
                  const SupervisedCost& cost, const JacobianScheme& scheme);

struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;            // batch loss at p_min after this epoch
  double residual = 0.0;        // optimality residual norm at p_min
  double seconds = 0.0;
  std::vector<double> profile;  // per-depth loss over the full dataset
};

struct TrainResult {
  LayerParams layers = LayerParams::shared(Vec());
  double initial_loss = 0.0;
  std::vector<EpochRecord> history;
};

/// Minibatch descent over the dataset. ThroughSystem differentiates the
/// discrete forward; AdjointUpdate steps along -Lambda_theta(p_min) averaged
/// over the batch (shared parameters only).
TrainResult train_loop(const DynamicsModel& f, const LayerParams& init,
                       const DepthGrid& grid, const Dataset& dataset,
                       const SupervisedCost& cost, const TrainConfig& config);

using DepthTarget = std::function<Vec(const Sample&, double)>;

/// Per-depth mean loss over an evaluation set on an extended grid reaching
/// past the trained p_min. target_at supplies the reference output at each
/// depth; shared parameters are required to evaluate untrained layers.
std::vector<double> extrapolation_report(const DynamicsModel& f,
                                         const LayerParams& layers,
                                         const DepthGrid& grid_extended,
                                         const Dataset& eval_set,
                                         const SupervisedCost& cost,
                                         const JacobianScheme& scheme,
                                         const DepthTarget& target_at);

/// Batch-parallel worker cap: INIMNET_THREADS when set, else the hardware
/// count. Reductions run in sample order either way.
int thread_budget();

}  // namespace inim
