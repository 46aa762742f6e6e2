#pragma once

#include "inimnet/core.hpp"
#include "inimnet/dynamics.hpp"
#include "inimnet/train.hpp"

#include <memory>
#include <optional>
#include <string>

namespace inim {

// Everything needed to train one of the built-in tasks: the model, its
// depth grid, a generated dataset, and task-default hyperparameters.
struct TaskSetup {
  std::shared_ptr<DynamicsModel> model;
  DepthGrid grid;
  Dataset train_set;
  SupervisedCost cost;
  LayerParams init;
  TrainConfig defaults;

  // Extrapolation support (rotating-vector task): a grid reaching past the
  // trained p_min and the reference output at any depth.
  std::optional<DepthGrid> extended_grid;
  DepthTarget target_at;
};

/// Builds "projectile" (endpoint observations of free fall, adjoint-based
/// updates) or "rotvec" (16-frame rotation supervision, differentiated
/// through the system). Unknown names raise ConfigParseError.
TaskSetup make_task(const std::string& name, std::uint64_t seed);

struct ExperimentResult {
  std::string name;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  double mse_pmin_initial = 0.0;
  double mse_pmin_final = 0.0;
  double runtime_seconds = 0.0;
};

/// End-to-end run: data generation, training, evaluation, and emission of
/// history.csv, depth_profile.csv, checkpoint.json and summary.json into
/// out_dir (plus extrapolation.csv for rotvec).
ExperimentResult run_experiment(const std::string& name, std::uint64_t seed,
                                const std::string& out_dir);

}  // namespace inim
