#include "inimnet/experiments.hpp"

#include "inimnet/csv.hpp"
#include "inimnet/propagate.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <random>

namespace inim {

namespace {

Vec rotate(const Vec& v, double angle) {
  Vec out(2);
  out[0] = std::cos(angle) * v[0] - std::sin(angle) * v[1];
  out[1] = std::sin(angle) * v[0] + std::cos(angle) * v[1];
  return out;
}

// Free-fall endpoint observations on the 5-point grid over [0, 1].
TaskSetup make_projectile(std::uint64_t seed) {
  const double g = 9.81;
  DepthGrid grid({0.0, 0.25, 0.5, 0.75, 1.0});
  auto model = std::make_shared<MlpDynamics>(std::vector<int>{2, 8, 2});

  Dataset data;
  std::mt19937_64 rng(seed * 0x2545F4914F6CDD1DULL + 1);
  std::uniform_real_distribution<double> h0(5.0, 15.0), v0(-2.0, 2.0);
  for (int s = 0; s < 4; ++s) {
    Sample sample;
    sample.x = Vec(2);
    sample.x << h0(rng), v0(rng);
    for (double p : grid.points()) {
      sample.observations.emplace_back(
          p, projectile_closed_form(g, sample.x, p, grid.q()));
    }
    data.push_back(std::move(sample));
  }

  TrainConfig cfg;
  cfg.mode = TrainMode::AdjointUpdate;
  cfg.optimizer = OptimizerKind::SGD;
  cfg.learning_rate = 1e-3;
  cfg.epochs = 10;
  cfg.batch_size = 4;
  cfg.parameter_sharing = SharingMode::Shared;
  cfg.scheme.mode = JacobianMode::SymmetricDiff;
  cfg.seed = seed;

  TaskSetup setup{model,
                  grid,
                  std::move(data),
                  SupervisedCost::mse(),
                  LayerParams::shared(model->init_params(seed, 0.5)),
                  cfg,
                  std::nullopt,
                  {}};
  return setup;
}

// 16-frame rotation supervision over p in [-4, 0]: the target at depth p is
// the input turned by omega * (q - p).
TaskSetup make_rotvec(std::uint64_t seed) {
  constexpr double omega = M_PI / 4.0;
  DepthGrid grid = DepthGrid::uniform(-4.0, 0.0, 16);
  auto model = std::make_shared<MlpDynamics>(std::vector<int>{2, 8, 2});

  Dataset data;
  std::mt19937_64 rng(seed * 0x2545F4914F6CDD1DULL + 2);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * M_PI);
  for (int s = 0; s < 24; ++s) {
    Sample sample;
    const double a = angle(rng);
    sample.x = Vec(2);
    sample.x << std::cos(a), std::sin(a);
    for (double p : grid.points()) {
      sample.observations.emplace_back(p, rotate(sample.x, omega * (grid.q() - p)));
    }
    data.push_back(std::move(sample));
  }

  TrainConfig cfg;
  cfg.mode = TrainMode::ThroughSystem;
  cfg.optimizer = OptimizerKind::Adam;
  cfg.learning_rate = 1e-3;
  cfg.epochs = 500;
  cfg.batch_size = 2;
  cfg.parameter_sharing = SharingMode::Shared;
  cfg.scheme.mode = JacobianMode::Exact;
  cfg.lr_schedule = LrScheduleKind::ExpDecay;
  cfg.lr_decay_factor = 0.5;
  cfg.lr_step_epochs = 30;
  cfg.seed = seed;

  TaskSetup setup{model,
                  grid,
                  std::move(data),
                  SupervisedCost::mse(),
                  LayerParams::shared(model->init_params(seed, 0.5)),
                  cfg,
                  DepthGrid::uniform(-5.0, 0.0, 16),
                  [omega](const Sample& sample, double p) {
                    return rotate(sample.x, omega * (0.0 - p));
                  }};
  return setup;
}

// Mean cost at p_min against the observation target there.
double pmin_mse(const TaskSetup& setup, const LayerParams& layers) {
  double acc = 0.0;
  for (const Sample& sample : setup.train_set) {
    StateBundle fwd =
        forward_imbed(*setup.model, layers, sample.x, setup.grid, setup.defaults.scheme);
    const Vec* target = nullptr;
    for (const auto& [p, y] : sample.observations) {
      if (auto idx = setup.grid.index_of(p); idx && *idx == 0) target = &y;
    }
    acc += setup.cost.cost(fwd.outputs.front(), target ? *target : sample.y);
  }
  return acc / static_cast<double>(setup.train_set.size());
}

}  // namespace

TaskSetup make_task(const std::string& name, std::uint64_t seed) {
  if (name == "projectile") return make_projectile(seed);
  if (name == "rotvec") return make_rotvec(seed);
  fail(ErrorCode::ConfigParseError, "unknown task: " + name);
}

ExperimentResult run_experiment(const std::string& name, std::uint64_t seed,
                                const std::string& out_dir) {
  const auto t0 = std::chrono::steady_clock::now();
  TaskSetup setup = make_task(name, seed);

  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) fail(ErrorCode::IoError, "cannot create output directory: " + out_dir);

  ExperimentResult result;
  result.name = name;
  result.mse_pmin_initial = pmin_mse(setup, setup.init);

  TrainResult trained = train_loop(*setup.model, setup.init, setup.grid,
                                   setup.train_set, setup.cost, setup.defaults);
  result.initial_loss = trained.initial_loss;
  result.final_loss = trained.history.back().loss;
  result.mse_pmin_final = pmin_mse(setup, trained.layers);

  const auto path = [&](const char* file) {
    return (std::filesystem::path(out_dir) / file).string();
  };
  write_text_file(path("history.csv"), emit_csv(history_table(trained, setup.grid)));
  write_text_file(path("depth_profile.csv"),
                  emit_csv(depth_profile_table(trained, setup.grid)));
  save_checkpoint(path("checkpoint.json"), setup.defaults, trained.layers);

  nlohmann::json summary;
  summary["name"] = name;
  summary["seed"] = seed;
  summary["epochs"] = setup.defaults.epochs;
  summary["initial_loss"] = result.initial_loss;
  summary["final_loss"] = result.final_loss;
  summary["mse_pmin_initial"] = result.mse_pmin_initial;
  summary["mse_pmin_final"] = result.mse_pmin_final;
  summary["depths"] = setup.grid.points();
  summary["final_profile"] = trained.history.back().profile;

  if (setup.extended_grid) {
    std::vector<double> extra =
        extrapolation_report(*setup.model, trained.layers, *setup.extended_grid,
                             setup.train_set, setup.cost, setup.defaults.scheme,
                             setup.target_at);
    CsvTable t;
    t.header = {"depth", "loss"};
    for (std::size_t i = 0; i < extra.size(); ++i) {
      t.rows.push_back({(*setup.extended_grid)[i], extra[i]});
    }
    write_text_file(path("extrapolation.csv"), emit_csv(t));
    summary["extrapolation_depths"] = setup.extended_grid->points();
    summary["extrapolation_loss"] = extra;
  }

  result.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  summary["runtime_seconds"] = result.runtime_seconds;
  write_text_file(path("summary.json"), summary.dump(2) + "\n");
  return result;
}

}  // namespace inim
