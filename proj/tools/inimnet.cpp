#include "inimnet/csv.hpp"
#include "inimnet/experiments.hpp"
#include "inimnet/train.hpp"
#include "inimnet/verify.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>

namespace {

int exit_code_for(const inim::Error& e) {
  switch (e.code()) {
    case inim::ErrorCode::UnknownSuite:
    case inim::ErrorCode::ConfigParseError:
      return 2;
    case inim::ErrorCode::IoError:
      return 3;
    default:
      return 1;
  }
}

int cmd_verify(const std::string& suite, std::optional<double> tol,
               std::uint64_t seed) {
  const inim::SuiteReport report = inim::run_suite(suite, tol, seed);
  for (const auto& c : report.checks) {
    std::printf("%s  %-32s measured=%-13.6g tol=%.6g\n", c.pass ? "PASS" : "FAIL",
                c.name.c_str(), c.measured, c.tolerance);
  }
  std::printf("suite %s: %s\n", report.suite.c_str(),
              report.passed() ? "PASS" : "FAIL");
  return report.passed() ? 0 : 1;
}

int cmd_train(const std::string& config_path, const std::string& out_dir) {
  const std::string text = inim::read_text_file(config_path);
  const auto kv = inim::parse_key_values(text);
  const inim::TrainConfig cfg = inim::train_config_from(kv);
  const auto task_it = kv.find("task");
  if (task_it == kv.end()) {
    inim::fail(inim::ErrorCode::ConfigParseError, "config is missing 'task'");
  }
  inim::TaskSetup setup = inim::make_task(task_it->second, cfg.seed);
  setup.defaults = cfg;
  inim::LayerParams init = setup.init;
  if (cfg.parameter_sharing == inim::SharingMode::PerLayer) {
    std::vector<inim::Vec> blocks(setup.grid.layers(), init.blocks().front());
    init = inim::LayerParams::per_layer(std::move(blocks));
  }

  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) inim::fail(inim::ErrorCode::IoError, "cannot create directory: " + out_dir);

  inim::TrainResult result = inim::train_loop(*setup.model, init, setup.grid,
                                              setup.train_set, setup.cost, cfg);

  const auto path = [&](const char* file) {
    return (std::filesystem::path(out_dir) / file).string();
  };
  inim::write_text_file(path("history.csv"),
                        inim::emit_csv(inim::history_table(result, setup.grid)));
  inim::write_text_file(path("depth_profile.csv"),
                        inim::emit_csv(inim::depth_profile_table(result, setup.grid)));
  inim::save_checkpoint(path("checkpoint.json"), cfg, result.layers);
  std::printf("trained %s: initial_loss=%s final_loss=%s\n", task_it->second.c_str(),
              inim::format_double(result.initial_loss).c_str(),
              inim::format_double(result.history.back().loss).c_str());
  return 0;
}

int cmd_experiment(const std::string& name, std::uint64_t seed,
                   const std::string& out_dir) {
  const std::string out = out_dir.empty() ? name + "_out" : out_dir;
  const inim::ExperimentResult result = inim::run_experiment(name, seed, out);
  std::printf("experiment %s: initial_loss=%s final_loss=%s (%.1fs) -> %s\n",
              result.name.c_str(), inim::format_double(result.initial_loss).c_str(),
              inim::format_double(result.final_loss).c_str(), result.runtime_seconds,
              out.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Invariant imbedding network engine"};
  app.require_subcommand(1);

  auto* verify = app.add_subcommand("verify", "Run a verification suite");
  std::string suite;
  double tol_value = 0.0;
  std::uint64_t seed = 0;
  verify->add_option("suite", suite, "Suite name")->required();
  auto* tol_opt = verify->add_option("--tol", tol_value, "Tolerance override");
  verify->add_option("--seed", seed, "Random seed");

  auto* train = app.add_subcommand("train", "Train from a config file");
  std::string config_path, out_dir;
  train->add_option("--config", config_path, "Config file")->required();
  train->add_option("--out", out_dir, "Output directory")->required();

  auto* experiment = app.add_subcommand("experiment", "Run a built-in experiment");
  std::string exp_name, exp_out;
  std::uint64_t exp_seed = 0;
  experiment->add_option("name", exp_name, "Experiment name")->required();
  experiment->add_option("--seed", exp_seed, "Random seed");
  experiment->add_option("--out", exp_out, "Output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (verify->parsed()) {
      std::optional<double> tol;
      if (tol_opt->count() > 0) tol = tol_value;
      return cmd_verify(suite, tol, seed);
    }
    if (train->parsed()) return cmd_train(config_path, out_dir);
    return cmd_experiment(exp_name, exp_seed, exp_out);
  } catch (const inim::Error& e) {
    std::fprintf(stderr, "error [%s]: %s\n", inim::to_string(e.code()), e.what());
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
