#include "inimnet/train.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <map>
#include <mutex>
#include <random>
#include <thread>

namespace inim {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) {
    fail(ErrorCode::ConfigParseError, "learning_rate must be positive");
  }
  if (epochs < 1) fail(ErrorCode::ConfigParseError, "epochs must be >= 1");
  if (batch_size < 1) fail(ErrorCode::ConfigParseError, "batch_size must be >= 1");
  if (lr_schedule == LrScheduleKind::ExpDecay) {
    if (!(lr_decay_factor > 0.0)) {
      fail(ErrorCode::ConfigParseError, "lr_decay_factor must be positive");
    }
    if (lr_step_epochs < 1) {
      fail(ErrorCode::ConfigParseError, "lr_step_epochs must be >= 1");
    }
  }
}

double TrainConfig::lr_at(int epoch) const {
  if (lr_schedule == LrScheduleKind::Constant) return learning_rate;
  return learning_rate * std::pow(lr_decay_factor, epoch / lr_step_epochs);
}

SupervisedCost SupervisedCost::mse() {
  return {[](const Vec& z, const Vec& y) {
            return (z - y).squaredNorm() / (2.0 * static_cast<double>(z.size()));
          },
          [](const Vec& z, const Vec& y) {
            return Vec((z - y) / static_cast<double>(z.size()));
          }};
}

SupervisedCost SupervisedCost::quadratic() {
  return {[](const Vec& z, const Vec& y) { return 0.5 * (z - y).squaredNorm(); },
          [](const Vec& z, const Vec& y) { return Vec(z - y); }};
}

int thread_budget() {
  if (const char* env = std::getenv("INIMNET_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw ? static_cast<int>(hw) : 1;
}

namespace {

// Runs fn(i) for i in [0, count), fanning out across the thread budget.
// Each index writes only its own slot, so results are order-independent.
void for_each_sample(std::size_t count, const std::function<void(std::size_t)>& fn) {
  const int budget = std::min<int>(thread_budget(), static_cast<int>(count));
  if (budget <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::atomic<std::size_t> next{0};
  for (int t = 0; t < budget; ++t) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

// Per-depth cost gradients seeding the reverse pass: the terminal target at
// p_min, or each observation at its grid index.
std::map<std::size_t, Vec> seed_gradients(const Sample& sample, const DepthGrid& grid,
                                          const StateBundle& fwd,
                                          const SupervisedCost& cost) {
  std::map<std::size_t, Vec> seeds;
  if (sample.timeseries()) {
    for (const auto& [p_obs, y] : sample.observations) {
      auto idx = grid.index_of(p_obs);
      if (!idx) fail(ErrorCode::ObservationOffGrid, "observation depth not on the grid");
      Vec g = cost.grad(fwd.outputs[*idx], y);
      auto [it, inserted] = seeds.emplace(*idx, g);
      if (!inserted) it->second += g;
    }
  } else {
    seeds.emplace(0, cost.grad(fwd.outputs[0], sample.y));
  }
  return seeds;
}

double sample_loss(const Sample& sample, const DepthGrid& grid,
                   const StateBundle& fwd, const SupervisedCost& cost) {
  if (!sample.timeseries()) return cost.cost(fwd.outputs[0], sample.y);
  double acc = 0.0;
  for (const auto& [p_obs, y] : sample.observations) {
    auto idx = grid.index_of(p_obs);
    if (!idx) fail(ErrorCode::ObservationOffGrid, "observation depth not on the grid");
    acc += cost.cost(fwd.outputs[*idx], y);
  }
  return acc;
}

// d(grad_z f)/d(theta_m) contracted against abar, by central differences;
// the only second derivative the reverse pass needs.
void add_mixed_term(const DynamicsModel& f, double t, const Vec& x, const Vec& theta,
                    const Mat& abar, Vec& theta_grad) {
  for (Eigen::Index m = 0; m < theta.size(); ++m) {
    const double d = 1e-5 * (1.0 + std::abs(theta[m]));
    Vec tp = theta;
    Vec tm = theta;
    tp[m] += d;
    tm[m] -= d;
    const Mat da = (f.d_dz(t, x, tp) - f.d_dz(t, x, tm)) / (2.0 * d);
    theta_grad[m] += abar.cwiseProduct(da).sum();
  }
}

// Reverse-mode pass for one sample through the depth recursion
// z_i = z_{i+1} + h J_{i+1} phi_i with the scheme's Jacobian update.
std::vector<Vec> sample_grad(const DynamicsModel& f, const LayerParams& layers,
                             const DepthGrid& grid, const Sample& sample,
                             const SupervisedCost& cost, const JacobianScheme& scheme) {
  const Eigen::Index n_dim = sample.x.size();
  const Eigen::Index n_param = f.param_count();
  const std::size_t n = grid.size();
  const bool exact = scheme.mode == JacobianMode::Exact;

  StateBundle fwd = forward_imbed(f, layers, sample.x, grid, scheme);
  std::map<std::size_t, Vec> seeds = seed_gradients(sample, grid, fwd, cost);

  std::vector<Vec> grads(layers.is_shared() ? 1 : grid.layers(),
                         Vec(Vec::Zero(n_param)));

  Vec zbar = Vec::Zero(n_dim);
  Mat jbar = Mat::Zero(n_dim, n_dim);
  if (auto it = seeds.find(0); it != seeds.end()) zbar = it->second;

  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double h = grid.step(i);
    const Vec& theta = layers.at(i);
    const double pe = grid[i];
    const Vec phi = phi_coefficient(f, pe, sample.x, theta);
    const Mat a = f.d_dz(pe, sample.x, theta);
    const Mat& j_next = fwd.jacobians[i + 1];

    Vec& theta_grad = grads[layers.is_shared() ? 0 : i];
    theta_grad += h * (f.d_dtheta(pe, sample.x, theta).transpose() *
                       (j_next.transpose() * zbar));
    if (!jbar.isZero(0.0)) {
      const Mat abar = exact ? Mat(h * (jbar * j_next.transpose()))
                             : Mat(h * (j_next.transpose() * jbar));
      add_mixed_term(f, pe, sample.x, theta, abar, theta_grad);
    }

    // Push the cotangents up one depth level.
    Mat jbar_next = h * (zbar * phi.transpose());
    jbar_next += exact ? Mat(jbar + h * (a.transpose() * jbar))
                       : Mat(jbar + h * (jbar * a.transpose()));
    jbar = std::move(jbar_next);
    if (auto it = seeds.find(i + 1); it != seeds.end()) zbar += it->second;
  }
  return grads;
}

LossSpec terminal_loss_for(const Sample& sample, const SupervisedCost& cost) {
  LossSpec ls;
  const Vec y = sample.y;
  ls.terminal = [cost, y](const Vec& z) { return cost.cost(z, y); };
  ls.terminal_grad = [cost, y](const Vec& z) { return cost.grad(z, y); };
  return ls;
}

// Lambda_theta(p_min) for one sample; the AdjointUpdate descent direction.
Vec sample_adjoint_grad(const DynamicsModel& f, const LayerParams& layers,
                        const DepthGrid& grid, const Sample& sample,
                        const SupervisedCost& cost, const JacobianScheme& scheme) {
  if (sample.timeseries()) {
    TimeseriesOptions opts;
    opts.augmented = true;
    AdjointBundle adj = backward_timeseries(f, layers, grid, sample.x,
                                            sample.observations, cost.grad, scheme, opts);
    return adj.lambda_theta.front();
  }
  AdjointOptions opts;
  opts.with_depth_gradient = false;
  AdjointBundle adj = backward_augmented(f, layers, grid, sample.x,
                                         terminal_loss_for(sample, cost), scheme, opts);
  return adj.lambda_theta.front();
}

struct Optimizer {
  const TrainConfig& config;
  std::vector<Vec> m, v;
  int steps = 0;

  explicit Optimizer(const TrainConfig& cfg, const LayerParams& layers) : config(cfg) {
    for (const Vec& b : layers.blocks()) {
      m.push_back(Vec::Zero(b.size()));
      v.push_back(Vec::Zero(b.size()));
    }
  }

  void apply(LayerParams& layers, const std::vector<Vec>& grads, double lr) {
    ++steps;
    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    for (std::size_t b = 0; b < layers.blocks().size(); ++b) {
      Vec& theta = layers.blocks()[b];
      const Vec& g = grads[b];
      if (config.optimizer == OptimizerKind::SGD) {
        theta -= lr * g;
        continue;
      }
      m[b] = beta1 * m[b] + (1.0 - beta1) * g;
      v[b] = beta2 * v[b] + (1.0 - beta2) * g.cwiseProduct(g);
      const Vec mhat = m[b] / (1.0 - std::pow(beta1, steps));
      const Vec vhat = v[b] / (1.0 - std::pow(beta2, steps));
      theta -= lr * mhat.cwiseQuotient(vhat.cwiseSqrt() + Vec::Constant(vhat.size(), eps));
    }
  }
};

std::vector<Vec> zero_like(const LayerParams& layers) {
  std::vector<Vec> out;
  for (const Vec& b : layers.blocks()) out.push_back(Vec::Zero(b.size()));
  return out;
}

}  // namespace

std::vector<Vec> grad_through_system(const DynamicsModel& f, const LayerParams& layers,
                                     const DepthGrid& grid, const Dataset& batch,
                                     const SupervisedCost& cost,
                                     const JacobianScheme& scheme) {
  if (scheme.mode != JacobianMode::Exact && scheme.mode != JacobianMode::Cropped) {
    fail(ErrorCode::SchemeUnavailable,
         "grad_through_system differentiates the Exact and Cropped recursions only");
  }
  if (batch.empty()) fail(ErrorCode::LengthMismatch, "empty batch");
  std::vector<std::vector<Vec>> per_sample(batch.size());
  for_each_sample(batch.size(), [&](std::size_t i) {
    per_sample[i] = sample_grad(f, layers, grid, batch[i], cost, scheme);
  });
  std::vector<Vec> grads = zero_like(layers);
  for (const auto& g : per_sample) {
    for (std::size_t b = 0; b < grads.size(); ++b) grads[b] += g[b];
  }
  for (Vec& g : grads) g /= static_cast<double>(batch.size());
  return grads;
}

double batch_loss(const DynamicsModel& f, const LayerParams& layers,
                  const DepthGrid& grid, const Dataset& batch,
                  const SupervisedCost& cost, const JacobianScheme& scheme) {
  if (batch.empty()) fail(ErrorCode::LengthMismatch, "empty batch");
  std::vector<double> losses(batch.size());
  for_each_sample(batch.size(), [&](std::size_t i) {
    StateBundle fwd = forward_imbed(f, layers, batch[i].x, grid, scheme);
    losses[i] = sample_loss(batch[i], grid, fwd, cost);
  });
  double acc = 0.0;
  for (double l : losses) acc += l;
  return acc / static_cast<double>(batch.size());
}

namespace {

// Per-depth mean loss: terminal samples score every depth against their
// target; time-series samples score only depths holding an observation.
std::vector<double> dataset_profile(const DynamicsModel& f, const LayerParams& layers,
                                    const DepthGrid& grid, const Dataset& dataset,
                                    const SupervisedCost& cost,
                                    const JacobianScheme& scheme) {
  const std::size_t n = grid.size();
  std::vector<double> sums(n, 0.0);
  std::vector<std::size_t> counts(n, 0);
  std::vector<StateBundle> bundles(dataset.size());
  for_each_sample(dataset.size(), [&](std::size_t s) {
    bundles[s] = forward_imbed(f, layers, dataset[s].x, grid, scheme);
  });
  for (std::size_t s = 0; s < dataset.size(); ++s) {
    const Sample& sample = dataset[s];
    if (sample.timeseries()) {
      for (const auto& [p_obs, y] : sample.observations) {
        if (auto idx = grid.index_of(p_obs)) {
          sums[*idx] += cost.cost(bundles[s].outputs[*idx], y);
          counts[*idx] += 1;
        }
      }
    } else {
      for (std::size_t i = 0; i < n; ++i) {
        sums[i] += cost.cost(bundles[s].outputs[i], sample.y);
        counts[i] += 1;
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (counts[i]) sums[i] /= static_cast<double>(counts[i]);
  }
  return sums;
}

double residual_at_pmin(const DynamicsModel& f, const LayerParams& layers,
                        const DepthGrid& grid, const Sample& sample,
                        const SupervisedCost& cost) {
  if (f.param_count() == 0) return 0.0;
  JacobianScheme diag;
  diag.mode = JacobianMode::SymmetricDiff;
  AdjointBundle adj;
  LossSpec ls;
  if (sample.timeseries()) {
    adj = backward_timeseries(f, layers, grid, sample.x, sample.observations,
                              cost.grad, diag);
  } else {
    ls = terminal_loss_for(sample, cost);
    adj = backward_imbed(f, layers, grid, sample.x, ls, diag);
  }
  return optimality_residual(f, layers, grid, sample.x, ls, adj).front();
}

}  // namespace

TrainResult train_loop(const DynamicsModel& f, const LayerParams& init,
                       const DepthGrid& grid, const Dataset& dataset,
                       const SupervisedCost& cost, const TrainConfig& config) {
  config.validate();
  if (dataset.empty()) fail(ErrorCode::LengthMismatch, "empty dataset");
  const bool want_shared = config.parameter_sharing == SharingMode::Shared;
  if (init.is_shared() != want_shared) {
    fail(ErrorCode::ConfigParseError,
         "parameter_sharing does not match the initial parameter layout");
  }
  if (config.mode == TrainMode::AdjointUpdate && !want_shared) {
    fail(ErrorCode::SharingRequired,
         "adjoint updates target the shared parameter block");
  }

  TrainResult result{init, 0.0, {}};
  LayerParams& layers = result.layers;
  Optimizer opt(config, layers);
  result.initial_loss =
      batch_loss(f, layers, grid, dataset, cost, config.scheme);

  std::vector<std::size_t> order(dataset.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(config.seed + 1000003ULL * static_cast<std::uint64_t>(epoch + 1));
    std::shuffle(order.begin(), order.end(), rng);
    const double lr = config.lr_at(epoch);

    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t stop =
          std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      Dataset batch;
      for (std::size_t k = start; k < stop; ++k) batch.push_back(dataset[order[k]]);

      std::vector<Vec> grads;
      if (config.mode == TrainMode::ThroughSystem) {
        grads = grad_through_system(f, layers, grid, batch, cost, config.scheme);
      } else {
        std::vector<Vec> per_sample(batch.size());
        for_each_sample(batch.size(), [&](std::size_t i) {
          per_sample[i] =
              sample_adjoint_grad(f, layers, grid, batch[i], cost, config.scheme);
        });
        Vec mean = Vec::Zero(f.param_count());
        for (const Vec& g : per_sample) mean += g;
        mean /= static_cast<double>(batch.size());
        grads.push_back(std::move(mean));
      }
      opt.apply(layers, grads, lr);
    }

    EpochRecord rec;
    rec.epoch = epoch + 1;
    rec.loss = batch_loss(f, layers, grid, dataset, cost, config.scheme);
    if (!std::isfinite(rec.loss)) {
      fail(ErrorCode::DivergedTraining, "batch loss became non-finite");
    }
    rec.profile = dataset_profile(f, layers, grid, dataset, cost, config.scheme);
    rec.residual = residual_at_pmin(f, layers, grid, dataset.front(), cost);
    rec.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.history.push_back(std::move(rec));
  }
  return result;
}

std::vector<double> extrapolation_report(const DynamicsModel& f,
                                         const LayerParams& layers,
                                         const DepthGrid& grid_extended,
                                         const Dataset& eval_set,
                                         const SupervisedCost& cost,
                                         const JacobianScheme& scheme,
                                         const DepthTarget& target_at) {
  if (!layers.is_shared()) {
    fail(ErrorCode::SharingRequired,
         "per-layer parameters do not extend past the trained depths");
  }
  if (eval_set.empty()) fail(ErrorCode::LengthMismatch, "empty evaluation set");
  const std::size_t n = grid_extended.size();
  std::vector<std::vector<double>> per_sample(eval_set.size());
  for_each_sample(eval_set.size(), [&](std::size_t s) {
    StateBundle fwd = forward_imbed(f, layers, eval_set[s].x, grid_extended, scheme);
    std::vector<double> row(n);
    for (std::size_t i = 0; i < n; ++i) {
      row[i] = cost.cost(fwd.outputs[i], target_at(eval_set[s], grid_extended[i]));
    }
    per_sample[s] = std::move(row);
  });
  std::vector<double> out(n, 0.0);
  for (const auto& row : per_sample) {
    for (std::size_t i = 0; i < n; ++i) out[i] += row[i];
  }
  for (double& v : out) v /= static_cast<double>(eval_set.size());
  return out;
}

}  // namespace inim
