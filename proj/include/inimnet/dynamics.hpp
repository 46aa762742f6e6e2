#pragma once

#include "inimnet/core.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace inim {

// f(t, z) = A z + b with no trainable parameters (M = 0).
class LinearDynamics : public DynamicsModel {
 public:
  LinearDynamics(Mat a, Vec b);
  explicit LinearDynamics(Mat a);

  int dim() const override { return static_cast<int>(a_.rows()); }
  int param_count() const override { return 0; }

  Vec eval(double t, const Vec& z, const Vec& theta) const override;
  Mat d_dz(double t, const Vec& z, const Vec& theta) const override;

  const Mat& a() const { return a_; }
  const Vec& b() const { return b_; }

 private:
  Mat a_;
  Vec b_;
};

// Same linear map but with A and b packed into theta (M = N^2 + N,
// row-major A first, then b).
class LinearParamDynamics : public DynamicsModel {
 public:
  explicit LinearParamDynamics(int n) : n_(n) {}

  int dim() const override { return n_; }
  int param_count() const override { return n_ * n_ + n_; }

  Vec eval(double t, const Vec& z, const Vec& theta) const override;
  Mat d_dz(double t, const Vec& z, const Vec& theta) const override;
  Mat d_dtheta(double t, const Vec& z, const Vec& theta) const override;

  static Vec pack(const Mat& a, const Vec& b);

 private:
  void check_theta(const Vec& theta) const;
  int n_;
};

// State z = [h, v]; f(t, z) = [v, -g].
class ProjectileDynamics : public DynamicsModel {
 public:
  explicit ProjectileDynamics(double g = 9.81);

  int dim() const override { return 2; }
  int param_count() const override { return 0; }

  Vec eval(double t, const Vec& z, const Vec& theta) const override;
  Mat d_dz(double t, const Vec& z, const Vec& theta) const override;

  double g() const { return g_; }

 private:
  double g_;
};

// Scalar constant-control dynamics f(t, z, theta) = theta (N = M = 1).
// The analytic benchmark for the first-order optimality condition.
class ConstantControlDynamics : public DynamicsModel {
 public:
  int dim() const override { return 1; }
  int param_count() const override { return 1; }

  Vec eval(double t, const Vec& z, const Vec& theta) const override;
  Mat d_dz(double t, const Vec& z, const Vec& theta) const override;
  Mat d_dtheta(double t, const Vec& z, const Vec& theta) const override;
};

// Fully connected network with tanh hidden activations and identity output.
// theta flattens all weights (row-major) and biases layer by layer.
// With time_feature set, t is appended to the network input.
class MlpDynamics : public DynamicsModel {
 public:
  MlpDynamics(std::vector<int> layer_sizes, bool time_feature = false);

  int dim() const override { return layer_sizes_.back(); }
  int param_count() const override { return param_count_; }
  bool time_dependent() const override { return time_feature_; }

  Vec eval(double t, const Vec& z, const Vec& theta) const override;
  Mat d_dz(double t, const Vec& z, const Vec& theta) const override;
  Mat d_dtheta(double t, const Vec& z, const Vec& theta) const override;
  Vec d_dt(double t, const Vec& z, const Vec& theta) const override;

  const std::vector<int>& layer_sizes() const { return layer_sizes_; }

  // Uniform init in [-s, s] with s = scale / sqrt(fan_in).
  Vec init_params(std::uint64_t seed, double scale = 1.0) const;

  std::string to_checkpoint_json(const Vec& theta) const;
  static std::pair<MlpDynamics, Vec> from_checkpoint_json(const std::string& text);

 private:
  struct Layers;
  void check_theta(const Vec& theta) const;
  // Forward pass caching pre-activation inputs per layer.
  std::vector<Vec> forward_activations(double t, const Vec& z, const Vec& theta) const;

  std::vector<int> layer_sizes_;
  bool time_feature_;
  int param_count_;
};

/// Closed-form solution of z' = A z + b from (p, x) to q, via the matrix
/// exponential of the augmented system. Oracle-grade accuracy.
Vec linear_closed_form(const Mat& a, const Vec& b, const Vec& x, double p, double q);

/// Closed-form projectile endpoint [h, v] at q from state x = [h0, v0] at p.
Vec projectile_closed_form(double g, const Vec& x, double p, double q);

}  // namespace inim
