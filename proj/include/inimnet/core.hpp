#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace inim {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

enum class ErrorCode {
  NonMonotoneGrid,
  TooFewPoints,
  NonFiniteEntry,
  NonFinite,
  SchemeUnavailable,
  ParamLengthMismatch,
  LengthMismatch,
  ObservationOffGrid,
  AssumptionViolated,
  SharingRequired,
  DivergedTraining,
  ConfigParseError,
  IoError,
  UnknownSuite,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

inline bool all_finite(const Vec& v) { return v.allFinite(); }
inline bool all_finite(const Mat& m) { return m.allFinite(); }

/// Checks the depth-grid invariants: n >= 2, finite entries, strictly
/// increasing points. Returns the violated invariant, or nullopt when valid.
std::optional<ErrorCode> validate_grid(const std::vector<double>& points);

// Ordered evaluation depths p_1 < ... < p_n with terminal q = p_n.
// Stored ascending; propagation loops run from the terminal index down.
class DepthGrid {
 public:
  explicit DepthGrid(std::vector<double> points);

  static DepthGrid uniform(double p_min, double q, std::size_t n_points);

  std::size_t size() const { return points_.size(); }
  std::size_t layers() const { return points_.size() - 1; }
  double operator[](std::size_t i) const { return points_[i]; }
  double q() const { return points_.back(); }
  double p_min() const { return points_.front(); }
  double step(std::size_t layer) const {
    return points_[layer + 1] - points_[layer];
  }
  const std::vector<double>& points() const { return points_; }

  std::optional<std::size_t> index_of(double p, double tol = 1e-12) const;

 private:
  std::vector<double> points_;
};

// The training function f(t, z, theta) and its analytic partials.
// Implementations must keep eval pure; d_dz is required, d_dtheta only for
// parameterised models, d_dt only for explicitly time-dependent ones.
class DynamicsModel {
 public:
  virtual ~DynamicsModel() = default;

  virtual int dim() const = 0;
  virtual int param_count() const = 0;

  virtual Vec eval(double t, const Vec& z, const Vec& theta) const = 0;
  virtual Mat d_dz(double t, const Vec& z, const Vec& theta) const = 0;

  virtual Mat d_dtheta(double t, const Vec& z, const Vec& theta) const {
    (void)t;
    (void)theta;
    return Mat::Zero(z.size(), param_count());
  }

  virtual Vec d_dt(double t, const Vec& z, const Vec& theta) const {
    (void)t;
    (void)theta;
    return Vec::Zero(z.size());
  }

  virtual bool time_dependent() const { return false; }
};

/// The layer coefficient driving every p-evolution: f evaluated at the
/// invariant input with the layer's active parameters.
inline Vec phi_coefficient(const DynamicsModel& f, double p, const Vec& x,
                           const Vec& psi) {
  return f.eval(p, x, psi);
}

// Terminal loss T, running loss R and their gradients. running* may be left
// empty for a pure terminal-loss problem.
struct LossSpec {
  std::function<double(const Vec&)> terminal;
  std::function<Vec(const Vec&)> terminal_grad;
  std::function<double(double, const Vec&, const Vec&)> running;
  std::function<Vec(double, const Vec&, const Vec&)> running_grad_z;
  std::function<Vec(double, const Vec&, const Vec&)> running_grad_theta;

  // (depth, target) pairs for the endpoint-observation time-series mode.
  std::vector<std::pair<double, Vec>> observations;

  bool has_running() const { return static_cast<bool>(running); }

  double running_or_zero(double t, const Vec& z, const Vec& theta) const {
    return running ? running(t, z, theta) : 0.0;
  }
  Vec running_grad_z_or_zero(double t, const Vec& z, const Vec& theta) const {
    return running_grad_z ? running_grad_z(t, z, theta)
                          : Vec::Zero(z.size());
  }
  Vec running_grad_theta_or_zero(double t, const Vec& z,
                                 const Vec& theta) const {
    return running_grad_theta ? running_grad_theta(t, z, theta)
                              : Vec::Zero(theta.size());
  }

  /// T(z) = |z - y|^2 / (2N)
  static LossSpec mse_terminal(Vec y);
  /// T(z) = |z - y|^2 / 2
  static LossSpec quadratic_terminal(Vec y);
};

// Per-depth outputs z(q; p_i, x) with their input-Jacobian estimates.
struct StateBundle {
  Vec input;
  std::vector<double> depths;
  std::vector<Vec> outputs;
  std::vector<Mat> jacobians;

  std::size_t size() const { return depths.size(); }
};

// Per-depth imbedded adjoints Lambda(p_i, x) with their input-Jacobian
// estimates, plus the optional augmented parameter and depth blocks.
struct AdjointBundle {
  Vec input;
  std::vector<double> depths;
  std::vector<Vec> lambda;
  std::vector<Mat> lambda_grad;

  std::vector<Vec> lambda_theta;  // empty unless augmented
  std::vector<double> lambda_t;   // empty unless augmented

  std::size_t size() const { return depths.size(); }
  bool augmented() const { return !lambda_theta.empty(); }
};

enum class JacobianMode { Exact, SymmetricDiff, NewtonDiff, Cropped };

const char* to_string(JacobianMode mode);
std::optional<JacobianMode> parse_jacobian_mode(const std::string& name);

// How the nested input gradients are maintained along the depth recursion.
struct JacobianScheme {
  JacobianMode mode = JacobianMode::Exact;

  // Per-coordinate perturbation sizes for the difference modes. Empty means
  // the default rule delta_i = 1e-3 * (1 + |x_i|).
  Vec deltas;

  // The stated shifted-gradient negation for NewtonDiff co-states. Left off
  // by default: with the negation the co-evolving system is unstable even on
  // the scalar linear benchmark (see tests).
  bool newton_negation = false;

  Vec deltas_for(const Vec& x) const;
};

}  // namespace inim
