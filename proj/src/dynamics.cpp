#include "inimnet/dynamics.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <json.hpp>

#include <random>
#include <utility>

namespace inim {

LinearDynamics::LinearDynamics(Mat a, Vec b) : a_(std::move(a)), b_(std::move(b)) {
  if (a_.rows() != a_.cols() || a_.rows() != b_.size()) {
    fail(ErrorCode::LengthMismatch, "LinearDynamics: A must be square and match b");
  }
}

LinearDynamics::LinearDynamics(Mat a)
    : LinearDynamics(Mat(a), Vec(Vec::Zero(a.rows()))) {}

Vec LinearDynamics::eval(double, const Vec& z, const Vec&) const {
  return a_ * z + b_;
}

Mat LinearDynamics::d_dz(double, const Vec&, const Vec&) const { return a_; }

void LinearParamDynamics::check_theta(const Vec& theta) const {
  if (theta.size() != param_count()) {
    fail(ErrorCode::ParamLengthMismatch, "LinearParamDynamics: bad theta length");
  }
}

Vec LinearParamDynamics::eval(double, const Vec& z, const Vec& theta) const {
  check_theta(theta);
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                 Eigen::RowMajor>>
      a(theta.data(), n_, n_);
  return a * z + theta.tail(n_);
}

Mat LinearParamDynamics::d_dz(double, const Vec&, const Vec& theta) const {
  check_theta(theta);
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                 Eigen::RowMajor>>
      a(theta.data(), n_, n_);
  return Mat(a);
}

Mat LinearParamDynamics::d_dtheta(double, const Vec& z, const Vec& theta) const {
  check_theta(theta);
  Mat d = Mat::Zero(n_, param_count());
  for (int i = 0; i < n_; ++i) {
    for (int j = 0; j < n_; ++j) d(i, i * n_ + j) = z[j];
    d(i, n_ * n_ + i) = 1.0;
  }
  return d;
}

Vec LinearParamDynamics::pack(const Mat& a, const Vec& b) {
  const int n = static_cast<int>(a.rows());
  Vec theta(n * n + n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) theta[i * n + j] = a(i, j);
  theta.tail(n) = b;
  return theta;
}

ProjectileDynamics::ProjectileDynamics(double g) : g_(g) {
  if (!(g > 0.0)) fail(ErrorCode::NonFinite, "ProjectileDynamics: g must be positive");
}

Vec ProjectileDynamics::eval(double, const Vec& z, const Vec&) const {
  Vec out(2);
  out[0] = z[1];
  out[1] = -g_;
  return out;
}

Mat ProjectileDynamics::d_dz(double, const Vec&, const Vec&) const {
  Mat j = Mat::Zero(2, 2);
  j(0, 1) = 1.0;
  return j;
}

Vec ConstantControlDynamics::eval(double, const Vec&, const Vec& theta) const {
  return theta;
}

Mat ConstantControlDynamics::d_dz(double, const Vec&, const Vec&) const {
  return Mat::Zero(1, 1);
}

Mat ConstantControlDynamics::d_dtheta(double, const Vec&, const Vec&) const {
  return Mat::Identity(1, 1);
}

// ---------------------------------------------------------------------------
// MlpDynamics

MlpDynamics::MlpDynamics(std::vector<int> layer_sizes, bool time_feature)
    : layer_sizes_(std::move(layer_sizes)), time_feature_(time_feature) {
  if (layer_sizes_.size() < 2) {
    fail(ErrorCode::LengthMismatch, "MlpDynamics: need at least input and output sizes");
  }
  param_count_ = 0;
  for (std::size_t l = 1; l < layer_sizes_.size(); ++l) {
    int in = layer_sizes_[l - 1] + (l == 1 && time_feature_ ? 1 : 0);
    param_count_ += layer_sizes_[l] * in + layer_sizes_[l];
  }
}

void MlpDynamics::check_theta(const Vec& theta) const {
  if (theta.size() != param_count_) {
    fail(ErrorCode::ParamLengthMismatch, "MlpDynamics: bad theta length");
  }
}

namespace {

struct MlpPass {
  std::vector<Vec> inputs;   // a_0 .. a_{L-1}: input of each weight layer
  std::vector<Vec> preacts;  // s_1 .. s_L
};

int layer_in_size(const std::vector<int>& sizes, bool tf, std::size_t l) {
  return sizes[l - 1] + (l == 1 && tf ? 1 : 0);
}

MlpPass mlp_forward(const std::vector<int>& sizes, bool tf, double t,
                    const Vec& z, const Vec& theta) {
  MlpPass pass;
  Vec a;
  if (tf) {
    a.resize(z.size() + 1);
    a.head(z.size()) = z;
    a[z.size()] = t;
  } else {
    a = z;
  }
  int offset = 0;
  const std::size_t n_layers = sizes.size() - 1;
  for (std::size_t l = 1; l <= n_layers; ++l) {
    const int in = layer_in_size(sizes, tf, l);
    const int out = sizes[l];
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                   Eigen::RowMajor>>
        w(theta.data() + offset, out, in);
    offset += out * in;
    Eigen::Map<const Vec> b(theta.data() + offset, out);
    offset += out;
    pass.inputs.push_back(a);
    Vec s = w * a + b;
    pass.preacts.push_back(s);
    if (l < n_layers) {
      a = s.array().tanh().matrix();
    } else {
      a = s;
    }
  }
  return pass;
}

}  // namespace

Vec MlpDynamics::eval(double t, const Vec& z, const Vec& theta) const {
  check_theta(theta);
  MlpPass pass = mlp_forward(layer_sizes_, time_feature_, t, z, theta);
  return pass.preacts.back();
}

Mat MlpDynamics::d_dz(double t, const Vec& z, const Vec& theta) const {
  check_theta(theta);
  MlpPass pass = mlp_forward(layer_sizes_, time_feature_, t, z, theta);
  const std::size_t n_layers = layer_sizes_.size() - 1;
  // Chain d(output)/d(a_0) through the layers, then drop the time column.
  Mat g = Mat::Identity(pass.inputs[0].size(), pass.inputs[0].size());
  int offset = 0;
  for (std::size_t l = 1; l <= n_layers; ++l) {
    const int in = layer_in_size(layer_sizes_, time_feature_, l);
    const int out = layer_sizes_[l];
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                   Eigen::RowMajor>>
        w(theta.data() + offset, out, in);
    offset += out * in + out;
    g = w * g;
    if (l < n_layers) {
      Vec d = (1.0 - pass.preacts[l - 1].array().tanh().square()).matrix();
      g = d.asDiagonal() * g;
    }
  }
  return g.leftCols(z.size());
}

Vec MlpDynamics::d_dt(double t, const Vec& z, const Vec& theta) const {
  if (!time_feature_) return Vec::Zero(dim());
  check_theta(theta);
  MlpPass pass = mlp_forward(layer_sizes_, time_feature_, t, z, theta);
  const std::size_t n_layers = layer_sizes_.size() - 1;
  Mat g = Mat::Identity(pass.inputs[0].size(), pass.inputs[0].size());
  int offset = 0;
  for (std::size_t l = 1; l <= n_layers; ++l) {
    const int in = layer_in_size(layer_sizes_, time_feature_, l);
    const int out = layer_sizes_[l];
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                   Eigen::RowMajor>>
        w(theta.data() + offset, out, in);
    offset += out * in + out;
    g = w * g;
    if (l < n_layers) {
      Vec d = (1.0 - pass.preacts[l - 1].array().tanh().square()).matrix();
      g = d.asDiagonal() * g;
    }
  }
  return g.col(z.size());
}

Mat MlpDynamics::d_dtheta(double t, const Vec& z, const Vec& theta) const {
  check_theta(theta);
  MlpPass pass = mlp_forward(layer_sizes_, time_feature_, t, z, theta);
  const std::size_t n_layers = layer_sizes_.size() - 1;
  const int n_out = dim();

  // u_l = d(output)/d(s_l), built from the top layer down.
  std::vector<Mat> u(n_layers + 1);
  u[n_layers] = Mat::Identity(n_out, n_out);
  std::vector<int> offsets(n_layers + 1, 0);  // offsets[l-1] = start of layer l block
  for (std::size_t l = 1; l <= n_layers; ++l) {
    const int in = layer_in_size(layer_sizes_, time_feature_, l);
    offsets[l] = offsets[l - 1] + layer_sizes_[l] * in + layer_sizes_[l];
  }

  for (std::size_t l = n_layers - 1; l >= 1; --l) {
    const int in = layer_in_size(layer_sizes_, time_feature_, l + 1);
    const int out = layer_sizes_[l + 1];
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                   Eigen::RowMajor>>
        w(theta.data() + offsets[l], out, in);
    Vec d = (1.0 - pass.preacts[l - 1].array().tanh().square()).matrix();
    u[l] = (u[l + 1] * w) * d.asDiagonal();
  }

  Mat grad = Mat::Zero(n_out, param_count_);
  for (std::size_t l = 1; l <= n_layers; ++l) {
    const int in = layer_in_size(layer_sizes_, time_feature_, l);
    const int out = layer_sizes_[l];
    const Vec& a = pass.inputs[l - 1];
    const int base = offsets[l - 1];
    for (int i = 0; i < out; ++i) {
      for (int j = 0; j < in; ++j) {
        grad.col(base + i * in + j) = u[l].col(i) * a[j];
      }
    }
    for (int i = 0; i < out; ++i) {
      grad.col(base + out * in + i) = u[l].col(i);
    }
  }
  return grad;
}

Vec MlpDynamics::init_params(std::uint64_t seed, double scale) const {
  std::mt19937_64 rng(seed);
  Vec theta(param_count_);
  const std::size_t n_layers = layer_sizes_.size() - 1;
  int offset = 0;
  for (std::size_t l = 1; l <= n_layers; ++l) {
    const int in = layer_in_size(layer_sizes_, time_feature_, l);
    const int out = layer_sizes_[l];
    const double s = scale / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> dist(-s, s);
    for (int k = 0; k < out * in; ++k) theta[offset++] = dist(rng);
    for (int k = 0; k < out; ++k) theta[offset++] = 0.0;
  }
  return theta;
}

std::string MlpDynamics::to_checkpoint_json(const Vec& theta) const {
  check_theta(theta);
  nlohmann::json j;
  j["layer_sizes"] = layer_sizes_;
  j["time_feature"] = time_feature_;
  j["theta"] = std::vector<double>(theta.data(), theta.data() + theta.size());
  return j.dump(2);
}

std::pair<MlpDynamics, Vec> MlpDynamics::from_checkpoint_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ConfigParseError, std::string("bad checkpoint json: ") + e.what());
  }
  MlpDynamics model(j.at("layer_sizes").get<std::vector<int>>(),
                    j.value("time_feature", false));
  std::vector<double> flat = j.at("theta").get<std::vector<double>>();
  Vec theta = Eigen::Map<const Vec>(flat.data(), static_cast<Eigen::Index>(flat.size()));
  model.check_theta(theta);
  return {std::move(model), std::move(theta)};
}

// ---------------------------------------------------------------------------
// Closed-form oracles

Vec linear_closed_form(const Mat& a, const Vec& b, const Vec& x, double p, double q) {
  const Eigen::Index n = a.rows();
  // exp of the augmented block matrix yields both the propagator and the
  // integrated forcing term in one shot.
  Mat aug = Mat::Zero(n + 1, n + 1);
  aug.topLeftCorner(n, n) = a * (q - p);
  if (b.size() > 0) aug.topRightCorner(n, 1) = b * (q - p);
  Mat e = aug.exp();
  Vec out = e.topLeftCorner(n, n) * x + e.topRightCorner(n, 1);
  if (!all_finite(out)) fail(ErrorCode::NonFinite, "linear_closed_form overflow");
  return out;
}

Vec projectile_closed_form(double g, const Vec& x, const double p, const double q) {
  const double dt = q - p;
  Vec out(2);
  out[0] = x[0] + x[1] * dt - 0.5 * g * dt * dt;
  out[1] = x[1] - g * dt;
  return out;
}

}  // namespace inim
