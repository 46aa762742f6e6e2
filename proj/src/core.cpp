#include "inimnet/core.hpp"

#include <algorithm>

namespace inim {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonMonotoneGrid: return "NonMonotoneGrid";
    case ErrorCode::TooFewPoints: return "TooFewPoints";
    case ErrorCode::NonFiniteEntry: return "NonFiniteEntry";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::SchemeUnavailable: return "SchemeUnavailable";
    case ErrorCode::ParamLengthMismatch: return "ParamLengthMismatch";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::ObservationOffGrid: return "ObservationOffGrid";
    case ErrorCode::AssumptionViolated: return "AssumptionViolated";
    case ErrorCode::SharingRequired: return "SharingRequired";
    case ErrorCode::DivergedTraining: return "DivergedTraining";
    case ErrorCode::ConfigParseError: return "ConfigParseError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::UnknownSuite: return "UnknownSuite";
  }
  return "Unknown";
}

std::optional<ErrorCode> validate_grid(const std::vector<double>& points) {
  if (points.size() < 2) return ErrorCode::TooFewPoints;
  for (double p : points) {
    if (!std::isfinite(p)) return ErrorCode::NonFiniteEntry;
  }
  for (std::size_t i = 0; i + 1 < points.size(); ++i) {
    if (!(points[i] < points[i + 1])) return ErrorCode::NonMonotoneGrid;
  }
  return std::nullopt;
}

DepthGrid::DepthGrid(std::vector<double> points) : points_(std::move(points)) {
  if (auto bad = validate_grid(points_)) {
    fail(*bad, std::string("invalid depth grid: ") + to_string(*bad));
  }
}

DepthGrid DepthGrid::uniform(double p_min, double q, std::size_t n_points) {
  std::vector<double> pts(n_points);
  for (std::size_t i = 0; i < n_points; ++i) {
    double s = static_cast<double>(i) / static_cast<double>(n_points - 1);
    pts[i] = p_min + s * (q - p_min);
  }
  pts.back() = q;  // avoid rounding drift at the terminal
  return DepthGrid(std::move(pts));
}

std::optional<std::size_t> DepthGrid::index_of(double p, double tol) const {
  for (std::size_t i = 0; i < points_.size(); ++i) {
    if (std::abs(points_[i] - p) <= tol) return i;
  }
  return std::nullopt;
}

LossSpec LossSpec::mse_terminal(Vec y) {
  LossSpec spec;
  const double n = static_cast<double>(y.size());
  spec.terminal = [y, n](const Vec& z) { return (z - y).squaredNorm() / (2.0 * n); };
  spec.terminal_grad = [y, n](const Vec& z) { return Vec((z - y) / n); };
  return spec;
}

LossSpec LossSpec::quadratic_terminal(Vec y) {
  LossSpec spec;
  spec.terminal = [y](const Vec& z) { return 0.5 * (z - y).squaredNorm(); };
  spec.terminal_grad = [y](const Vec& z) { return Vec(z - y); };
  return spec;
}

const char* to_string(JacobianMode mode) {
  switch (mode) {
    case JacobianMode::Exact: return "Exact";
    case JacobianMode::SymmetricDiff: return "SymmetricDiff";
    case JacobianMode::NewtonDiff: return "NewtonDiff";
    case JacobianMode::Cropped: return "Cropped";
  }
  return "Unknown";
}

std::optional<JacobianMode> parse_jacobian_mode(const std::string& name) {
  if (name == "Exact") return JacobianMode::Exact;
  if (name == "SymmetricDiff") return JacobianMode::SymmetricDiff;
  if (name == "NewtonDiff") return JacobianMode::NewtonDiff;
  if (name == "Cropped") return JacobianMode::Cropped;
  return std::nullopt;
}

Vec JacobianScheme::deltas_for(const Vec& x) const {
  if (deltas.size() > 0) {
    if (deltas.size() != x.size()) {
      fail(ErrorCode::LengthMismatch, "delta vector length != state length");
    }
    return deltas;
  }
  Vec d(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    d[i] = 1e-3 * (1.0 + std::abs(x[i]));
  }
  return d;
}

}  // namespace inim
