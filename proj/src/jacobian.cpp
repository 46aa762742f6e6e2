#include "inimnet/jacobian.hpp"

namespace inim {

Mat exact_sensitivity_step(const Mat& j, const Mat& df_dz, double h) {
  return j + h * (df_dz * j);
}

Mat cropped_jacobian_step(const Mat& j_prev, const Mat& phi_grad, double h) {
  return j_prev - h * phi_grad;
}

ValueAndJacobian symmetric_diff_bundle(const EvolveFn& evolve, const Vec& x,
                                       const Vec& deltas) {
  const Eigen::Index n = x.size();
  ValueAndJacobian out;
  out.value = evolve(x);
  out.jacobian.resize(out.value.size(), n);
  for (Eigen::Index i = 0; i < n; ++i) {
    Vec xp = x;
    Vec xm = x;
    xp[i] += deltas[i];
    xm[i] -= deltas[i];
    out.jacobian.col(i) = (evolve(xp) - evolve(xm)) / (2.0 * deltas[i]);
  }
  if (!all_finite(out.value) || !all_finite(out.jacobian)) {
    fail(ErrorCode::NonFinite, "symmetric_diff_bundle: co-state diverged");
  }
  return out;
}

ValueAndJacobian newton_diff_bundle(const EvolveFn& evolve, const Vec& x,
                                    const Vec& deltas) {
  const Eigen::Index n = x.size();
  ValueAndJacobian out;
  out.value = evolve(x);
  out.jacobian.resize(out.value.size(), n);
  for (Eigen::Index i = 0; i < n; ++i) {
    Vec xp = x;
    xp[i] += deltas[i];
    out.jacobian.col(i) = (evolve(xp) - out.value) / deltas[i];
  }
  if (!all_finite(out.value) || !all_finite(out.jacobian)) {
    fail(ErrorCode::NonFinite, "newton_diff_bundle: co-state diverged");
  }
  return out;
}

Mat finite_difference_jacobian(const EvolveFn& fn, const Vec& x, double rel_delta) {
  const Eigen::Index n = x.size();
  Vec f0 = fn(x);
  Mat j(f0.size(), n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double d = rel_delta * (1.0 + std::abs(x[i]));
    Vec xp = x;
    Vec xm = x;
    xp[i] += d;
    xm[i] -= d;
    j.col(i) = (fn(xp) - fn(xm)) / (2.0 * d);
  }
  return j;
}

Vec finite_difference_gradient(const std::function<double(const Vec&)>& fn,
                               const Vec& x, double rel_delta) {
  const Eigen::Index n = x.size();
  Vec g(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double d = rel_delta * (1.0 + std::abs(x[i]));
    Vec xp = x;
    Vec xm = x;
    xp[i] += d;
    xm[i] -= d;
    g[i] = (fn(xp) - fn(xm)) / (2.0 * d);
  }
  return g;
}

}  // namespace inim
