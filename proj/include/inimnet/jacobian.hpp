#pragma once

#include "inimnet/core.hpp"

#include <functional>
#include <utility>

namespace inim {

/// One forward-Euler step of the variational equation alongside a direct
/// solve: J <- J + h * (df_dz . J).
Mat exact_sensitivity_step(const Mat& j, const Mat& df_dz, double h);

/// One step of the cropped Jacobian recursion: J <- J - h * phi_grad, the
/// second-order input-derivative term having been dropped.
Mat cropped_jacobian_step(const Mat& j_prev, const Mat& phi_grad, double h);

using EvolveFn = std::function<Vec(const Vec&)>;

struct ValueAndJacobian {
  Vec value;
  Mat jacobian;
};

/// Symmetric difference quotient of an evolution map: evaluates the map at
/// x and at x +- delta_i e_i and forms the centred quotient per column.
ValueAndJacobian symmetric_diff_bundle(const EvolveFn& evolve, const Vec& x,
                                       const Vec& deltas);

/// Forward (Newton) difference quotient: x and x + delta_i e_i only.
ValueAndJacobian newton_diff_bundle(const EvolveFn& evolve, const Vec& x,
                                    const Vec& deltas);

/// Central finite-difference Jacobian of an arbitrary map, used as the
/// independent oracle in gradient-contract tests.
Mat finite_difference_jacobian(const EvolveFn& fn, const Vec& x,
                               double rel_delta = 1e-6);

/// Central finite-difference derivative of a scalar function of a vector.
Vec finite_difference_gradient(const std::function<double(const Vec&)>& fn,
                               const Vec& x, double rel_delta = 1e-6);

}  // namespace inim
