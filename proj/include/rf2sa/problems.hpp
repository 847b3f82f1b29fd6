#pragma once

#include "rf2sa/problem.hpp"
#include "rf2sa/rng.hpp"

#include <string>

namespace rf2sa {

/// Built-in test problems:
///
///  - "quadratic-euclidean": M = R^d, N = R^d,
///      f = 0.5 |x - xbar|^2 + 0.5 |y - A x|^2,  g = 0.5 |y - B x|^2.
///    Analytic constants, closed-form optimum, second-order oracle.
///
///  - "sphere-upper": M = S^{d-1}, N = R^m,
///      f = -x'Px + 0.5 |y - t|^2,  g = 0.5 y'Hy - y'Cx  (H > 0).
///    Analytic y*(x) = H^{-1} C x, second-order oracle, bound-type constants.
///
///  - "spd-barycenter": M = R^{N_w} (weight logits, softmax to weights),
///    N = SPD(n), g = 0.5 sum_i w_i(x) dist^2(y, A_i),
///    f = 0.5 dist^2(y, X_target) + rho |x|^2. First-order oracles only.
///
/// `params` overrides the per-problem defaults; unknown names throw.
BilevelProblem builtin_problem(const std::string& name, const json& params = json::object());

/// Default initial iterates (x0, y0, z0) for a problem, overridable fields
/// taken from `init` (e.g. {"x0_scale": 0.5}).
struct InitialPoints {
  Point x0, y0, z0;
};
InitialPoints default_init(const BilevelProblem& p, const json& init = json::object());

/// Random point sampling used by validation suites and bound measurements.
/// Euclidean: gaussian with E|x|^2 = radius^2; sphere: uniform; SPD:
/// exp_I(S) with random symmetric S of Frobenius norm <= radius.
Point random_point(const ManifoldDescriptor& m, rng::Stream& stream, double radius = 1.0);

/// Random unit-norm tangent at x.
Tangent random_unit_tangent(const ManifoldDescriptor& m, const Point& x, rng::Stream& stream);

}  // namespace rf2sa
