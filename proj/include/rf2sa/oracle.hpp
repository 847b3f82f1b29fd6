#pragma once

#include "rf2sa/problem.hpp"

#include <optional>
#include <string>
#include <vector>

namespace rf2sa {

struct OracleSettings {
  double inner_tol = 1e-10;     // gradient-norm stopping threshold for inner solves
  long max_inner_iters = 1000000;
  double linsolve_tol = 1e-10;  // relative residual for the Hessian linear solve
  double fd_step = 1e-5;

  void validate() const;
};

/// High-precision lower-level solve: returns y with ||grad_y g(x, y)|| <= inner_tol.
/// Plain Riemannian gradient descent with step 1/l_g1.
Point solve_lower(const BilevelProblem& p, const Point& x, const OracleSettings& s,
                  const std::optional<Point>& warm_start = std::nullopt);

/// Minimizer of the penalized objective f + lambda g over y; stops at
/// ||grad_y f + lambda grad_y g|| <= lambda * inner_tol. Requires
/// lambda >= 2 l_f1 / mu_g.
Point solve_penalized(const BilevelProblem& p, const Point& x, double lambda,
                      const OracleSettings& s,
                      const std::optional<Point>& warm_start = std::nullopt);

/// Second-order hypergradient at x: grad_x f - Hess_xy g (Hess_yy g)^{-1} grad_y f
/// evaluated at (x, y*(x)); the linear system is solved matrix-free by
/// conjugate gradients in T_{y*}N.
Tangent hypergrad(const BilevelProblem& p, const Point& x, const OracleSettings& s);

/// Central-difference gradient of F(x) = f(x, y*(x)) over an orthonormal basis
/// of T_xM; independent validation route for hypergrad.
Tangent fd_grad_F(const BilevelProblem& p, const Point& x, const OracleSettings& s);

/// First-order penalty-path gradient:
///   grad_x f(x, y_l) + lambda (grad_x g(x, y_l) - grad_x g(x, y*)),
/// with y_l = y_lambda^*(x) and y* = y^*(x).
Tangent grad_L_star(const BilevelProblem& p, const Point& x, double lambda,
                    const OracleSettings& s);

/// One (x1, x2, lambda1, lambda2) draw; lambdas are sorted on use so that
/// lambda2 >= lambda1.
struct BoundQuad {
  Point x1, x2;
  double lambda1 = 0, lambda2 = 0;
};

struct BoundSample {
  double measured = 0;
  double bound = 0;
  double margin = 0;  // bound + slack - measured
};

struct BoundReport {
  long pair_checks = 0;
  long pair_violations = 0;
  long limit_checks = 0;    // d(y_lambda^*, y^*) <= 2 l_f0 / (lambda mu_g)
  long limit_violations = 0;
  double slack = 0;
  double min_pair_margin = 0;
  double min_limit_margin = 0;
  BoundSample worst_pair;
  BoundSample worst_limit;
  bool clean() const { return pair_violations == 0 && limit_violations == 0; }
};

/// Checks, per quadruple, the two-multiplier distance bound
///   d(y_l1^*(x1), y_l2^*(x2)) <= 2(l2-l1)/(l1 l2) l_f0/mu_g + l_lambda0 d(x2,x1)
/// and, for each (x_i, lambda_i), the limit bound d(y_lambda^*, y^*) <=
/// 2 l_f0 / (lambda mu_g), both with slack 10 inner_tol / mu_g.
BoundReport measure_bounds(const BilevelProblem& p, const SmoothnessConstants& sc,
                           const std::vector<BoundQuad>& samples, const OracleSettings& s);

}  // namespace rf2sa
