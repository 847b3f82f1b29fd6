#include "rf2sa/oracle.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace rf2sa {

namespace {

[[noreturn]] void fail(const std::string& what) { throw std::runtime_error("oracle: " + what); }

Point descend(const BilevelProblem& p, const Point& x, double lambda, bool penalized,
              const OracleSettings& s, const std::optional<Point>& warm_start) {
  const ManifoldDescriptor& n = p.lower;
  const double step = penalized ? 1.0 / (p.constants.l_f1 + lambda * p.constants.l_g1)
                                : 1.0 / p.constants.l_g1;
  const double tol = penalized ? lambda * s.inner_tol : s.inner_tol;
  Point y = warm_start ? *warm_start : p.lower_init;
  double gn = std::numeric_limits<double>::infinity();
  for (long it = 0; it < s.max_inner_iters; ++it) {
    Tangent g = grad(p, Which::gy, x, y);
    if (penalized) g = add(grad(p, Which::fy, x, y), scale(g, lambda));
    gn = norm(n, y, g);
    if (gn <= tol) return y;
    y = exp_map(n, y, scale(g, -step));
  }
  std::ostringstream os;
  os << (penalized ? "penalized" : "lower") << " solve exceeded " << s.max_inner_iters
     << " iterations (final gradient norm " << gn << ", tol " << tol << ")";
  fail(os.str());
}

}  // namespace

void OracleSettings::validate() const {
  if (!(inner_tol > 0) || !(linsolve_tol > 0) || !(fd_step > 0) || max_inner_iters < 1)
    fail("oracle settings must be positive");
}

Point solve_lower(const BilevelProblem& p, const Point& x, const OracleSettings& s,
                  const std::optional<Point>& warm_start) {
  s.validate();
  return descend(p, x, 0.0, false, s, warm_start);
}

Point solve_penalized(const BilevelProblem& p, const Point& x, double lambda,
                      const OracleSettings& s, const std::optional<Point>& warm_start) {
  s.validate();
  if (lambda < 2.0 * p.constants.l_f1 / p.constants.mu_g * (1.0 - 1e-12))
    fail("solve_penalized requires lambda >= 2 l_f1 / mu_g");
  return descend(p, x, lambda, true, s, warm_start);
}

Tangent hypergrad(const BilevelProblem& p, const Point& x, const OracleSettings& s) {
  s.validate();
  if (s.inner_tol >= 1e-4) fail("hypergrad requires inner_tol < 1e-4");
  if (!p.second_order) fail("hypergrad requires a second-order oracle");
  const auto& so = *p.second_order;
  const ManifoldDescriptor& n = p.lower;

  const Point ystar = solve_lower(p, x, s);
  const Tangent b = grad(p, Which::fy, x, ystar);
  const double bn = norm(n, ystar, b);

  // CG for H w = b in T_{y*}N; H is self-adjoint positive definite under the
  // lower-level strong convexity, so plain CG applies.
  Tangent w = zero_tangent(n, ystar);
  Tangent r = b;
  Tangent d = r;
  double rr = inner(n, ystar, r, r);
  const double tol2 = (s.linsolve_tol * bn) * (s.linsolve_tol * bn);
  const long max_cg = std::max<long>(100, 20 * n.dim);
  long it = 0;
  while (rr > tol2) {
    if (++it > max_cg) fail("Hessian linear solve did not converge (mu_g violation?)");
    const Tangent hd = so.hess_yy_g_apply(x, ystar, d);
    const double dhd = inner(n, ystar, d, hd);
    if (dhd <= 0) fail("Hessian operator is not positive definite along CG direction");
    const double step = rr / dhd;
    w = add(w, scale(d, step));
    r = sub(r, scale(hd, step));
    const double rr_new = inner(n, ystar, r, r);
    d = add(r, scale(d, rr_new / rr));
    rr = rr_new;
  }
  return sub(grad(p, Which::fx, x, ystar), so.cross_xy_g_apply(x, ystar, w));
}

Tangent fd_grad_F(const BilevelProblem& p, const Point& x, const OracleSettings& s) {
  s.validate();
  if (s.inner_tol > std::pow(s.fd_step, 1.5))
    fail("fd_grad_F requires inner_tol <= fd_step^(3/2) to keep the FD signal above solver error");
  const ManifoldDescriptor& m = p.upper;
  const Point ystar = solve_lower(p, x, s);
  auto F = [&](const Point& q) { return p.f(q, solve_lower(p, q, s, ystar)); };
  Tangent g = zero_tangent(m, x);
  for (const Tangent& e : orthonormal_basis(m, x)) {
    const double fp = F(exp_map(m, x, scale(e, s.fd_step)));
    const double fm = F(exp_map(m, x, scale(e, -s.fd_step)));
    g.vec += ((fp - fm) / (2.0 * s.fd_step)) * e.vec;
  }
  return g;
}

Tangent grad_L_star(const BilevelProblem& p, const Point& x, double lambda,
                    const OracleSettings& s) {
  const Point ystar = solve_lower(p, x, s);
  const Point ylam = solve_penalized(p, x, lambda, s, ystar);
  const Tangent gx_lam = grad(p, Which::gx, x, ylam);
  const Tangent gx_star = grad(p, Which::gx, x, ystar);
  return add(grad(p, Which::fx, x, ylam), scale(sub(gx_lam, gx_star), lambda));
}

BoundReport measure_bounds(const BilevelProblem& p, const SmoothnessConstants& sc,
                           const std::vector<BoundQuad>& samples, const OracleSettings& s) {
  const ManifoldDescriptor& n = p.lower;
  const double l_lambda0 = 3.0 * sc.l_g1 / sc.mu_g;
  BoundReport rep;
  rep.slack = 10.0 * s.inner_tol / sc.mu_g;
  rep.min_pair_margin = std::numeric_limits<double>::infinity();
  rep.min_limit_margin = std::numeric_limits<double>::infinity();

  auto note_limit = [&](double lambda, const Point& ylam, const Point& ystar) {
    const double measured = dist(n, ylam, ystar);
    const double bound = 2.0 * sc.l_f0 / (lambda * sc.mu_g);
    const double margin = bound + rep.slack - measured;
    ++rep.limit_checks;
    if (margin < 0) ++rep.limit_violations;
    if (margin < rep.min_limit_margin) {
      rep.min_limit_margin = margin;
      rep.worst_limit = {measured, bound, margin};
    }
  };

  for (const BoundQuad& q : samples) {
    const double l1 = std::min(q.lambda1, q.lambda2);
    const double l2 = std::max(q.lambda1, q.lambda2);
    const Point ystar1 = solve_lower(p, q.x1, s);
    const Point ystar2 = solve_lower(p, q.x2, s);
    const Point y1 = solve_penalized(p, q.x1, l1, s, ystar1);
    const Point y2 = solve_penalized(p, q.x2, l2, s, ystar2);

    const double measured = dist(n, y1, y2);
    const double bound = 2.0 * (l2 - l1) / (l1 * l2) * sc.l_f0 / sc.mu_g +
                         l_lambda0 * dist(p.upper, q.x1, q.x2);
    const double margin = bound + rep.slack - measured;
    ++rep.pair_checks;
    if (margin < 0) ++rep.pair_violations;
    if (margin < rep.min_pair_margin) {
      rep.min_pair_margin = margin;
      rep.worst_pair = {measured, bound, margin};
    }

    note_limit(l1, y1, ystar1);
    note_limit(l2, y2, ystar2);
  }
  return rep;
}

}  // namespace rf2sa
