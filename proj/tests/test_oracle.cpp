#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "rf2sa/harness.hpp"
#include "rf2sa/oracle.hpp"
#include "rf2sa/problems.hpp"

#include <cmath>

using namespace rf2sa;

namespace {

Vec bx_of(const BilevelProblem& p, const Point& x) {
  const Point y0 = make_point(p.lower, Vec::Zero(p.lower.ambient));
  return -grad(p, Which::gy, x, y0).vec;
}

Vec ax_of(const BilevelProblem& p, const Point& x) {
  const Point y0 = make_point(p.lower, Vec::Zero(p.lower.ambient));
  return -grad(p, Which::fy, x, y0).vec;
}

// f ignores y entirely: the penalty path and the hypergradient both collapse
// to grad_x f.
BilevelProblem y_free_problem() {
  BilevelProblem p;
  p.name = "y-free";
  p.upper = euclidean_manifold(2);
  p.lower = euclidean_manifold(2);
  p.f = [](const Point& x, const Point&) { return 0.5 * x.coords.squaredNorm(); };
  p.g = [](const Point& x, const Point& y) { return 0.5 * (y.coords - x.coords).squaredNorm(); };
  p.grad_fx = [](const Point& x, const Point&) { return Tangent{x, x.coords}; };
  p.grad_fy = [](const Point&, const Point& y) { return Tangent{y, Vec::Zero(2)}; };
  p.grad_gx = [](const Point& x, const Point& y) {
    return Tangent{x, Vec(-(y.coords - x.coords))};
  };
  p.grad_gy = [](const Point& x, const Point& y) {
    return Tangent{y, Vec(y.coords - x.coords)};
  };
  p.second_order = SecondOrderOracle{
      [](const Point&, const Point&, const Tangent& u) { return u; },
      [](const Point& x, const Point&, const Tangent& u) { return Tangent{x, Vec(-u.vec)}; }};
  SmoothnessConstants sc;
  sc.l_f0 = 4;
  sc.l_f1 = 1;
  sc.l_g0 = 4;
  sc.l_g1 = 1;
  sc.mu_g = 1;
  p.constants = sc;
  p.lower_init = make_point(p.lower, Vec::Zero(2));
  return p;
}

}  // namespace

TEST_CASE("lower-level solves hit the analytic minimizers") {
  const BilevelProblem p = builtin_problem("quadratic-euclidean");
  OracleSettings st;
  rng::Stream s(31);
  const Point x = random_point(p.upper, s, 1.5);
  const Point y = solve_lower(p, x, st);
  CHECK((y.coords - bx_of(p, x)).norm() <= st.inner_tol / p.constants.mu_g + 1e-12);

  const Point x0 = make_point(p.upper, Vec::Zero(p.upper.ambient));
  CHECK(solve_lower(p, x0, st).coords.norm() <= st.inner_tol);

  // single-support barycenter: all weight on the first anchor
  json params;
  params["n"] = 2;
  params["components"] = 2;
  params["matrices"] = json::array();
  params["matrices"].push_back(json::array({2.0, 0.3, 0.3, 1.0}));
  params["matrices"].push_back(json::array({0.7, 0.0, 0.0, 1.4}));
  const BilevelProblem bary = builtin_problem("spd-barycenter", params);
  Vec logits = Vec::Zero(2);
  logits[0] = 40.0;  // softmax weight ~ 1 on anchor 0
  const Point xw = make_point(bary.upper, logits);
  const Point ystar = solve_lower(bary, xw, st);
  Vec a0(4);
  a0 << 2.0, 0.3, 0.3, 1.0;
  CHECK((ystar.coords - a0).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("penalized solves match the closed-form quadratic minimizer") {
  const BilevelProblem p = builtin_problem("quadratic-euclidean");
  OracleSettings st;
  rng::Stream s(33);
  const Point x = random_point(p.upper, s, 1.0);
  const Vec ax = ax_of(p, x), bx = bx_of(p, x);

  for (double lambda : {12.0, 100.0, 1e6}) {
    const Point ylam = solve_penalized(p, x, lambda, st);
    const Vec expected = (ax + lambda * bx) / (1.0 + lambda);
    CHECK((ylam.coords - expected).norm() < 1e-9);
    // limit bound towards the unpenalized minimizer
    CHECK(dist(p.lower, ylam, make_point(p.lower, bx)) <=
          2.0 * p.constants.l_f0 / (lambda * p.constants.mu_g) + 10.0 * st.inner_tol);
  }
  CHECK_THROWS(solve_penalized(p, x, 0.1, st));  // below 2 l_f1 / mu_g
}

TEST_CASE("y-free objective collapses all oracles to grad_x f") {
  const BilevelProblem p = y_free_problem();
  OracleSettings st;
  Vec xv(2);
  xv << 0.8, -1.1;
  const Point x = make_point(p.upper, xv);

  const Point ystar = solve_lower(p, x, st);
  for (double lambda : {5.0, 500.0}) {
    const Point ylam = solve_penalized(p, x, lambda, st);
    CHECK(dist(p.lower, ylam, ystar) <= 2.0 * st.inner_tol);
    CHECK((grad_L_star(p, x, lambda, st).vec - xv).norm() <= 1e-8);
  }
  CHECK((hypergrad(p, x, st).vec - xv).norm() <= 1e-9);
}

TEST_CASE("hypergradient assembles the analytic composite derivative") {
  const BilevelProblem p = builtin_problem("quadratic-euclidean");
  OracleSettings st;
  rng::Stream s(35);
  const Point x = random_point(p.upper, s, 1.2);

  // reconstruct grad F(x) = (x - xbar) + (A - B)^T (A - B) x from oracle calls
  const Vec ax = ax_of(p, x), bx = bx_of(p, x);
  const Point y_at_ax = make_point(p.lower, ax);
  const Vec xbar = x.coords - grad(p, Which::fx, x, y_at_ax).vec;
  const Vec cx = ax - bx;  // (A - B) x
  // A^T v = (x - xbar) - grad_fx(x, Ax + v); B^T v = -grad_gx(x, Bx + v)
  const Vec atcx =
      (x.coords - xbar) - grad(p, Which::fx, x, make_point(p.lower, Vec(ax + cx))).vec;
  const Vec btcx = -grad(p, Which::gx, x, make_point(p.lower, Vec(bx + cx))).vec;
  const Vec analytic = (x.coords - xbar) + (atcx - btcx);

  const Tangent hg = hypergrad(p, x, st);
  CHECK((hg.vec - analytic).norm() <= 1e-8 * (1.0 + analytic.norm()));

  // finite-difference route agrees to quadratic-exactness accuracy
  const Tangent fd = fd_grad_F(p, x, st);
  CHECK(norm(p.upper, x, sub(fd, hg)) / (1.0 + norm(p.upper, x, hg)) <= 1e-6);

  // zero at the closed-form optimum
  const Tangent at_star = fd_grad_F(p, p.known_optimum->x_star, st);
  CHECK(norm(p.upper, p.known_optimum->x_star, at_star) <= 1e-6);
}

TEST_CASE("sphere hypergradient stays tangent and matches finite differences") {
  const BilevelProblem p = builtin_problem("sphere-upper");
  OracleSettings st;
  rng::Stream s(37);
  for (int i = 0; i < 5; ++i) {
    const Point x = random_point(p.upper, s, 1.0);
    const Tangent fd = fd_grad_F(p, x, st);
    CHECK(std::abs(fd.vec.dot(x.coords)) <= 1e-9);
    const Tangent hg = hypergrad(p, x, st);
    CHECK(norm(p.upper, x, sub(fd, hg)) / (1.0 + norm(p.upper, x, hg)) <= 1e-4);
  }
}

TEST_CASE("penalty-gradient bias decays like 1/lambda under the analytic bound") {
  const ValidationReport rep = validate_oracle();
  for (const auto& item : rep.items) {
    INFO(item.name, ": ", item.detail);
    CHECK(item.pass);
  }
}

TEST_CASE("distance bounds: degenerate quadruples and the y-free problem") {
  const BilevelProblem p = builtin_problem("quadratic-euclidean");
  OracleSettings st;
  rng::Stream s(39);
  const Point x = random_point(p.upper, s, 1.0);

  std::vector<BoundQuad> quads;
  quads.push_back(BoundQuad{x, x, 50.0, 50.0});
  const BoundReport rep = measure_bounds(p, p.constants, quads, st);
  CHECK(rep.clean());
  CHECK(rep.worst_pair.measured <= 2.0 * st.inner_tol / p.constants.mu_g);

  // f independent of y: y*_lambda == y*, so the measured side vanishes while
  // the bound stays positive
  const BilevelProblem yf = y_free_problem();
  std::vector<BoundQuad> q2;
  Vec a(2);
  a << 1, 0;
  const Point xa = make_point(yf.upper, a);
  q2.push_back(BoundQuad{xa, xa, 10.0, 1000.0});
  q2.push_back(BoundQuad{xa, xa, 50.0, 51.0});
  const BoundReport rep2 = measure_bounds(yf, yf.constants, q2, st);
  CHECK(rep2.clean());
  CHECK(rep2.worst_pair.measured <= 4.0 * st.inner_tol);
  CHECK(rep2.worst_pair.bound > 0.0);
}

TEST_CASE("oracle guard rails") {
  const BilevelProblem p = builtin_problem("quadratic-euclidean");
  rng::Stream s(41);
  const Point x = random_point(p.upper, s, 1.0);

  OracleSettings loose;
  loose.inner_tol = 1e-3;
  CHECK_THROWS(hypergrad(p, x, loose));  // requires inner_tol < 1e-4

  OracleSettings fd_bad;
  fd_bad.inner_tol = 1e-5;
  fd_bad.fd_step = 1e-5;  // inner_tol above fd_step^{3/2}
  CHECK_THROWS(fd_grad_F(p, x, fd_bad));

  BilevelProblem no_so = p;
  no_so.second_order.reset();
  OracleSettings st;
  CHECK_THROWS(hypergrad(no_so, x, st));

  OracleSettings strict;
  strict.max_inner_iters = 2;
  CHECK_THROWS(solve_lower(p, x, strict));
}
