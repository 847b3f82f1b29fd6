#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "rf2sa/harness.hpp"
#include "rf2sa/problems.hpp"

#include <cmath>

using namespace rf2sa;

namespace {

// The quadratic problem's linear maps are reachable through its own gradient
// oracles: grad_gy(x, y) = y - Bx and grad_fy(x, y) = y - Ax.
Vec bx_of(const BilevelProblem& p, const Point& x) {
  const Point y0 = make_point(p.lower, Vec::Zero(p.lower.ambient));
  return -grad(p, Which::gy, x, y0).vec;
}

Vec ax_of(const BilevelProblem& p, const Point& x) {
  const Point y0 = make_point(p.lower, Vec::Zero(p.lower.ambient));
  return -grad(p, Which::fy, x, y0).vec;
}

}  // namespace

TEST_CASE("quadratic gradient oracles at the lower-level optimum") {
  const BilevelProblem p = builtin_problem("quadratic-euclidean");
  rng::Stream s(7);
  const Point x = random_point(p.upper, s, 1.5);
  const Point ystar = make_point(p.lower, bx_of(p, x));
  CHECK(norm(p.lower, ystar, grad(p, Which::gy, x, ystar)) < 1e-14);

  // grad_fy(x, y) = y - Ax at any y
  const Point y = random_point(p.lower, s, 2.0);
  const Vec expected = y.coords - ax_of(p, x);
  CHECK((grad(p, Which::fy, x, y).vec - expected).norm() < 1e-12);
}

TEST_CASE("gradient oracles agree with finite differences on all built-ins") {
  const ValidationReport rep = validate_problems(100);
  for (const auto& item : rep.items) {
    INFO(item.name, ": ", item.detail);
    CHECK(item.pass);
  }
}

TEST_CASE("check_gradients flags a planted 10 percent fault") {
  BilevelProblem p = builtin_problem("quadratic-euclidean");
  const GradOracle clean = p.grad_fy;
  p.grad_fy = [clean](const Point& x, const Point& y) {
    return scale(clean(x, y), 1.1);
  };
  rng::Stream s(11);
  const Point x = random_point(p.upper, s, 2.0);
  const Point y = random_point(p.lower, s, 2.0);
  const GradCheckReport rep = check_gradients(p, x, y, 1e-5);
  double fy_err = 0, others = 0;
  for (const auto& e : rep.entries) {
    if (e.oracle == "fy")
      fy_err = e.max_rel_error;
    else
      others = std::max(others, e.max_rel_error);
  }
  CHECK(fy_err > 0.01);
  CHECK(others < 1e-5);
}

TEST_CASE("noisy gradients: degenerate sigma and moment checks") {
  const BilevelProblem p = builtin_problem("quadratic-euclidean");
  rng::Stream s(13);
  const Point x = random_point(p.upper, s, 1.0);
  const Point y = random_point(p.lower, s, 1.0);

  const Tangent g0 = grad(p, Which::gx, x, y);
  const Tangent gn = noisy_grad(p, Which::gx, x, y, NoiseModel{0.0, 9}, substream(9, 0, 0, 0));
  CHECK(gn.vec == g0.vec);

  // sample mean within 4 sigma / sqrt(n) of the exact gradient
  const double sigma = 0.5;
  const int n = 10000;
  Vec mean = Vec::Zero(p.upper.ambient);
  for (int i = 0; i < n; ++i)
    mean += noisy_grad(p, Which::gx, x, y, NoiseModel{sigma, 1},
                       substream(1, static_cast<std::uint64_t>(i), 0, 4))
                .vec;
  mean /= n;
  CHECK((mean - g0.vec).norm() <= 4.0 * sigma / std::sqrt(double(n)));
}

TEST_CASE("second-order oracle checks on the quadratic problem") {
  const BilevelProblem p = builtin_problem("quadratic-euclidean");
  rng::Stream s(17);
  const Point x = random_point(p.upper, s, 1.0);
  const Point y = random_point(p.lower, s, 1.0);
  REQUIRE(p.second_order.has_value());

  const SecondOrderReport rep = check_second_order(p, x, y);
  CHECK(rep.self_adjoint_err <= 1e-12);
  CHECK(rep.rayleigh_min == doctest::Approx(1.0));  // Hess_yy g = I
  CHECK(rep.hess_fd_rel_err <= 1e-6);

  // linearity: H 0 = 0
  const Tangent zero = zero_tangent(p.lower, y);
  CHECK(p.second_order->hess_yy_g_apply(x, y, zero).vec.norm() == 0.0);

  // cross operator equals the -B^T action: for the quadratic g,
  // cross(u) = grad_gx(x, y + u) - grad_gx(x, y) exactly
  const Tangent u = scale(random_unit_tangent(p.lower, y, s), 0.7);
  const Point yu = make_point(p.lower, Vec(y.coords + u.vec));
  const Vec expected = grad(p, Which::gx, x, yu).vec - grad(p, Which::gx, x, y).vec;
  CHECK((p.second_order->cross_xy_g_apply(x, y, u).vec - expected).norm() < 1e-12);
}

TEST_CASE("constants record validation") {
  SmoothnessConstants sc;
  sc.mu_g = 2.0;
  sc.l_g1 = 1.0;  // mu_g > l_g1 is inconsistent
  CHECK_THROWS(sc.validate());
  sc.l_g1 = 2.0;
  CHECK_NOTHROW(sc.validate());
  sc.l_f1 = -1;
  CHECK_THROWS(sc.validate());
}

TEST_CASE("first-order view carries no second-order access") {
  const BilevelProblem p = builtin_problem("quadratic-euclidean");
  const FirstOrderProblem v = first_order_view(p);
  rng::Stream s(19);
  const Point x = random_point(p.upper, s, 1.0);
  const Point y = random_point(p.lower, s, 1.0);
  CHECK(v.grad_fx(x, y).vec == grad(p, Which::fx, x, y).vec);
  CHECK(v.grad_gy(x, y).vec == grad(p, Which::gy, x, y).vec);
  static_assert(!std::is_convertible_v<FirstOrderProblem, BilevelProblem>);
  static_assert(sizeof(FirstOrderProblem) > 0);
}
