#include "rf2sa/problem.hpp"

#include "rf2sa/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace rf2sa {

namespace {

[[noreturn]] void fail(const std::string& what) { throw std::runtime_error("problem: " + what); }

double fd_value(const std::function<double(const Point&)>& value, const ManifoldDescriptor& m,
                const Point& at, const Tangent& dir, double h) {
  const Point plus = exp_map(m, at, scale(dir, h));
  const Point minus = exp_map(m, at, scale(dir, -h));
  return (value(plus) - value(minus)) / (2.0 * h);
}

GradCheckEntry check_one(const BilevelProblem& p, Which which, const Point& x, const Point& y,
                         double h) {
  const bool on_upper = (which == Which::fx || which == Which::gx);
  const ManifoldDescriptor& m = on_upper ? p.upper : p.lower;
  const Point& at = on_upper ? x : y;
  const ValueOracle& val = (which == Which::fx || which == Which::fy) ? p.f : p.g;

  std::function<double(const Point&)> value;
  if (on_upper)
    value = [&](const Point& q) { return val(q, y); };
  else
    value = [&](const Point& q) { return val(x, q); };

  const Tangent g = grad(p, which, x, y);
  const double gn = norm(m, at, g);
  GradCheckEntry entry{which_name(which), 0.0, -1};
  const auto basis = orthonormal_basis(m, at);
  for (int i = 0; i < static_cast<int>(basis.size()); ++i) {
    const double analytic = inner(m, at, g, basis[i]);
    const double fd = fd_value(value, m, at, basis[i], h);
    const double err = std::abs(analytic - fd) / (1.0 + gn);
    if (err > entry.max_rel_error) {
      entry.max_rel_error = err;
      entry.worst_direction = i;
    }
  }
  return entry;
}

}  // namespace

void SmoothnessConstants::validate() const {
  const double vals[] = {l_f0, l_f1, l_f2, l_g0, l_g1, l_g2, mu_g, sigma_f, sigma_g};
  for (double v : vals)
    if (!std::isfinite(v) || v < 0) fail("smoothness constants must be finite and nonnegative");
  if (mu_g <= 0) fail("mu_g must be positive");
  if (mu_g > l_g1) fail("mu_g must not exceed l_g1");
}

json SmoothnessConstants::to_json() const {
  return json{{"l_f0", l_f0}, {"l_f1", l_f1}, {"l_f2", l_f2},
              {"l_g0", l_g0}, {"l_g1", l_g1}, {"l_g2", l_g2},
              {"mu_g", mu_g}, {"sigma_f", sigma_f}, {"sigma_g", sigma_g},
              {"estimated", estimated}};
}

SmoothnessConstants SmoothnessConstants::from_json(const json& j) {
  SmoothnessConstants sc;
  sc.l_f0 = j.at("l_f0");
  sc.l_f1 = j.at("l_f1");
  sc.l_f2 = j.at("l_f2");
  sc.l_g0 = j.at("l_g0");
  sc.l_g1 = j.at("l_g1");
  sc.l_g2 = j.at("l_g2");
  sc.mu_g = j.at("mu_g");
  sc.sigma_f = j.value("sigma_f", 0.0);
  sc.sigma_g = j.value("sigma_g", 0.0);
  sc.estimated = j.value("estimated", false);
  sc.validate();
  return sc;
}

const char* which_name(Which w) {
  switch (w) {
    case Which::fx: return "fx";
    case Which::fy: return "fy";
    case Which::gx: return "gx";
    case Which::gy: return "gy";
  }
  return "?";
}

Tangent grad(const BilevelProblem& p, Which which, const Point& x, const Point& y) {
  if (x.manifold != p.upper) fail("x is not on the upper manifold");
  if (y.manifold != p.lower) fail("y is not on the lower manifold");
  Tangent t = [&] {
    switch (which) {
      case Which::fx: return p.grad_fx(x, y);
      case Which::fy: return p.grad_fy(x, y);
      case Which::gx: return p.grad_gx(x, y);
      case Which::gy: return p.grad_gy(x, y);
    }
    fail("unknown oracle selector");
  }();
  if (!t.vec.allFinite())
    fail(std::string("oracle ") + which_name(which) + " returned a non-finite gradient");
  return t;
}

RngStreamKey substream(std::uint64_t master, std::uint64_t k, std::uint64_t t,
                       std::uint64_t channel) {
  return {rng::derive_key(master, k, t, channel)};
}

Tangent sample_isotropic_noise(const ManifoldDescriptor& m, const Point& base, double sigma,
                               RngStreamKey stream) {
  Tangent xi = zero_tangent(m, base);
  if (sigma == 0.0) return xi;
  rng::Stream s(stream.key);
  const auto basis = orthonormal_basis(m, base);
  const double per_coord = sigma / std::sqrt(static_cast<double>(basis.size()));
  for (const Tangent& e : basis) xi.vec += (per_coord * s.next_gaussian()) * e.vec;
  return xi;
}

Tangent noisy_grad(const BilevelProblem& p, Which which, const Point& x, const Point& y,
                   const NoiseModel& noise, RngStreamKey stream) {
  Tangent g = grad(p, which, x, y);
  if (noise.sigma == 0.0) return g;
  const bool on_upper = (which == Which::fx || which == Which::gx);
  const ManifoldDescriptor& m = on_upper ? p.upper : p.lower;
  return add(g, sample_isotropic_noise(m, g.base, noise.sigma, stream));
}

double GradCheckReport::worst() const {
  double w = 0;
  for (const auto& e : entries) w = std::max(w, e.max_rel_error);
  return w;
}

GradCheckReport check_gradients(const BilevelProblem& p, const Point& x, const Point& y,
                                double h) {
  if (h < 1e-7 || h > 1e-2) fail("check_gradients step h must be in [1e-7, 1e-2]");
  GradCheckReport report;
  for (Which w : {Which::fx, Which::fy, Which::gx, Which::gy})
    report.entries.push_back(check_one(p, w, x, y, h));
  return report;
}

bool SecondOrderReport::ok(double mu_g) const {
  return self_adjoint_err <= 1e-8 && rayleigh_min >= mu_g - 1e-6 && hess_fd_rel_err <= 1e-4;
}

SecondOrderReport check_second_order(const BilevelProblem& p, const Point& x, const Point& y) {
  if (!p.second_order) fail("problem has no second-order oracle");
  const auto& so = *p.second_order;
  const ManifoldDescriptor& m = p.lower;
  const auto basis = orthonormal_basis(m, y);
  const int d = static_cast<int>(basis.size());

  SecondOrderReport rep;
  rep.rayleigh_min = std::numeric_limits<double>::infinity();

  auto apply = [&](const Tangent& u) { return so.hess_yy_g_apply(x, y, u); };
  auto from_coeffs = [&](const Vec& c) {
    Tangent t = zero_tangent(m, y);
    for (int i = 0; i < d; ++i) t.vec += c[i] * basis[i].vec;
    return t;
  };

  rng::Stream s(0x5ec0dull);
  std::vector<Tangent> probes;
  for (int r = 0; r < std::min(32, 4 * d); ++r) {
    Vec c(d);
    for (int i = 0; i < d; ++i) c[i] = s.next_gaussian();
    probes.push_back(from_coeffs(c));
  }
  for (size_t a = 0; a + 1 < probes.size(); a += 2) {
    const Tangent& u = probes[a];
    const Tangent& w = probes[a + 1];
    const double lhs = inner(m, y, apply(u), w);
    const double rhs = inner(m, y, u, apply(w));
    const double sc = 1.0 + norm(m, y, u) * norm(m, y, w);
    rep.self_adjoint_err = std::max(rep.self_adjoint_err, std::abs(lhs - rhs) / sc);
  }

  // Rayleigh lower bound: random probes plus power iteration on (cI - H).
  double lam_max = 0;
  for (const Tangent& u : probes) {
    const double q = inner(m, y, apply(u), u) / inner(m, y, u, u);
    rep.rayleigh_min = std::min(rep.rayleigh_min, q);
    lam_max = std::max(lam_max, q);
  }
  const double c_shift = 2.0 * lam_max + 1.0;
  Tangent v = probes.front();
  for (int it = 0; it < 60; ++it) {
    Tangent w = sub(scale(v, c_shift), apply(v));
    const double n = norm(m, y, w);
    if (n < 1e-300) break;
    v = scale(w, 1.0 / n);
  }
  rep.rayleigh_min = std::min(rep.rayleigh_min, inner(m, y, apply(v), v) / inner(m, y, v, v));

  // FD agreement of H u with the transported difference of grad_y g.
  const double h = 1e-5;
  for (int i = 0; i < d; ++i) {
    const Tangent& u = basis[i];
    const Point yp = exp_map(m, y, scale(u, h));
    const Point ym = exp_map(m, y, scale(u, -h));
    const Tangent gp = transport(m, yp, y, grad(p, Which::gy, x, yp));
    const Tangent gm = transport(m, ym, y, grad(p, Which::gy, x, ym));
    const Tangent fd = scale(sub(gp, gm), 1.0 / (2.0 * h));
    const Tangent hu = apply(u);
    const double err = norm(m, y, sub(fd, hu)) / (1.0 + norm(m, y, hu));
    rep.hess_fd_rel_err = std::max(rep.hess_fd_rel_err, err);
  }
  return rep;
}

FirstOrderProblem first_order_view(const BilevelProblem& p) {
  return {p.upper, p.lower, p.grad_fx, p.grad_fy, p.grad_gx, p.grad_gy};
}

}  // namespace rf2sa
