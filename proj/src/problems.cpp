#include "rf2sa/problems.hpp"

#include <cmath>
#include <memory>
#include <stdexcept>

namespace rf2sa {

namespace {

[[noreturn]] void fail(const std::string& what) {
  throw std::invalid_argument("problem: " + what);
}

Mat gaussian_matrix(int rows, int cols, rng::Stream& s) {
  Mat g(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) g(i, j) = s.next_gaussian();
  return g;
}

Vec gaussian_vector(int n, rng::Stream& s) {
  Vec v(n);
  for (int i = 0; i < n; ++i) v[i] = s.next_gaussian();
  return v;
}

double spectral_norm(const Mat& a) {
  Eigen::JacobiSVD<Mat> svd(a);
  return svd.singularValues()(0);
}

// Unit-spectral-norm symmetric matrix from a gaussian draw.
Mat unit_sym(int n, rng::Stream& s) {
  Mat g = gaussian_matrix(n, n, s);
  Mat sym = 0.5 * (g + g.transpose());
  return sym / spectral_norm(sym);
}

double sym_block_lmax(const Mat& h) {
  Eigen::SelfAdjointEigenSolver<Mat> es(h);
  return es.eigenvalues().maxCoeff();
}

// ---------------------------------------------------------------------------
// quadratic-euclidean

struct QuadData {
  Mat A, B;
  Vec xbar;
};

BilevelProblem make_quadratic(const json& params) {
  const int d = params.value("d", 10);
  const std::uint64_t seed = params.value("seed", std::uint64_t{1});
  const double a_scale = params.value("a_scale", 0.6);
  const double b_scale = params.value("b_scale", 0.25);
  const double xbar_scale = params.value("xbar_scale", 1.0);
  const double box_radius = params.value("box_radius", 10.0);
  if (d < 1) fail("quadratic-euclidean requires d >= 1");

  rng::Stream s(rng::derive_key(seed, 0x9ade, 0, 0));
  auto data = std::make_shared<QuadData>();
  data->A = a_scale * unit_sym(d, s);  // symmetric keeps the instance well understood
  data->B = params.value("b_equals_a", false) ? data->A : Mat(b_scale * unit_sym(d, s));
  Vec u = gaussian_vector(d, s);
  data->xbar = xbar_scale * u / u.norm();

  BilevelProblem p;
  p.name = "quadratic-euclidean";
  p.upper = euclidean_manifold(d);
  p.lower = euclidean_manifold(d);

  p.f = [data](const Point& x, const Point& y) {
    const Vec rx = x.coords - data->xbar;
    const Vec ry = y.coords - data->A * x.coords;
    return 0.5 * rx.squaredNorm() + 0.5 * ry.squaredNorm();
  };
  p.g = [data](const Point& x, const Point& y) {
    const Vec r = y.coords - data->B * x.coords;
    return 0.5 * r.squaredNorm();
  };
  p.grad_fx = [data](const Point& x, const Point& y) {
    Vec v = (x.coords - data->xbar) - data->A.transpose() * (y.coords - data->A * x.coords);
    return Tangent{x, std::move(v)};
  };
  p.grad_fy = [data](const Point& x, const Point& y) {
    Vec v = y.coords - data->A * x.coords;
    return Tangent{y, std::move(v)};
  };
  p.grad_gx = [data](const Point& x, const Point& y) {
    Vec v = -data->B.transpose() * (y.coords - data->B * x.coords);
    return Tangent{x, std::move(v)};
  };
  p.grad_gy = [data](const Point& x, const Point& y) {
    Vec v = y.coords - data->B * x.coords;
    return Tangent{y, std::move(v)};
  };
  p.second_order = SecondOrderOracle{
      [](const Point&, const Point&, const Tangent& u) { return u; },  // Hess_yy g = I
      [data](const Point& x, const Point&, const Tangent& u) {
        Vec v = -data->B.transpose() * u.vec;
        return Tangent{x, std::move(v)};
      }};

  // exact constants; gradient bounds over the box |x|,|y| <= box_radius
  const double sa = spectral_norm(data->A);
  const double sb = spectral_norm(data->B);
  Mat hess_f(2 * d, 2 * d);
  hess_f << Mat::Identity(d, d) + data->A.transpose() * data->A, -data->A.transpose(),
      -data->A, Mat::Identity(d, d);
  SmoothnessConstants sc;
  sc.mu_g = 1.0;
  sc.l_g1 = 1.0 + sb * sb;
  sc.l_f1 = sym_block_lmax(hess_f);
  sc.l_f2 = 0.0;
  sc.l_g2 = 0.0;
  const double r = box_radius;
  sc.l_f0 = std::max(r + data->xbar.norm() + sa * r * (1.0 + sa), r * (1.0 + sa));
  sc.l_g0 = sb * r * (1.0 + sb);
  sc.estimated = false;
  p.constants = sc;

  const Mat cdiff = data->A - data->B;
  const Mat fhess = Mat::Identity(d, d) + cdiff.transpose() * cdiff;
  const Vec xstar = fhess.ldlt().solve(data->xbar);
  const Point xs = make_point(p.upper, xstar);
  const Point ys = make_point(p.lower, data->B * xstar);
  p.known_optimum = KnownOptimum{xs, p.f(xs, ys)};

  p.lower_init = make_point(p.lower, Vec::Zero(d));
  p.params = params;
  p.params["d"] = d;
  p.params["seed"] = seed;
  p.params["box_radius"] = box_radius;
  p.params["sigma_A"] = sa;
  p.params["sigma_B"] = sb;
  return p;
}

// ---------------------------------------------------------------------------
// sphere-upper

struct SphereData {
  Mat P, H, C, Hinv;
  Vec t;
};

BilevelProblem make_sphere_upper(const json& params) {
  const int d = params.value("d", 6);
  const int m = params.value("m", 5);
  const std::uint64_t seed = params.value("seed", std::uint64_t{2});
  const double p_scale = params.value("p_scale", 0.5);
  const double c_scale = params.value("c_scale", 0.5);
  const double h_cond = params.value("h_cond", 3.0);
  const double t_scale = params.value("t_scale", 0.5);
  const double box_radius_y = params.value("box_radius_y", 2.0);
  if (d < 2 || m < 1) fail("sphere-upper requires d >= 2 and m >= 1");

  rng::Stream s(rng::derive_key(seed, 0x59e8, 0, 0));
  auto data = std::make_shared<SphereData>();
  data->P = p_scale * unit_sym(d, s);

  Vec h_eigs(m);
  if (params.contains("h_eigs")) {
    const auto& je = params.at("h_eigs");
    if (static_cast<int>(je.size()) != m) fail("sphere-upper: h_eigs must have m entries");
    for (int i = 0; i < m; ++i) h_eigs[i] = je.at(i).get<double>();
    if (h_eigs.minCoeff() <= 0) fail("sphere-upper: H is not positive definite");
  } else {
    for (int i = 0; i < m; ++i)
      h_eigs[i] = 1.0 + (h_cond - 1.0) * (m == 1 ? 0.0 : double(i) / double(m - 1));
  }
  Eigen::HouseholderQR<Mat> qr(gaussian_matrix(m, m, s));
  Mat q = qr.householderQ();
  const Mat h0 = q * h_eigs.asDiagonal() * q.transpose();
  data->H = 0.5 * (h0 + h0.transpose());
  data->Hinv = data->H.ldlt().solve(Mat::Identity(m, m));

  Mat gc = gaussian_matrix(m, d, s);
  data->C = c_scale * gc / spectral_norm(gc);
  Vec tv = gaussian_vector(m, s);
  data->t = t_scale * tv / tv.norm();

  BilevelProblem p;
  p.name = "sphere-upper";
  p.upper = sphere_manifold(d);
  p.lower = euclidean_manifold(m);

  p.f = [data](const Point& x, const Point& y) {
    const Vec r = y.coords - data->t;
    return -x.coords.dot(data->P * x.coords) + 0.5 * r.squaredNorm();
  };
  p.g = [data](const Point& x, const Point& y) {
    return 0.5 * y.coords.dot(data->H * y.coords) - y.coords.dot(data->C * x.coords);
  };
  const ManifoldDescriptor sphere = p.upper;
  p.grad_fx = [data, sphere](const Point& x, const Point&) {
    return project_tangent(sphere, x, Vec(-2.0 * (data->P * x.coords)));
  };
  p.grad_fy = [data](const Point&, const Point& y) {
    Vec v = y.coords - data->t;
    return Tangent{y, std::move(v)};
  };
  p.grad_gx = [data, sphere](const Point& x, const Point& y) {
    return project_tangent(sphere, x, Vec(-(data->C.transpose() * y.coords)));
  };
  p.grad_gy = [data](const Point& x, const Point& y) {
    Vec v = data->H * y.coords - data->C * x.coords;
    return Tangent{y, std::move(v)};
  };
  p.second_order = SecondOrderOracle{
      [data](const Point&, const Point& y, const Tangent& u) {
        Vec v = data->H * u.vec;
        return Tangent{y, std::move(v)};
      },
      [data, sphere](const Point& x, const Point&, const Tangent& u) {
        return project_tangent(sphere, x, Vec(-(data->C.transpose() * u.vec)));
      }};

  // bound-type constants over the box |y| <= box_radius_y (flagged estimated:
  // the Riemannian block bounds are conservative, not tight)
  const double h_max = h_eigs.maxCoeff();
  SmoothnessConstants sc;
  sc.mu_g = h_eigs.minCoeff();
  sc.l_g1 = h_max + 2.0 * c_scale * std::max(1.0, box_radius_y);
  sc.l_f1 = 4.0 * p_scale + 1.0;
  sc.l_f2 = 0.0;
  sc.l_g2 = 0.0;
  sc.l_f0 = std::max(2.0 * p_scale, box_radius_y + data->t.norm());
  sc.l_g0 = c_scale * box_radius_y;
  sc.estimated = true;
  p.constants = sc;

  p.lower_init = make_point(p.lower, Vec::Zero(m));
  p.params = params;
  p.params["d"] = d;
  p.params["m"] = m;
  p.params["seed"] = seed;
  p.params["box_radius_y"] = box_radius_y;
  return p;
}

// ---------------------------------------------------------------------------
// spd-barycenter

struct SpdData {
  std::vector<Point> anchors;  // A_i
  Point target;                // X_target
  double rho = 0.1;
};

BilevelProblem make_spd_barycenter(const json& params) {
  const int n = params.value("n", 3);
  const int components = params.value("components", 4);
  const std::uint64_t seed = params.value("seed", std::uint64_t{3});
  const double spread = params.value("spread", 0.3);
  const double rho = params.value("rho", 0.1);
  const double box_radius = params.value("box_radius", 1.5);
  if (n < 1 || components < 1) fail("spd-barycenter requires n >= 1 and components >= 1");

  const ManifoldDescriptor upper = euclidean_manifold(components);
  const ManifoldDescriptor lower = spd_manifold(n);

  rng::Stream s(rng::derive_key(seed, 0x59d0, 0, 0));
  auto data = std::make_shared<SpdData>();
  data->rho = rho;
  const Point eye = make_point(lower, spd_vec(Mat::Identity(n, n)));
  if (params.contains("matrices")) {
    for (const auto& jm : params.at("matrices")) {
      Vec c(n * n);
      if (static_cast<int>(jm.size()) != n * n)
        fail("spd-barycenter: matrices entries must be n*n row-major");
      for (int i = 0; i < n * n; ++i) c[i] = jm.at(i).get<double>();
      data->anchors.push_back(make_point(lower, c));  // rejects non-SPD input
    }
    if (static_cast<int>(data->anchors.size()) != components)
      fail("spd-barycenter: need exactly `components` matrices");
  } else {
    for (int i = 0; i < components; ++i) {
      Tangent dir = make_tangent(lower, eye, spd_vec(spread * unit_sym(n, s)));
      data->anchors.push_back(exp_map(lower, eye, dir));
    }
  }
  Tangent tdir = make_tangent(lower, eye, spd_vec(spread * unit_sym(n, s)));
  data->target = exp_map(lower, eye, tdir);

  auto weights = [](const Point& x) {
    const Vec& v = x.coords;
    Vec w = (v.array() - v.maxCoeff()).exp();
    return Vec(w / w.sum());
  };

  BilevelProblem p;
  p.name = "spd-barycenter";
  p.upper = upper;
  p.lower = lower;

  p.f = [data, lower](const Point& x, const Point& y) {
    const double dd = dist(lower, y, data->target);
    return 0.5 * dd * dd + data->rho * x.coords.squaredNorm();
  };
  p.g = [data, lower, weights](const Point& x, const Point& y) {
    const Vec w = weights(x);
    double acc = 0;
    for (size_t i = 0; i < data->anchors.size(); ++i) {
      const double dd = dist(lower, y, data->anchors[i]);
      acc += 0.5 * w[static_cast<int>(i)] * dd * dd;
    }
    return acc;
  };
  p.grad_fx = [data](const Point& x, const Point&) {
    Vec v = 2.0 * data->rho * x.coords;
    return Tangent{x, std::move(v)};
  };
  p.grad_fy = [data, lower](const Point&, const Point& y) {
    return scale(log_map(lower, y, data->target), -1.0);
  };
  p.grad_gx = [data, lower, weights](const Point& x, const Point& y) {
    const Vec w = weights(x);
    const int nc = static_cast<int>(data->anchors.size());
    Vec sv(nc);
    for (int i = 0; i < nc; ++i) {
      const double dd = dist(lower, y, data->anchors[static_cast<size_t>(i)]);
      sv[i] = 0.5 * dd * dd;
    }
    const double mean = w.dot(sv);
    Vec v(nc);
    for (int i = 0; i < nc; ++i) v[i] = w[i] * (sv[i] - mean);
    return Tangent{x, std::move(v)};
  };
  p.grad_gy = [data, lower, weights](const Point& x, const Point& y) {
    const Vec w = weights(x);
    Tangent acc = zero_tangent(lower, y);
    for (size_t i = 0; i < data->anchors.size(); ++i)
      acc.vec -= w[static_cast<int>(i)] * log_map(lower, y, data->anchors[i]).vec;
    return acc;
  };

  // conservative Hadamard bounds over dist(y, I) <= box_radius (estimated)
  double anchor_reach = 0;
  for (const Point& a : data->anchors)
    anchor_reach = std::max(anchor_reach, dist(lower, eye, a));
  anchor_reach = std::max(anchor_reach, dist(lower, eye, data->target));
  const double diam = box_radius + anchor_reach;
  const double cf = curvature_factor(lower.curvature_bound, diam);
  SmoothnessConstants sc;
  sc.mu_g = 1.0;
  sc.l_g1 = cf + 0.5 * diam + 0.5 * diam * diam;
  sc.l_f1 = cf + 2.0 * rho;
  sc.l_f2 = 2.0;
  sc.l_g2 = 2.0;
  sc.l_f0 = std::max(diam, 2.0 * rho * box_radius);
  sc.l_g0 = 0.5 * diam * diam;
  sc.estimated = true;
  p.constants = sc;

  p.lower_init = eye;
  p.params = params;
  p.params["n"] = n;
  p.params["components"] = components;
  p.params["seed"] = seed;
  p.params["box_radius"] = box_radius;
  return p;
}

}  // namespace

BilevelProblem builtin_problem(const std::string& name, const json& params) {
  if (name == "quadratic-euclidean") return make_quadratic(params);
  if (name == "sphere-upper") return make_sphere_upper(params);
  if (name == "spd-barycenter") return make_spd_barycenter(params);
  fail("unknown built-in problem '" + name + "'");
}

InitialPoints default_init(const BilevelProblem& p, const json& init) {
  InitialPoints ip{Point{}, Point{}, Point{}};
  if (p.name == "quadratic-euclidean") {
    // start on a seeded direction away from the known optimum
    const double x0_scale = init.value("x0_scale", 0.5);
    rng::Stream s(rng::derive_key(p.params.value("seed", std::uint64_t{1}), 0x113, 7, 0));
    Vec u = gaussian_vector(p.upper.ambient, s);
    u /= u.norm();
    Vec x0 = p.known_optimum->x_star.coords + x0_scale * u;
    ip.x0 = make_point(p.upper, x0);
    ip.y0 = make_point(p.lower, Vec::Zero(p.lower.ambient));
    ip.z0 = ip.y0;
  } else if (p.name == "sphere-upper") {
    Vec e1 = Vec::Zero(p.upper.ambient);
    e1[0] = 1.0;
    ip.x0 = make_point(p.upper, e1);
    ip.y0 = make_point(p.lower, Vec::Zero(p.lower.ambient));
    ip.z0 = ip.y0;
  } else if (p.name == "spd-barycenter") {
    ip.x0 = make_point(p.upper, Vec::Zero(p.upper.ambient));  // uniform weights
    ip.y0 = p.lower_init;
    ip.z0 = p.lower_init;
  } else {
    fail("no default initialization for problem '" + p.name + "'");
  }
  if (init.contains("x0")) {
    Vec v(p.upper.ambient);
    for (int i = 0; i < v.size(); ++i) v[i] = init.at("x0").at(i).get<double>();
    ip.x0 = make_point(p.upper, v);
  }
  return ip;
}

Point random_point(const ManifoldDescriptor& m, rng::Stream& stream, double radius) {
  switch (m.kind) {
    case ManifoldKind::Euclidean: {
      Vec v = gaussian_vector(m.ambient, stream);
      return make_point(m, Vec(v * (radius / std::sqrt(double(m.ambient)))));
    }
    case ManifoldKind::Sphere: {
      Vec v = gaussian_vector(m.ambient, stream);
      return make_point(m, v);  // normalization happens in make_point
    }
    case ManifoldKind::Spd: {
      const int n = m.order;
      Mat g = gaussian_matrix(n, n, stream);
      Mat sym = 0.5 * (g + g.transpose());
      sym *= radius * stream.next_uniform() / sym.norm();
      const Point eye = make_point(m, spd_vec(Mat::Identity(n, n)));
      return exp_map(m, eye, make_tangent(m, eye, spd_vec(sym)));
    }
  }
  throw std::invalid_argument("problem: unknown manifold kind");
}

Tangent random_unit_tangent(const ManifoldDescriptor& m, const Point& x, rng::Stream& stream) {
  const auto basis = orthonormal_basis(m, x);
  Tangent t = zero_tangent(m, x);
  for (const Tangent& e : basis) t.vec += stream.next_gaussian() * e.vec;
  const double n = norm(m, x, t);
  if (n < 1e-14) return basis.front();
  return scale(t, 1.0 / n);
}

}  // namespace rf2sa
