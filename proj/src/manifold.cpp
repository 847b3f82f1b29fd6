#include "rf2sa/manifold.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace rf2sa {

namespace {

constexpr double kSymTol = 1e-12;
constexpr double kEigTolFactor = 1e-12;  // positivity threshold: 1e-12 * trace
constexpr double kAntipodalTol = 1e-8;   // reject sphere log/transport at dot <= -1 + tol

[[noreturn]] void fail(const std::string& what) { throw std::runtime_error("manifold: " + what); }

void require_finite(const Vec& v, const char* what) {
  if (!v.allFinite()) fail(std::string("non-finite ") + what);
}

void require_on(const ManifoldDescriptor& m, const Point& p, const char* what) {
  if (p.manifold != m) fail(std::string(what) + " belongs to a different manifold");
  if (p.coords.size() != m.ambient) fail(std::string(what) + " has wrong coordinate size");
}

void require_same_base(const Tangent& a, const Tangent& b) {
  if (a.base.manifold != b.base.manifold) fail("tangent base manifolds differ");
  const double s = 1.0 + a.base.coords.cwiseAbs().maxCoeff() + b.base.coords.cwiseAbs().maxCoeff();
  if ((a.base.coords - b.base.coords).cwiseAbs().maxCoeff() > 1e-9 * s)
    fail("tangent base points differ");
}

void require_base(const ManifoldDescriptor& m, const Point& x, const Tangent& v) {
  require_on(m, v.base, "tangent base");
  const double s = 1.0 + x.coords.cwiseAbs().maxCoeff();
  if ((x.coords - v.base.coords).cwiseAbs().maxCoeff() > 1e-9 * s)
    fail("tangent is not based at the given point");
}

struct SymEig {
  Mat u;
  Vec w;
};

SymEig sym_eig(const Mat& a) {
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (a + a.transpose()));
  if (es.info() != Eigen::Success) fail("eigendecomposition failed");
  return {es.eigenvectors(), es.eigenvalues()};
}

Mat apply_spectral(const SymEig& e, double (*fn)(double)) {
  Vec w(e.w.size());
  for (int i = 0; i < w.size(); ++i) w[i] = fn(e.w[i]);
  return e.u * w.asDiagonal() * e.u.transpose();
}

double sqrt_fn(double x) { return std::sqrt(x); }
double inv_sqrt_fn(double x) { return 1.0 / std::sqrt(x); }
double exp_fn(double x) { return std::exp(x); }
double log_fn(double x) { return std::log(x); }

void check_spd(const Mat& a, const char* what) {
  const double asym = (a - a.transpose()).cwiseAbs().maxCoeff();
  const double scl = 1.0 + a.cwiseAbs().maxCoeff();
  if (asym > kSymTol * scl) fail(std::string(what) + " is not symmetric");
  SymEig e = sym_eig(a);
  if (e.w.minCoeff() <= kEigTolFactor * std::abs(a.trace()))
    fail(std::string(what) + " is not positive definite");
}

// sin(t)/t with series fallback near zero
double sinc(double t) {
  if (std::abs(t) < 1e-8) return 1.0 - t * t / 6.0;
  return std::sin(t) / t;
}

}  // namespace

ManifoldDescriptor euclidean_manifold(int n) {
  if (n < 1) fail("euclidean dimension must be >= 1");
  return {ManifoldKind::Euclidean, n, n, 0, 0.0};
}

ManifoldDescriptor sphere_manifold(int ambient_n) {
  if (ambient_n < 2) fail("sphere ambient dimension must be >= 2");
  return {ManifoldKind::Sphere, ambient_n - 1, ambient_n, 0, 1.0};
}

ManifoldDescriptor spd_manifold(int n, double curvature_bound) {
  if (n < 1) fail("spd order must be >= 1");
  if (curvature_bound > 0.0) fail("spd curvature bound must be nonpositive");
  return {ManifoldKind::Spd, n * (n + 1) / 2, n * n, n, curvature_bound};
}

const char* manifold_kind_name(ManifoldKind k) {
  switch (k) {
    case ManifoldKind::Euclidean: return "euclidean";
    case ManifoldKind::Sphere: return "sphere";
    case ManifoldKind::Spd: return "spd";
  }
  return "?";
}

Mat spd_mat(const ManifoldDescriptor& m, const Vec& coords) {
  using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  return Eigen::Map<const RowMat>(coords.data(), m.order, m.order);
}

Vec spd_vec(const Mat& a) {
  using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  RowMat r = a;
  return Eigen::Map<const Vec>(r.data(), r.size());
}

Point make_point(const ManifoldDescriptor& m, Vec coords) {
  if (coords.size() != m.ambient) fail("point has wrong coordinate size");
  require_finite(coords, "point coordinates");
  switch (m.kind) {
    case ManifoldKind::Euclidean:
      break;
    case ManifoldKind::Sphere: {
      const double n = coords.norm();
      if (n < 1e-14) fail("cannot normalize zero vector onto the sphere");
      coords /= n;
      break;
    }
    case ManifoldKind::Spd: {
      Mat a = spd_mat(m, coords);
      check_spd(a, "spd point");
      coords = spd_vec(0.5 * (a + a.transpose()));
      break;
    }
  }
  return {m, std::move(coords)};
}

Tangent make_tangent(const ManifoldDescriptor& m, const Point& x, Vec vec) {
  require_on(m, x, "base point");
  if (vec.size() != m.ambient) fail("tangent has wrong coordinate size");
  require_finite(vec, "tangent coordinates");
  switch (m.kind) {
    case ManifoldKind::Euclidean:
      break;
    case ManifoldKind::Sphere: {
      const double radial = vec.dot(x.coords);
      if (std::abs(radial) > 1e-10 * (1.0 + vec.norm()))
        fail("sphere tangent is not orthogonal to its base point");
      vec -= radial * x.coords;
      break;
    }
    case ManifoldKind::Spd: {
      Mat a = spd_mat(m, vec);
      const double scl = 1.0 + a.cwiseAbs().maxCoeff();
      if ((a - a.transpose()).cwiseAbs().maxCoeff() > kSymTol * scl)
        fail("spd tangent is not symmetric");
      vec = spd_vec(0.5 * (a + a.transpose()));
      break;
    }
  }
  return {x, std::move(vec)};
}

Tangent zero_tangent(const ManifoldDescriptor& m, const Point& x) {
  require_on(m, x, "base point");
  return {x, Vec::Zero(m.ambient)};
}

bool satisfies_invariants(const ManifoldDescriptor& m, const Vec& coords, double tol) {
  if (coords.size() != m.ambient || !coords.allFinite()) return false;
  switch (m.kind) {
    case ManifoldKind::Euclidean:
      return true;
    case ManifoldKind::Sphere:
      return std::abs(coords.norm() - 1.0) <= tol;
    case ManifoldKind::Spd: {
      Mat a = spd_mat(m, coords);
      const double scl = 1.0 + a.cwiseAbs().maxCoeff();
      if ((a - a.transpose()).cwiseAbs().maxCoeff() > tol * scl) return false;
      return sym_eig(a).w.minCoeff() > 0.0;
    }
  }
  return false;
}

Point exp_map(const ManifoldDescriptor& m, const Point& x, const Tangent& v) {
  require_on(m, x, "point");
  require_base(m, x, v);
  require_finite(v.vec, "tangent");
  switch (m.kind) {
    case ManifoldKind::Euclidean:
      return {m, x.coords + v.vec};
    case ManifoldKind::Sphere: {
      const double t = v.vec.norm();
      Vec c = std::cos(t) * x.coords + sinc(t) * v.vec;
      c /= c.norm();  // keep drift below 1e-12 over long runs
      return {m, std::move(c)};
    }
    case ManifoldKind::Spd: {
      Mat xm = spd_mat(m, x.coords);
      SymEig ex = sym_eig(xm);
      Mat xs = apply_spectral(ex, sqrt_fn);
      Mat xis = apply_spectral(ex, inv_sqrt_fn);
      Mat s = xis * spd_mat(m, v.vec) * xis;
      const Mat r0 = xs * apply_spectral(sym_eig(s), exp_fn) * xs;
      Mat r = 0.5 * (r0 + r0.transpose());
      if (!r.allFinite() || sym_eig(r).w.minCoeff() <= kEigTolFactor * std::abs(r.trace()))
        fail("spd exponential left the cone (step too large or ill-conditioned)");
      return {m, spd_vec(r)};
    }
  }
  fail("unknown manifold kind");
}

Tangent log_map(const ManifoldDescriptor& m, const Point& x, const Point& y) {
  require_on(m, x, "point");
  require_on(m, y, "point");
  switch (m.kind) {
    case ManifoldKind::Euclidean:
      return {x, y.coords - x.coords};
    case ManifoldKind::Sphere: {
      double c = x.coords.dot(y.coords);
      if (c <= -1.0 + kAntipodalTol) fail("sphere log undefined for (near-)antipodal points");
      c = std::min(c, 1.0);
      const double theta = std::acos(c);
      Vec r = y.coords - c * x.coords;
      const double rn = r.norm();
      if (rn < 1e-14) return {x, Vec::Zero(m.ambient)};
      return {x, (theta / rn) * r};
    }
    case ManifoldKind::Spd: {
      SymEig ex = sym_eig(spd_mat(m, x.coords));
      Mat xs = apply_spectral(ex, sqrt_fn);
      Mat xis = apply_spectral(ex, inv_sqrt_fn);
      Mat s = xis * spd_mat(m, y.coords) * xis;
      SymEig es = sym_eig(s);
      if (es.w.minCoeff() <= 0.0) fail("spd log: target is not in the cone");
      Mat r = xs * apply_spectral(es, log_fn) * xs;
      return {x, spd_vec(0.5 * (r + r.transpose()))};
    }
  }
  fail("unknown manifold kind");
}

Tangent transport(const ManifoldDescriptor& m, const Point& x, const Point& y, const Tangent& v) {
  require_on(m, x, "point");
  require_on(m, y, "point");
  require_base(m, x, v);
  switch (m.kind) {
    case ManifoldKind::Euclidean:
      return {y, v.vec};
    case ManifoldKind::Sphere: {
      const double c = x.coords.dot(y.coords);
      if (c <= -1.0 + kAntipodalTol) fail("sphere transport undefined for (near-)antipodal points");
      Tangent u = log_map(m, x, y);
      const double theta = u.vec.norm();
      if (theta < 1e-14) return {y, v.vec};
      Vec w = u.vec / theta;
      const double a = w.dot(v.vec);
      Vec r = v.vec + a * ((std::cos(theta) - 1.0) * w - std::sin(theta) * x.coords);
      r -= r.dot(y.coords) * y.coords;  // clean numerical drift out of T_y
      return {y, std::move(r)};
    }
    case ManifoldKind::Spd: {
      // E = x^{1/2} (x^{-1/2} y x^{-1/2})^{1/2} x^{-1/2} = (y x^{-1})^{1/2}
      SymEig ex = sym_eig(spd_mat(m, x.coords));
      Mat xs = apply_spectral(ex, sqrt_fn);
      Mat xis = apply_spectral(ex, inv_sqrt_fn);
      Mat s = xis * spd_mat(m, y.coords) * xis;
      Mat e = xs * apply_spectral(sym_eig(s), sqrt_fn) * xis;
      Mat r = e * spd_mat(m, v.vec) * e.transpose();
      return {y, spd_vec(0.5 * (r + r.transpose()))};
    }
  }
  fail("unknown manifold kind");
}

double dist(const ManifoldDescriptor& m, const Point& x, const Point& y) {
  require_on(m, x, "point");
  require_on(m, y, "point");
  require_finite(x.coords, "point");
  require_finite(y.coords, "point");
  switch (m.kind) {
    case ManifoldKind::Euclidean:
      return (x.coords - y.coords).norm();
    case ManifoldKind::Sphere: {
      const double c = std::max(-1.0, std::min(1.0, x.coords.dot(y.coords)));
      return std::acos(c);
    }
    case ManifoldKind::Spd: {
      SymEig ex = sym_eig(spd_mat(m, x.coords));
      Mat xis = apply_spectral(ex, inv_sqrt_fn);
      SymEig es = sym_eig(xis * spd_mat(m, y.coords) * xis);
      double acc = 0.0;
      for (int i = 0; i < es.w.size(); ++i) {
        const double l = std::log(es.w[i]);
        acc += l * l;
      }
      return std::sqrt(acc);
    }
  }
  fail("unknown manifold kind");
}

double inner(const ManifoldDescriptor& m, const Point& x, const Tangent& u, const Tangent& v) {
  require_base(m, x, u);
  require_base(m, x, v);
  require_same_base(u, v);
  switch (m.kind) {
    case ManifoldKind::Euclidean:
    case ManifoldKind::Sphere:
      return u.vec.dot(v.vec);
    case ManifoldKind::Spd: {
      SymEig ex = sym_eig(spd_mat(m, x.coords));
      Mat xi = apply_spectral(ex, [](double w) { return 1.0 / w; });
      return ((xi * spd_mat(m, u.vec)) * (xi * spd_mat(m, v.vec))).trace();
    }
  }
  fail("unknown manifold kind");
}

double norm(const ManifoldDescriptor& m, const Point& x, const Tangent& v) {
  return std::sqrt(std::max(0.0, inner(m, x, v, v)));
}

Tangent project_tangent(const ManifoldDescriptor& m, const Point& x, const Vec& w) {
  require_on(m, x, "point");
  if (w.size() != m.ambient) fail("raw vector has wrong coordinate size");
  require_finite(w, "raw vector");
  switch (m.kind) {
    case ManifoldKind::Euclidean:
      return {x, w};
    case ManifoldKind::Sphere:
      return {x, w - w.dot(x.coords) * x.coords};
    case ManifoldKind::Spd: {
      const Mat s0 = spd_mat(m, w);
      const Mat s = 0.5 * (s0 + s0.transpose());
      Mat xm = spd_mat(m, x.coords);
      Mat r = xm * s * xm;
      return {x, spd_vec(0.5 * (r + r.transpose()))};
    }
  }
  fail("unknown manifold kind");
}

std::vector<Tangent> orthonormal_basis(const ManifoldDescriptor& m, const Point& x) {
  require_on(m, x, "point");
  std::vector<Tangent> basis;
  basis.reserve(m.dim);
  switch (m.kind) {
    case ManifoldKind::Euclidean: {
      for (int i = 0; i < m.dim; ++i) {
        Vec e = Vec::Zero(m.ambient);
        e[i] = 1.0;
        basis.push_back({x, std::move(e)});
      }
      break;
    }
    case ManifoldKind::Sphere: {
      // Householder reflector taking e_s -> -sign(x_s) x; its remaining
      // columns are an orthonormal basis of x's orthogonal complement.
      const int n = m.ambient;
      int s = 0;
      x.coords.cwiseAbs().maxCoeff(&s);
      Vec u = x.coords;
      u[s] += (x.coords[s] >= 0.0 ? 1.0 : -1.0);
      const double uu = u.squaredNorm();
      for (int j = 0; j < n; ++j) {
        if (j == s) continue;
        Vec e = Vec::Zero(n);
        e[j] = 1.0;
        e -= (2.0 * u[j] / uu) * u;
        e -= e.dot(x.coords) * x.coords;
        e /= e.norm();
        basis.push_back({x, std::move(e)});
      }
      break;
    }
    case ManifoldKind::Spd: {
      const int n = m.order;
      SymEig ex = sym_eig(spd_mat(m, x.coords));
      Mat xs = apply_spectral(ex, sqrt_fn);
      const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
      for (int i = 0; i < n; ++i) {
        for (int j = i; j < n; ++j) {
          Mat b = Mat::Zero(n, n);
          if (i == j) {
            b(i, i) = 1.0;
          } else {
            b(i, j) = inv_sqrt2;
            b(j, i) = inv_sqrt2;
          }
          Mat t = xs * b * xs;
          basis.push_back({x, spd_vec(0.5 * (t + t.transpose()))});
        }
      }
      break;
    }
  }
  return basis;
}

double curvature_factor(double kappa, double d) {
  if (d < 0.0) fail("curvature factor requires d >= 0");
  const double t = std::sqrt(std::abs(kappa)) * d;
  if (t < 1e-8) return 1.0 + t * t / 3.0;
  return t / std::tanh(t);
}

Tangent add(const Tangent& a, const Tangent& b) {
  require_same_base(a, b);
  return {a.base, a.vec + b.vec};
}

Tangent sub(const Tangent& a, const Tangent& b) {
  require_same_base(a, b);
  return {a.base, a.vec - b.vec};
}

Tangent scale(const Tangent& a, double s) { return {a.base, s * a.vec}; }

}  // namespace rf2sa
