#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace rf2sa {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

enum class ManifoldKind { Euclidean, Sphere, Spd };

/// Describes one of the three supported manifolds. `dim` is the intrinsic
/// dimension; `ambient` the length of a point's coordinate vector (SPD
/// matrices are stored densely, row-major).
struct ManifoldDescriptor {
  ManifoldKind kind = ManifoldKind::Euclidean;
  int dim = 1;
  int ambient = 1;
  int order = 0;                 // matrix side n for SPD, else 0
  double curvature_bound = 0.0;  // kappa: 0 flat, +1 sphere, <=0 user bound for SPD

  bool operator==(const ManifoldDescriptor& o) const {
    return kind == o.kind && dim == o.dim && ambient == o.ambient && order == o.order;
  }
  bool operator!=(const ManifoldDescriptor& o) const { return !(*this == o); }
};

ManifoldDescriptor euclidean_manifold(int n);
ManifoldDescriptor sphere_manifold(int ambient_n);  // S^{n-1} embedded in R^n
ManifoldDescriptor spd_manifold(int n, double curvature_bound = -0.5);

const char* manifold_kind_name(ManifoldKind k);

struct Point {
  ManifoldDescriptor manifold;
  Vec coords;
};

struct Tangent {
  Point base;
  Vec vec;
};

/// Validates raw coordinates into a Point. Sphere points are renormalized to
/// unit length; SPD coordinates must be symmetric within 1e-12 of their scale
/// and have minimum eigenvalue above 1e-12 * trace.
Point make_point(const ManifoldDescriptor& m, Vec coords);

/// Validates a raw vector as a tangent at x. Sphere: radial drift up to 1e-10
/// is projected out, larger is an error. SPD: must be symmetric.
Tangent make_tangent(const ManifoldDescriptor& m, const Point& x, Vec vec);

Tangent zero_tangent(const ManifoldDescriptor& m, const Point& x);

/// True when coords satisfy the manifold invariant within `tol` (no repair).
bool satisfies_invariants(const ManifoldDescriptor& m, const Vec& coords, double tol = 1e-10);

Point exp_map(const ManifoldDescriptor& m, const Point& x, const Tangent& v);
Tangent log_map(const ManifoldDescriptor& m, const Point& x, const Point& y);

/// Parallel transport of v from T_x to T_y along the minimizing geodesic.
Tangent transport(const ManifoldDescriptor& m, const Point& x, const Point& y, const Tangent& v);

double dist(const ManifoldDescriptor& m, const Point& x, const Point& y);
double inner(const ManifoldDescriptor& m, const Point& x, const Tangent& u, const Tangent& v);
double norm(const ManifoldDescriptor& m, const Point& x, const Tangent& v);

/// Converts an ambient-coordinate gradient into a Riemannian gradient:
/// sphere removes the radial component, SPD symmetrizes and applies the
/// affine-invariant metric conversion x * sym(w) * x.
Tangent project_tangent(const ManifoldDescriptor& m, const Point& x, const Vec& w);

/// Metric-orthonormal basis of T_x, length = intrinsic dim. Deterministic in x.
std::vector<Tangent> orthonormal_basis(const ManifoldDescriptor& m, const Point& x);

/// sqrt(|kappa|) d / tanh(sqrt(|kappa|) d), the curved cosine-law distortion.
/// Equals 1 when kappa = 0 or d = 0; diagnostic only.
double curvature_factor(double kappa, double d);

// Tangent arithmetic at a shared base point (base compatibility is checked).
Tangent add(const Tangent& a, const Tangent& b);
Tangent sub(const Tangent& a, const Tangent& b);
Tangent scale(const Tangent& a, double s);

// SPD helpers shared with the built-in problems (x interpreted as row-major n*n).
Mat spd_mat(const ManifoldDescriptor& m, const Vec& coords);
Vec spd_vec(const Mat& a);

}  // namespace rf2sa
