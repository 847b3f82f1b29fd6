#pragma once

#include "rf2sa/manifold.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace rf2sa {

using json = nlohmann::json;

/// Primitive regularity constants of a bilevel instance. For built-in
/// problems these are analytic where derivable and conservative bounds
/// (flagged `estimated`) otherwise; gradient bounds are over a documented
/// sampling box.
struct SmoothnessConstants {
  double l_f0 = 1, l_f1 = 1, l_f2 = 0;
  double l_g0 = 1, l_g1 = 1, l_g2 = 0;
  double mu_g = 1;
  double sigma_f = 0, sigma_g = 0;
  bool estimated = false;

  void validate() const;
  json to_json() const;
  static SmoothnessConstants from_json(const json& j);
};

using ValueOracle = std::function<double(const Point&, const Point&)>;
using GradOracle = std::function<Tangent(const Point&, const Point&)>;
using HessApply = std::function<Tangent(const Point&, const Point&, const Tangent&)>;

/// Optional second-order operators of g, used only by the measurement oracle.
/// hess_yy_g_apply: T_yN -> T_yN (self-adjoint, positive definite);
/// cross_xy_g_apply: T_yN -> T_xM.
struct SecondOrderOracle {
  HessApply hess_yy_g_apply;
  HessApply cross_xy_g_apply;
};

struct KnownOptimum {
  Point x_star;
  double F_star = 0;
};

struct BilevelProblem {
  std::string name;
  ManifoldDescriptor upper;  // M, for x
  ManifoldDescriptor lower;  // N, for y and z
  ValueOracle f, g;
  GradOracle grad_fx, grad_fy, grad_gx, grad_gy;
  std::optional<SecondOrderOracle> second_order;
  std::optional<KnownOptimum> known_optimum;
  SmoothnessConstants constants;
  Point lower_init;  // default start for inner solves
  json params;       // echoed into run metadata
};

enum class Which { fx, fy, gx, gy };
const char* which_name(Which w);

/// Dispatches to the problem's partial-gradient oracles, checking base points
/// and finiteness of the result.
Tangent grad(const BilevelProblem& p, Which which, const Point& x, const Point& y);

struct NoiseModel {
  double sigma = 0.0;
  std::uint64_t rng_seed = 0;
};

struct RngStreamKey {
  std::uint64_t key = 0;
};

/// Substream key for the sample drawn at outer step k, inner step t, on the
/// named channel of a run seeded with `master`.
RngStreamKey substream(std::uint64_t master, std::uint64_t k, std::uint64_t t,
                       std::uint64_t channel);

/// Zero-mean tangent noise with E||xi||^2 = sigma^2, isotropic over a
/// metric-orthonormal basis at `base`.
Tangent sample_isotropic_noise(const ManifoldDescriptor& m, const Point& base, double sigma,
                               RngStreamKey stream);

Tangent noisy_grad(const BilevelProblem& p, Which which, const Point& x, const Point& y,
                   const NoiseModel& noise, RngStreamKey stream);

struct GradCheckEntry {
  std::string oracle;
  double max_rel_error = 0;
  int worst_direction = -1;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double worst() const;
};

/// Compares each gradient oracle against central differences of the value
/// oracles along geodesics, over the full orthonormal basis. Relative error
/// is max_i |<grad,e_i> - fd_i| / (1 + ||grad||).
GradCheckReport check_gradients(const BilevelProblem& p, const Point& x, const Point& y,
                                double h);

struct SecondOrderReport {
  double self_adjoint_err = 0;
  double rayleigh_min = 0;
  double hess_fd_rel_err = 0;
  bool ok(double mu_g) const;
};

/// Verifies self-adjointness, the Rayleigh lower bound, and finite-difference
/// agreement of hess_yy_g_apply with grad_y g along geodesics.
SecondOrderReport check_second_order(const BilevelProblem& p, const Point& x, const Point& y);

/// The slice of a problem the solver is allowed to see: manifolds and
/// first-order oracles only. Second-order operators are unreachable from here
/// by construction.
struct FirstOrderProblem {
  ManifoldDescriptor upper;
  ManifoldDescriptor lower;
  GradOracle grad_fx, grad_fy, grad_gx, grad_gy;
};

FirstOrderProblem first_order_view(const BilevelProblem& p);

}  // namespace rf2sa
