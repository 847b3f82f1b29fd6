#include "rf2sa/solver.hpp"

#include <chrono>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace rf2sa {

namespace {

// Stable channel ids for the six gradient samples of one outer iteration.
enum Channel : std::uint64_t { kGz = 0, kFy = 1, kGy = 2, kFx = 3, kGxy = 4, kGxz = 5 };

[[noreturn]] void fail(const std::string& what) { throw std::runtime_error("solver: " + what); }

Tangent sampled(const GradOracle& oracle, const ManifoldDescriptor& m, const Point& at,
                const Point& x, const Point& y, double sigma, std::uint64_t seed, long k, long t,
                Channel ch) {
  Tangent g = oracle(x, y);
  if (!g.vec.allFinite()) fail("gradient oracle returned a non-finite value");
  if (sigma == 0.0) return g;
  const RngStreamKey key = substream(seed, static_cast<std::uint64_t>(k),
                                     static_cast<std::uint64_t>(t), static_cast<std::uint64_t>(ch));
  return add(g, sample_isotropic_noise(m, at, sigma, key));
}

void check_point(const ManifoldDescriptor& m, const Point& p, const char* what) {
  if (p.manifold != m) fail(std::string(what) + " is not on the expected manifold");
  if (!satisfies_invariants(m, p.coords, 1e-9))
    fail(std::string(what) + " violates its manifold invariant");
}

}  // namespace

SolverState init(const FirstOrderProblem& p, const ScheduleConfig& cfg, const Point& x0,
                 const Point& y0, const Point& z0, std::uint64_t seed) {
  check_point(p.upper, x0, "x0");
  check_point(p.lower, y0, "y0");
  check_point(p.lower, z0, "z0");
  if (cfg.T < 1 || cfg.lambda0 <= 0) fail("invalid schedule configuration");
  SolverState s;
  s.k = 0;
  s.x = x0;
  s.y = y0;
  s.z = z0;
  s.lambda = cfg.lambda0;
  s.seed = seed;
  return s;
}

void inner_loop(SolverState& s, const FirstOrderProblem& p, const ScheduleConfig& cfg,
                const NoiseSpec& noise) {
  const StepSizes ss = step_sizes(cfg, s.k, s.lambda);
  Point z = s.z;
  Point y = s.y;
  for (long t = 0; t < cfg.T; ++t) {
    try {
      const Tangent h_gz =
          sampled(p.grad_gy, p.lower, z, s.x, z, noise.sigma_g, s.seed, s.k, t, kGz);
      z = exp_map(p.lower, z, scale(h_gz, -ss.gamma));
      const Tangent h_fy =
          sampled(p.grad_fy, p.lower, y, s.x, y, noise.sigma_f, s.seed, s.k, t, kFy);
      const Tangent h_gy =
          sampled(p.grad_gy, p.lower, y, s.x, y, noise.sigma_g, s.seed, s.k, t, kGy);
      y = exp_map(p.lower, y, scale(add(h_fy, scale(h_gy, s.lambda)), -ss.alpha));
    } catch (const std::exception& e) {
      std::ostringstream os;
      os << "inner step failed at k=" << s.k << " t=" << t << ": " << e.what();
      fail(os.str());
    }
  }
  s.y = y;
  s.z = z;
}

StepInfo outer_step(SolverState& s, const FirstOrderProblem& p, const ScheduleConfig& cfg,
                    const NoiseSpec& noise) {
  const StepSizes ss = step_sizes(cfg, s.k, s.lambda);
  StepInfo info;
  try {
    const Tangent h_fx =
        sampled(p.grad_fx, p.upper, s.x, s.x, s.y, noise.sigma_f, s.seed, s.k, 0, kFx);
    const Tangent h_gxy =
        sampled(p.grad_gx, p.upper, s.x, s.x, s.y, noise.sigma_g, s.seed, s.k, 0, kGxy);
    const Tangent h_gxz =
        sampled(p.grad_gx, p.upper, s.x, s.x, s.z, noise.sigma_g, s.seed, s.k, 0, kGxz);
    const Tangent dir = add(h_fx, scale(sub(h_gxy, h_gxz), s.lambda));
    const Point x_next = exp_map(p.upper, s.x, scale(dir, -cfg.xi * ss.alpha));
    info.dist_x_step = dist(p.upper, s.x, x_next);
    s.x = x_next;
  } catch (const std::exception& e) {
    std::ostringstream os;
    os << "outer step failed at k=" << s.k << ": " << e.what();
    fail(os.str());
  }

  info.delta = delta_k(cfg, s.k, s.lambda, ss.alpha, ss.gamma);
  const double designed_next = cfg.designed_lambda(s.k + 1);
  const double next = s.lambda + info.delta;
  if (next < s.lambda) fail("multiplier decreased");
  if (s.identity_exact) {
    if (std::abs(next - designed_next) <= 1e-12 * designed_next) {
      s.lambda = next;
    } else if (next < designed_next) {
      s.identity_exact = false;  // drift cap bound (override regime); keep recursion
      s.lambda = next;
    } else {
      fail("multiplier overshot the designed trajectory");
    }
  } else {
    s.lambda = next;
  }
  s.k += 1;
  return info;
}

RunResult run(const FirstOrderProblem& p, const ScheduleConfig& cfg, long K, const Point& x0,
              const Point& y0, const Point& z0, std::uint64_t seed, const NoiseSpec& noise,
              const RunOptions& opts) {
  if (K < 1) fail("iteration budget K must be >= 1");
  RunResult result;
  result.records.reserve(static_cast<size_t>(K));
  result.state = init(p, cfg, x0, y0, z0, seed);
  SolverState& s = result.state;
  for (long k = 0; k < K; ++k) {
    const auto started = std::chrono::steady_clock::now();
    IterateRecord rec;
    rec.k = k;
    rec.lambda = s.lambda;
    const StepSizes ss = step_sizes(cfg, k, s.lambda);
    rec.alpha = ss.alpha;
    rec.gamma = ss.gamma;
    rec.beta = ss.beta;
    if (opts.diagnostic_stride > 0 && opts.diagnostics && k % opts.diagnostic_stride == 0) {
      const SolverState snapshot = s;  // diagnostics run on a copy of the state
      opts.diagnostics(snapshot, rec);
    }
    inner_loop(s, p, cfg, noise);
    const StepInfo info = outer_step(s, p, cfg, noise);
    rec.delta = info.delta;
    rec.dist_x_step = info.dist_x_step;
    rec.elapsed_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started)
            .count();
    result.records.push_back(std::move(rec));
  }
  return result;
}

}  // namespace rf2sa
