#pragma once

#include "rf2sa/problem.hpp"
#include "rf2sa/schedule.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

namespace rf2sa {

/// Per-channel noise levels for the six stochastic gradient samples:
/// sigma_f applies to the f-samples (h_fy, h_fx), sigma_g to the g-samples
/// (h_gz, h_gy, h_gxy, h_gxz).
struct NoiseSpec {
  double sigma_f = 0.0;
  double sigma_g = 0.0;
};

struct SolverState {
  long k = 0;
  Point x, y, z;
  double lambda = 0;
  std::uint64_t seed = 0;
  /// True while the multiplier recursion has tracked the designed trajectory
  /// gamma_k/(2 alpha_k) exactly; goes false only when the drift cap binds
  /// (possible under manual schedule overrides such as T = 1).
  bool identity_exact = true;
};

struct IterateRecord {
  long k = 0;
  double lambda = 0, alpha = 0, gamma = 0, beta = 0, delta = 0;
  std::optional<double> grad_F_sq, I_k, J_k, V_k;
  double dist_x_step = 0;
  double elapsed_ms = 0;
};

/// Fills the optional diagnostic fields of the record for the state at the
/// start of iteration k. Wired by the harness; never sees solver internals
/// and its results never feed back into updates.
using DiagnosticFn = std::function<void(const SolverState&, IterateRecord&)>;

struct RunOptions {
  long diagnostic_stride = 0;  // 0 disables diagnostics
  DiagnosticFn diagnostics;
};

struct StepInfo {
  double delta = 0;
  double dist_x_step = 0;
};

struct RunResult {
  std::vector<IterateRecord> records;
  SolverState state;
};

SolverState init(const FirstOrderProblem& p, const ScheduleConfig& cfg, const Point& x0,
                 const Point& y0, const Point& z0, std::uint64_t seed);

/// T inner updates of z and y at fixed (x_k, lambda_k):
///   z <- Exp_z(-gamma_k h_gz),  y <- Exp_y(-alpha_k (h_fy + lambda_k h_gy)).
void inner_loop(SolverState& s, const FirstOrderProblem& p, const ScheduleConfig& cfg,
                const NoiseSpec& noise);

/// One outer update of x followed by the multiplier increment:
///   x <- Exp_x(-xi alpha_k (h_fx + lambda_k (h_gxy - h_gxz))),
///   lambda += delta_k, k += 1.
StepInfo outer_step(SolverState& s, const FirstOrderProblem& p, const ScheduleConfig& cfg,
                    const NoiseSpec& noise);

RunResult run(const FirstOrderProblem& p, const ScheduleConfig& cfg, long K, const Point& x0,
              const Point& y0, const Point& z0, std::uint64_t seed, const NoiseSpec& noise,
              const RunOptions& opts = {});

}  // namespace rf2sa
