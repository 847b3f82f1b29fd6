// Acceptance suite: runs each criterion end to end and prints one PASS/FAIL
// line per criterion. Exit status is nonzero when any criterion fails.

#include "rf2sa/harness.hpp"
#include "rf2sa/oracle.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <sstream>
#include <vector>

using namespace rf2sa;

namespace {

struct Criterion {
  int id;
  bool pass;
  std::string text;
  double seconds;
};

std::vector<Criterion> g_results;

class Timer {
 public:
  Timer() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

void record(int id, bool pass, const std::string& text, double seconds) {
  g_results.push_back({id, pass, text, seconds});
  std::printf("[%2d] %s %s (%.1f s)\n", id, pass ? "PASS" : "FAIL", text.c_str(), seconds);
  std::fflush(stdout);
}

ExperimentConfig rate_config(Regime regime, double sigma_f, double sigma_g, int seeds,
                             int workers) {
  ExperimentConfig cfg;
  cfg.problem = "quadratic-euclidean";
  cfg.problem_params = {{"d", 10}};
  cfg.regime = regime;
  cfg.sigma_f = sigma_f;
  cfg.sigma_g = sigma_g;
  cfg.schedule.c_xi = 1.0;
  cfg.k_grid = {256, 512, 1024, 2048, 4096, 8192, 16384};
  cfg.seeds = seeds;
  cfg.stride = 1;
  cfg.burn_in = 0.10;
  cfg.log_correction = true;
  cfg.workers = workers;
  // start near the known optimum so the R-average tracks the decaying
  // bias/noise floor instead of the initialization transient
  cfg.init = {{"x0_scale", 0.035}};
  return cfg;
}

RateFitReport run_rate(const ExperimentConfig& cfg) {
  const PreparedExperiment prep = prepare(cfg);
  if (!prep.schedule_warnings.empty())
    std::cerr << "schedule warning: " << prep.schedule_warnings.front() << "\n";
  const auto cells = run_grid(prep, cfg, "");
  return fit_rate(summarize(cells), regime_target_exponent(cfg.regime), 0.15,
                  cfg.log_correction);
}

std::string slope_text(const char* label, const RateFitReport& fit, double lo, double hi) {
  std::ostringstream os;
  os.precision(3);
  os << label << ": slope " << fit.slope << " in [" << lo << ", " << hi << "], R^2 " << fit.r2;
  return os.str();
}

}  // namespace

int main() {
  // 1-3: convergence-rate exponents of the three noise regimes
  RateFitReport det_fit, f_fit, both_fit;
  bool det_ok = false, f_ok = false, both_ok = false;
  {
    Timer t;
    const ExperimentConfig cfg = rate_config(Regime::Deterministic, 0, 0, 1, 1);
    det_fit = run_rate(cfg);
    det_ok = det_fit.slope >= -0.83 && det_fit.slope <= -0.53;
    const bool in_time = t.seconds() <= 120.0;
    record(1, det_ok && in_time,
           slope_text("deterministic rate", det_fit, -0.83, -0.53) +
               (in_time ? "" : " [over 2 min budget]"),
           t.seconds());
  }
  {
    Timer t;
    const ExperimentConfig cfg = rate_config(Regime::FOnly, 0.5, 0.0, 16, 8);
    f_fit = run_rate(cfg);
    f_ok = f_fit.slope >= -0.55 && f_fit.slope <= -0.25;
    const bool in_time = t.seconds() <= 900.0;
    record(2, f_ok && in_time,
           slope_text("f-only-noise rate", f_fit, -0.55, -0.25) +
               (in_time ? "" : " [over 15 min budget]"),
           t.seconds());
  }
  {
    Timer t;
    const ExperimentConfig cfg = rate_config(Regime::BothNoisy, 0.5, 0.5, 16, 8);
    both_fit = run_rate(cfg);
    both_ok = both_fit.slope >= -0.43 && both_fit.slope <= -0.13;
    const bool order = det_fit.slope < f_fit.slope - 0.05 && f_fit.slope < both_fit.slope - 0.05;
    std::ostringstream os;
    os << slope_text("both-noisy rate", both_fit, -0.43, -0.13) << "; ordering "
       << (order ? "holds" : "violated") << " (det " << det_fit.slope << " < f-only "
       << f_fit.slope << " < both " << both_fit.slope << ", sep >= 0.05)";
    record(3, both_ok && order, os.str(), t.seconds());
  }

  // 4: penalty-gradient bias decay (slope -1, under the analytic bound)
  {
    Timer t;
    bool ok = true;
    std::ostringstream os;
    os.precision(3);
    os << "bias decay:";
    for (const std::string name : {"quadratic-euclidean", "sphere-upper"}) {
      const BilevelProblem p = builtin_problem(name);
      OracleSettings st;
      const ConstantsLedger ledger =
          derive_constants(p.constants, 2.0 * p.constants.l_f1 / p.constants.mu_g);
      rng::Stream s(rng::derive_key(0xacce, std::hash<std::string>{}(name), 4, 0));
      const std::vector<double> lambdas = {10, 100, 1000, 10000};
      double worst_dev = 0;
      bool bounded = true;
      for (int i = 0; i < 5; ++i) {
        const Point x = random_point(p.upper, s, 1.0);
        const Tangent hg = hypergrad(p, x, st);
        std::vector<double> lx, ly;
        for (double lam : lambdas) {
          const double diff = norm(p.upper, x, sub(hg, grad_L_star(p, x, lam, st)));
          bounded = bounded && diff <= ledger.C_lambda / lam +
                                            10.0 * st.inner_tol / p.constants.mu_g;
          lx.push_back(std::log(lam));
          ly.push_back(std::log(std::max(diff, 1e-300)));
        }
        worst_dev = std::max(worst_dev, std::abs(least_squares(lx, ly).slope + 1.0));
      }
      ok = ok && worst_dev <= 0.1 && bounded;
      os << " " << name << " |slope+1|=" << worst_dev << (bounded ? "" : " BOUND-EXCEEDED");
    }
    record(4, ok, os.str(), t.seconds());
  }

  // 5: hypergradient oracle consistency
  {
    Timer t;
    bool ok = true;
    std::ostringstream os;
    os.precision(3);
    os << "hypergrad consistency:";
    for (const std::string name : {"quadratic-euclidean", "sphere-upper"}) {
      const BilevelProblem p = builtin_problem(name);
      OracleSettings st;
      rng::Stream s(rng::derive_key(0xacce, std::hash<std::string>{}(name), 5, 0));
      double worst = 0;
      for (int i = 0; i < 20; ++i) {
        const Point x = random_point(p.upper, s, 1.0);
        const Tangent hg = hypergrad(p, x, st);
        const Tangent fd = fd_grad_F(p, x, st);
        worst = std::max(worst, norm(p.upper, x, sub(hg, fd)) / (1.0 + norm(p.upper, x, hg)));
      }
      ok = ok && worst <= 1e-4;
      os << " " << name << " max=" << worst;
    }
    {
      const BilevelProblem p = builtin_problem("spd-barycenter");
      OracleSettings st;
      rng::Stream s(rng::derive_key(0xacce, 0x59d, 5, 1));
      double worst = 0;
      for (int i = 0; i < 5; ++i) {
        const Point x = random_point(p.upper, s, 1.0);
        const Tangent fd = fd_grad_F(p, x, st);
        const Tangent pen = grad_L_star(p, x, 1e4, st);
        worst = std::max(worst, norm(p.upper, x, sub(fd, pen)) / (1.0 + norm(p.upper, x, fd)));
      }
      ok = ok && worst <= 1e-3;
      os << " spd-barycenter(fd-vs-penalized)=" << worst;
    }
    record(5, ok, os.str(), t.seconds());
  }

  // 6: two-multiplier distance bound suite
  {
    Timer t;
    const ValidationReport rep = validate_bound_suite(100);
    bool ok = true;
    std::ostringstream os;
    os << "bound suite:";
    for (const auto& item : rep.items) {
      ok = ok && item.pass;
      os << " [" << item.name << ": " << (item.pass ? "clean" : item.detail) << "]";
    }
    record(6, ok, os.str(), t.seconds());
  }

  // 7: manifold geometry suite
  {
    Timer t;
    const ValidationReport rep = validate_manifolds(1000);
    bool ok = rep.hard_pass();
    std::string worst = "all properties within tolerance";
    for (const auto& item : rep.items)
      if (!item.pass) worst = item.name + ": " + item.detail;
    const double secs = t.seconds();
    ok = ok && secs <= 30.0;
    record(7, ok, "manifold suite (1000 cases/manifold): " + worst, secs);
  }

  // 8: schedule identity and Theorem-2 conditions across k <= 1e5
  {
    Timer t;
    const ValidationReport rep = validate_schedules(100000);
    bool ok = rep.hard_pass();
    std::string detail = "identity to 1e-12 and empty validation for all regimes";
    for (const auto& item : rep.items)
      if (!item.pass) detail = item.name + ": " + item.detail;
    record(8, ok, detail, t.seconds());
  }

  // 9: first-order purity over a full run
  {
    Timer t;
    ExperimentConfig cfg;
    cfg.problem = "quadratic-euclidean";
    cfg.regime = Regime::BothNoisy;
    cfg.sigma_f = cfg.sigma_g = 0.5;
    cfg.schedule.c_xi = 1.0;
    cfg.k_grid = {1000};
    cfg.stride = 0;
    PreparedExperiment prep = prepare(cfg);
    auto calls = std::make_shared<long>(0);
    prep.problem.second_order = SecondOrderOracle{
        [calls](const Point&, const Point&, const Tangent& u) {
          ++*calls;
          return u;
        },
        [calls](const Point& x, const Point&, const Tangent&) {
          ++*calls;
          return zero_tangent(x.manifold, x);
        }};
    run(first_order_view(prep.problem), prep.schedule, 1000, prep.init.x0, prep.init.y0,
        prep.init.z0, 17, prep.noise, {});
    record(9, *calls == 0,
           "poisoned second-order oracle saw " + std::to_string(*calls) +
               " solver-path calls over K=1000",
           t.seconds());
  }

  // 10: multiplier growth exponent in the (5/7, 4/7) regime
  {
    Timer t;
    BilevelProblem p = builtin_problem("quadratic-euclidean", {{"d", 10}});
    p.constants.sigma_f = p.constants.sigma_g = 0.5;
    const SmoothnessConstants sc = p.constants;
    const ConstantsLedger ledger = derive_constants(sc, 2.0 * sc.l_f1 / sc.mu_g);
    ScheduleOverrides ov;
    ov.c_xi = 1.0;
    const ScheduleConfig cfg = make_schedule(ledger, sc, Regime::BothNoisy, ov);
    double lambda = cfg.lambda0;
    std::vector<double> lx, ly;
    double next_sample = 1000.0;
    for (long k = 0; k <= 100000; ++k) {
      if (k >= 1000 && static_cast<double>(k) >= next_sample) {
        lx.push_back(std::log(static_cast<double>(k)));
        ly.push_back(std::log(lambda));
        next_sample *= 1.05;
      }
      const StepSizes ss = step_sizes(cfg, k, lambda);
      lambda += delta_k(cfg, k, lambda, ss.alpha, ss.gamma);
    }
    const LineFit fit = least_squares(lx, ly);
    const bool ok = std::abs(fit.slope - 1.0 / 7.0) <= 0.01;
    std::ostringstream os;
    os.precision(4);
    os << "lambda growth exponent " << fit.slope << " (target " << 1.0 / 7.0
       << " +/- 0.01) over k in [1e3, 1e5]";
    record(10, ok, os.str(), t.seconds());
  }

  int failures = 0;
  for (const auto& c : g_results)
    if (!c.pass) ++failures;
  std::printf("ACCEPTANCE: %zu/%zu criteria passed\n", g_results.size() - failures,
              g_results.size());
  return failures == 0 ? 0 : 1;
}
