#include "rf2sa/harness.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace rf2sa {

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(4);
  os << v;
  return os.str();
}

double tangent_radius(const ManifoldDescriptor& m) {
  return m.kind == ManifoldKind::Sphere ? 0.8 * M_PI : 2.0;
}

void manifold_suite(ValidationReport& rep, const ManifoldDescriptor& m, long cases) {
  const std::string tag = std::string("manifold/") + manifold_kind_name(m.kind);
  rng::Stream s(rng::derive_key(0xf00d, static_cast<std::uint64_t>(m.kind), m.ambient, 0));

  double worst_roundtrip = 0, worst_isometry = 0, worst_speed = 0, worst_metric = 1e300;
  double worst_basis = 0, worst_recon = 0, worst_midpoint = 0;
  for (long i = 0; i < cases; ++i) {
    const Point x = random_point(m, s, 1.0);
    const double r = tangent_radius(m) * s.next_uniform();
    const Tangent v = scale(random_unit_tangent(m, x, s), r);

    // exp/log roundtrip
    const Point y = exp_map(m, x, v);
    const Tangent back = log_map(m, x, y);
    worst_roundtrip = std::max(
        worst_roundtrip, norm(m, x, sub(back, v)) / (1.0 + norm(m, x, v)));

    // transport isometry
    const Tangent u = scale(random_unit_tangent(m, x, s), 2.0 * s.next_uniform());
    const Tangent pu = transport(m, x, y, u);
    const Tangent pv = transport(m, x, y, v);
    const double iso = std::abs(inner(m, y, pu, pv) - inner(m, x, u, v)) /
                       (1.0 + norm(m, x, u) * norm(m, x, v));
    worst_isometry = std::max(worst_isometry, iso);

    // geodesic speed
    const double t = s.next_uniform();
    worst_speed = std::max(
        worst_speed, std::abs(dist(m, x, exp_map(m, x, scale(v, t))) - t * norm(m, x, v)));

    // metric positive-definiteness on nonzero tangents
    if (norm(m, x, v) > 1e-12) worst_metric = std::min(worst_metric, inner(m, x, v, v));
  }
  rep.add(tag + "/roundtrip", true, worst_roundtrip <= 1e-9,
          "max scaled error " + fmt(worst_roundtrip) + " over " + std::to_string(cases));
  rep.add(tag + "/transport-isometry", true, worst_isometry <= 1e-9,
          "max scaled error " + fmt(worst_isometry));
  rep.add(tag + "/geodesic-speed", true, worst_speed <= 1e-9, "max error " + fmt(worst_speed));
  rep.add(tag + "/metric-positive", true, worst_metric > 0, "min <v,v> " + fmt(worst_metric));

  // orthonormal basis: Gram and reconstruction (smaller case count; O(dim^2))
  for (long i = 0; i < std::min<long>(cases, 50); ++i) {
    const Point x = random_point(m, s, 1.0);
    const auto basis = orthonormal_basis(m, x);
    for (size_t a = 0; a < basis.size(); ++a)
      for (size_t b = 0; b < basis.size(); ++b) {
        const double g = inner(m, x, basis[a], basis[b]) - (a == b ? 1.0 : 0.0);
        worst_basis = std::max(worst_basis, std::abs(g));
      }
    const Tangent w = scale(random_unit_tangent(m, x, s), 3.0);
    Tangent recon = zero_tangent(m, x);
    for (const Tangent& e : basis) recon.vec += inner(m, x, w, e) * e.vec;
    worst_recon = std::max(worst_recon, norm(m, x, sub(recon, w)));
  }
  rep.add(tag + "/basis-orthonormal", true, worst_basis <= 1e-10, "max Gram error " + fmt(worst_basis));
  rep.add(tag + "/basis-reconstruction", true, worst_recon <= 1e-9,
          "max reconstruction error " + fmt(worst_recon));

  if (m.kind == ManifoldKind::Spd) {
    // geodesic midpoint vs matrix geometric mean by an independent
    // eigen-decomposition route
    for (long i = 0; i < cases; ++i) {
      const Point x = random_point(m, s, 1.0);
      const Point y = random_point(m, s, 1.0);
      const Point mid = exp_map(m, x, scale(log_map(m, x, y), 0.5));
      const Mat xm = spd_mat(m, x.coords);
      const Mat ym = spd_mat(m, y.coords);
      Eigen::SelfAdjointEigenSolver<Mat> ex(xm);
      const Mat xs = ex.operatorSqrt();
      const Mat xis = ex.operatorInverseSqrt();
      Eigen::SelfAdjointEigenSolver<Mat> es(xis * ym * xis);
      const Mat mean = xs * es.operatorSqrt() * xs;
      worst_midpoint = std::max(worst_midpoint,
                                (spd_mat(m, mid.coords) - mean).cwiseAbs().maxCoeff());
    }
    rep.add(tag + "/midpoint-geometric-mean", true, worst_midpoint <= 1e-8,
            "max coord error " + fmt(worst_midpoint));
  }
}

void problem_suite(ValidationReport& rep, const std::string& name, int pairs) {
  const BilevelProblem p = builtin_problem(name);
  const std::string tag = "problem/" + name;
  rng::Stream s(rng::derive_key(0xbeef, std::hash<std::string>{}(name), 0, 0));

  double worst = 0;
  for (int i = 0; i < pairs; ++i) {
    const Point x = random_point(p.upper, s, 2.0);
    const Point y = random_point(p.lower, s, 1.0);
    worst = std::max(worst, check_gradients(p, x, y, 1e-5).worst());
  }
  rep.add(tag + "/gradient-check", true, worst <= 1e-4,
          "max relative error " + fmt(worst) + " over " + std::to_string(pairs) + " pairs");

  // noise: unbiasedness t-statistics and second-moment concentration
  {
    const Point x = random_point(p.upper, s, 1.0);
    const Point y = random_point(p.lower, s, 1.0);
    const double sigma = 0.7;
    const int n = 10000;
    const auto basis = orthonormal_basis(p.lower, y);
    const Tangent g0 = grad(p, Which::fy, x, y);
    const int d = static_cast<int>(basis.size());
    Vec mean = Vec::Zero(d), m2 = Vec::Zero(d);
    double norm2_mean = 0;
    for (int i = 0; i < n; ++i) {
      const Tangent gi = noisy_grad(p, Which::fy, x, y, NoiseModel{sigma, 0},
                                    substream(42, static_cast<std::uint64_t>(i), 0, 1));
      const Tangent xi = sub(gi, g0);
      norm2_mean += inner(p.lower, y, xi, xi);
      for (int b = 0; b < d; ++b) {
        const double cb = inner(p.lower, y, xi, basis[b]);
        mean[b] += cb;
        m2[b] += cb * cb;
      }
    }
    norm2_mean /= n;
    double worst_t = 0;
    for (int b = 0; b < d; ++b) {
      const double mu = mean[b] / n;
      const double var = m2[b] / n - mu * mu;
      worst_t = std::max(worst_t, std::abs(mu) / std::sqrt(var / n));
    }
    rep.add(tag + "/noise-unbiased", true, worst_t <= 4.0, "max |t| " + fmt(worst_t));
    const double dev = std::abs(norm2_mean - sigma * sigma);
    rep.add(tag + "/noise-second-moment", true,
            dev <= 5.0 * sigma * sigma / std::sqrt(double(n)),
            "|mean(|xi|^2) - sigma^2| = " + fmt(dev));

    const Tangent a = noisy_grad(p, Which::gy, x, y, NoiseModel{sigma, 0}, substream(7, 3, 1, 0));
    const Tangent b = noisy_grad(p, Which::gy, x, y, NoiseModel{sigma, 0}, substream(7, 3, 1, 0));
    rep.add(tag + "/noise-deterministic", true, a.vec == b.vec,
            "identical keys reproduce bit-identical samples");
  }

  if (p.second_order) {
    const Point x = random_point(p.upper, s, 1.0);
    const Point y = random_point(p.lower, s, 1.0);
    const SecondOrderReport so = check_second_order(p, x, y);
    rep.add(tag + "/second-order", true, so.ok(p.constants.mu_g),
            "self-adjoint " + fmt(so.self_adjoint_err) + ", rayleigh_min " + fmt(so.rayleigh_min) +
                ", fd " + fmt(so.hess_fd_rel_err));
  }
}

SmoothnessConstants reference_constants() {
  return builtin_problem("quadratic-euclidean").constants;
}

void schedule_suite(ValidationReport& rep, long k_max) {
  SmoothnessConstants sc = reference_constants();
  const struct {
    Regime regime;
    double sigma_f, sigma_g;
  } cases[] = {{Regime::Deterministic, 0, 0},
               {Regime::FOnly, 0.5, 0},
               {Regime::BothNoisy, 0.5, 0.5}};
  for (double c_xi : {1.0 / 96.0, 1.0}) {
    for (const auto& rc : cases) {
      sc.sigma_f = rc.sigma_f;
      sc.sigma_g = rc.sigma_g;
      const double lambda0 = 2.0 * sc.l_f1 / sc.mu_g;
      const ConstantsLedger ledger = derive_constants(sc, lambda0);
      ScheduleOverrides ov;
      ov.c_xi = c_xi;
      const ScheduleConfig cfg = make_schedule(ledger, sc, rc.regime, ov);
      const std::string tag = std::string("schedule/") + regime_name(rc.regime) +
                              (c_xi == 1.0 ? "/c_xi=1" : "/c_xi=1/96");

      const auto violations = validate_schedule_sweep(cfg, ledger, sc, k_max);
      std::string detail = violations.empty() ? "no violations" : violations.front();
      rep.add(tag + "/conditions", true, violations.empty(), detail);

      // multiplier recursion tracks gamma_k/(2 alpha_k) to 1e-12 relative
      double lambda = cfg.lambda0;
      double worst_rel = 0;
      double sum_dl2 = 0, sum_dl2_half = 0;
      for (long k = 0; k < k_max; ++k) {
        const StepSizes ss = step_sizes(cfg, k, lambda);
        const double d = delta_k(cfg, k, lambda, ss.alpha, ss.gamma);
        sum_dl2 += d / (lambda * lambda);
        if (k < k_max / 2) sum_dl2_half = sum_dl2;
        lambda += d;
        const double designed = cfg.designed_lambda(k + 1);
        worst_rel = std::max(worst_rel, std::abs(lambda - designed) / designed);
      }
      rep.add(tag + "/lambda-identity", true, worst_rel <= 1e-12,
              "max relative deviation " + fmt(worst_rel) + " over k<=" + std::to_string(k_max));
      // telescoping keeps the series below 1/lambda0; the summand decreases,
      // so later windows contribute no more than earlier ones
      const bool bounded = sum_dl2 <= 2.0 / cfg.lambda0 &&
                           (sum_dl2 - sum_dl2_half) <= sum_dl2_half + 1e-12;
      rep.add(tag + "/delta-over-lambda2-bounded", true, bounded,
              "partial sum " + fmt(sum_dl2) + " (<= 2/lambda0 = " + fmt(2.0 / cfg.lambda0) + ")");

      if (c_xi == 1.0) {
        // lambda_k / k^{a-c} approaches c_gamma/(2 c_alpha) (5% at k=1e3, 1e4)
        const double limit = cfg.c_gamma / (2.0 * cfg.c_alpha);
        bool ok = true;
        for (long k : {1000L, 10000L}) {
          const double ratio =
              cfg.designed_lambda(k) / std::pow(static_cast<double>(k), cfg.a - cfg.c);
          if (std::abs(ratio - limit) > 0.05 * limit && cfg.a != cfg.c) ok = false;
        }
        rep.add(tag + "/lambda-ratio-limit", true, ok, "limit " + fmt(limit));
      }
    }
  }
}

void solver_suite(ValidationReport& rep) {
  // determinism: same seed, same trajectory, bit for bit
  {
    ExperimentConfig cfg;
    cfg.problem = "quadratic-euclidean";
    cfg.regime = Regime::BothNoisy;
    cfg.sigma_f = cfg.sigma_g = 0.5;
    cfg.schedule.c_xi = 1.0;
    cfg.k_grid = {200};
    cfg.stride = 0;
    const PreparedExperiment prep = prepare(cfg);
    const FirstOrderProblem view = first_order_view(prep.problem);
    const RunResult a = run(view, prep.schedule, 200, prep.init.x0, prep.init.y0, prep.init.z0,
                            99, prep.noise, {});
    const RunResult b = run(view, prep.schedule, 200, prep.init.x0, prep.init.y0, prep.init.z0,
                            99, prep.noise, {});
    bool same = a.state.x.coords == b.state.x.coords && a.state.y.coords == b.state.y.coords &&
                a.state.z.coords == b.state.z.coords;
    bool lambda_monotone = true;
    for (size_t i = 0; i < a.records.size(); ++i) {
      same = same && a.records[i].lambda == b.records[i].lambda &&
             a.records[i].dist_x_step == b.records[i].dist_x_step;
      if (i + 1 < a.records.size() && a.records[i + 1].lambda < a.records[i].lambda)
        lambda_monotone = false;
    }
    rep.add("solver/determinism", true, same, "two seeded runs are bit-identical");
    rep.add("solver/lambda-monotone", true, lambda_monotone, "lambda nondecreasing");
  }

  // first-order purity: a poisoned second-order oracle records zero calls
  {
    ExperimentConfig cfg;
    cfg.problem = "quadratic-euclidean";
    cfg.regime = Regime::Deterministic;
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
    const FirstOrderProblem view = first_order_view(prep.problem);
    run(view, prep.schedule, 1000, prep.init.x0, prep.init.y0, prep.init.z0, 1, prep.noise, {});
    rep.add("solver/first-order-purity", true, *calls == 0,
            std::to_string(*calls) + " second-order calls over K=1000");
  }

  // manifold feasibility along noisy runs on curved manifolds
  {
    ExperimentConfig cfg;
    cfg.problem = "sphere-upper";
    cfg.regime = Regime::BothNoisy;
    cfg.sigma_f = cfg.sigma_g = 0.3;
    cfg.schedule.c_xi = 1.0;
    cfg.k_grid = {300};
    cfg.stride = 1;
    const PreparedExperiment prep = prepare(cfg);
    auto worst = std::make_shared<double>(0.0);
    RunOptions opts;
    opts.diagnostic_stride = 1;
    const ManifoldDescriptor upper = prep.problem.upper;
    const ManifoldDescriptor lower = prep.problem.lower;
    opts.diagnostics = [worst, upper, lower](const SolverState& s, IterateRecord&) {
      const double dx = std::abs(s.x.coords.norm() - 1.0);
      *worst = std::max(*worst, dx);
      if (!satisfies_invariants(upper, s.x.coords, 1e-10) ||
          !satisfies_invariants(lower, s.y.coords, 1e-10) ||
          !satisfies_invariants(lower, s.z.coords, 1e-10))
        *worst = std::max(*worst, 1.0);
    };
    run(first_order_view(prep.problem), prep.schedule, 300, prep.init.x0, prep.init.y0,
        prep.init.z0, 5, prep.noise, opts);
    rep.add("solver/manifold-feasibility", true, *worst <= 1e-10,
            "max sphere drift " + fmt(*worst) + " over 300 noisy iterations");
  }

  // deterministic descent of the potential (soft; descent is only proven in
  // expectation and up to O(alpha_k / lambda_k^2) residuals)
  {
    ExperimentConfig cfg;
    cfg.problem = "quadratic-euclidean";
    cfg.regime = Regime::Deterministic;
    cfg.schedule.c_xi = 1.0;
    cfg.k_grid = {2000};
    const PreparedExperiment prep = prepare(cfg);
    std::vector<double> vks;
    {
      RunOptions opts;
      opts.diagnostic_stride = 10;
      const BilevelProblem& p = prep.problem;
      const OracleSettings settings = cfg.oracle;
      const double l_g1 = prep.sc.l_g1;
      const double f_star = p.known_optimum->F_star;
      opts.diagnostics = [&p, settings, l_g1, f_star, &vks](const SolverState& s,
                                                            IterateRecord&) {
        const Point ystar = solve_lower(p, s.x, settings);
        const Point ylam = solve_penalized(p, s.x, s.lambda, settings, ystar);
        const double di = dist(p.lower, s.y, ylam);
        const double dj = dist(p.lower, s.z, ystar);
        vks.push_back(p.f(s.x, ystar) - f_star + s.lambda * l_g1 * di * di +
                      0.5 * s.lambda * l_g1 * dj * dj);
      };
      run(first_order_view(prep.problem), prep.schedule, 2000, prep.init.x0, prep.init.y0,
          prep.init.z0, 11, prep.noise, opts);
    }
    long increases = 0;
    double worst_inc = 0;
    for (size_t i = 2; i + 1 < vks.size(); ++i) {  // skip the first 10 iterations (2 strides)
      const double inc = vks[i + 1] - vks[i];
      if (inc > 1e-9) {
        ++increases;
        worst_inc = std::max(worst_inc, inc);
      }
    }
    rep.add("solver/potential-descent", false, increases == 0,
            increases == 0 ? "V_k nonincreasing after burn-in"
                           : std::to_string(increases) + " increases, worst " + fmt(worst_inc));
  }
}

void oracle_suite(ValidationReport& rep) {
  for (const std::string name : {"quadratic-euclidean", "sphere-upper"}) {
    const BilevelProblem p = builtin_problem(name);
    OracleSettings st;
    rng::Stream s(rng::derive_key(0x0abc, std::hash<std::string>{}(name), 1, 1));
    double worst = 0;
    for (int i = 0; i < 20; ++i) {
      const Point x = random_point(p.upper, s, 1.0);
      const Tangent hg = hypergrad(p, x, st);
      const Tangent fd = fd_grad_F(p, x, st);
      worst = std::max(worst,
                       norm(p.upper, x, sub(hg, fd)) / (1.0 + norm(p.upper, x, hg)));
    }
    rep.add("oracle/" + name + "/hypergrad-vs-fd", true, worst <= 1e-4,
            "max scaled deviation " + fmt(worst) + " at 20 points");

    // penalty-gradient bias decays like 1/lambda, below the analytic bound
    const ConstantsLedger ledger =
        derive_constants(p.constants, 2.0 * p.constants.l_f1 / p.constants.mu_g);
    const std::vector<double> lambdas = {10, 100, 1000, 10000};
    double worst_slope_dev = 0;
    bool monotone = true, bounded = true;
    for (int i = 0; i < 5; ++i) {
      const Point x = random_point(p.upper, s, 1.0);
      const Tangent hg = hypergrad(p, x, st);
      std::vector<double> lx, ly;
      double prev = 1e300;
      for (double lam : lambdas) {
        const double diff = norm(p.upper, x, sub(hg, grad_L_star(p, x, lam, st)));
        if (diff > prev * (1.0 + 1e-9)) monotone = false;
        prev = diff;
        if (diff > ledger.C_lambda / lam + 10.0 * st.inner_tol / p.constants.mu_g)
          bounded = false;
        lx.push_back(std::log(lam));
        ly.push_back(std::log(std::max(diff, 1e-300)));
      }
      const LineFit fit = least_squares(lx, ly);
      worst_slope_dev = std::max(worst_slope_dev, std::abs(fit.slope + 1.0));
    }
    rep.add("oracle/" + name + "/bias-slope", true, worst_slope_dev <= 0.1,
            "max |slope + 1| = " + fmt(worst_slope_dev));
    rep.add("oracle/" + name + "/bias-monotone", true, monotone, "nonincreasing in lambda");
    rep.add("oracle/" + name + "/bias-bounded", true, bounded,
            "within C_lambda/lambda + slack");
  }
}

void bound_suite(ValidationReport& rep, int samples) {
  for (const std::string name : {"quadratic-euclidean", "sphere-upper", "spd-barycenter"}) {
    const BilevelProblem p = builtin_problem(name);
    OracleSettings st;
    rng::Stream s(rng::derive_key(0xb0cd, std::hash<std::string>{}(name), 2, 2));
    const double lam_min = std::max(10.0, 2.0 * p.constants.l_f1 / p.constants.mu_g);
    std::vector<BoundQuad> quads;
    for (int i = 0; i < samples; ++i) {
      BoundQuad q;
      q.x1 = random_point(p.upper, s, 1.0);
      q.x2 = random_point(p.upper, s, 1.0);
      q.lambda1 = lam_min * std::pow(1e4 / lam_min, s.next_uniform());
      q.lambda2 = lam_min * std::pow(1e4 / lam_min, s.next_uniform());
      quads.push_back(q);
    }
    const BoundReport br = measure_bounds(p, p.constants, quads, st);
    std::ostringstream os;
    os << br.pair_violations << "/" << br.pair_checks << " pair and " << br.limit_violations
       << "/" << br.limit_checks << " limit violations; min margins " << fmt(br.min_pair_margin)
       << ", " << fmt(br.min_limit_margin);
    rep.add("bounds/" + name, true, br.clean(), os.str());
  }
}

}  // namespace

ValidationReport validate_manifolds(long cases_per_manifold) {
  ValidationReport rep;
  manifold_suite(rep, euclidean_manifold(7), cases_per_manifold);
  manifold_suite(rep, sphere_manifold(5), cases_per_manifold);
  manifold_suite(rep, spd_manifold(3), cases_per_manifold);

  const double cf = curvature_factor(-1.0, 1.0);
  rep.add("manifold/curvature-factor", true,
          curvature_factor(0.0, 5.0) == 1.0 && curvature_factor(-2.0, 0.0) == 1.0 &&
              std::abs(cf - 1.0 / std::tanh(1.0)) < 1e-12 &&
              curvature_factor(-1.0, 2.0) > cf && cf >= 1.0,
          "flat/zero limits, direct value, monotonicity");
  return rep;
}

ValidationReport validate_problems(int pairs) {
  ValidationReport rep;
  for (const std::string name : {"quadratic-euclidean", "sphere-upper", "spd-barycenter"})
    problem_suite(rep, name, pairs);
  return rep;
}

ValidationReport validate_schedules(long k_max) {
  ValidationReport rep;
  schedule_suite(rep, k_max);
  return rep;
}

ValidationReport validate_solver() {
  ValidationReport rep;
  solver_suite(rep);
  return rep;
}

ValidationReport validate_oracle() {
  ValidationReport rep;
  oracle_suite(rep);
  return rep;
}

ValidationReport validate_bound_suite(int samples_per_problem) {
  ValidationReport rep;
  bound_suite(rep, samples_per_problem);
  return rep;
}

ValidationReport validate_all(const std::vector<std::string>& scopes) {
  auto wants = [&](const char* scope) {
    if (scopes.empty()) return true;
    return std::find(scopes.begin(), scopes.end(), scope) != scopes.end();
  };
  ValidationReport rep;
  if (wants("manifold")) rep.merge(validate_manifolds());
  if (wants("problem")) rep.merge(validate_problems());
  if (wants("schedule")) rep.merge(validate_schedules());
  if (wants("solver")) rep.merge(validate_solver());
  if (wants("oracle")) rep.merge(validate_oracle());
  if (wants("bounds")) rep.merge(validate_bound_suite());
  return rep;
}

}  // namespace rf2sa
