#include "rf2sa/harness.hpp"

#include "rf2sa/csv.hpp"
#include "rf2sa/svg.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

namespace rf2sa {

const char* const kVersion = "rf2sa 0.1.0";

namespace {

namespace fs = std::filesystem;

[[noreturn]] void fail(const std::string& what) { throw std::runtime_error("harness: " + what); }

[[noreturn]] void config_fail(const std::string& what) {
  throw std::invalid_argument("config: " + what);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) fail("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) fail("write failed for " + path.string());
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  ExperimentConfig cfg;
  try {
    cfg.problem = j.at("problem").at("name").get<std::string>();
    cfg.problem_params = j.at("problem").value("params", json::object());
    cfg.regime = regime_from_string(j.value("regime", "deterministic"));
    if (j.contains("noise")) {
      cfg.sigma_f = j.at("noise").value("sigma_f", 0.0);
      cfg.sigma_g = j.at("noise").value("sigma_g", 0.0);
    }
    if (j.contains("schedule")) cfg.schedule = ScheduleOverrides::from_json(j.at("schedule"));
    if (j.contains("K_grid")) {
      for (const auto& v : j.at("K_grid")) cfg.k_grid.push_back(v.get<long>());
    }
    cfg.seeds = j.value("seeds", 1);
    cfg.base_seed = j.value("base_seed", std::uint64_t{1});
    cfg.stride = j.value("stride", 1L);
    cfg.burn_in = j.value("burn_in", 0.10);
    cfg.log_correction = j.value("log_correction", true);
    cfg.record_potential = j.value("record_potential", false);
    cfg.init = j.value("init", json::object());
    if (j.contains("oracle")) {
      const auto& o = j.at("oracle");
      cfg.oracle.inner_tol = o.value("inner_tol", cfg.oracle.inner_tol);
      cfg.oracle.max_inner_iters = o.value("max_inner_iters", cfg.oracle.max_inner_iters);
      cfg.oracle.linsolve_tol = o.value("linsolve_tol", cfg.oracle.linsolve_tol);
      cfg.oracle.fd_step = o.value("fd_step", cfg.oracle.fd_step);
    }
    cfg.out_dir = j.value("output", "");
    cfg.force = j.value("force", false);
    cfg.workers = j.value("workers", 0);
  } catch (const json::exception& e) {
    config_fail(e.what());
  }
  if (cfg.k_grid.empty()) config_fail("K_grid must be nonempty");
  for (size_t i = 1; i < cfg.k_grid.size(); ++i)
    if (cfg.k_grid[i] <= cfg.k_grid[i - 1]) config_fail("K_grid must be strictly increasing");
  for (long K : cfg.k_grid)
    if (K < 1) config_fail("K_grid entries must be >= 1");
  if (cfg.seeds < 1) config_fail("seeds must be >= 1");
  if (cfg.stride < 0) config_fail("stride must be >= 0");
  if (cfg.burn_in < 0 || cfg.burn_in >= 1) config_fail("burn_in must lie in [0, 1)");
  return cfg;
}

json ExperimentConfig::to_json() const {
  json j;
  j["problem"] = {{"name", problem}, {"params", problem_params}};
  j["regime"] = regime_name(regime);
  j["noise"] = {{"sigma_f", sigma_f}, {"sigma_g", sigma_g}};
  j["schedule"] = schedule.to_json();
  j["K_grid"] = k_grid;
  j["seeds"] = seeds;
  j["base_seed"] = base_seed;
  j["stride"] = stride;
  j["burn_in"] = burn_in;
  j["log_correction"] = log_correction;
  j["record_potential"] = record_potential;
  j["init"] = init;
  j["oracle"] = {{"inner_tol", oracle.inner_tol},
                 {"max_inner_iters", oracle.max_inner_iters},
                 {"linsolve_tol", oracle.linsolve_tol},
                 {"fd_step", oracle.fd_step}};
  j["output"] = out_dir;
  j["force"] = force;
  j["workers"] = workers;
  return j;
}

PreparedExperiment prepare(const ExperimentConfig& cfg) {
  PreparedExperiment prep;
  prep.problem = builtin_problem(cfg.problem, cfg.problem_params);
  prep.problem.constants.sigma_f = cfg.sigma_f;
  prep.problem.constants.sigma_g = cfg.sigma_g;
  prep.sc = prep.problem.constants;
  const double lambda0 =
      cfg.schedule.lambda0.value_or(2.0 * prep.sc.l_f1 / prep.sc.mu_g);
  prep.ledger = derive_constants(prep.sc, lambda0);
  prep.schedule = make_schedule(prep.ledger, prep.sc, cfg.regime, cfg.schedule);
  const long k_max = cfg.k_grid.empty() ? 1024 : cfg.k_grid.back();
  prep.schedule_warnings =
      validate_schedule_sweep(prep.schedule, prep.ledger, prep.sc, std::min(k_max, 100000L));
  prep.noise = NoiseSpec{cfg.sigma_f, cfg.sigma_g};
  prep.init = default_init(prep.problem, cfg.init);
  return prep;
}

namespace {

DiagnosticFn make_diagnostics(const PreparedExperiment& prep, const ExperimentConfig& cfg) {
  const BilevelProblem& p = prep.problem;
  const OracleSettings settings = cfg.oracle;
  const double l_g1 = prep.sc.l_g1;
  const bool potential = cfg.record_potential;
  return [&p, settings, l_g1, potential](const SolverState& s, IterateRecord& rec) {
    const Tangent gF =
        p.second_order ? hypergrad(p, s.x, settings) : fd_grad_F(p, s.x, settings);
    rec.grad_F_sq = inner(p.upper, s.x, gF, gF);
    if (potential) {
      const Point ystar = solve_lower(p, s.x, settings);
      const Point ylam = solve_penalized(p, s.x, s.lambda, settings, ystar);
      const double di = dist(p.lower, s.y, ylam);
      const double dj = dist(p.lower, s.z, ystar);
      rec.I_k = di * di;
      rec.J_k = dj * dj;
      // F* (known or empirical) is subtracted in a post-pass
      rec.V_k = p.f(s.x, ystar) + s.lambda * l_g1 * (di * di) +
                0.5 * s.lambda * l_g1 * (dj * dj);
    }
  };
}

json cell_metadata(const PreparedExperiment& prep, const ExperimentConfig& cfg, long K,
                   int seed_index, std::uint64_t seed) {
  json meta;
  meta["version"] = kVersion;
  meta["problem"] = {{"name", prep.problem.name}, {"params", prep.problem.params}};
  meta["schedule"] = prep.schedule.to_json();
  meta["constants"] = prep.sc.to_json();
  meta["ledger"] = prep.ledger.to_json();
  meta["regime"] = regime_name(cfg.regime);
  meta["noise"] = {{"sigma_f", cfg.sigma_f}, {"sigma_g", cfg.sigma_g}};
  meta["K"] = K;
  meta["seed_index"] = seed_index;
  meta["seed"] = seed;
  meta["stride"] = cfg.stride;
  if (prep.problem.known_optimum)
    meta["F_star"] = prep.problem.known_optimum->F_star;
  else
    meta["F_star_mode"] = "empirical";
  return meta;
}

}  // namespace

CellResult run_cell(const PreparedExperiment& prep, const ExperimentConfig& cfg, long K,
                    int seed_index, const std::filesystem::path& out_path) {
  CellResult cell;
  cell.K = K;
  cell.seed_index = seed_index;
  cell.seed = rng::derive_key(cfg.base_seed, static_cast<std::uint64_t>(K),
                              static_cast<std::uint64_t>(seed_index), 0xCE11);

  RunOptions opts;
  opts.diagnostic_stride = cfg.stride;
  if (cfg.stride > 0) opts.diagnostics = make_diagnostics(prep, cfg);

  RunResult res = run(first_order_view(prep.problem), prep.schedule, K, prep.init.x0,
                      prep.init.y0, prep.init.z0, cell.seed, prep.noise, opts);

  if (cfg.record_potential) {
    double f_star;
    if (prep.problem.known_optimum) {
      f_star = prep.problem.known_optimum->F_star;
    } else {
      f_star = std::numeric_limits<double>::infinity();
      for (const auto& r : res.records)
        if (r.V_k && r.I_k && r.J_k)
          f_star = std::min(f_star, *r.V_k - r.lambda * prep.sc.l_g1 * (*r.I_k) -
                                        0.5 * r.lambda * prep.sc.l_g1 * (*r.J_k));
      if (!std::isfinite(f_star)) f_star = 0.0;
    }
    for (auto& r : res.records)
      if (r.V_k) *r.V_k -= f_star;
  }

  const long burn = static_cast<long>(std::floor(cfg.burn_in * static_cast<double>(K)));
  double acc = 0;
  long n = 0;
  for (const auto& r : res.records) {
    if (r.k < burn || !r.grad_F_sq) continue;
    acc += *r.grad_F_sq;
    ++n;
  }
  cell.mean_stat = n > 0 ? acc / static_cast<double>(n) : std::nan("");
  cell.samples = n;

  if (!out_path.empty())
    write_trajectory(out_path, cell_metadata(prep, cfg, K, seed_index, cell.seed), res.records);
  return cell;
}

std::vector<CellResult> run_grid(const PreparedExperiment& prep, const ExperimentConfig& cfg,
                                 const std::filesystem::path& out_dir) {
  struct Cell {
    long K;
    int seed_index;
  };
  std::vector<Cell> cells;
  for (long K : cfg.k_grid)
    for (int s = 0; s < cfg.seeds; ++s) cells.push_back({K, s});

  std::vector<CellResult> results(cells.size());
  std::vector<std::string> errors(cells.size());

  int threads = cfg.workers;
#ifdef _OPENMP
  if (threads <= 0) threads = omp_get_max_threads();
#else
  threads = 1;
#endif

#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) num_threads(threads)
#endif
  for (long i = 0; i < static_cast<long>(cells.size()); ++i) {
    try {
      fs::path out_path;
      if (!out_dir.empty()) {
        std::ostringstream name;
        name << "K" << cells[i].K << "_s" << cells[i].seed_index << ".csv";
        out_path = out_dir / name.str();
      }
      results[i] = run_cell(prep, cfg, cells[i].K, cells[i].seed_index, out_path);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  }
  for (size_t i = 0; i < errors.size(); ++i)
    if (!errors[i].empty()) {
      std::ostringstream os;
      os << "cell K=" << cells[i].K << " seed=" << cells[i].seed_index
         << " failed: " << errors[i];
      fail(os.str());
    }
  return results;
}

std::vector<KSummary> summarize(const std::vector<CellResult>& cells) {
  std::vector<KSummary> out;
  for (const CellResult& c : cells) {
    if (out.empty() || out.back().K != c.K) out.push_back({c.K, 0, 0, 0});
    KSummary& s = out.back();
    s.mean_stat += c.mean_stat;
    ++s.cells;
  }
  size_t idx = 0;
  for (KSummary& s : out) {
    s.mean_stat /= static_cast<double>(s.cells);
    double var = 0;
    for (size_t j = idx; j < idx + static_cast<size_t>(s.cells); ++j)
      var += (cells[j].mean_stat - s.mean_stat) * (cells[j].mean_stat - s.mean_stat);
    idx += static_cast<size_t>(s.cells);
    if (s.cells > 1) {
      var /= static_cast<double>(s.cells - 1);
      s.sem = std::sqrt(var / static_cast<double>(s.cells));
    }
  }
  return out;
}

LineFit least_squares(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) fail("least_squares needs >= 2 points");
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  LineFit fit;
  const double denom = n * sxx - sx * sx;
  if (std::abs(denom) < 1e-300) fail("least_squares: degenerate abscissae");
  fit.slope = (n * sxy - sx * sy) / denom;
  fit.intercept = (sy - fit.slope * sx) / n;
  double ss_res = 0, ss_tot = 0;
  const double ybar = sy / n;
  for (size_t i = 0; i < x.size(); ++i) {
    const double pred = fit.intercept + fit.slope * x[i];
    ss_res += (y[i] - pred) * (y[i] - pred);
    ss_tot += (y[i] - ybar) * (y[i] - ybar);
  }
  fit.r2 = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
  return fit;
}

double regime_target_exponent(Regime r) {
  switch (r) {
    case Regime::BothNoisy: return -2.0 / 7.0;
    case Regime::FOnly: return -2.0 / 5.0;
    case Regime::Deterministic: return -2.0 / 3.0;
  }
  fail("unknown regime");
}

RateFitReport fit_rate(const std::vector<KSummary>& per_k, double target, double tol,
                       bool log_correction) {
  if (per_k.size() < 4) fail("fit_rate needs at least 4 K-grid points");
  std::vector<double> x, y;
  for (const KSummary& s : per_k) {
    if (!(s.mean_stat > 0) || !std::isfinite(s.mean_stat))
      fail("fit_rate: stationarity estimates must be positive and finite");
    const double corrected =
        log_correction ? s.mean_stat / std::log(static_cast<double>(s.K)) : s.mean_stat;
    x.push_back(std::log(static_cast<double>(s.K)));
    y.push_back(std::log(corrected));
  }
  const LineFit fit = least_squares(x, y);
  RateFitReport rep;
  rep.slope = fit.slope;
  rep.intercept = fit.intercept;
  rep.r2 = fit.r2;
  rep.target = target;
  rep.tol = tol;
  rep.log_correction = log_correction;
  rep.pass = std::abs(fit.slope - target) <= tol;
  rep.per_k = per_k;
  return rep;
}

json RateFitReport::to_json() const {
  json rows = json::array();
  for (const KSummary& s : per_k)
    rows.push_back({{"K", s.K}, {"mean_stat", s.mean_stat}, {"sem", s.sem}, {"cells", s.cells}});
  return json{{"slope", slope},     {"intercept", intercept},
              {"r2", r2},           {"target", target},
              {"tol", tol},         {"pass", pass},
              {"log_correction", log_correction}, {"per_K", rows}};
}

namespace {

void write_plots(const fs::path& dir, const std::vector<KSummary>& summaries,
                 const RateFitReport* fit) {
  if (!summaries.empty()) {
    LinePlot plot;
    plot.title = "mean ||grad F(x_R)||^2 vs K";
    plot.x_label = "K";
    plot.y_label = "mean stationarity";
    plot.log_x = plot.log_y = true;
    PlotSeries measured{"measured", {}, {}};
    for (const auto& s : summaries) {
      measured.x.push_back(static_cast<double>(s.K));
      measured.y.push_back(s.mean_stat);
    }
    plot.series.push_back(measured);
    if (fit) {
      PlotSeries fitted{"fit", {}, {}};
      for (const auto& s : summaries) {
        const double lk = std::log(static_cast<double>(s.K));
        double v = std::exp(fit->intercept + fit->slope * lk);
        if (fit->log_correction) v *= lk;
        fitted.x.push_back(static_cast<double>(s.K));
        fitted.y.push_back(v);
      }
      plot.series.push_back(fitted);
    }
    write_svg(dir / "stationarity_vs_K.svg", plot);
  }

  // lambda growth and potential decay from the largest-K, first-seed cell
  fs::path traj;
  long best_k = -1;
  for (const auto& entry : fs::directory_iterator(dir / "runs")) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("K", 0) != 0 || name.find("_s0.csv") == std::string::npos) continue;
    const long K = std::stol(name.substr(1));
    if (K > best_k) {
      best_k = K;
      traj = entry.path();
    }
  }
  if (best_k < 0) return;
  const Trajectory t = read_trajectory(traj);
  LinePlot lgp;
  lgp.title = "multiplier growth";
  lgp.x_label = "k";
  lgp.y_label = "lambda_k";
  lgp.log_x = lgp.log_y = true;
  PlotSeries ls{"lambda_k", {}, {}};
  PlotSeries vs{"V_k", {}, {}};
  for (const auto& r : t.records) {
    ls.x.push_back(static_cast<double>(r.k + 1));
    ls.y.push_back(r.lambda);
    if (r.V_k) {
      vs.x.push_back(static_cast<double>(r.k + 1));
      vs.y.push_back(*r.V_k);
    }
  }
  lgp.series.push_back(ls);
  write_svg(dir / "lambda_growth.svg", lgp);
  if (!vs.x.empty()) {
    LinePlot vp;
    vp.title = "potential decay";
    vp.x_label = "k";
    vp.y_label = "V_k";
    vp.log_x = true;
    vp.log_y = true;
    vp.series.push_back(vs);
    write_svg(dir / "potential_decay.svg", vp);
  }
}

json summary_json(const ExperimentConfig& cfg, const PreparedExperiment* prep,
                  const std::vector<KSummary>& summaries, const RateFitReport* fit) {
  json j;
  j["version"] = kVersion;
  j["config"] = cfg.to_json();
  // execution knobs must not perturb reproducible summary bytes
  j["config"].erase("force");
  j["config"].erase("workers");
  if (prep) {
    j["schedule"] = prep->schedule.to_json();
    j["ledger"] = prep->ledger.to_json();
    j["constants"] = prep->sc.to_json();
    j["schedule_warnings"] = prep->schedule_warnings;
  }
  json rows = json::array();
  for (const auto& s : summaries)
    rows.push_back({{"K", s.K}, {"mean_stat", s.mean_stat}, {"sem", s.sem}, {"cells", s.cells}});
  j["per_K"] = rows;
  if (fit) j["rate_fit"] = fit->to_json();
  return j;
}

}  // namespace

void run_experiment(const ExperimentConfig& cfg) {
  if (cfg.out_dir.empty()) config_fail("output directory is required for run_experiment");
  const fs::path dir(cfg.out_dir);
  if (fs::exists(dir / "summary.json") || fs::exists(dir / "runs")) {
    if (!cfg.force)
      fail("output directory " + dir.string() + " already holds results (use --force)");
    fs::remove_all(dir / "runs");
    fs::remove(dir / "summary.json");
  }
  std::error_code ec;
  fs::create_directories(dir / "runs", ec);
  if (ec || !fs::is_directory(dir / "runs"))
    fail("cannot create output directory " + dir.string());
  {  // fail before compute if the directory is not writable
    std::ofstream probe(dir / ".writable");
    if (!probe) fail("output directory " + dir.string() + " is not writable");
  }
  fs::remove(dir / ".writable");

  const PreparedExperiment prep = prepare(cfg);
  for (const auto& w : prep.schedule_warnings)
    std::cerr << "warning: schedule condition violated: " << w << "\n";

  json meta;
  meta["version"] = kVersion;
  meta["config"] = cfg.to_json();
  meta["schedule"] = prep.schedule.to_json();
  meta["ledger"] = prep.ledger.to_json();
  meta["constants"] = prep.sc.to_json();
  meta["schedule_warnings"] = prep.schedule_warnings;
  write_text(dir / "meta.json", meta.dump(2) + "\n");

  const std::vector<CellResult> cells = run_grid(prep, cfg, dir / "runs");
  const std::vector<KSummary> summaries = summarize(cells);

  RateFitReport fit;
  const RateFitReport* fit_ptr = nullptr;
  if (summaries.size() >= 4 && cfg.stride > 0) {
    fit = fit_rate(summaries, regime_target_exponent(cfg.regime), 0.15, cfg.log_correction);
    fit_ptr = &fit;
  }
  write_text(dir / "summary.json", summary_json(cfg, &prep, summaries, fit_ptr).dump(2) + "\n");
  write_plots(dir, summaries, fit_ptr);
}

void write_report(const fs::path& dir) {
  const fs::path meta_path = dir / "meta.json";
  if (!fs::exists(meta_path)) fail("no meta.json under " + dir.string());
  std::ifstream in(meta_path);
  json meta = json::parse(in);
  const ExperimentConfig cfg = ExperimentConfig::from_json(meta.at("config"));
  const PreparedExperiment prep = prepare(cfg);

  std::vector<CellResult> cells;
  for (long K : cfg.k_grid) {
    for (int s = 0; s < cfg.seeds; ++s) {
      std::ostringstream name;
      name << "K" << K << "_s" << s << ".csv";
      const fs::path p = dir / "runs" / name.str();
      if (!fs::exists(p)) fail("missing trajectory " + p.string());
      const Trajectory t = read_trajectory(p);
      CellResult cell;
      cell.K = K;
      cell.seed_index = s;
      cell.seed = t.metadata.value("seed", std::uint64_t{0});
      const long burn = static_cast<long>(std::floor(cfg.burn_in * static_cast<double>(K)));
      double acc = 0;
      long n = 0;
      for (const auto& r : t.records) {
        if (r.k < burn || !r.grad_F_sq) continue;
        acc += *r.grad_F_sq;
        ++n;
      }
      cell.mean_stat = n > 0 ? acc / static_cast<double>(n) : std::nan("");
      cell.samples = n;
      cells.push_back(cell);
    }
  }
  const std::vector<KSummary> summaries = summarize(cells);
  RateFitReport fit;
  const RateFitReport* fit_ptr = nullptr;
  if (summaries.size() >= 4 && cfg.stride > 0) {
    fit = fit_rate(summaries, regime_target_exponent(cfg.regime), 0.15, cfg.log_correction);
    fit_ptr = &fit;
  }
  write_text(dir / "summary.json", summary_json(cfg, &prep, summaries, fit_ptr).dump(2) + "\n");
  write_plots(dir, summaries, fit_ptr);
}

void ValidationReport::add(const std::string& name, bool hard, bool pass,
                           const std::string& detail) {
  items.push_back({name, hard, pass, detail});
}

void ValidationReport::merge(const ValidationReport& other) {
  items.insert(items.end(), other.items.begin(), other.items.end());
}

bool ValidationReport::hard_pass() const {
  for (const auto& i : items)
    if (i.hard && !i.pass) return false;
  return true;
}

int ValidationReport::failures(bool hard_only) const {
  int n = 0;
  for (const auto& i : items)
    if (!i.pass && (!hard_only || i.hard)) ++n;
  return n;
}

}  // namespace rf2sa
