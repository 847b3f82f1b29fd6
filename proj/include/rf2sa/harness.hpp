#pragma once

#include "rf2sa/oracle.hpp"
#include "rf2sa/problems.hpp"
#include "rf2sa/schedule.hpp"
#include "rf2sa/solver.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace rf2sa {

extern const char* const kVersion;

/// Declarative experiment description (the JSON config file schema; see the
/// README for field documentation).
struct ExperimentConfig {
  std::string problem = "quadratic-euclidean";
  json problem_params = json::object();
  Regime regime = Regime::Deterministic;
  double sigma_f = 0, sigma_g = 0;
  ScheduleOverrides schedule;
  std::vector<long> k_grid;
  int seeds = 1;
  std::uint64_t base_seed = 1;
  long stride = 1;          // diagnostic stride; 0 disables diagnostics
  double burn_in = 0.10;    // fraction of iterates excluded from the R-average
  bool log_correction = true;
  bool record_potential = false;  // also log I_k, J_k, V_k
  json init = json::object();
  OracleSettings oracle;
  std::string out_dir;
  bool force = false;
  int workers = 0;  // 0 = library default

  static ExperimentConfig from_json(const json& j);
  json to_json() const;
};

/// Problem + derived schedule, ready to run.
struct PreparedExperiment {
  BilevelProblem problem;
  SmoothnessConstants sc;
  ConstantsLedger ledger;
  ScheduleConfig schedule;
  NoiseSpec noise;
  InitialPoints init;
  std::vector<std::string> schedule_warnings;
};

PreparedExperiment prepare(const ExperimentConfig& cfg);

struct CellResult {
  long K = 0;
  int seed_index = 0;
  std::uint64_t seed = 0;
  double mean_stat = 0;  // mean oracle stationarity over iterates past burn-in
  long samples = 0;
};

struct KSummary {
  long K = 0;
  double mean_stat = 0;
  double sem = 0;
  int cells = 0;
};

struct RateFitReport {
  double slope = 0, intercept = 0, r2 = 0;
  double target = 0, tol = 0.15;
  bool pass = false;
  bool log_correction = true;
  std::vector<KSummary> per_k;

  json to_json() const;
};

/// Runs one (K, seed) cell; writes the trajectory CSV when out_path is
/// nonempty. Fully deterministic given the config.
CellResult run_cell(const PreparedExperiment& prep, const ExperimentConfig& cfg, long K,
                    int seed_index, const std::filesystem::path& out_path);

/// Fan-out over all (K, seed) cells; out_dir may be empty for in-memory use.
/// Cells are independent and parallelized over a worker pool.
std::vector<CellResult> run_grid(const PreparedExperiment& prep, const ExperimentConfig& cfg,
                                 const std::filesystem::path& out_dir);

std::vector<KSummary> summarize(const std::vector<CellResult>& cells);

/// Least-squares slope of log(mean stationarity) vs log K; when
/// log_correction is set the means are divided by log K first. Requires at
/// least 4 grid points.
RateFitReport fit_rate(const std::vector<KSummary>& per_k, double target, double tol,
                       bool log_correction);

double regime_target_exponent(Regime r);  // -2/7, -2/5, -2/3

/// Full pipeline with persistence: refuses to overwrite an existing artifact
/// directory unless cfg.force; writes meta.json, runs/*.csv, summary.json and
/// SVG plots.
void run_experiment(const ExperimentConfig& cfg);

/// Regenerates summary.json and the plots from the stored CSVs in `dir`.
void write_report(const std::filesystem::path& dir);

/// Plain least squares of y against x; returns {slope, intercept, r2}.
struct LineFit {
  double slope = 0, intercept = 0, r2 = 0;
};
LineFit least_squares(const std::vector<double>& x, const std::vector<double>& y);

// --- validation suites (used by the `validate` subcommand, the unit tests
// --- and the acceptance runner)

struct ValidationItem {
  std::string name;
  bool hard = true;
  bool pass = false;
  std::string detail;
};

struct ValidationReport {
  std::vector<ValidationItem> items;

  void add(const std::string& name, bool hard, bool pass, const std::string& detail);
  void merge(const ValidationReport& other);
  bool hard_pass() const;
  int failures(bool hard_only = true) const;
};

ValidationReport validate_manifolds(long cases_per_manifold = 1000);
ValidationReport validate_problems(int pairs = 100);
ValidationReport validate_schedules(long k_max = 100000);
ValidationReport validate_solver();
ValidationReport validate_oracle();
ValidationReport validate_bound_suite(int samples_per_problem = 100);

/// Runs the scoped suites (empty = all). Scope names: manifold, problem,
/// schedule, solver, oracle, bounds.
ValidationReport validate_all(const std::vector<std::string>& scopes = {});

}  // namespace rf2sa
