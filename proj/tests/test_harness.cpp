#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "rf2sa/csv.hpp"
#include "rf2sa/harness.hpp"
#include "rf2sa/oracle.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace rf2sa;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const char* tag) {
  const fs::path p = fs::temp_directory_path() / (std::string("rf2sa_test_") + tag);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// CSV text without the elapsed_ms column (the only timing-dependent field)
std::string strip_elapsed(const std::string& text) {
  std::stringstream in(text), out;
  std::string line;
  while (std::getline(in, line)) {
    const size_t cut = line.rfind(',');
    out << (line.rfind("# ", 0) == 0 ? line : line.substr(0, cut)) << "\n";
  }
  return out.str();
}

ExperimentConfig tiny_config(const fs::path& out) {
  ExperimentConfig cfg;
  cfg.problem = "quadratic-euclidean";
  cfg.regime = Regime::Deterministic;
  cfg.schedule.c_xi = 1.0;
  cfg.k_grid = {128};
  cfg.seeds = 1;
  cfg.stride = 4;
  cfg.out_dir = out.string();
  return cfg;
}

}  // namespace

TEST_CASE("built-in problem construction and parameter validation") {
  CHECK_THROWS(builtin_problem("no-such-problem"));

  json bad_h;
  bad_h["h_eigs"] = {1.0, 0.0, 2.0, 1.0, 1.0};
  CHECK_THROWS(builtin_problem("sphere-upper", bad_h));

  json bad_spd;
  bad_spd["n"] = 2;
  bad_spd["components"] = 1;
  bad_spd["matrices"] = json::array();
  bad_spd["matrices"].push_back(json::array({1.0, 0.0, 0.0, -1.0}));
  CHECK_THROWS(builtin_problem("spd-barycenter", bad_spd));

  // A = B collapses the bilevel structure: F(x) = 0.5 |x - xbar|^2, x* = xbar
  json eq;
  eq["b_equals_a"] = true;
  const BilevelProblem p = builtin_problem("quadratic-euclidean", eq);
  REQUIRE(p.known_optimum.has_value());
  OracleSettings st;
  const Tangent g = fd_grad_F(p, p.known_optimum->x_star, st);
  CHECK(norm(p.upper, p.known_optimum->x_star, g) <= 1e-6);
}

TEST_CASE("sphere-upper lower solve matches the linear-system oracle") {
  const BilevelProblem p = builtin_problem("sphere-upper");
  OracleSettings st;
  rng::Stream s(51);
  const Point x = random_point(p.upper, s, 1.0);

  // reconstruct H and Cx from the gradient oracle: grad_gy(x, y) = Hy - Cx
  const int m = p.lower.ambient;
  const Point y0 = make_point(p.lower, Vec::Zero(m));
  const Vec cx = -grad(p, Which::gy, x, y0).vec;
  Mat h(m, m);
  for (int j = 0; j < m; ++j) {
    Vec e = Vec::Zero(m);
    e[j] = 1.0;
    h.col(j) = grad(p, Which::gy, x, make_point(p.lower, e)).vec + cx;
  }
  const Vec y_lin = h.ldlt().solve(cx);
  const Point y_solver = solve_lower(p, x, st);
  CHECK((y_solver.coords - y_lin).norm() <= 1e-8);
}

TEST_CASE("spd-barycenter with identical anchors returns that anchor") {
  json params;
  params["n"] = 2;
  params["components"] = 3;
  params["matrices"] = json::array();
  for (int i = 0; i < 3; ++i) params["matrices"].push_back(json::array({1.5, 0.2, 0.2, 0.9}));
  const BilevelProblem p = builtin_problem("spd-barycenter", params);
  OracleSettings st;
  rng::Stream s(53);
  for (int i = 0; i < 3; ++i) {
    const Point x = random_point(p.upper, s, 1.0);
    const Point y = solve_lower(p, x, st);
    Vec a(4);
    a << 1.5, 0.2, 0.2, 0.9;
    CHECK((y.coords - a).cwiseAbs().maxCoeff() <= 1e-8);
  }
}

TEST_CASE("fit_rate recovers synthetic exponents") {
  std::vector<KSummary> pure;
  for (long K : {256L, 512L, 1024L, 2048L, 4096L})
    pure.push_back({K, std::pow(double(K), -2.0 / 3.0), 0, 1});
  const RateFitReport r1 = fit_rate(pure, -2.0 / 3.0, 0.15, false);
  CHECK(std::abs(r1.slope + 2.0 / 3.0) <= 1e-12);
  CHECK(r1.pass);
  CHECK(r1.r2 == doctest::Approx(1.0));

  std::vector<KSummary> logged;
  for (long K : {256L, 512L, 1024L, 2048L, 4096L})
    logged.push_back({K, std::log(double(K)) * std::pow(double(K), -2.0 / 7.0), 0, 1});
  const RateFitReport r2 = fit_rate(logged, -2.0 / 7.0, 0.15, true);
  CHECK(std::abs(r2.slope + 2.0 / 7.0) <= 1e-6);

  std::vector<KSummary> short_grid(pure.begin(), pure.begin() + 3);
  CHECK_THROWS(fit_rate(short_grid, -2.0 / 3.0, 0.15, false));
}

TEST_CASE("trajectory CSV round-trips records and metadata") {
  const fs::path dir = fresh_dir("csv");
  fs::create_directories(dir);
  std::vector<IterateRecord> recs;
  for (int k = 0; k < 5; ++k) {
    IterateRecord r;
    r.k = k;
    r.lambda = 2.0 + 0.1 * k;
    r.alpha = 1e-3 / (k + 1);
    r.gamma = 1e-2;
    r.beta = r.alpha * r.lambda;
    r.delta = 1e-4;
    if (k % 2 == 0) r.grad_F_sq = 0.5 / (k + 1);
    r.dist_x_step = 1e-5;
    r.elapsed_ms = 0.25;
    recs.push_back(r);
  }
  json meta = {{"K", 5}, {"seed", 7}};
  write_trajectory(dir / "t.csv", meta, recs);
  const Trajectory t = read_trajectory(dir / "t.csv");
  REQUIRE(t.records.size() == recs.size());
  CHECK(t.metadata.at("seed") == 7);
  for (size_t i = 0; i < recs.size(); ++i) {
    CHECK(t.records[i].lambda == recs[i].lambda);
    CHECK(t.records[i].grad_F_sq.has_value() == recs[i].grad_F_sq.has_value());
    if (recs[i].grad_F_sq) CHECK(*t.records[i].grad_F_sq == *recs[i].grad_F_sq);
  }
  fs::remove_all(dir);
}

TEST_CASE("run_experiment: smallest run, overwrite protection, determinism") {
  const fs::path dir = fresh_dir("exp");
  ExperimentConfig cfg = tiny_config(dir);
  run_experiment(cfg);

  CHECK(fs::exists(dir / "summary.json"));
  CHECK(fs::exists(dir / "meta.json"));
  CHECK(fs::exists(dir / "runs" / "K128_s0.csv"));
  CHECK(fs::exists(dir / "stationarity_vs_K.svg"));
  CHECK(fs::exists(dir / "lambda_growth.svg"));

  const json summary = json::parse(slurp(dir / "summary.json"));
  REQUIRE(summary.at("per_K").size() == 1);
  const double mean_stat = summary.at("per_K").at(0).at("mean_stat").get<double>();
  CHECK(mean_stat >= 0.0);
  CHECK(std::isfinite(mean_stat));

  // overwrite refused without force
  CHECK_THROWS(run_experiment(cfg));

  // rerun with force reproduces the numeric columns byte for byte
  const std::string first = strip_elapsed(slurp(dir / "runs" / "K128_s0.csv"));
  const std::string first_summary = slurp(dir / "summary.json");
  cfg.force = true;
  run_experiment(cfg);
  CHECK(strip_elapsed(slurp(dir / "runs" / "K128_s0.csv")) == first);
  CHECK(slurp(dir / "summary.json") == first_summary);
  fs::remove_all(dir);
}

TEST_CASE("report regenerates the summary from stored CSVs") {
  const fs::path dir = fresh_dir("report");
  ExperimentConfig cfg = tiny_config(dir);
  run_experiment(cfg);
  const std::string original = slurp(dir / "summary.json");
  fs::remove(dir / "summary.json");
  write_report(dir);
  CHECK(slurp(dir / "summary.json") == original);
  fs::remove_all(dir);
}

TEST_CASE("validate_all respects scope filters") {
  const ValidationReport rep = validate_all({"manifold"});
  CHECK(!rep.items.empty());
  for (const auto& item : rep.items) CHECK(item.name.rfind("manifold/", 0) == 0);
}

TEST_CASE("experiment config parsing and validation") {
  json j;
  j["problem"] = {{"name", "quadratic-euclidean"}};
  j["K_grid"] = {128, 256};
  const ExperimentConfig cfg = ExperimentConfig::from_json(j);
  CHECK(cfg.k_grid.size() == 2);
  CHECK(cfg.regime == Regime::Deterministic);

  json bad = j;
  bad["K_grid"] = {256, 128};
  CHECK_THROWS_AS(ExperimentConfig::from_json(bad), std::invalid_argument);
  json bad2 = j;
  bad2["seeds"] = 0;
  CHECK_THROWS_AS(ExperimentConfig::from_json(bad2), std::invalid_argument);
  json bad3 = j;
  bad3.erase("K_grid");
  CHECK_THROWS_AS(ExperimentConfig::from_json(bad3), std::invalid_argument);

  // round trip
  const ExperimentConfig back = ExperimentConfig::from_json(cfg.to_json());
  CHECK(back.k_grid == cfg.k_grid);
  CHECK(back.base_seed == cfg.base_seed);
}
