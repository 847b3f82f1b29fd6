#include "rf2sa/harness.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidationFailure = 1;
constexpr int kExitBadConfig = 2;
constexpr int kExitRuntimeError = 3;

rf2sa::ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot open " + path);
  rf2sa::json j = rf2sa::json::parse(in);
  return rf2sa::ExperimentConfig::from_json(j);
}

struct CommonFlags {
  std::string out;
  int workers = -1;
  long stride = -1;
  std::int64_t seed = -1;
  bool force = false;
};

void apply_flags(rf2sa::ExperimentConfig& cfg, const CommonFlags& flags) {
  if (!flags.out.empty()) cfg.out_dir = flags.out;
  if (flags.workers >= 0) cfg.workers = flags.workers;
  if (flags.stride >= 0) cfg.stride = flags.stride;
  if (flags.seed >= 0) cfg.base_seed = static_cast<std::uint64_t>(flags.seed);
  if (flags.force) cfg.force = true;
}

void print_summary(const rf2sa::ExperimentConfig& cfg) {
  std::ifstream in(std::filesystem::path(cfg.out_dir) / "summary.json");
  rf2sa::json j = rf2sa::json::parse(in);
  std::cout << "wrote " << cfg.out_dir << "\n";
  for (const auto& row : j.at("per_K"))
    std::cout << "  K=" << row.at("K").get<long>() << "  mean ||grad F||^2 = "
              << row.at("mean_stat").get<double>() << " (cells " << row.at("cells").get<int>()
              << ")\n";
  if (j.contains("rate_fit")) {
    const auto& f = j.at("rate_fit");
    std::cout << "  fitted slope " << f.at("slope").get<double>() << " (target "
              << f.at("target").get<double>() << " +/- " << f.at("tol").get<double>()
              << ", R^2 " << f.at("r2").get<double>() << ") -> "
              << (f.at("pass").get<bool>() ? "PASS" : "FAIL") << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"RF2SA: penalty-based fully first-order bilevel optimization on Riemannian "
               "manifolds"};
  app.require_subcommand(1);

  std::string config_path;
  std::string report_dir;
  CommonFlags flags;
  bool check_fit = false;
  std::vector<std::string> scopes;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("config", config_path, "experiment config (JSON)")->required();
    sub->add_option("--out", flags.out, "override output directory");
    sub->add_option("--workers", flags.workers, "worker pool size (0 = all cores)");
    sub->add_option("--stride", flags.stride, "diagnostic stride override");
    sub->add_option("--seed", flags.seed, "base seed override");
    sub->add_flag("--force", flags.force, "overwrite an existing output directory");
  };

  CLI::App* cmd_run = app.add_subcommand("run", "execute the configured runs");
  add_common(cmd_run);
  CLI::App* cmd_sweep =
      app.add_subcommand("sweep", "execute the K grid and fit the convergence rate");
  add_common(cmd_sweep);
  cmd_sweep->add_flag("--check", check_fit, "exit nonzero when the fitted slope misses target");
  CLI::App* cmd_validate = app.add_subcommand("validate", "run the validation suites");
  cmd_validate->add_option("--scope", scopes,
                           "restrict to scopes: manifold problem schedule solver oracle bounds");
  CLI::App* cmd_report = app.add_subcommand("report", "regenerate summary and plots from CSVs");
  cmd_report->add_option("dir", report_dir, "experiment output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitBadConfig;
  }

  try {
    if (cmd_run->parsed() || cmd_sweep->parsed()) {
      rf2sa::ExperimentConfig cfg;
      try {
        cfg = load_config(config_path);
        apply_flags(cfg, flags);
      } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitBadConfig;
      }
      rf2sa::run_experiment(cfg);
      print_summary(cfg);
      if (cmd_sweep->parsed() && check_fit) {
        std::ifstream in(std::filesystem::path(cfg.out_dir) / "summary.json");
        rf2sa::json j = rf2sa::json::parse(in);
        if (!j.contains("rate_fit") || !j.at("rate_fit").at("pass").get<bool>())
          return kExitValidationFailure;
      }
      return kExitOk;
    }
    if (cmd_validate->parsed()) {
      const rf2sa::ValidationReport rep = rf2sa::validate_all(scopes);
      for (const auto& item : rep.items)
        std::cout << (item.pass ? "[ ok ]" : (item.hard ? "[FAIL]" : "[warn]")) << " "
                  << item.name << ": " << item.detail << "\n";
      const int soft = rep.failures(false) - rep.failures(true);
      std::cout << rep.items.size() << " checks, " << rep.failures(true) << " hard failures, "
                << soft << " warnings\n";
      return rep.hard_pass() ? kExitOk : kExitValidationFailure;
    }
    if (cmd_report->parsed()) {
      rf2sa::write_report(report_dir);
      std::cout << "regenerated summary and plots under " << report_dir << "\n";
      return kExitOk;
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitBadConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntimeError;
  }
  return kExitOk;
}
