#include "rf2sa/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace rf2sa {

namespace {

[[noreturn]] void fail(const std::string& what) { throw std::runtime_error("schedule: " + what); }

}  // namespace

json ConstantsLedger::to_json() const {
  return json{{"l_F1", l_F1},           {"l_lambda0", l_lambda0}, {"l_lambda1", l_lambda1},
              {"l_star0", l_star0},     {"l_star1", l_star1},     {"C_lambda", C_lambda},
              {"M_f", M_f},             {"M_g", M_g},             {"M_big", M_big},
              {"lambda0", lambda0_used}};
}

ConstantsLedger derive_constants(const SmoothnessConstants& sc, double lambda0) {
  sc.validate();
  const double threshold = 2.0 * sc.l_f1 / sc.mu_g;
  if (lambda0 < threshold * (1.0 - 1e-12))
    fail("lambda0 below the strong-convexity threshold 2 l_f1 / mu_g");
  ConstantsLedger c;
  c.lambda0_used = lambda0;
  c.l_lambda0 = 3.0 * sc.l_g1 / sc.mu_g;
  c.l_star0 = 1.0 + c.l_lambda0;
  c.M_f = sc.l_f0 * sc.l_f0 + sc.sigma_f * sc.sigma_f;
  c.M_g = sc.l_g0 * sc.l_g0 + sc.sigma_g * sc.sigma_g;
  c.M_big = std::max(c.M_f, c.M_g);
  c.C_lambda = (4.0 * sc.l_f0 * sc.l_g1 / (sc.mu_g * sc.mu_g)) *
               (sc.l_f1 + 2.0 * sc.l_f0 * sc.l_g2 / sc.mu_g);
  c.l_F1 = c.l_star0 * (sc.l_f1 + sc.l_g1 * sc.l_g1 / sc.mu_g +
                        2.0 * sc.l_f0 * sc.l_g1 * sc.l_g2 / (sc.mu_g * sc.mu_g));
  const double mu3 = sc.mu_g * sc.mu_g * sc.mu_g;
  auto l_lambda1_at = [&](double lambda) {
    const double f2_term = (sc.l_f2 == 0.0) ? 0.0 : sc.l_f2 / lambda;
    return 32.0 * (sc.l_g2 + f2_term) * sc.l_g1 * sc.l_g1 / mu3;
  };
  c.l_lambda1 = l_lambda1_at(lambda0);
  if (sc.l_f2 > 0.0 && threshold <= 0.0)
    fail("l_star1 is unbounded when l_f2 > 0 and l_f1 = 0");
  c.l_star1 = (sc.l_f2 == 0.0) ? l_lambda1_at(1.0) : l_lambda1_at(threshold);
  return c;
}

const char* regime_name(Regime r) {
  switch (r) {
    case Regime::BothNoisy: return "both_noisy";
    case Regime::FOnly: return "f_only";
    case Regime::Deterministic: return "deterministic";
  }
  return "?";
}

Regime regime_from_string(const std::string& s) {
  if (s == "both_noisy") return Regime::BothNoisy;
  if (s == "f_only") return Regime::FOnly;
  if (s == "deterministic") return Regime::Deterministic;
  fail("unknown regime '" + s + "'");
}

RegimeExponents regime_exponents(Regime r) {
  switch (r) {
    case Regime::BothNoisy: return {5.0 / 7.0, 4.0 / 7.0};
    case Regime::FOnly: return {3.0 / 5.0, 2.0 / 5.0};
    case Regime::Deterministic: return {1.0 / 3.0, 0.0};
  }
  fail("unknown regime");
}

bool ScheduleOverrides::any() const {
  return a || c || xi || lambda0 || k0 || c_alpha || c_gamma || c_xi || T;
}

json ScheduleOverrides::to_json() const {
  json j = json::object();
  auto put = [&](const char* k, const std::optional<double>& v) {
    if (v) j[k] = *v;
  };
  put("a", a);
  put("c", c);
  put("xi", xi);
  put("lambda0", lambda0);
  put("k0", k0);
  put("c_alpha", c_alpha);
  put("c_gamma", c_gamma);
  put("c_xi", c_xi);
  if (T) j["T"] = *T;
  return j;
}

ScheduleOverrides ScheduleOverrides::from_json(const json& j) {
  ScheduleOverrides ov;
  auto get = [&](const char* k, std::optional<double>& v) {
    if (j.contains(k)) v = j.at(k).get<double>();
  };
  get("a", ov.a);
  get("c", ov.c);
  get("xi", ov.xi);
  get("lambda0", ov.lambda0);
  get("k0", ov.k0);
  get("c_alpha", ov.c_alpha);
  get("c_gamma", ov.c_gamma);
  get("c_xi", ov.c_xi);
  if (j.contains("T")) ov.T = j.at("T").get<long>();
  return ov;
}

double ScheduleConfig::designed_lambda(long k) const {
  return (c_gamma / (2.0 * c_alpha)) * std::pow(static_cast<double>(k) + k0, a - c);
}

json ScheduleConfig::to_json() const {
  return json{{"a", a},       {"c", c},        {"xi", xi},           {"T", T},
              {"k0", k0},     {"lambda0", lambda0}, {"c_alpha", c_alpha}, {"c_gamma", c_gamma},
              {"c_xi", c_xi}, {"mu_g", mu_g},  {"overridden", overridden}};
}

ScheduleConfig ScheduleConfig::from_json(const json& j) {
  ScheduleConfig cfg;
  cfg.a = j.at("a");
  cfg.c = j.at("c");
  cfg.xi = j.at("xi");
  cfg.T = j.at("T");
  cfg.k0 = j.at("k0");
  cfg.lambda0 = j.at("lambda0");
  cfg.c_alpha = j.at("c_alpha");
  cfg.c_gamma = j.at("c_gamma");
  cfg.c_xi = j.at("c_xi");
  cfg.mu_g = j.at("mu_g");
  cfg.overridden = j.value("overridden", false);
  return cfg;
}

ScheduleConfig make_schedule(const ConstantsLedger& ledger, const SmoothnessConstants& sc,
                             Regime regime, const ScheduleOverrides& ov) {
  sc.validate();
  ScheduleConfig cfg;
  const RegimeExponents re = regime_exponents(regime);
  cfg.a = ov.a.value_or(re.a);
  cfg.c = ov.c.value_or(re.c);
  if (cfg.a < cfg.c) fail("rate exponents must satisfy a >= c");
  if (cfg.a < 0 || cfg.a > 1 || cfg.c < 0 || cfg.c > 1) fail("rate exponents must lie in [0, 1]");
  cfg.xi = ov.xi.value_or(1.0);
  if (cfg.xi <= 0) fail("xi must be positive");
  cfg.c_xi = ov.c_xi.value_or(1.0 / 96.0);
  cfg.mu_g = sc.mu_g;

  const double pressure = std::max(sc.l_g1 * ledger.l_star0 * ledger.l_star0,
                                   std::sqrt(ledger.M_big) * ledger.l_star1);
  if (ov.T) {
    cfg.T = *ov.T;
    if (cfg.T < 1) fail("inner-loop count T must be >= 1");
  } else {
    double t_real = pressure / (cfg.c_xi * sc.mu_g);
    double t_ceil = std::ceil(t_real);
    if (t_ceil == t_real) t_ceil += 1.0;  // condition (3b) is strict
    cfg.T = static_cast<long>(std::max(32.0, t_ceil));
  }

  const double lambda_floor = 2.0 * sc.l_f1 / sc.mu_g;
  cfg.lambda0 = ov.lambda0.value_or(lambda_floor);
  if (cfg.lambda0 < lambda_floor * (1.0 - 1e-12)) fail("lambda0 below 2 l_f1 / mu_g");
  if (cfg.lambda0 <= 0) fail("lambda0 must be positive (l_f1 = 0 requires an explicit override)");

  if (ov.k0) {
    cfg.k0 = *ov.k0;
    if (cfg.k0 < 1) fail("k0 must be >= 1");
  } else {
    double k0 = (4.0 / sc.mu_g) * std::max({cfg.xi * ledger.l_F1 / 2.0,
                                            static_cast<double>(cfg.T) * sc.l_g1, sc.l_f1});
    // also needed so alpha_0 <= 1/(2 xi l_F1) when lambda0 < 1/2
    k0 = std::max(k0, cfg.xi * ledger.l_F1 / (cfg.lambda0 * sc.mu_g));
    cfg.k0 = std::max(1.0, k0);
  }

  cfg.c_gamma = ov.c_gamma.value_or(1.0 / (sc.mu_g * std::pow(cfg.k0, 1.0 - cfg.c)));
  cfg.c_alpha =
      ov.c_alpha.value_or(1.0 / (2.0 * cfg.lambda0 * sc.mu_g * std::pow(cfg.k0, 1.0 - cfg.a)));
  if (cfg.c_gamma <= 0 || cfg.c_alpha <= 0) fail("step-size coefficients must be positive");
  cfg.overridden = ov.any();
  return cfg;
}

StepSizes step_sizes(const ScheduleConfig& cfg, long k, double lambda_k) {
  if (k < 0) fail("iteration index must be nonnegative");
  const double base = static_cast<double>(k) + cfg.k0;
  StepSizes s;
  s.alpha = cfg.c_alpha / std::pow(base, cfg.a);
  s.gamma = cfg.c_gamma / std::pow(base, cfg.c);
  s.beta = s.alpha * lambda_k;
  return s;
}

double delta_k(const ScheduleConfig& cfg, long k, double lambda_k, double alpha_k,
               double gamma_k) {
  (void)gamma_k;
  if (lambda_k < cfg.lambda0 * (1.0 - 1e-12)) fail("lambda_k below lambda0");
  const double drift_cap =
      static_cast<double>(cfg.T) * cfg.mu_g / 16.0 * alpha_k * lambda_k * lambda_k;
  const double to_designed = cfg.designed_lambda(k + 1) - lambda_k;
  const double d = std::min(drift_cap, to_designed);
  if (d < -1e-9 * (1.0 + lambda_k))
    fail("negative multiplier increment (inconsistent schedule overrides)");
  return std::max(d, 0.0);
}

std::vector<std::string> validate_schedule(const ScheduleConfig& cfg,
                                           const ConstantsLedger& ledger,
                                           const SmoothnessConstants& sc, long k) {
  std::vector<std::string> out;
  const double lambda_k = cfg.designed_lambda(k);
  const StepSizes s = step_sizes(cfg, k, lambda_k);

  if (cfg.lambda0 < 2.0 * sc.l_f1 / sc.mu_g * (1.0 - 1e-12))
    out.push_back("lambda0 below 2 l_f1 / mu_g");
  if (s.gamma > 1.0 / (4.0 * sc.l_g1) * (1.0 + 1e-12)) out.push_back("gamma exceeds 1/(4 l_g1)");
  if (s.gamma > 1.0 / (4.0 * static_cast<double>(cfg.T) * sc.mu_g) * (1.0 + 1e-12))
    out.push_back("gamma exceeds 1/(4 T mu_g)");
  if (s.beta > s.gamma * (1.0 + 1e-12)) out.push_back("beta exceeds gamma");
  if (sc.l_f1 > 0 && s.alpha > 1.0 / (8.0 * sc.l_f1) * (1.0 + 1e-12))
    out.push_back("alpha exceeds 1/(8 l_f1)");
  if (ledger.l_F1 > 0 && s.alpha > 1.0 / (2.0 * cfg.xi * ledger.l_F1) * (1.0 + 1e-12))
    out.push_back("alpha exceeds 1/(2 xi l_F1)");

  const double pressure = std::max(sc.l_g1 * ledger.l_star0 * ledger.l_star0,
                                   ledger.l_star1 * std::sqrt(ledger.M_big));
  if (pressure > 0 && cfg.xi / static_cast<double>(cfg.T) >= cfg.c_xi * sc.mu_g / pressure)
    out.push_back("xi/T violates the inner-outer ratio condition (3b)");

  const double d = delta_k(cfg, k, lambda_k, s.alpha, s.gamma);
  if (d / lambda_k > static_cast<double>(cfg.T) * sc.mu_g * s.beta / 16.0 * (1.0 + 1e-9))
    out.push_back("delta/lambda exceeds T mu_g beta / 16");
  return out;
}

std::vector<std::string> validate_schedule_sweep(const ScheduleConfig& cfg,
                                                 const ConstantsLedger& ledger,
                                                 const SmoothnessConstants& sc, long k_max) {
  std::vector<std::string> seen;
  for (long k = 0; k <= k_max; ++k) {
    const auto v = validate_schedule(cfg, ledger, sc, k);
    for (const auto& name : v) {
      std::ostringstream os;
      os << name << " (first at k=" << k << ")";
      bool dup = false;
      for (const auto& s : seen)
        if (s.rfind(name, 0) == 0) dup = true;
      if (!dup) seen.push_back(os.str());
    }
    if (!v.empty() && seen.size() > 8) break;
  }
  return seen;
}

}  // namespace rf2sa
