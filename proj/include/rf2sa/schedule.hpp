#pragma once

#include "rf2sa/problem.hpp"

#include <optional>
#include <string>
#include <vector>

namespace rf2sa {

/// Derived regularity bounds evaluated from the primitive constants.
struct ConstantsLedger {
  double l_F1 = 0;       // smoothness of F
  double l_lambda0 = 0;  // Lipschitzness of y_lambda^*(x): 3 l_g1 / mu_g
  double l_lambda1 = 0;  // smoothness of y_lambda^*(x), evaluated at lambda0
  double l_star0 = 0;    // 1 + l_lambda0
  double l_star1 = 0;    // sup of l_lambda1 over admissible lambda
  double C_lambda = 0;   // penalty-gradient bias constant
  double M_f = 0;        // l_f0^2 + sigma_f^2
  double M_g = 0;        // l_g0^2 + sigma_g^2
  double M_big = 0;      // max(M_f, M_g)
  double lambda0_used = 0;

  json to_json() const;
};

/// Evaluates the derived-constants formulas. Requires lambda0 >= 2 l_f1 / mu_g.
ConstantsLedger derive_constants(const SmoothnessConstants& sc, double lambda0);

enum class Regime { BothNoisy, FOnly, Deterministic };
const char* regime_name(Regime r);
Regime regime_from_string(const std::string& s);

struct RegimeExponents {
  double a, c;
};
RegimeExponents regime_exponents(Regime r);

struct ScheduleOverrides {
  std::optional<double> a, c, xi, lambda0, k0, c_alpha, c_gamma, c_xi;
  std::optional<long> T;

  bool any() const;
  json to_json() const;
  static ScheduleOverrides from_json(const json& j);
};

/// Step-size and multiplier schedule:
///   alpha_k = c_alpha / (k + k0)^a,  gamma_k = c_gamma / (k + k0)^c,
///   beta_k  = alpha_k * lambda_k,    lambda_{k+1} = lambda_k + delta_k.
struct ScheduleConfig {
  double a = 1.0 / 3.0;
  double c = 0.0;
  double xi = 1.0;
  long T = 32;
  double k0 = 1.0;
  double lambda0 = 1.0;
  double c_alpha = 1.0;
  double c_gamma = 1.0;
  double c_xi = 1.0 / 96.0;
  double mu_g = 1.0;        // carried so delta_k is self-contained
  bool overridden = false;  // true when any field deviates from the designed values

  /// gamma_k / (2 alpha_k) at index k: the designed multiplier trajectory.
  double designed_lambda(long k) const;

  json to_json() const;
  static ScheduleConfig from_json(const json& j);
};

/// Builds the schedule for a regime from the ledger formulas; overrides
/// replace individual fields (the result should still be checked with
/// validate_schedule, which the harness does, warning on violations).
ScheduleConfig make_schedule(const ConstantsLedger& ledger, const SmoothnessConstants& sc,
                             Regime regime, const ScheduleOverrides& ov = {});

struct StepSizes {
  double alpha = 0, gamma = 0, beta = 0;
};

StepSizes step_sizes(const ScheduleConfig& cfg, long k, double lambda_k);

/// Multiplier increment: min of the drift cap (T mu_g alpha_k lambda_k^2 / 16)
/// and the step to the next designed multiplier gamma_{k+1}/(2 alpha_{k+1}).
double delta_k(const ScheduleConfig& cfg, long k, double lambda_k, double alpha_k, double gamma_k);

/// Checks the step-size conditions at index k; returns the named violations
/// (empty means valid). lambda_k defaults to the designed trajectory.
std::vector<std::string> validate_schedule(const ScheduleConfig& cfg,
                                           const ConstantsLedger& ledger,
                                           const SmoothnessConstants& sc, long k);

/// Sweeps validate_schedule over k in [0, k_max], following the actual
/// multiplier recursion; returns violations tagged with the first offending k.
std::vector<std::string> validate_schedule_sweep(const ScheduleConfig& cfg,
                                                 const ConstantsLedger& ledger,
                                                 const SmoothnessConstants& sc, long k_max);

}  // namespace rf2sa
