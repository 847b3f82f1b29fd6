#pragma once

#include "rf2sa/solver.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace rf2sa {

/// Trajectory files are CSV with a JSON metadata header line ("# {...}")
/// carrying the schedule, constants, seed, problem name/params and code
/// version, followed by the fixed column set
///   k,lambda,alpha,gamma,beta,delta,grad_F_sq,I_k,J_k,V_k,dist_x_step,elapsed_ms
/// Diagnostic columns are empty when diagnostics are off.
struct Trajectory {
  json metadata;
  std::vector<IterateRecord> records;
};

extern const char* const kTrajectoryColumns;

void write_trajectory(const std::filesystem::path& path, const json& metadata,
                      const std::vector<IterateRecord>& records);

Trajectory read_trajectory(const std::filesystem::path& path);

/// Formats a double with round-trip precision (shortest form is not needed;
/// output must be byte-stable across runs).
std::string format_double(double v);

}  // namespace rf2sa
