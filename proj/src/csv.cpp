#include "rf2sa/csv.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace rf2sa {

const char* const kTrajectoryColumns =
    "k,lambda,alpha,gamma,beta,delta,grad_F_sq,I_k,J_k,V_k,dist_x_step,elapsed_ms";

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

std::string opt_field(const std::optional<double>& v) {
  return v ? format_double(*v) : std::string();
}

std::optional<double> parse_opt(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return std::stod(s);
}

}  // namespace

void write_trajectory(const std::filesystem::path& path, const json& metadata,
                      const std::vector<IterateRecord>& records) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("csv: cannot open " + path.string() + " for writing");
  out << "# " << metadata.dump() << "\n";
  out << kTrajectoryColumns << "\n";
  for (const IterateRecord& r : records) {
    out << r.k << ',' << format_double(r.lambda) << ',' << format_double(r.alpha) << ','
        << format_double(r.gamma) << ',' << format_double(r.beta) << ','
        << format_double(r.delta) << ',' << opt_field(r.grad_F_sq) << ','
        << opt_field(r.I_k) << ',' << opt_field(r.J_k) << ',' << opt_field(r.V_k) << ','
        << format_double(r.dist_x_step) << ',' << format_double(r.elapsed_ms) << "\n";
  }
  if (!out) throw std::runtime_error("csv: write failed for " + path.string());
}

Trajectory read_trajectory(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("csv: cannot open " + path.string());
  Trajectory t;
  std::string line;
  if (!std::getline(in, line) || line.rfind("# ", 0) != 0)
    throw std::runtime_error("csv: missing metadata header in " + path.string());
  t.metadata = json::parse(line.substr(2));
  if (!std::getline(in, line) || line != kTrajectoryColumns)
    throw std::runtime_error("csv: unexpected column header in " + path.string());
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    while (cells.size() < 12) cells.emplace_back();
    IterateRecord r;
    r.k = std::stol(cells[0]);
    r.lambda = std::stod(cells[1]);
    r.alpha = std::stod(cells[2]);
    r.gamma = std::stod(cells[3]);
    r.beta = std::stod(cells[4]);
    r.delta = std::stod(cells[5]);
    r.grad_F_sq = parse_opt(cells[6]);
    r.I_k = parse_opt(cells[7]);
    r.J_k = parse_opt(cells[8]);
    r.V_k = parse_opt(cells[9]);
    r.dist_x_step = std::stod(cells[10]);
    r.elapsed_ms = std::stod(cells[11]);
    t.records.push_back(r);
  }
  return t;
}

}  // namespace rf2sa
