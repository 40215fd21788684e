// Linear program container (minimization, all-<= rows after
// canonicalization, per-variable bounds) and the full-horizon V2G program:
// charge/discharge power variables per occupied charger-step, soft
// departure-energy slacks, soc recursion bounds, and the aggregate
// station limit in both directions.
#pragma once

#include <limits>
#include <string>
#include <vector>

#include "v2g/env.hpp"

namespace v2g {

constexpr double kLpInf = std::numeric_limits<double>::infinity();

struct LinearProgram {
  std::vector<double> c;                  // minimize c . x
  std::vector<std::vector<double>> rows;  // rows[i] . x <= rhs[i]
  std::vector<double> rhs;
  std::vector<double> lower;  // finite
  std::vector<double> upper;  // may be +inf
  std::vector<std::string> var_names;

  int n_vars() const { return static_cast<int>(c.size()); }
  int n_rows() const { return static_cast<int>(rows.size()); }
  void add_row(std::vector<double> row, double b);
  std::string check() const;  // empty when dimensions are consistent
};

struct LpSolution {
  enum class Status { optimal, infeasible, unbounded };
  Status status = Status::infeasible;
  std::vector<double> x;
  double objective = 0.0;
  long iterations = 0;
};

const char* to_string(LpSolution::Status s);

struct LpWeights {
  double unmet_demand_cost = 1e3;  // EUR per kWh of departure slack
  double simultaneity_eps = 1e-6;  // tiny cost on p+ + p- suppressing both-at-once
};

// Per-session variable layout inside the scenario LP.
struct LpSessionVars {
  int first_plus = -1;   // p+ vars, one per window step, contiguous
  int first_minus = -1;  // p- vars, same order
  int slack = -1;        // departure shortfall (kWh)
  int arrival = 0;
  int departure = 0;
  int charger = 0;
};

struct ScenarioLp {
  LinearProgram lp;
  std::vector<LpSessionVars> sessions;
};

ScenarioLp build_lp(const Scenario& scenario, const LpWeights& weights = {});

}  // namespace v2g
