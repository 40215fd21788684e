// Perfect-knowledge scheduler: solves the full-horizon LP once, converts
// powers to action fractions, and replays them through the environment.
#pragma once

#include <string>
#include <vector>

#include "v2g/lp.hpp"
#include "v2g/policies.hpp"

namespace v2g {

struct OracleSchedule {
  std::string scenario_id;
  std::vector<std::vector<double>> actions;  // horizon x chargers, in [-1, 1]
  double lp_objective = 0.0;
  double total_slack_kwh = 0.0;  // departure shortfall the LP had to absorb
  long iterations = 0;
  // LP soc trajectory per session, one value per window step boundary
  // (arrival+1 ... departure); reference for simulator consistency checks.
  std::vector<std::vector<double>> soc_by_session;
};

// Throws on solver failure; the slack variables make the LP itself feasible.
OracleSchedule solve_schedule(const Scenario& scenario, const LpWeights& weights = {});

// Schedule JSON round-trip (per-step action vectors).
void save_schedule(const OracleSchedule& s, const std::string& path);
std::vector<std::vector<double>> load_schedule_actions(const std::string& path);

class OraclePolicy final : public Policy {
 public:
  explicit OraclePolicy(LpWeights weights = {}) : weights_(weights) {}
  void reset(const Scenario& scenario) override;
  std::vector<double> act(const Observation& obs, const StateView& view) override;
  const OracleSchedule& schedule() const { return schedule_; }

 private:
  LpWeights weights_;
  OracleSchedule schedule_;
};

}  // namespace v2g
