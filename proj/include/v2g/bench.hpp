// Evaluation harness: runs policies over scenario suites in parallel,
// aggregates Table-style metrics (energies, satisfaction, violation, cost,
// reward, step time), and emits CSV summaries, per-episode traces, and SVG
// plots of aggregate power against the limit.
#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "v2g/env.hpp"
#include "v2g/policies.hpp"

namespace v2g {

class DtModel;

struct BenchConfig {
  int lookahead = 8;
  RewardWeights weights{};
  // 0 reads V2G_THREADS, falling back to the hardware count.
  int threads = 0;
  std::uint64_t seed = 0;  // base seed for stochastic policies
};

struct EpisodeMetrics {
  std::string scenario_id;
  double energy_charged_mwh = 0.0;
  double energy_discharged_mwh = 0.0;
  double mean_satisfaction_pct = 100.0;
  double min_satisfaction_pct = 100.0;
  double violation_kw = 0.0;
  double cash_flow_eur = 0.0;
  double total_reward = 0.0;
  double step_time_s = 0.0;
  int ev_count = 0;
  bool failed = false;
  std::string error;
};

struct EpisodeTrace {
  std::string scenario_id;
  double dt_hours = 0.0;
  std::vector<double> price;         // T
  std::vector<double> limit_kw;      // T
  std::vector<double> aggregate_kw;  // T
  std::vector<double> reward;        // T
  std::vector<std::vector<double>> charger_kw;  // T x n
  std::vector<std::vector<double>> soc_kwh;     // T x n, 0 when empty
};

struct PolicySummary {
  std::string policy;
  std::vector<EpisodeMetrics> episodes;
  double energy_charged_mean = 0.0, energy_charged_std = 0.0;
  double energy_discharged_mean = 0.0, energy_discharged_std = 0.0;
  double satisfaction_mean = 0.0, satisfaction_std = 0.0;
  double min_satisfaction = 100.0;  // global minimum over all EVs
  double violation_mean = 0.0, violation_std = 0.0;
  double cost_mean = 0.0, cost_std = 0.0;
  double reward_mean = 0.0, reward_std = 0.0;
  double step_time_mean = 0.0;
  void aggregate();
};

struct MetricsReport {
  std::vector<PolicySummary> policies;
};

using PolicyFactory = std::function<std::unique_ptr<Policy>(std::size_t episode_index)>;

// Factories for the named baselines; `model` is required for "dt".
PolicyFactory make_policy_factory(const std::string& name, const BenchConfig& cfg,
                                  const DtModel* model = nullptr, double dt_target_return = 0.0);

EpisodeMetrics run_episode(Policy& policy, const Scenario& scenario, const BenchConfig& cfg,
                           EpisodeTrace* trace = nullptr);

// One policy over every scenario; episode i uses factory(i). A policy
// failure marks the episode failed and is recorded, not thrown.
PolicySummary run_suite(const std::string& name, const PolicyFactory& factory,
                        const std::vector<Scenario>& scenarios, const BenchConfig& cfg,
                        std::vector<EpisodeTrace>* traces = nullptr);

// summary.csv plus per-policy episode_<i>.csv and episode_<i>.svg files.
void emit_outputs(const MetricsReport& report,
                  const std::vector<std::pair<std::string, std::vector<EpisodeTrace>>>& traces,
                  const std::string& out_dir);

// Consistency checks: traces reproduce the reported metrics, metric ranges
// hold, and baseline orderings hold where the policies are present. Returns
// problems; empty means clean.
std::vector<std::string> check_report(const MetricsReport& report,
                                      const std::vector<std::pair<std::string, std::vector<EpisodeTrace>>>& traces,
                                      bool all_feasible);

}  // namespace v2g
