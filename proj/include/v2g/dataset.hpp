// Offline trajectory store: episode recording with undiscounted
// returns-to-go, dataset merging with recomputed normalization statistics,
// K-step window sampling with left padding, and a versioned binary
// container.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "v2g/env.hpp"
#include "v2g/policies.hpp"
#include "v2g/rng.hpp"

namespace v2g {

struct Trajectory {
  std::string scenario_id;
  int horizon = 0;
  int n_chargers = 0;
  int lookahead = 0;
  std::vector<std::vector<double>> obs;      // horizon x obs_dim
  std::vector<std::vector<double>> actions;  // horizon x n_chargers
  std::vector<double> rewards;               // horizon
  std::vector<double> rtg;                   // suffix sums (gamma = 1)
  double total_return = 0.0;

  int obs_dim() const { return obs.empty() ? 0 : static_cast<int>(obs.front().size()); }
  // Empty when internally consistent (lengths match, rtg is the suffix sum).
  std::vector<std::string> check() const;
};

enum class SourceLabel : std::uint8_t { optimal = 0, random = 1 };

const char* to_string(SourceLabel l);

struct NormStats {
  std::vector<double> mean;
  std::vector<double> stdev;     // floored at 1e-6
  double return_scale = 1.0;     // max |total_return|, floored at 1e-9
};

struct OfflineDataset {
  std::vector<Trajectory> trajectories;
  std::vector<SourceLabel> labels;  // parallel to trajectories
  NormStats stats;

  std::size_t size() const { return trajectories.size(); }
  int obs_dim() const { return trajectories.empty() ? 0 : trajectories.front().obs_dim(); }
  void recompute_stats();
  double mean_return() const;
  double best_return() const;
  double mean_return(SourceLabel l) const;
  void append(Trajectory t, SourceLabel label);  // does not recompute stats
};

// Runs the policy for exactly the scenario horizon.
Trajectory record_episode(const Scenario& scenario, Policy& policy, int lookahead,
                          const RewardWeights& weights = {});

// Concatenation with stats recomputed over the union.
OfflineDataset merge(const std::vector<const OfflineDataset*>& parts);

struct Batch {
  int batch_size = 0;
  int context = 0;
  int obs_dim = 0;
  int action_dim = 0;
  std::vector<double> obs;         // B*K*obs_dim, z-scored
  std::vector<double> actions;     // B*K*action_dim, raw targets
  std::vector<double> rtg;         // B*K, divided by return_scale
  std::vector<int> timesteps;      // B*K absolute step index, 0 on padding
  std::vector<std::uint8_t> valid; // B*K, 0 on left padding
  // Raw occupied flags per charger (B*K*action_dim), used to rebuild graph
  // topology; taken before normalization.
  std::vector<std::uint8_t> occupied;
};

// Uniform trajectory, then uniform window end; windows shorter than K are
// left-padded. Throws on an empty dataset or K < 1.
Batch sample_batch(const OfflineDataset& ds, Rng& rng, int batch_size, int context);

void save_dataset(const OfflineDataset& ds, const std::string& path);
// Verifies the rtg suffix-sum identity of every stored trajectory.
OfflineDataset load_dataset(const std::string& path);

}  // namespace v2g
