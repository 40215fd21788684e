// Decision Transformer over interleaved (return-to-go, state, action)
// tokens with causal attention. States enter through the GNN encoder;
// training regresses the next action (MSE on action tokens only); inference
// conditions on a target return that decrements by the realized rewards.
#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "v2g/dataset.hpp"
#include "v2g/graph.hpp"
#include "v2g/optim.hpp"
#include "v2g/policies.hpp"
#include "v2g/tensor.hpp"

namespace v2g {

struct DtConfig {
  int context = 24;  // K steps = 3K tokens
  int d_model = 128;
  int blocks = 3;
  int heads = 4;
  int ff = 512;
  double dropout = 0.1;
  int action_dim = 5;
  int max_timesteps = 96;
  int lookahead = 8;
  int gnn_hidden = 64;
  int gnn_layers = 2;

  double lr = 1e-3;
  int warmup_steps = 500;
  int train_steps = 20000;
  int batch_size = 64;
  double weight_decay = 1e-4;
  std::uint64_t seed = 0;

  void validate() const;  // throws std::invalid_argument
};

DtConfig load_dt_config(const std::string& path);

struct DtTrainLog {
  std::vector<double> losses;  // one entry per training step
};

class DtModel {
 public:
  // Fresh model with seeded initialization.
  explicit DtModel(DtConfig cfg);

  const DtConfig& config() const { return cfg_; }
  const NormStats& stats() const { return stats_; }
  double best_dataset_return() const { return best_dataset_return_; }
  nn::ParamStore& params() { return params_; }

  // Action predictions for every window slot: (B*K, action_dim). Dropout is
  // active only when `train` and cfg.dropout > 0.
  nn::Value forward(nn::Graph& g, const Batch& batch, bool train, Rng* dropout_rng) const;
  // Masked MSE over valid slots; also returns predictions via out param.
  nn::Value loss(nn::Graph& g, const Batch& batch, bool train, Rng* dropout_rng,
                 nn::Value* predictions = nullptr) const;

  // Full training run on the dataset (adopts its normalization stats).
  // `progress`, when set, is called every `log_every` steps.
  DtTrainLog train(const OfflineDataset& ds,
                   const std::function<void(int step, double loss)>& progress = nullptr,
                   int log_every = 100);

  // One step of the live rollout window; used by DtPolicy.
  std::vector<double> predict_action(const std::vector<std::vector<double>>& window_obs,
                                     const std::vector<std::vector<double>>& window_actions,
                                     const std::vector<double>& window_rtg,
                                     const std::vector<int>& window_timesteps) const;

  void save(const std::string& path) const;
  static DtModel load(const std::string& path);

 private:
  DtModel(DtConfig cfg, bool init, std::uint64_t init_seed);

  DtConfig cfg_;
  nn::ParamStore params_;
  std::unique_ptr<GnnEncoder> gnn_;
  NormStats stats_;
  double best_dataset_return_ = 0.0;
};

// Return-conditioned policy wrapper; maintains the K-step live window.
class DtPolicy final : public Policy {
 public:
  DtPolicy(const DtModel& model, double target_return)
      : model_(&model), target_return_(target_return) {}

  void reset(const Scenario& scenario) override;
  std::vector<double> act(const Observation& obs, const StateView& view) override;
  void observe_outcome(const StepOutcome& outcome) override;

 private:
  const DtModel* model_;
  double target_return_;
  double rtg_ = 0.0;
  int t_ = 0;
  std::vector<std::vector<double>> obs_window_;
  std::vector<std::vector<double>> act_window_;
  std::vector<double> rtg_window_;
  std::vector<int> step_window_;
};

struct RolloutResult {
  Trajectory trajectory;
  double total_reward = 0.0;
};

// Deterministic evaluation episode under return conditioning.
RolloutResult rollout(const DtModel& model, const Scenario& scenario, double target_return,
                      const RewardWeights& weights = {});

}  // namespace v2g
