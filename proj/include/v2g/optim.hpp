// Adaptive-moment optimizer with bias correction and decoupled weight decay.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "v2g/tensor.hpp"

namespace v2g::nn {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-4;
};

class AdamW {
 public:
  explicit AdamW(AdamConfig cfg = {}) : cfg_(cfg) {}

  // One update over every parameter in the store. Missing grads count as
  // zero; a non-finite grad throws, naming the parameter.
  void step(ParamStore& params);

  void set_lr(double lr) { cfg_.lr = lr; }
  double lr() const { return cfg_.lr; }
  long step_count() const { return step_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  AdamConfig cfg_;
  long step_ = 0;
  std::vector<std::vector<double>> m_, v_;  // per parameter, by store order
};

}  // namespace v2g::nn
