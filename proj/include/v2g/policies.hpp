// Heuristic and random baselines behind the shared policy interface. The
// oracle and the trained model implement the same interface in their own
// modules.
#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "v2g/env.hpp"
#include "v2g/rng.hpp"

namespace v2g {

class Policy {
 public:
  virtual ~Policy() = default;
  // Called once per episode before the first act().
  virtual void reset(const Scenario& scenario) { (void)scenario; }
  // Returns one action in [-1, 1] per charger.
  virtual std::vector<double> act(const Observation& obs, const StateView& view) = 0;
  // Step feedback, delivered after the action executes. Return-conditioned
  // policies track rewards here.
  virtual void observe_outcome(const StepOutcome& outcome) { (void)outcome; }
};

// Grid-side power fraction CAFAP requests for one charger: full power until
// the remaining demand fits in a single step, then exactly the remainder.
double cafap_fraction(const ChargerView& cv, double dt_hours);

// Charge As Fast As Possible; never discharges.
class CafapPolicy final : public Policy {
 public:
  std::vector<double> act(const Observation& obs, const StateView& view) override;
};

// Round-robin budget walk under the aggregate limit: starting at a rotating
// priority pointer, each occupied charger takes its CAFAP power while the
// running total fits; the first charger past the budget gets the residual,
// later ones get zero. The pointer advances by one every step.
class BauPolicy final : public Policy {
 public:
  void reset(const Scenario& scenario) override;
  std::vector<double> act(const Observation& obs, const StateView& view) override;
  int pointer() const { return pointer_; }

 private:
  int pointer_ = 0;
};

// I.i.d. uniform actions on [-1, 1].
class RandomPolicy final : public Policy {
 public:
  explicit RandomPolicy(std::uint64_t seed) : rng_(seed) {}
  std::vector<double> act(const Observation& obs, const StateView& view) override;

 private:
  Rng rng_;
};

}  // namespace v2g
