// Discrete-time V2G charging environment: battery dynamics with charge and
// discharge efficiencies, an aggregate station power limit, dynamic prices,
// and departure-energy accounting. States are values; step() is a pure
// function of (state, actions, scenario).
#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace v2g {

struct ValidationError : std::runtime_error {
  explicit ValidationError(std::vector<std::string> problems);
  std::vector<std::string> issues;
};

struct ChargerSpec {
  std::string id;
  double max_charge_kw = 22.0;
  double max_discharge_kw = 22.0;  // magnitude
  double eff_charge = 0.9;
  double eff_discharge = 0.9;
};

struct EVSession {
  std::string id;
  int charger = 0;  // index into Scenario::chargers
  int arrival_step = 0;
  int departure_step = 0;  // exclusive: disconnects when t reaches it
  double capacity_kwh = 50.0;
  double initial_soc_kwh = 10.0;
  double desired_kwh = 40.0;  // target soc at departure
  double min_soc_kwh = 0.0;
};

struct Scenario {
  std::string id;
  int horizon = 96;
  double dt_hours = 0.25;
  std::vector<ChargerSpec> chargers;
  std::vector<EVSession> sessions;
  std::vector<double> price_eur_kwh;   // length = horizon
  std::vector<double> power_limit_kw;  // length = horizon
  bool demands_feasible = false;       // set by the generator, checked on load

  // All problems at once; empty means valid.
  std::vector<std::string> validate() const;
  // Every EV can reach its desired soc within its own window at full
  // charger power (ignoring the aggregate limit).
  bool cafap_window_feasible() const;
  double max_charger_power_kw() const;
  double max_price() const;
  double max_limit() const;
};

struct CumulativeMetrics {
  double cash_flow_eur = 0.0;
  double violation_kw = 0.0;
  double energy_charged_kwh = 0.0;    // grid side
  double energy_discharged_kwh = 0.0;  // grid side
  double reward = 0.0;
};

struct EnvState {
  int t = 0;
  std::vector<int> occupant;    // session index per charger, -1 if empty
  std::vector<double> soc_kwh;  // per session; meaningful while connected
  double last_aggregate_kw = 0.0;
  int next_arrival = 0;  // cursor into sessions sorted by arrival
  CumulativeMetrics totals;
};

struct Departure {
  int session = -1;
  double delivered_kwh = 0.0;  // soc at departure
  double desired_kwh = 0.0;
};

struct StepOutcome {
  double reward = 0.0;
  double violation_kw = 0.0;
  double cash_flow_eur = 0.0;
  std::vector<double> realized_kw;  // per charger, grid side (+ = charging)
  std::vector<Departure> departures;
};

struct RewardWeights {
  double violation = 2.0;     // EUR per kW of per-step excess
  double satisfaction = 5.0;  // EUR per kWh of squared-shortfall ratio
};

// r = cash_flow - w_v * violation - w_s * sum((desired - delivered)^2 / max(desired, eps)).
double compute_reward(double cash_flow_eur, double violation_kw,
                      std::span<const Departure> departures, const RewardWeights& w);

// Delivered-vs-desired percentage, capped at 100. Shortfalls below 1e-9 kWh
// count as exact fulfilment so full deliveries are not lost to rounding.
double satisfaction_pct(double delivered_kwh, double desired_kwh);

struct ChargerView {
  bool occupied = false;
  int session = -1;
  double soc_kwh = 0.0;
  double capacity_kwh = 0.0;
  double desired_kwh = 0.0;
  double min_soc_kwh = 0.0;
  int departure_step = 0;
  double max_charge_kw = 0.0;
  double max_discharge_kw = 0.0;
  double eff_charge = 1.0;
  double eff_discharge = 1.0;
};

struct StateView {
  int t = 0;
  int horizon = 0;
  double dt_hours = 0.0;
  double price = 0.0;
  double power_limit_kw = 0.0;
  std::vector<ChargerView> chargers;
};

// Flat observation layout (widths): time sin/cos (2) | next L prices,
// normalized (L) | next L power limits, normalized (L) | per charger:
// max charge ratio, max discharge ratio, occupied, soc fraction,
// time-to-departure fraction, remaining-demand fraction (6 each) | previous
// aggregate power over current limit (1).
struct Observation {
  std::vector<double> features;
  int lookahead = 0;
  int n_chargers = 0;
};

int observation_dim(int n_chargers, int lookahead);

class Env {
 public:
  // Throws ValidationError listing every problem.
  explicit Env(const Scenario& scenario);

  const Scenario& scenario() const { return *scenario_; }
  int n_chargers() const { return static_cast<int>(scenario_->chargers.size()); }

  EnvState reset() const;
  // actions: one value in [-1, 1] per charger; positive fractions of
  // max_charge_kw, negative fractions of max_discharge_kw.
  std::pair<EnvState, StepOutcome> step(const EnvState& state, std::span<const double> actions,
                                        const RewardWeights& weights = {}) const;
  StateView view(const EnvState& state) const;
  Observation observe(const EnvState& state, int lookahead) const;

 private:
  const Scenario* scenario_;
  std::vector<int> arrival_order_;  // session indices sorted by arrival step
  double ref_power_ = 1.0;
  double ref_price_ = 1.0;
  double ref_limit_ = 1.0;
};

}  // namespace v2g
