// Seeded synthetic scenario generator plus JSON round-trip. Prices follow a
// daily sinusoid with noise, the aggregate limit has a configurable midday
// dip, and EV demands are drawn inside each session's charging window so
// generated scenarios are always CAFAP-feasible.
#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "v2g/env.hpp"

namespace v2g {

struct GeneratorConfig {
  int n_chargers = 5;
  int horizon = 96;
  double dt_hours = 0.25;

  // Charger hardware applied to every charger.
  double max_charge_kw = 22.0;
  double max_discharge_kw = 22.0;
  double eff_charge = 0.9;
  double eff_discharge = 0.9;

  // Arrivals: expected arrivals per hour, by hour of day.
  std::array<double, 24> arrival_rate_per_hour = {
      0.1, 0.1, 0.1, 0.1, 0.1, 0.1,  // 00-05
      0.5, 0.5, 0.5, 0.5,            // 06-09
      0.35, 0.35, 0.35, 0.35, 0.35, 0.35,  // 10-15
      0.5, 0.5, 0.5, 0.5, 0.5,       // 16-20
      0.2, 0.2, 0.2};                // 21-23
  int sojourn_min_steps = 8;
  int sojourn_max_steps = 24;

  // Battery draws.
  double battery_capacity_kwh = 50.0;
  double initial_soc_frac_min = 0.2;
  double initial_soc_frac_max = 0.5;
  double min_soc_frac = 0.1;
  // Desired departure energy: initial + U(lo, hi) * window energy, capped
  // at capacity. hi <= 1 keeps every demand CAFAP-feasible.
  double demand_window_frac_min = 0.5;
  double demand_window_frac_max = 0.95;

  // Price model: base + amplitude * sin(2*pi*(hour - phase)/24) + noise*N(0,1).
  double price_base = 0.15;
  double price_amplitude = 0.10;
  double price_phase_hours = 9.0;
  double price_noise = 0.02;

  // Power limit: base, lowered by dip_depth inside [dip_start, dip_end) hours.
  double limit_base_kw = 120.0;
  double limit_dip_depth_kw = 30.0;
  double limit_dip_start_hour = 11.0;
  double limit_dip_end_hour = 15.0;

  std::uint64_t seed = 0;

  // Empty when valid.
  std::vector<std::string> validate() const;
};

struct GenerateStats {
  int arrivals = 0;
  int dropped = 0;  // arrivals with no free charger; logged, not errors
};

Scenario generate(const GeneratorConfig& cfg, GenerateStats* stats = nullptr);

// JSON config round-trip (all fields optional; defaults fill the rest).
GeneratorConfig load_generator_config(const std::string& path);
void save_generator_config(const GeneratorConfig& cfg, const std::string& path);

// Scenario JSON round-trip; save then load reproduces the scenario exactly.
// load validates and throws ValidationError / std::runtime_error with field
// context on malformed files.
void save_scenario(const Scenario& s, const std::string& path);
Scenario load_scenario(const std::string& path);
std::string scenario_to_json(const Scenario& s);
Scenario scenario_from_json(const std::string& text, const std::string& origin = "<string>");

}  // namespace v2g
