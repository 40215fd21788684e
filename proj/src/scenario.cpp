#include "v2g/scenario.hpp"

#include <cmath>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "v2g/rng.hpp"

namespace v2g {

using nlohmann::json;

std::vector<std::string> GeneratorConfig::validate() const {
  std::vector<std::string> out;
  if (n_chargers < 0) out.push_back("n_chargers must be >= 0");
  if (horizon < 1) out.push_back("horizon must be >= 1");
  if (!(dt_hours > 0.0)) out.push_back("dt_hours must be > 0");
  if (!(max_charge_kw > 0.0 && max_discharge_kw > 0.0)) out.push_back("charger powers must be > 0");
  if (!(eff_charge > 0.0 && eff_charge <= 1.0 && eff_discharge > 0.0 && eff_discharge <= 1.0))
    out.push_back("efficiencies must be in (0, 1]");
  for (double r : arrival_rate_per_hour) {
    if (r < 0.0) {
      out.push_back("arrival rates must be >= 0");
      break;
    }
  }
  if (!(sojourn_min_steps >= 1 && sojourn_min_steps <= sojourn_max_steps))
    out.push_back("sojourn bounds must satisfy 1 <= min <= max");
  if (!(battery_capacity_kwh > 0.0)) out.push_back("battery capacity must be > 0");
  if (!(0.0 <= initial_soc_frac_min && initial_soc_frac_min <= initial_soc_frac_max &&
        initial_soc_frac_max <= 1.0))
    out.push_back("initial soc fractions must satisfy 0 <= min <= max <= 1");
  if (!(min_soc_frac >= 0.0 && min_soc_frac <= initial_soc_frac_min))
    out.push_back("min_soc_frac must be in [0, initial_soc_frac_min]");
  if (!(0.0 <= demand_window_frac_min && demand_window_frac_min <= demand_window_frac_max &&
        demand_window_frac_max <= 1.0))
    out.push_back("demand window fractions must satisfy 0 <= min <= max <= 1");
  if (price_noise < 0.0) out.push_back("price_noise must be >= 0");
  if (!(limit_base_kw > 0.0)) out.push_back("limit_base_kw must be > 0");
  if (limit_dip_depth_kw < 0.0 || limit_dip_depth_kw > limit_base_kw)
    out.push_back("limit_dip_depth_kw must be in [0, limit_base_kw]");
  if (!(0.0 <= limit_dip_start_hour && limit_dip_start_hour <= limit_dip_end_hour &&
        limit_dip_end_hour <= 24.0))
    out.push_back("dip window must satisfy 0 <= start <= end <= 24");
  double total_rate = 0.0;
  for (double r : arrival_rate_per_hour) total_rate += r;
  if (n_chargers == 0 && total_rate > 0.0)
    out.push_back("zero chargers with a nonzero arrival rate");
  return out;
}

Scenario generate(const GeneratorConfig& cfg, GenerateStats* stats) {
  auto problems = cfg.validate();
  if (!problems.empty()) throw ValidationError(std::move(problems));

  Rng rng(cfg.seed);
  Scenario s;
  s.id = "scn-" + std::to_string(cfg.seed);
  s.horizon = cfg.horizon;
  s.dt_hours = cfg.dt_hours;
  s.chargers.resize(static_cast<std::size_t>(cfg.n_chargers));
  for (int c = 0; c < cfg.n_chargers; ++c) {
    ChargerSpec& ch = s.chargers[static_cast<std::size_t>(c)];
    ch.id = "ch" + std::to_string(c);
    ch.max_charge_kw = cfg.max_charge_kw;
    ch.max_discharge_kw = cfg.max_discharge_kw;
    ch.eff_charge = cfg.eff_charge;
    ch.eff_discharge = cfg.eff_discharge;
  }

  constexpr double kTwoPi = 2.0 * 3.141592653589793238462643383279502884;
  s.price_eur_kwh.resize(static_cast<std::size_t>(cfg.horizon));
  s.power_limit_kw.resize(static_cast<std::size_t>(cfg.horizon));
  for (int t = 0; t < cfg.horizon; ++t) {
    const double hour = std::fmod(static_cast<double>(t) * cfg.dt_hours, 24.0);
    double price = cfg.price_base +
                   cfg.price_amplitude * std::sin(kTwoPi * (hour - cfg.price_phase_hours) / 24.0);
    if (cfg.price_noise > 0.0) price += cfg.price_noise * rng.normal();
    s.price_eur_kwh[static_cast<std::size_t>(t)] = std::max(0.01, price);
    const bool in_dip = hour >= cfg.limit_dip_start_hour && hour < cfg.limit_dip_end_hour;
    s.power_limit_kw[static_cast<std::size_t>(t)] =
        cfg.limit_base_kw - (in_dip ? cfg.limit_dip_depth_kw : 0.0);
  }

  // Arrivals in time order; a charger is free when its last session ended.
  std::vector<int> busy_until(static_cast<std::size_t>(cfg.n_chargers), 0);
  std::vector<int> free_now;
  int ev_count = 0;
  for (int t = 0; t < cfg.horizon; ++t) {
    const double hour = std::fmod(static_cast<double>(t) * cfg.dt_hours, 24.0);
    const double p_arrival =
        cfg.arrival_rate_per_hour[static_cast<std::size_t>(hour)] * cfg.dt_hours;
    if (rng.uniform01() >= p_arrival) continue;
    if (stats) ++stats->arrivals;
    const int sojourn =
        static_cast<int>(rng.uniform_int(cfg.sojourn_min_steps, cfg.sojourn_max_steps));
    const int departure = std::min(cfg.horizon, t + sojourn);
    free_now.clear();
    for (int c = 0; c < cfg.n_chargers; ++c) {
      if (busy_until[static_cast<std::size_t>(c)] <= t) free_now.push_back(c);
    }
    if (free_now.empty()) {
      if (stats) ++stats->dropped;
      continue;
    }
    const int charger =
        free_now[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(free_now.size()) - 1))];
    busy_until[static_cast<std::size_t>(charger)] = departure;

    EVSession ev;
    ev.id = "ev" + std::to_string(ev_count++);
    ev.charger = charger;
    ev.arrival_step = t;
    ev.departure_step = departure;
    ev.capacity_kwh = cfg.battery_capacity_kwh;
    ev.initial_soc_kwh =
        cfg.battery_capacity_kwh * rng.uniform(cfg.initial_soc_frac_min, cfg.initial_soc_frac_max);
    ev.min_soc_kwh = cfg.battery_capacity_kwh * cfg.min_soc_frac;
    const double window_kwh =
        (departure - t) * cfg.dt_hours * cfg.max_charge_kw * cfg.eff_charge;
    ev.desired_kwh = std::min(
        cfg.battery_capacity_kwh,
        ev.initial_soc_kwh +
            rng.uniform(cfg.demand_window_frac_min, cfg.demand_window_frac_max) * window_kwh);
    s.sessions.push_back(std::move(ev));
  }
  s.demands_feasible = s.cafap_window_feasible();
  return s;
}

namespace {

json charger_to_json(const ChargerSpec& ch) {
  return json{{"id", ch.id},
              {"max_charge_kw", ch.max_charge_kw},
              {"max_discharge_kw", ch.max_discharge_kw},
              {"eff_charge", ch.eff_charge},
              {"eff_discharge", ch.eff_discharge}};
}

json session_to_json(const EVSession& ev, const Scenario& s) {
  return json{{"id", ev.id},
              {"charger_id", s.chargers[static_cast<std::size_t>(ev.charger)].id},
              {"arrival_step", ev.arrival_step},
              {"departure_step", ev.departure_step},
              {"battery_capacity_kwh", ev.capacity_kwh},
              {"initial_soc_kwh", ev.initial_soc_kwh},
              {"desired_energy_kwh", ev.desired_kwh},
              {"min_soc_kwh", ev.min_soc_kwh}};
}

template <typename T>
T get_field(const json& j, const char* field, const std::string& where) {
  const auto it = j.find(field);
  if (it == j.end())
    throw std::runtime_error("scenario parse error: missing field '" + std::string(field) + "' in " +
                             where);
  try {
    return it->get<T>();
  } catch (const json::exception& e) {
    throw std::runtime_error("scenario parse error: field '" + std::string(field) + "' in " + where +
                             ": " + e.what());
  }
}

}  // namespace

std::string scenario_to_json(const Scenario& s) {
  json j;
  j["id"] = s.id;
  j["horizon"] = s.horizon;
  j["dt_hours"] = s.dt_hours;
  j["chargers"] = json::array();
  for (const ChargerSpec& ch : s.chargers) j["chargers"].push_back(charger_to_json(ch));
  j["sessions"] = json::array();
  for (const EVSession& ev : s.sessions) j["sessions"].push_back(session_to_json(ev, s));
  j["price_eur_kwh"] = s.price_eur_kwh;
  j["power_limit_kw"] = s.power_limit_kw;
  j["demands_feasible"] = s.demands_feasible;
  return j.dump(2) + "\n";
}

Scenario scenario_from_json(const std::string& text, const std::string& origin) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::runtime_error("scenario parse error in " + origin + ": " + e.what());
  }
  Scenario s;
  s.id = get_field<std::string>(j, "id", origin);
  s.horizon = get_field<int>(j, "horizon", origin);
  s.dt_hours = get_field<double>(j, "dt_hours", origin);
  const json chargers = get_field<json>(j, "chargers", origin);
  for (const json& cj : chargers) {
    ChargerSpec ch;
    const std::string where = origin + " chargers[" + std::to_string(s.chargers.size()) + "]";
    ch.id = get_field<std::string>(cj, "id", where);
    ch.max_charge_kw = get_field<double>(cj, "max_charge_kw", where);
    ch.max_discharge_kw = get_field<double>(cj, "max_discharge_kw", where);
    ch.eff_charge = get_field<double>(cj, "eff_charge", where);
    ch.eff_discharge = get_field<double>(cj, "eff_discharge", where);
    s.chargers.push_back(std::move(ch));
  }
  const json sessions = get_field<json>(j, "sessions", origin);
  for (const json& sj : sessions) {
    EVSession ev;
    const std::string where = origin + " sessions[" + std::to_string(s.sessions.size()) + "]";
    ev.id = get_field<std::string>(sj, "id", where);
    const std::string cid = get_field<std::string>(sj, "charger_id", where);
    ev.charger = -1;
    for (std::size_t c = 0; c < s.chargers.size(); ++c) {
      if (s.chargers[c].id == cid) {
        ev.charger = static_cast<int>(c);
        break;
      }
    }
    if (ev.charger < 0)
      throw std::runtime_error("scenario parse error: unknown charger_id '" + cid + "' in " + where);
    ev.arrival_step = get_field<int>(sj, "arrival_step", where);
    ev.departure_step = get_field<int>(sj, "departure_step", where);
    ev.capacity_kwh = get_field<double>(sj, "battery_capacity_kwh", where);
    ev.initial_soc_kwh = get_field<double>(sj, "initial_soc_kwh", where);
    ev.desired_kwh = get_field<double>(sj, "desired_energy_kwh", where);
    ev.min_soc_kwh = get_field<double>(sj, "min_soc_kwh", where);
    s.sessions.push_back(std::move(ev));
  }
  s.price_eur_kwh = get_field<std::vector<double>>(j, "price_eur_kwh", origin);
  s.power_limit_kw = get_field<std::vector<double>>(j, "power_limit_kw", origin);
  s.demands_feasible = get_field<bool>(j, "demands_feasible", origin);
  auto problems = s.validate();
  if (!problems.empty()) throw ValidationError(std::move(problems));
  return s;
}

void save_scenario(const Scenario& s, const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
  f << scenario_to_json(s);
  if (!f) throw std::runtime_error("write failed for '" + path + "'");
}

Scenario load_scenario(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open scenario file '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return scenario_from_json(ss.str(), path);
}

namespace {

template <typename T>
void maybe(const json& j, const char* field, T& out) {
  const auto it = j.find(field);
  if (it != j.end()) out = it->get<T>();
}

}  // namespace

GeneratorConfig load_generator_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open generator config '" + path + "'");
  json j;
  try {
    j = json::parse(f);
  } catch (const json::parse_error& e) {
    throw std::runtime_error("generator config parse error in " + path + ": " + e.what());
  }
  GeneratorConfig cfg;
  maybe(j, "n_chargers", cfg.n_chargers);
  maybe(j, "horizon", cfg.horizon);
  maybe(j, "dt_hours", cfg.dt_hours);
  maybe(j, "max_charge_kw", cfg.max_charge_kw);
  maybe(j, "max_discharge_kw", cfg.max_discharge_kw);
  maybe(j, "eff_charge", cfg.eff_charge);
  maybe(j, "eff_discharge", cfg.eff_discharge);
  maybe(j, "arrival_rate_per_hour", cfg.arrival_rate_per_hour);
  maybe(j, "sojourn_min_steps", cfg.sojourn_min_steps);
  maybe(j, "sojourn_max_steps", cfg.sojourn_max_steps);
  maybe(j, "battery_capacity_kwh", cfg.battery_capacity_kwh);
  maybe(j, "initial_soc_frac_min", cfg.initial_soc_frac_min);
  maybe(j, "initial_soc_frac_max", cfg.initial_soc_frac_max);
  maybe(j, "min_soc_frac", cfg.min_soc_frac);
  maybe(j, "demand_window_frac_min", cfg.demand_window_frac_min);
  maybe(j, "demand_window_frac_max", cfg.demand_window_frac_max);
  maybe(j, "price_base", cfg.price_base);
  maybe(j, "price_amplitude", cfg.price_amplitude);
  maybe(j, "price_phase_hours", cfg.price_phase_hours);
  maybe(j, "price_noise", cfg.price_noise);
  maybe(j, "limit_base_kw", cfg.limit_base_kw);
  maybe(j, "limit_dip_depth_kw", cfg.limit_dip_depth_kw);
  maybe(j, "limit_dip_start_hour", cfg.limit_dip_start_hour);
  maybe(j, "limit_dip_end_hour", cfg.limit_dip_end_hour);
  maybe(j, "seed", cfg.seed);
  return cfg;
}

void save_generator_config(const GeneratorConfig& cfg, const std::string& path) {
  json j{{"n_chargers", cfg.n_chargers},
         {"horizon", cfg.horizon},
         {"dt_hours", cfg.dt_hours},
         {"max_charge_kw", cfg.max_charge_kw},
         {"max_discharge_kw", cfg.max_discharge_kw},
         {"eff_charge", cfg.eff_charge},
         {"eff_discharge", cfg.eff_discharge},
         {"arrival_rate_per_hour", cfg.arrival_rate_per_hour},
         {"sojourn_min_steps", cfg.sojourn_min_steps},
         {"sojourn_max_steps", cfg.sojourn_max_steps},
         {"battery_capacity_kwh", cfg.battery_capacity_kwh},
         {"initial_soc_frac_min", cfg.initial_soc_frac_min},
         {"initial_soc_frac_max", cfg.initial_soc_frac_max},
         {"min_soc_frac", cfg.min_soc_frac},
         {"demand_window_frac_min", cfg.demand_window_frac_min},
         {"demand_window_frac_max", cfg.demand_window_frac_max},
         {"price_base", cfg.price_base},
         {"price_amplitude", cfg.price_amplitude},
         {"price_phase_hours", cfg.price_phase_hours},
         {"price_noise", cfg.price_noise},
         {"limit_base_kw", cfg.limit_base_kw},
         {"limit_dip_depth_kw", cfg.limit_dip_depth_kw},
         {"limit_dip_start_hour", cfg.limit_dip_start_hour},
         {"limit_dip_end_hour", cfg.limit_dip_end_hour},
         {"seed", cfg.seed}};
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
  f << j.dump(2) << "\n";
}

}  // namespace v2g
