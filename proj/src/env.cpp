#include "v2g/env.hpp"

#include <algorithm>
#include <cmath>

namespace v2g {

namespace {

constexpr double kSocSnapKwh = 1e-9;  // treat sub-nanowatt-hour shortfalls as exact fulfilment

std::string join_issues(const std::vector<std::string>& problems) {
  std::string msg = "scenario validation failed:";
  for (const auto& p : problems) msg += "\n  - " + p;
  return msg;
}

}  // namespace

ValidationError::ValidationError(std::vector<std::string> problems)
    : std::runtime_error(join_issues(problems)), issues(std::move(problems)) {}

std::vector<std::string> Scenario::validate() const {
  std::vector<std::string> out;
  if (horizon < 1) out.push_back("horizon must be >= 1");
  if (!(dt_hours > 0.0)) out.push_back("dt_hours must be > 0");
  if (price_eur_kwh.size() != static_cast<std::size_t>(horizon))
    out.push_back("price series length " + std::to_string(price_eur_kwh.size()) + " != horizon " +
                  std::to_string(horizon));
  if (power_limit_kw.size() != static_cast<std::size_t>(horizon))
    out.push_back("power limit series length " + std::to_string(power_limit_kw.size()) +
                  " != horizon " + std::to_string(horizon));
  for (std::size_t c = 0; c < chargers.size(); ++c) {
    const ChargerSpec& ch = chargers[c];
    const std::string tag = "charger '" + ch.id + "'";
    if (!(ch.max_charge_kw > 0.0)) out.push_back(tag + ": max_charge_kw must be > 0");
    if (!(ch.max_discharge_kw > 0.0)) out.push_back(tag + ": max_discharge_kw must be > 0");
    if (!(ch.eff_charge > 0.0 && ch.eff_charge <= 1.0))
      out.push_back(tag + ": eff_charge must be in (0, 1]");
    if (!(ch.eff_discharge > 0.0 && ch.eff_discharge <= 1.0))
      out.push_back(tag + ": eff_discharge must be in (0, 1]");
  }
  for (std::size_t s = 0; s < sessions.size(); ++s) {
    const EVSession& ev = sessions[s];
    const std::string tag = "session '" + ev.id + "'";
    if (ev.charger < 0 || ev.charger >= static_cast<int>(chargers.size()))
      out.push_back(tag + ": charger index " + std::to_string(ev.charger) + " out of range");
    if (!(ev.arrival_step < ev.departure_step)) out.push_back(tag + ": arrival must precede departure");
    if (ev.arrival_step < 0) out.push_back(tag + ": arrival_step must be >= 0");
    if (ev.departure_step > horizon) out.push_back(tag + ": departure_step exceeds horizon");
    if (!(ev.min_soc_kwh >= 0.0 && ev.min_soc_kwh <= ev.initial_soc_kwh &&
          ev.initial_soc_kwh <= ev.capacity_kwh))
      out.push_back(tag + ": requires 0 <= min_soc <= initial_soc <= capacity");
    if (ev.desired_kwh < 0.0 || ev.desired_kwh > ev.capacity_kwh)
      out.push_back(tag + ": desired energy must be in [0, capacity]");
  }
  // At most one EV per charger per step: session windows on a charger are
  // disjoint half-open intervals [arrival, departure).
  for (std::size_t i = 0; i < sessions.size(); ++i) {
    for (std::size_t j = i + 1; j < sessions.size(); ++j) {
      if (sessions[i].charger != sessions[j].charger) continue;
      const bool overlap = sessions[i].arrival_step < sessions[j].departure_step &&
                           sessions[j].arrival_step < sessions[i].departure_step;
      if (overlap)
        out.push_back("sessions '" + sessions[i].id + "' and '" + sessions[j].id +
                      "' overlap on charger index " + std::to_string(sessions[i].charger));
    }
  }
  if (demands_feasible && !cafap_window_feasible())
    out.push_back("demands_feasible is set but a session cannot meet its demand in its window");
  return out;
}

bool Scenario::cafap_window_feasible() const {
  for (const EVSession& ev : sessions) {
    if (ev.charger < 0 || ev.charger >= static_cast<int>(chargers.size())) return false;
    const ChargerSpec& ch = chargers[static_cast<std::size_t>(ev.charger)];
    const double window_kwh = (ev.departure_step - ev.arrival_step) * dt_hours *
                              ch.max_charge_kw * ch.eff_charge;
    if (ev.desired_kwh > ev.capacity_kwh + 1e-12) return false;
    if (ev.desired_kwh > ev.initial_soc_kwh + window_kwh + kSocSnapKwh) return false;
  }
  return true;
}

double Scenario::max_charger_power_kw() const {
  double m = 0.0;
  for (const ChargerSpec& ch : chargers) m = std::max({m, ch.max_charge_kw, ch.max_discharge_kw});
  return m;
}

double Scenario::max_price() const {
  double m = 0.0;
  for (double p : price_eur_kwh) m = std::max(m, p);
  return m;
}

double Scenario::max_limit() const {
  double m = 0.0;
  for (double p : power_limit_kw) m = std::max(m, p);
  return m;
}

double compute_reward(double cash_flow_eur, double violation_kw,
                      std::span<const Departure> departures, const RewardWeights& w) {
  if (w.violation < 0.0 || w.satisfaction < 0.0)
    throw std::invalid_argument("compute_reward: weights must be non-negative");
  double r = cash_flow_eur - w.violation * violation_kw;
  for (const Departure& d : departures) {
    const double gap = d.desired_kwh - d.delivered_kwh;
    r -= w.satisfaction * gap * gap / std::max(d.desired_kwh, 1e-6);
  }
  return r;
}

double satisfaction_pct(double delivered_kwh, double desired_kwh) {
  if (desired_kwh <= 0.0) return 100.0;
  if (desired_kwh - delivered_kwh <= kSocSnapKwh) return 100.0;
  return 100.0 * std::min(1.0, delivered_kwh / desired_kwh);
}

int observation_dim(int n_chargers, int lookahead) { return 2 + 2 * lookahead + 6 * n_chargers + 1; }

Env::Env(const Scenario& scenario) : scenario_(&scenario) {
  auto problems = scenario.validate();
  if (!problems.empty()) throw ValidationError(std::move(problems));
  arrival_order_.resize(scenario.sessions.size());
  for (std::size_t i = 0; i < arrival_order_.size(); ++i) arrival_order_[i] = static_cast<int>(i);
  std::stable_sort(arrival_order_.begin(), arrival_order_.end(), [&](int a, int b) {
    return scenario.sessions[static_cast<std::size_t>(a)].arrival_step <
           scenario.sessions[static_cast<std::size_t>(b)].arrival_step;
  });
  ref_power_ = std::max(scenario.max_charger_power_kw(), 1e-9);
  ref_price_ = std::max(scenario.max_price(), 1e-9);
  ref_limit_ = std::max(scenario.max_limit(), 1e-9);
}

EnvState Env::reset() const {
  EnvState st;
  st.occupant.assign(scenario_->chargers.size(), -1);
  st.soc_kwh.resize(scenario_->sessions.size());
  for (std::size_t i = 0; i < st.soc_kwh.size(); ++i)
    st.soc_kwh[i] = scenario_->sessions[i].initial_soc_kwh;
  while (st.next_arrival < static_cast<int>(arrival_order_.size())) {
    const int s = arrival_order_[static_cast<std::size_t>(st.next_arrival)];
    if (scenario_->sessions[static_cast<std::size_t>(s)].arrival_step != 0) break;
    st.occupant[static_cast<std::size_t>(scenario_->sessions[static_cast<std::size_t>(s)].charger)] = s;
    ++st.next_arrival;
  }
  return st;
}

std::pair<EnvState, StepOutcome> Env::step(const EnvState& state, std::span<const double> actions,
                                           const RewardWeights& weights) const {
  const Scenario& sc = *scenario_;
  if (state.t >= sc.horizon)
    throw std::invalid_argument("env: step at t=" + std::to_string(state.t) + " past horizon " +
                                std::to_string(sc.horizon));
  if (actions.size() != sc.chargers.size())
    throw std::invalid_argument("env: got " + std::to_string(actions.size()) + " actions for " +
                                std::to_string(sc.chargers.size()) + " chargers");
  for (double a : actions) {
    if (!(a >= -1.0 && a <= 1.0))
      throw std::invalid_argument("env: action " + std::to_string(a) + " outside [-1, 1]");
  }

  EnvState next = state;
  StepOutcome out;
  out.realized_kw.assign(sc.chargers.size(), 0.0);
  const double dt = sc.dt_hours;
  double aggregate = 0.0;
  for (std::size_t c = 0; c < sc.chargers.size(); ++c) {
    const int sess = state.occupant[c];
    if (sess < 0) continue;  // empty charger contributes exactly 0
    const ChargerSpec& ch = sc.chargers[c];
    const EVSession& ev = sc.sessions[static_cast<std::size_t>(sess)];
    double& soc = next.soc_kwh[static_cast<std::size_t>(sess)];
    const double a = actions[c];
    double realized = 0.0;
    if (a >= 0.0) {
      const double requested = a * ch.max_charge_kw;
      const double headroom_kw = (ev.capacity_kwh - soc) / (dt * ch.eff_charge);
      realized = std::min(requested, headroom_kw);
      soc = std::clamp(soc + realized * dt * ch.eff_charge, ev.min_soc_kwh, ev.capacity_kwh);
      next.totals.energy_charged_kwh += realized * dt;
    } else {
      const double requested = -a * ch.max_discharge_kw;  // export magnitude
      const double avail_kw = (soc - ev.min_soc_kwh) * ch.eff_discharge / dt;
      const double q = std::min(requested, avail_kw);
      realized = -q;
      soc = std::clamp(soc - q * dt / ch.eff_discharge, ev.min_soc_kwh, ev.capacity_kwh);
      next.totals.energy_discharged_kwh += q * dt;
    }
    out.realized_kw[c] = realized;
    aggregate += realized;
  }

  out.violation_kw = std::max(0.0, std::abs(aggregate) - sc.power_limit_kw[static_cast<std::size_t>(state.t)]);
  out.cash_flow_eur = -sc.price_eur_kwh[static_cast<std::size_t>(state.t)] * dt * aggregate;

  const int t_next = state.t + 1;
  for (std::size_t c = 0; c < sc.chargers.size(); ++c) {
    const int sess = next.occupant[c];
    if (sess < 0) continue;
    const EVSession& ev = sc.sessions[static_cast<std::size_t>(sess)];
    if (ev.departure_step == t_next) {
      out.departures.push_back(
          {sess, next.soc_kwh[static_cast<std::size_t>(sess)], ev.desired_kwh});
      next.occupant[c] = -1;
    }
  }
  while (next.next_arrival < static_cast<int>(arrival_order_.size())) {
    const int s = arrival_order_[static_cast<std::size_t>(next.next_arrival)];
    const EVSession& ev = sc.sessions[static_cast<std::size_t>(s)];
    if (ev.arrival_step != t_next) break;
    next.occupant[static_cast<std::size_t>(ev.charger)] = s;
    ++next.next_arrival;
  }

  out.reward = compute_reward(out.cash_flow_eur, out.violation_kw, out.departures, weights);
  next.t = t_next;
  next.last_aggregate_kw = aggregate;
  next.totals.cash_flow_eur += out.cash_flow_eur;
  next.totals.violation_kw += out.violation_kw;
  next.totals.reward += out.reward;
  return {std::move(next), std::move(out)};
}

StateView Env::view(const EnvState& state) const {
  const Scenario& sc = *scenario_;
  StateView v;
  v.t = state.t;
  v.horizon = sc.horizon;
  v.dt_hours = sc.dt_hours;
  const std::size_t ti = static_cast<std::size_t>(std::min(state.t, sc.horizon - 1));
  v.price = sc.price_eur_kwh[ti];
  v.power_limit_kw = sc.power_limit_kw[ti];
  v.chargers.resize(sc.chargers.size());
  for (std::size_t c = 0; c < sc.chargers.size(); ++c) {
    ChargerView& cv = v.chargers[c];
    const ChargerSpec& ch = sc.chargers[c];
    cv.max_charge_kw = ch.max_charge_kw;
    cv.max_discharge_kw = ch.max_discharge_kw;
    cv.eff_charge = ch.eff_charge;
    cv.eff_discharge = ch.eff_discharge;
    const int sess = state.occupant[c];
    if (sess < 0) continue;
    const EVSession& ev = sc.sessions[static_cast<std::size_t>(sess)];
    cv.occupied = true;
    cv.session = sess;
    cv.soc_kwh = state.soc_kwh[static_cast<std::size_t>(sess)];
    cv.capacity_kwh = ev.capacity_kwh;
    cv.desired_kwh = ev.desired_kwh;
    cv.min_soc_kwh = ev.min_soc_kwh;
    cv.departure_step = ev.departure_step;
  }
  return v;
}

Observation Env::observe(const EnvState& state, int lookahead) const {
  const Scenario& sc = *scenario_;
  Observation obs;
  obs.lookahead = lookahead;
  obs.n_chargers = static_cast<int>(sc.chargers.size());
  obs.features.reserve(static_cast<std::size_t>(observation_dim(obs.n_chargers, lookahead)));

  const int spd = std::max(1, static_cast<int>(std::lround(24.0 / sc.dt_hours)));
  const double angle = 2.0 * 3.141592653589793238462643383279502884 *
                       static_cast<double>(state.t % spd) / static_cast<double>(spd);
  obs.features.push_back(std::sin(angle));
  obs.features.push_back(std::cos(angle));
  for (int i = 0; i < lookahead; ++i) {
    const std::size_t ti = static_cast<std::size_t>(std::min(state.t + i, sc.horizon - 1));
    obs.features.push_back(sc.price_eur_kwh[ti] / ref_price_);
  }
  for (int i = 0; i < lookahead; ++i) {
    const std::size_t ti = static_cast<std::size_t>(std::min(state.t + i, sc.horizon - 1));
    obs.features.push_back(sc.power_limit_kw[ti] / ref_limit_);
  }
  for (std::size_t c = 0; c < sc.chargers.size(); ++c) {
    const ChargerSpec& ch = sc.chargers[c];
    obs.features.push_back(ch.max_charge_kw / ref_power_);
    obs.features.push_back(ch.max_discharge_kw / ref_power_);
    const int sess = state.occupant[c];
    if (sess < 0) {
      obs.features.insert(obs.features.end(), {0.0, 0.0, 0.0, 0.0});
      continue;
    }
    const EVSession& ev = sc.sessions[static_cast<std::size_t>(sess)];
    const double soc = state.soc_kwh[static_cast<std::size_t>(sess)];
    obs.features.push_back(1.0);
    obs.features.push_back(soc / ev.capacity_kwh);
    obs.features.push_back(static_cast<double>(ev.departure_step - state.t) /
                           static_cast<double>(sc.horizon));
    obs.features.push_back(std::max(0.0, ev.desired_kwh - soc) / ev.capacity_kwh);
  }
  const std::size_t ti = static_cast<std::size_t>(std::min(state.t, sc.horizon - 1));
  obs.features.push_back(state.last_aggregate_kw / std::max(sc.power_limit_kw[ti], 1e-6));
  return obs;
}

}  // namespace v2g
