#include "v2g/lp.hpp"

#include <cmath>

namespace v2g {

void LinearProgram::add_row(std::vector<double> row, double b) {
  rows.push_back(std::move(row));
  rhs.push_back(b);
}

std::string LinearProgram::check() const {
  const std::size_t n = c.size();
  if (lower.size() != n || upper.size() != n) return "bound vectors do not match variable count";
  if (rhs.size() != rows.size()) return "rhs length does not match row count";
  for (const auto& r : rows) {
    if (r.size() != n) return "row width does not match variable count";
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!(lower[i] <= upper[i])) return "lower bound exceeds upper bound";
    if (!std::isfinite(lower[i])) return "lower bounds must be finite";
  }
  return {};
}

const char* to_string(LpSolution::Status s) {
  switch (s) {
    case LpSolution::Status::optimal: return "optimal";
    case LpSolution::Status::infeasible: return "infeasible";
    case LpSolution::Status::unbounded: return "unbounded";
  }
  return "?";
}

ScenarioLp build_lp(const Scenario& sc, const LpWeights& w) {
  ScenarioLp out;
  LinearProgram& lp = out.lp;
  const double dt = sc.dt_hours;

  // Variables: per session, p+ then p- for each window step; then one
  // departure slack per session.
  for (std::size_t e = 0; e < sc.sessions.size(); ++e) {
    const EVSession& ev = sc.sessions[e];
    const ChargerSpec& ch = sc.chargers[static_cast<std::size_t>(ev.charger)];
    LpSessionVars sv;
    sv.arrival = ev.arrival_step;
    sv.departure = ev.departure_step;
    sv.charger = ev.charger;
    sv.first_plus = lp.n_vars();
    for (int t = ev.arrival_step; t < ev.departure_step; ++t) {
      lp.c.push_back(sc.price_eur_kwh[static_cast<std::size_t>(t)] * dt + w.simultaneity_eps);
      lp.lower.push_back(0.0);
      lp.upper.push_back(ch.max_charge_kw);
      lp.var_names.push_back("p+[" + ev.id + ",t" + std::to_string(t) + "]");
    }
    sv.first_minus = lp.n_vars();
    for (int t = ev.arrival_step; t < ev.departure_step; ++t) {
      lp.c.push_back(-sc.price_eur_kwh[static_cast<std::size_t>(t)] * dt + w.simultaneity_eps);
      lp.lower.push_back(0.0);
      lp.upper.push_back(ch.max_discharge_kw);
      lp.var_names.push_back("p-[" + ev.id + ",t" + std::to_string(t) + "]");
    }
    out.sessions.push_back(sv);
  }
  for (std::size_t e = 0; e < sc.sessions.size(); ++e) {
    out.sessions[e].slack = lp.n_vars();
    lp.c.push_back(w.unmet_demand_cost);
    lp.lower.push_back(0.0);
    lp.upper.push_back(kLpInf);
    lp.var_names.push_back("slack[" + sc.sessions[e].id + "]");
  }

  const int n = lp.n_vars();

  // SoC recursion bounds. soc(t) = initial + sum over window steps before t
  // of dt * (eff_ch * p+ - p- / eff_dis); keep it inside [min_soc, capacity]
  // at every step boundary, and require soc(departure) + slack >= desired.
  for (std::size_t e = 0; e < sc.sessions.size(); ++e) {
    const EVSession& ev = sc.sessions[e];
    const ChargerSpec& ch = sc.chargers[static_cast<std::size_t>(ev.charger)];
    const LpSessionVars& sv = out.sessions[e];
    const int w_len = ev.departure_step - ev.arrival_step;
    std::vector<double> cum(static_cast<std::size_t>(n), 0.0);
    for (int k = 0; k < w_len; ++k) {
      cum[static_cast<std::size_t>(sv.first_plus + k)] = dt * ch.eff_charge;
      cum[static_cast<std::size_t>(sv.first_minus + k)] = -dt / ch.eff_discharge;
      // soc after step arrival+k must stay within the battery.
      lp.add_row(cum, ev.capacity_kwh - ev.initial_soc_kwh);
      std::vector<double> neg(static_cast<std::size_t>(n), 0.0);
      for (int j = 0; j <= k; ++j) {
        neg[static_cast<std::size_t>(sv.first_plus + j)] = -dt * ch.eff_charge;
        neg[static_cast<std::size_t>(sv.first_minus + j)] = dt / ch.eff_discharge;
      }
      lp.add_row(std::move(neg), ev.initial_soc_kwh - ev.min_soc_kwh);
    }
    // Departure energy: -soc_delta - slack <= initial - desired.
    std::vector<double> dep(static_cast<std::size_t>(n), 0.0);
    for (int k = 0; k < w_len; ++k) {
      dep[static_cast<std::size_t>(sv.first_plus + k)] = -dt * ch.eff_charge;
      dep[static_cast<std::size_t>(sv.first_minus + k)] = dt / ch.eff_discharge;
    }
    dep[static_cast<std::size_t>(sv.slack)] = -1.0;
    lp.add_row(std::move(dep), ev.initial_soc_kwh - ev.desired_kwh);
  }

  // Aggregate limit per step, both import and export, only where some
  // session is connected.
  for (int t = 0; t < sc.horizon; ++t) {
    std::vector<double> agg(static_cast<std::size_t>(n), 0.0);
    bool any = false;
    for (std::size_t e = 0; e < sc.sessions.size(); ++e) {
      const LpSessionVars& sv = out.sessions[e];
      if (t < sv.arrival || t >= sv.departure) continue;
      const int k = t - sv.arrival;
      agg[static_cast<std::size_t>(sv.first_plus + k)] = 1.0;
      agg[static_cast<std::size_t>(sv.first_minus + k)] = -1.0;
      any = true;
    }
    if (!any) continue;
    const double limit = sc.power_limit_kw[static_cast<std::size_t>(t)];
    std::vector<double> neg = agg;
    for (double& x : neg) x = -x;
    lp.add_row(std::move(agg), limit);
    lp.add_row(std::move(neg), limit);
  }

  return out;
}

}  // namespace v2g
