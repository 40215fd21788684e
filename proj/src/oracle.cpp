#include "v2g/oracle.hpp"

#include <algorithm>
#include <fstream>
#include <json.hpp>

#include "v2g/simplex.hpp"

namespace v2g {

OracleSchedule solve_schedule(const Scenario& sc, const LpWeights& weights) {
  const ScenarioLp built = build_lp(sc, weights);
  const LpSolution sol = solve_simplex(built.lp);
  if (sol.status != LpSolution::Status::optimal)
    throw std::runtime_error(std::string("oracle: LP solve returned ") + to_string(sol.status));

  OracleSchedule out;
  out.scenario_id = sc.id;
  out.lp_objective = sol.objective;
  out.iterations = sol.iterations;
  out.actions.assign(static_cast<std::size_t>(sc.horizon),
                     std::vector<double>(sc.chargers.size(), 0.0));
  out.soc_by_session.resize(sc.sessions.size());
  for (std::size_t e = 0; e < sc.sessions.size(); ++e) {
    const LpSessionVars& sv = built.sessions[e];
    const EVSession& ev = sc.sessions[e];
    const ChargerSpec& ch = sc.chargers[static_cast<std::size_t>(ev.charger)];
    out.total_slack_kwh += sol.x[static_cast<std::size_t>(sv.slack)];
    double soc = ev.initial_soc_kwh;
    for (int t = sv.arrival; t < sv.departure; ++t) {
      const int k = t - sv.arrival;
      const double p_plus = sol.x[static_cast<std::size_t>(sv.first_plus + k)];
      const double p_minus = sol.x[static_cast<std::size_t>(sv.first_minus + k)];
      const double net = p_plus / ch.max_charge_kw - p_minus / ch.max_discharge_kw;
      out.actions[static_cast<std::size_t>(t)][static_cast<std::size_t>(sv.charger)] =
          std::clamp(net, -1.0, 1.0);
      soc += sc.dt_hours * (ch.eff_charge * p_plus - p_minus / ch.eff_discharge);
      out.soc_by_session[e].push_back(soc);
    }
  }
  return out;
}

void save_schedule(const OracleSchedule& s, const std::string& path) {
  nlohmann::json j;
  j["scenario_id"] = s.scenario_id;
  j["lp_objective"] = s.lp_objective;
  j["total_slack_kwh"] = s.total_slack_kwh;
  j["actions"] = s.actions;
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
  f << j.dump(2) << "\n";
  if (!f) throw std::runtime_error("write failed for '" + path + "'");
}

std::vector<std::vector<double>> load_schedule_actions(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open schedule file '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(f);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error("schedule parse error in " + path + ": " + e.what());
  }
  if (!j.contains("actions")) throw std::runtime_error("schedule file missing 'actions': " + path);
  return j["actions"].get<std::vector<std::vector<double>>>();
}

void OraclePolicy::reset(const Scenario& scenario) { schedule_ = solve_schedule(scenario, weights_); }

std::vector<double> OraclePolicy::act(const Observation&, const StateView& view) {
  if (view.t < 0 || static_cast<std::size_t>(view.t) >= schedule_.actions.size())
    throw std::runtime_error("oracle: no schedule entry for t=" + std::to_string(view.t));
  return schedule_.actions[static_cast<std::size_t>(view.t)];
}

}  // namespace v2g
