#include "v2g/bench.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "v2g/dt.hpp"
#include "v2g/oracle.hpp"

namespace v2g {

namespace {

double sample_std(const std::vector<double>& xs, double mean) {
  if (xs.size() < 2) return 0.0;
  double s = 0.0;
  for (double x : xs) s += (x - mean) * (x - mean);
  return std::sqrt(s / static_cast<double>(xs.size() - 1));
}

double mean_of(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

int resolve_threads(int requested, std::size_t jobs) {
  int t = requested;
  if (t <= 0) {
    if (const char* env = std::getenv("V2G_THREADS")) t = std::atoi(env);
  }
  if (t <= 0) t = static_cast<int>(std::thread::hardware_concurrency());
  if (t <= 0) t = 1;
  return static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(t), std::max<std::size_t>(jobs, 1)));
}

}  // namespace

void PolicySummary::aggregate() {
  std::vector<double> charged, discharged, sat, viol, cost, rew, times;
  min_satisfaction = 100.0;
  for (const EpisodeMetrics& e : episodes) {
    if (e.failed) continue;
    charged.push_back(e.energy_charged_mwh);
    discharged.push_back(e.energy_discharged_mwh);
    viol.push_back(e.violation_kw);
    cost.push_back(e.cash_flow_eur);
    rew.push_back(e.total_reward);
    times.push_back(e.step_time_s);
    if (e.ev_count > 0) {
      sat.push_back(e.mean_satisfaction_pct);
      min_satisfaction = std::min(min_satisfaction, e.min_satisfaction_pct);
    }
  }
  energy_charged_mean = mean_of(charged);
  energy_charged_std = sample_std(charged, energy_charged_mean);
  energy_discharged_mean = mean_of(discharged);
  energy_discharged_std = sample_std(discharged, energy_discharged_mean);
  satisfaction_mean = sat.empty() ? 100.0 : mean_of(sat);
  satisfaction_std = sample_std(sat, satisfaction_mean);
  violation_mean = mean_of(viol);
  violation_std = sample_std(viol, violation_mean);
  cost_mean = mean_of(cost);
  cost_std = sample_std(cost, cost_mean);
  reward_mean = mean_of(rew);
  reward_std = sample_std(rew, reward_mean);
  step_time_mean = mean_of(times);
}

PolicyFactory make_policy_factory(const std::string& name, const BenchConfig& cfg,
                                  const DtModel* model, double dt_target_return) {
  if (name == "cafap") {
    return [](std::size_t) { return std::make_unique<CafapPolicy>(); };
  }
  if (name == "bau") {
    return [](std::size_t) { return std::make_unique<BauPolicy>(); };
  }
  if (name == "random") {
    const std::uint64_t base = cfg.seed;
    return [base](std::size_t i) { return std::make_unique<RandomPolicy>(Rng::derive(base, i)); };
  }
  if (name == "oracle") {
    return [](std::size_t) { return std::make_unique<OraclePolicy>(); };
  }
  if (name == "dt") {
    if (!model) throw std::invalid_argument("policy 'dt' needs a model checkpoint");
    return [model, dt_target_return](std::size_t) {
      return std::make_unique<DtPolicy>(*model, dt_target_return);
    };
  }
  throw std::invalid_argument("unknown policy '" + name + "' (cafap|bau|random|oracle|dt)");
}

EpisodeMetrics run_episode(Policy& policy, const Scenario& scenario, const BenchConfig& cfg,
                           EpisodeTrace* trace) {
  EpisodeMetrics m;
  m.scenario_id = scenario.id;
  m.ev_count = static_cast<int>(scenario.sessions.size());
  Env env(scenario);
  policy.reset(scenario);
  EnvState st = env.reset();
  if (trace) {
    trace->scenario_id = scenario.id;
    trace->dt_hours = scenario.dt_hours;
  }
  double sat_sum = 0.0;
  double act_seconds = 0.0;
  const int n = env.n_chargers();
  for (int t = 0; t < scenario.horizon; ++t) {
    const Observation obs = env.observe(st, cfg.lookahead);
    const StateView view = env.view(st);
    const auto t0 = std::chrono::steady_clock::now();
    const std::vector<double> action = policy.act(obs, view);
    act_seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    auto [next, out] = env.step(st, action, cfg.weights);
    policy.observe_outcome(out);
    for (const Departure& d : out.departures) {
      const double sat = satisfaction_pct(d.delivered_kwh, d.desired_kwh);
      sat_sum += sat;
      m.min_satisfaction_pct = std::min(m.min_satisfaction_pct, sat);
    }
    if (trace) {
      trace->price.push_back(scenario.price_eur_kwh[static_cast<std::size_t>(t)]);
      trace->limit_kw.push_back(scenario.power_limit_kw[static_cast<std::size_t>(t)]);
      double agg = 0.0;
      for (double p : out.realized_kw) agg += p;
      trace->aggregate_kw.push_back(agg);
      trace->reward.push_back(out.reward);
      trace->charger_kw.push_back(out.realized_kw);
      std::vector<double> socs(static_cast<std::size_t>(n), 0.0);
      for (int c = 0; c < n; ++c) {
        const int sess = next.occupant[static_cast<std::size_t>(c)];
        if (sess >= 0) socs[static_cast<std::size_t>(c)] = next.soc_kwh[static_cast<std::size_t>(sess)];
      }
      trace->soc_kwh.push_back(std::move(socs));
    }
    st = std::move(next);
  }
  m.energy_charged_mwh = st.totals.energy_charged_kwh / 1000.0;
  m.energy_discharged_mwh = st.totals.energy_discharged_kwh / 1000.0;
  m.violation_kw = st.totals.violation_kw;
  m.cash_flow_eur = st.totals.cash_flow_eur;
  m.total_reward = st.totals.reward;
  m.step_time_s = act_seconds / scenario.horizon;
  m.mean_satisfaction_pct = m.ev_count > 0 ? sat_sum / m.ev_count : 100.0;
  return m;
}

PolicySummary run_suite(const std::string& name, const PolicyFactory& factory,
                        const std::vector<Scenario>& scenarios, const BenchConfig& cfg,
                        std::vector<EpisodeTrace>* traces) {
  PolicySummary summary;
  summary.policy = name;
  summary.episodes.resize(scenarios.size());
  if (traces) traces->assign(scenarios.size(), {});
  const int n_threads = resolve_threads(cfg.threads, scenarios.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= scenarios.size()) return;
      EpisodeMetrics& m = summary.episodes[i];
      try {
        auto policy = factory(i);
        m = run_episode(*policy, scenarios[i], cfg, traces ? &(*traces)[i] : nullptr);
      } catch (const std::exception& e) {
        m.scenario_id = scenarios[i].id;
        m.failed = true;
        m.error = e.what();
      }
    }
  };
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(n_threads));
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  summary.aggregate();
  return summary;
}

namespace {

void write_summary_csv(const MetricsReport& report, const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("bench: cannot open '" + path + "' for writing");
  f << "policy,episodes,energy_charged_mwh_mean,energy_charged_mwh_std,"
       "energy_discharged_mwh_mean,energy_discharged_mwh_std,"
       "user_satisfaction_pct_mean,user_satisfaction_pct_std,min_user_satisfaction_pct,"
       "power_violation_kw_mean,power_violation_kw_std,cost_eur_mean,cost_eur_std,"
       "reward_mean,reward_std,step_time_s\n";
  f.setf(std::ios::fmtflags(0), std::ios::floatfield);
  f.precision(10);
  for (const PolicySummary& p : report.policies) {
    f << p.policy << ',' << p.episodes.size() << ',' << p.energy_charged_mean << ','
      << p.energy_charged_std << ',' << p.energy_discharged_mean << ',' << p.energy_discharged_std
      << ',' << p.satisfaction_mean << ',' << p.satisfaction_std << ',' << p.min_satisfaction << ','
      << p.violation_mean << ',' << p.violation_std << ',' << p.cost_mean << ',' << p.cost_std << ','
      << p.reward_mean << ',' << p.reward_std << ',' << p.step_time_mean << '\n';
  }
}

void write_trace_csv(const EpisodeTrace& tr, const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("bench: cannot open '" + path + "' for writing");
  const std::size_t n = tr.charger_kw.empty() ? 0 : tr.charger_kw.front().size();
  f << "t,price_eur_kwh,limit_kw,aggregate_kw,reward";
  for (std::size_t c = 0; c < n; ++c) f << ",ch" << c << "_kw";
  for (std::size_t c = 0; c < n; ++c) f << ",ch" << c << "_soc_kwh";
  f << '\n';
  f.precision(10);
  for (std::size_t t = 0; t < tr.price.size(); ++t) {
    f << t << ',' << tr.price[t] << ',' << tr.limit_kw[t] << ',' << tr.aggregate_kw[t] << ','
      << tr.reward[t];
    for (std::size_t c = 0; c < n; ++c) f << ',' << tr.charger_kw[t][c];
    for (std::size_t c = 0; c < n; ++c) f << ',' << tr.soc_kwh[t][c];
    f << '\n';
  }
}

// Minimal SVG line plot: aggregate power and the limit over the episode.
void write_trace_svg(const EpisodeTrace& tr, const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("bench: cannot open '" + path + "' for writing");
  const int W = 860, H = 320, ML = 60, MR = 20, MT = 30, MB = 40;
  const double plot_w = W - ML - MR, plot_h = H - MT - MB;
  double lo = 0.0, hi = 1.0;
  for (std::size_t t = 0; t < tr.aggregate_kw.size(); ++t) {
    lo = std::min({lo, tr.aggregate_kw[t], tr.limit_kw[t]});
    hi = std::max({hi, tr.aggregate_kw[t], tr.limit_kw[t]});
  }
  if (hi <= lo) hi = lo + 1.0;
  const double span = hi - lo;
  const std::size_t T = tr.aggregate_kw.size();
  auto sx = [&](std::size_t t) { return ML + plot_w * (T > 1 ? static_cast<double>(t) / (T - 1) : 0.5); };
  auto sy = [&](double v) { return MT + plot_h * (1.0 - (v - lo) / span); };
  auto polyline = [&](const std::vector<double>& ys, const char* color, const char* dash) {
    f << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\"" << dash
      << " points=\"";
    for (std::size_t t = 0; t < ys.size(); ++t) f << sx(t) << ',' << sy(ys[t]) << ' ';
    f << "\"/>\n";
  };
  f.precision(6);
  f << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  f << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
  f << "<text x=\"" << ML << "\" y=\"18\" font-family=\"sans-serif\" font-size=\"13\">"
    << tr.scenario_id << ": aggregate power vs limit [kW]</text>\n";
  // axes
  f << "<line x1=\"" << ML << "\" y1=\"" << MT << "\" x2=\"" << ML << "\" y2=\"" << (H - MB)
    << "\" stroke=\"black\"/>\n";
  f << "<line x1=\"" << ML << "\" y1=\"" << sy(0.0) << "\" x2=\"" << (W - MR) << "\" y2=\""
    << sy(0.0) << "\" stroke=\"black\"/>\n";
  f << "<text x=\"4\" y=\"" << (sy(hi) + 4) << "\" font-family=\"sans-serif\" font-size=\"11\">"
    << hi << "</text>\n";
  f << "<text x=\"4\" y=\"" << (sy(lo) + 4) << "\" font-family=\"sans-serif\" font-size=\"11\">"
    << lo << "</text>\n";
  polyline(tr.aggregate_kw, "#1f77b4", "");
  polyline(tr.limit_kw, "#d62728", " stroke-dasharray=\"6,3\"");
  f << "<text x=\"" << (W - 230) << "\" y=\"18\" font-family=\"sans-serif\" font-size=\"11\" "
       "fill=\"#1f77b4\">aggregate</text>\n";
  f << "<text x=\"" << (W - 140) << "\" y=\"18\" font-family=\"sans-serif\" font-size=\"11\" "
       "fill=\"#d62728\">limit</text>\n";
  f << "</svg>\n";
}

}  // namespace

void emit_outputs(const MetricsReport& report,
                  const std::vector<std::pair<std::string, std::vector<EpisodeTrace>>>& traces,
                  const std::string& out_dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw std::runtime_error("bench: cannot create output directory '" + out_dir + "'");
  write_summary_csv(report, out_dir + "/summary.csv");
  for (const auto& [policy, trs] : traces) {
    const std::string pdir = out_dir + "/" + policy;
    fs::create_directories(pdir, ec);
    if (ec) throw std::runtime_error("bench: cannot create output directory '" + pdir + "'");
    for (std::size_t i = 0; i < trs.size(); ++i) {
      write_trace_csv(trs[i], pdir + "/episode_" + std::to_string(i) + ".csv");
      write_trace_svg(trs[i], pdir + "/episode_" + std::to_string(i) + ".svg");
    }
  }
}

std::vector<std::string> check_report(
    const MetricsReport& report,
    const std::vector<std::pair<std::string, std::vector<EpisodeTrace>>>& traces,
    bool all_feasible) {
  std::vector<std::string> problems;
  const PolicySummary* cafap = nullptr;
  const PolicySummary* bau = nullptr;
  const PolicySummary* oracle = nullptr;
  for (const PolicySummary& p : report.policies) {
    if (p.policy == "cafap") cafap = &p;
    if (p.policy == "bau") bau = &p;
    if (p.policy == "oracle") oracle = &p;
    for (const EpisodeMetrics& e : p.episodes) {
      if (e.failed) {
        problems.push_back(p.policy + "/" + e.scenario_id + ": episode failed: " + e.error);
        continue;
      }
      if (e.energy_charged_mwh < 0.0 || e.energy_discharged_mwh < 0.0)
        problems.push_back(p.policy + "/" + e.scenario_id + ": negative energy");
      if (e.mean_satisfaction_pct < 0.0 || e.mean_satisfaction_pct > 100.0 ||
          e.min_satisfaction_pct < 0.0 || e.min_satisfaction_pct > 100.0)
        problems.push_back(p.policy + "/" + e.scenario_id + ": satisfaction outside [0, 100]");
      if (e.violation_kw < 0.0)
        problems.push_back(p.policy + "/" + e.scenario_id + ": negative violation");
    }
  }
  // Trace consistency: recompute violation and cash flow from emitted data.
  for (const auto& [policy, trs] : traces) {
    const PolicySummary* summary = nullptr;
    for (const PolicySummary& p : report.policies) {
      if (p.policy == policy) summary = &p;
    }
    if (!summary || summary->episodes.size() != trs.size()) {
      problems.push_back(policy + ": trace/episode count mismatch");
      continue;
    }
    for (std::size_t i = 0; i < trs.size(); ++i) {
      if (summary->episodes[i].failed) continue;
      const EpisodeTrace& tr = trs[i];
      double violation = 0.0, cash = 0.0, reward = 0.0;
      for (std::size_t t = 0; t < tr.aggregate_kw.size(); ++t) {
        violation += std::max(0.0, std::abs(tr.aggregate_kw[t]) - tr.limit_kw[t]);
        cash += -tr.price[t] * tr.dt_hours * tr.aggregate_kw[t];
        reward += tr.reward[t];
      }
      const EpisodeMetrics& e = summary->episodes[i];
      if (std::abs(violation - e.violation_kw) > 1e-9)
        problems.push_back(policy + "/" + e.scenario_id + ": trace violation mismatch");
      if (std::abs(cash - e.cash_flow_eur) > 1e-9)
        problems.push_back(policy + "/" + e.scenario_id + ": trace cash-flow mismatch");
      if (std::abs(reward - e.total_reward) > 1e-9)
        problems.push_back(policy + "/" + e.scenario_id + ": trace reward mismatch");
    }
  }
  if (cafap && bau && bau->violation_mean > cafap->violation_mean + 1e-9)
    problems.push_back("ordering: BaU violation exceeds CAFAP violation");
  // Cash flow is signed with expenses negative, so a cheaper plan has the
  // larger cash flow.
  if (all_feasible && cafap && oracle && oracle->cost_mean < cafap->cost_mean - 1e-6)
    problems.push_back("ordering: oracle cost exceeds CAFAP cost on a feasible suite");
  return problems;
}

}  // namespace v2g
