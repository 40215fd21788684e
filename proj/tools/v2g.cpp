// v2g: desk-scale V2G charging lab. Subcommands cover scenario generation,
// the perfect-knowledge LP oracle, offline dataset building, decision-
// transformer training/evaluation, and the benchmark harness.
#include <CLI11.hpp>
#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "v2g/bench.hpp"
#include "v2g/dataset.hpp"
#include "v2g/dt.hpp"
#include "v2g/kernels.hpp"
#include "v2g/oracle.hpp"
#include "v2g/scenario.hpp"

using namespace v2g;

namespace {

std::vector<Scenario> load_scenario_dir(const std::string& dir, int limit) {
  namespace fs = std::filesystem;
  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json")
      files.push_back(entry.path().string());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw std::runtime_error("no .json scenarios in '" + dir + "'");
  if (limit > 0 && static_cast<int>(files.size()) > limit) files.resize(static_cast<std::size_t>(limit));
  std::vector<Scenario> out;
  out.reserve(files.size());
  for (const auto& f : files) out.push_back(load_scenario(f));
  return out;
}

int cmd_scenario_gen(const std::string& config_path, std::uint64_t seed, bool seed_set,
                     const std::string& out_path) {
  GeneratorConfig cfg;
  if (!config_path.empty()) cfg = load_generator_config(config_path);
  if (seed_set) cfg.seed = seed;
  GenerateStats stats;
  const Scenario s = generate(cfg, &stats);
  save_scenario(s, out_path);
  std::printf("wrote %s: %zu chargers, %zu sessions (%d arrivals, %d dropped), T=%d\n",
              out_path.c_str(), s.chargers.size(), s.sessions.size(), stats.arrivals,
              stats.dropped, s.horizon);
  return 0;
}

int cmd_oracle_solve(const std::string& scenario_path, const std::string& out_path) {
  const Scenario s = load_scenario(scenario_path);
  const OracleSchedule sched = solve_schedule(s);
  save_schedule(sched, out_path);
  std::printf("wrote %s: objective %.6f EUR, unmet slack %.6f kWh, %ld simplex iterations\n",
              out_path.c_str(), sched.lp_objective, sched.total_slack_kwh, sched.iterations);
  return 0;
}

int cmd_dataset_gen(const std::string& policy, int n, std::uint64_t seed,
                    const std::string& gen_config, int lookahead, const std::string& out_path) {
  if (policy != "oracle" && policy != "random")
    throw std::runtime_error("dataset gen supports --policy oracle|random (the offline sources)");
  GeneratorConfig cfg;
  if (!gen_config.empty()) cfg = load_generator_config(gen_config);
  OfflineDataset ds;
  for (int i = 0; i < n; ++i) {
    cfg.seed = Rng::derive(seed, static_cast<std::uint64_t>(i));
    const Scenario s = generate(cfg);
    std::unique_ptr<Policy> p;
    if (policy == "oracle")
      p = std::make_unique<OraclePolicy>();
    else
      p = std::make_unique<RandomPolicy>(Rng::derive(seed ^ 0xda7a5e7ULL, static_cast<std::uint64_t>(i)));
    ds.append(record_episode(s, *p, lookahead),
              policy == "oracle" ? SourceLabel::optimal : SourceLabel::random);
    if ((i + 1) % 25 == 0) std::printf("  %d/%d episodes\n", i + 1, n);
  }
  ds.recompute_stats();
  save_dataset(ds, out_path);
  std::printf("wrote %s: %zu trajectories, mean return %.4f, best %.4f\n", out_path.c_str(),
              ds.size(), ds.mean_return(), ds.best_return());
  return 0;
}

int cmd_dataset_merge(const std::vector<std::string>& inputs, const std::string& out_path) {
  std::vector<OfflineDataset> loaded;
  loaded.reserve(inputs.size());
  for (const auto& p : inputs) loaded.push_back(load_dataset(p));
  std::vector<const OfflineDataset*> ptrs;
  for (const auto& d : loaded) ptrs.push_back(&d);
  const OfflineDataset merged = merge(ptrs);
  save_dataset(merged, out_path);
  std::printf("wrote %s: %zu trajectories, mean return %.4f\n", out_path.c_str(), merged.size(),
              merged.mean_return());
  return 0;
}

int cmd_dt_train(const std::string& dataset_path, const std::string& config_path,
                 const std::string& out_path) {
  const OfflineDataset ds = load_dataset(dataset_path);
  DtConfig cfg;
  if (!config_path.empty()) cfg = load_dt_config(config_path);
  if (!ds.trajectories.empty()) {
    cfg.action_dim = ds.trajectories.front().n_chargers;
    cfg.lookahead = ds.trajectories.front().lookahead;
    int max_h = 1;
    for (const auto& tr : ds.trajectories) max_h = std::max(max_h, tr.horizon);
    cfg.max_timesteps = std::max(cfg.max_timesteps, max_h);
  }
  DtModel model(cfg);
  std::printf("training: %d steps, batch %d, context %d, d_model %d (%zu parameters)\n",
              cfg.train_steps, cfg.batch_size, cfg.context, cfg.d_model,
              model.params().total_elements());
  model.train(ds, [](int step, double loss) { std::printf("  step %6d  loss %.6f\n", step, loss); },
              500);
  model.save(out_path);
  std::printf("wrote %s\n", out_path.c_str());
  return 0;
}

int cmd_dt_eval(const std::string& ckpt, const std::string& scenario_dir,
                const std::string& target_str, int episodes, const std::string& out_csv) {
  const DtModel model = DtModel::load(ckpt);
  double target = 0.0;
  if (target_str == "auto")
    target = 0.9 * model.best_dataset_return();
  else
    target = std::stod(target_str);
  const auto scenarios = load_scenario_dir(scenario_dir, episodes);
  std::vector<double> rewards;
  std::ofstream csv;
  if (!out_csv.empty()) {
    csv.open(out_csv, std::ios::trunc);
    csv << "scenario,total_reward\n";
  }
  for (const Scenario& s : scenarios) {
    const RolloutResult r = rollout(model, s, target);
    rewards.push_back(r.total_reward);
    std::printf("  %-16s reward %10.4f\n", s.id.c_str(), r.total_reward);
    if (csv.is_open()) csv << s.id << ',' << r.total_reward << '\n';
  }
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= static_cast<double>(rewards.size());
  double sd = 0.0;
  for (double r : rewards) sd += (r - mean) * (r - mean);
  sd = rewards.size() > 1 ? std::sqrt(sd / static_cast<double>(rewards.size() - 1)) : 0.0;
  std::printf("target %.4f over %zu scenarios: mean reward %.4f +- %.4f\n", target,
              rewards.size(), mean, sd);
  return 0;
}

int cmd_bench_run(const std::string& policies_csv, const std::string& scenario_dir, int episodes,
                  const std::string& out_dir, const std::string& ckpt,
                  const std::string& target_str, std::uint64_t seed) {
  const auto scenarios = load_scenario_dir(scenario_dir, episodes);
  bool all_feasible = true;
  for (const Scenario& s : scenarios) all_feasible &= s.demands_feasible;

  std::unique_ptr<DtModel> model;
  double target = 0.0;
  std::vector<std::string> names;
  for (std::size_t pos = 0; pos < policies_csv.size();) {
    const std::size_t comma = policies_csv.find(',', pos);
    names.push_back(policies_csv.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  if (std::find(names.begin(), names.end(), "dt") != names.end()) {
    if (ckpt.empty()) throw std::runtime_error("bench: policy 'dt' needs --checkpoint");
    model = std::make_unique<DtModel>(DtModel::load(ckpt));
    target = target_str == "auto" ? 0.9 * model->best_dataset_return() : std::stod(target_str);
  }

  BenchConfig cfg;
  cfg.seed = seed;
  MetricsReport report;
  std::vector<std::pair<std::string, std::vector<EpisodeTrace>>> traces;
  for (const std::string& name : names) {
    std::vector<EpisodeTrace> trs;
    const PolicyFactory factory = make_policy_factory(name, cfg, model.get(), target);
    std::printf("running %s over %zu episodes...\n", name.c_str(), scenarios.size());
    report.policies.push_back(run_suite(name, factory, scenarios, cfg, &trs));
    traces.emplace_back(name, std::move(trs));
    const PolicySummary& p = report.policies.back();
    std::printf("  charged %.3f MWh, discharged %.3f MWh, sat %.1f%% (min %.1f%%), "
                "violation %.1f kW, cost %.2f EUR, reward %.3f, %.6f s/step\n",
                p.energy_charged_mean, p.energy_discharged_mean, p.satisfaction_mean,
                p.min_satisfaction, p.violation_mean, p.cost_mean, p.reward_mean,
                p.step_time_mean);
  }
  emit_outputs(report, traces, out_dir);
  std::printf("outputs in %s\n", out_dir.c_str());
  const auto problems = check_report(report, traces, all_feasible);
  for (const auto& p : problems) std::fprintf(stderr, "invariant violation: %s\n", p.c_str());
  return problems.empty() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"v2g: desk-scale V2G smart-charging lab"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string("v2g 1.0 (kernels: ") + kern::backend_name() + ")");

  // scenario gen
  auto* scenario = app.add_subcommand("scenario", "scenario tools");
  scenario->require_subcommand(1);
  auto* sgen = scenario->add_subcommand("gen", "generate a synthetic scenario");
  std::string sgen_config, sgen_out = "scenario.json";
  std::uint64_t sgen_seed = 0;
  auto* sgen_seed_opt = sgen->add_option("--seed", sgen_seed, "generator seed (overrides config)");
  sgen->add_option("--config", sgen_config, "generator config JSON");
  sgen->add_option("--out", sgen_out, "output scenario file")->required();

  // oracle solve
  auto* oracle = app.add_subcommand("oracle", "perfect-knowledge scheduler");
  oracle->require_subcommand(1);
  auto* osolve = oracle->add_subcommand("solve", "solve one scenario to a schedule");
  std::string osolve_scenario, osolve_out = "schedule.json";
  osolve->add_option("--scenario", osolve_scenario, "scenario JSON")->required();
  osolve->add_option("--out", osolve_out, "output schedule JSON")->required();

  // dataset gen / merge
  auto* dataset = app.add_subcommand("dataset", "offline dataset tools");
  dataset->require_subcommand(1);
  auto* dgen = dataset->add_subcommand("gen", "record episodes into a dataset");
  std::string dgen_policy = "oracle", dgen_out = "dataset.bin", dgen_config;
  int dgen_n = 100, dgen_lookahead = 8;
  std::uint64_t dgen_seed = 0;
  dgen->add_option("--policy", dgen_policy, "episode policy: oracle|random")->required();
  dgen->add_option("--n", dgen_n, "episode count")->required();
  dgen->add_option("--seed", dgen_seed, "base seed for scenarios and the policy");
  dgen->add_option("--gen-config", dgen_config, "scenario generator config JSON");
  dgen->add_option("--lookahead", dgen_lookahead, "observation price/limit lookahead");
  dgen->add_option("--out", dgen_out, "output dataset file")->required();
  auto* dmerge = dataset->add_subcommand("merge", "merge datasets");
  std::vector<std::string> dmerge_inputs;
  std::string dmerge_out = "merged.bin";
  dmerge->add_option("inputs", dmerge_inputs, "input dataset files")->required()->expected(-2);
  dmerge->add_option("--out", dmerge_out, "output dataset file")->required();

  // dt train / eval
  auto* dt = app.add_subcommand("dt", "decision transformer");
  dt->require_subcommand(1);
  auto* dtrain = dt->add_subcommand("train", "train on an offline dataset");
  std::string dtrain_dataset, dtrain_config, dtrain_out = "model.ckpt";
  dtrain->add_option("--dataset", dtrain_dataset, "offline dataset file")->required();
  dtrain->add_option("--config", dtrain_config, "model/training config JSON");
  dtrain->add_option("--out", dtrain_out, "output checkpoint")->required();
  auto* deval = dt->add_subcommand("eval", "evaluate a checkpoint over scenarios");
  std::string deval_ckpt, deval_dir, deval_target = "auto", deval_csv;
  int deval_episodes = 0;
  deval->add_option("--checkpoint", deval_ckpt, "model checkpoint")->required();
  deval->add_option("--scenarios", deval_dir, "directory of scenario JSON files")->required();
  deval->add_option("--target-return", deval_target, "return conditioning (number or 'auto')");
  deval->add_option("--episodes", deval_episodes, "limit the number of scenarios");
  deval->add_option("--out", deval_csv, "optional per-episode CSV");

  // bench run
  auto* bench = app.add_subcommand("bench", "benchmark harness");
  bench->require_subcommand(1);
  auto* brun = bench->add_subcommand("run", "run policies over a scenario suite");
  std::string brun_policies = "cafap,bau,random,oracle", brun_dir, brun_out = "bench_out",
              brun_ckpt, brun_target = "auto";
  int brun_episodes = 0;
  std::uint64_t brun_seed = 0;
  brun->add_option("--policies", brun_policies, "comma list: cafap,bau,random,oracle,dt");
  brun->add_option("--scenarios", brun_dir, "directory of scenario JSON files")->required();
  brun->add_option("--episodes", brun_episodes, "limit the number of scenarios");
  brun->add_option("--out", brun_out, "output directory")->required();
  brun->add_option("--checkpoint", brun_ckpt, "dt checkpoint (for policy 'dt')");
  brun->add_option("--target-return", brun_target, "dt return conditioning (number or 'auto')");
  brun->add_option("--seed", brun_seed, "base seed for the random policy");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sgen->parsed()) return cmd_scenario_gen(sgen_config, sgen_seed, sgen_seed_opt->count() > 0, sgen_out);
    if (osolve->parsed()) return cmd_oracle_solve(osolve_scenario, osolve_out);
    if (dgen->parsed())
      return cmd_dataset_gen(dgen_policy, dgen_n, dgen_seed, dgen_config, dgen_lookahead, dgen_out);
    if (dmerge->parsed()) return cmd_dataset_merge(dmerge_inputs, dmerge_out);
    if (dtrain->parsed()) return cmd_dt_train(dtrain_dataset, dtrain_config, dtrain_out);
    if (deval->parsed())
      return cmd_dt_eval(deval_ckpt, deval_dir, deval_target, deval_episodes, deval_csv);
    if (brun->parsed())
      return cmd_bench_run(brun_policies, brun_dir, brun_episodes, brun_out, brun_ckpt, brun_target,
                           brun_seed);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
