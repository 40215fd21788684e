#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "v2g/dataset.hpp"
#include "v2g/oracle.hpp"
#include "v2g/scenario.hpp"

using namespace v2g;

namespace {

Scenario zero_reward_scenario() {
  Scenario s;
  s.id = "zero";
  s.horizon = 6;
  s.dt_hours = 0.25;
  s.chargers = {{"ch0", 22.0, 22.0, 0.9, 0.9}};
  s.price_eur_kwh.assign(6, 0.0);
  s.power_limit_kw.assign(6, 100.0);
  return s;
}

// A tiny synthetic trajectory with the given rewards.
Trajectory synth(const std::vector<double>& rewards, double obs0 = 0.0) {
  Trajectory tr;
  tr.scenario_id = "synth";
  tr.horizon = static_cast<int>(rewards.size());
  tr.n_chargers = 1;
  tr.lookahead = 1;
  for (std::size_t t = 0; t < rewards.size(); ++t) {
    tr.obs.push_back(std::vector<double>(static_cast<std::size_t>(observation_dim(1, 1)), obs0));
    tr.actions.push_back({0.0});
    tr.rewards.push_back(rewards[t]);
  }
  tr.rtg.resize(rewards.size());
  double s = 0.0;
  for (std::size_t t = rewards.size(); t-- > 0;) {
    s += rewards[t];
    tr.rtg[t] = s;
  }
  tr.total_return = s;
  return tr;
}

}  // namespace

TEST_CASE("zero-reward episode records all-zero rewards and rtg") {
  const Scenario s = zero_reward_scenario();
  CafapPolicy p;
  const Trajectory tr = record_episode(s, p, 2);
  CHECK(tr.obs.size() == 6);
  for (double r : tr.rewards) CHECK(r == 0.0);
  for (double r : tr.rtg) CHECK(r == 0.0);
  CHECK(tr.check().empty());
}

TEST_CASE("returns-to-go are reward suffix sums") {
  const Trajectory tr = synth({1.0, 2.0, 3.0});
  CHECK(tr.rtg == std::vector<double>{6.0, 5.0, 3.0});
  CHECK(tr.total_return == 6.0);
  Trajectory bad = tr;
  bad.rtg[1] = 4.0;
  CHECK(!bad.check().empty());
}

TEST_CASE("oracle episodes on feasible scenarios have zero violation") {
  GeneratorConfig cfg;
  cfg.n_chargers = 3;
  cfg.horizon = 48;
  cfg.dt_hours = 0.5;
  cfg.sojourn_min_steps = 4;
  cfg.sojourn_max_steps = 12;
  cfg.limit_base_kw = 70.0;
  cfg.limit_dip_depth_kw = 20.0;
  cfg.seed = 61;
  const Scenario s = generate(cfg);
  OraclePolicy oracle;
  const Trajectory tr = record_episode(s, oracle, 4);
  // Rewards contain no violation penalty: replaying with the same cash flow
  // plus checked env invariants is covered elsewhere; here the reward must
  // equal cash minus satisfaction terms only, so no -2/kW dips.
  Env env(s);
  EnvState st = env.reset();
  double violation = 0.0;
  for (int t = 0; t < s.horizon; ++t) {
    auto [next, out] = env.step(st, tr.actions[static_cast<std::size_t>(t)]);
    violation += out.violation_kw;
    st = std::move(next);
  }
  CHECK(violation <= 1e-9);
}

TEST_CASE("merge concatenates, preserves labels, and recomputes stats") {
  OfflineDataset a, b;
  for (int i = 0; i < 3; ++i) a.append(synth({1.0, 1.0}, 1.0), SourceLabel::optimal);
  for (int i = 0; i < 2; ++i) b.append(synth({-1.0, -1.0}, 3.0), SourceLabel::random);
  a.recompute_stats();
  b.recompute_stats();
  const OfflineDataset m = merge({&a, &b});
  CHECK(m.size() == 5);
  CHECK(m.labels[0] == SourceLabel::optimal);
  CHECK(m.labels[4] == SourceLabel::random);
  // mean of the merge lies between the two source means
  CHECK(m.mean_return() > b.mean_return());
  CHECK(m.mean_return() < a.mean_return());
  // stats recomputed over the union: mean obs = (3*1 + 2*3)/5 = 1.8
  CHECK(m.stats.mean[0] == doctest::Approx(1.8));
  // merging with an empty dataset changes nothing
  OfflineDataset empty;
  const OfflineDataset m2 = merge({&m, &empty});
  CHECK(m2.size() == m.size());
  CHECK(m2.stats.mean == m.stats.mean);
  CHECK(m2.stats.return_scale == m.stats.return_scale);
}

TEST_CASE("merge of 2500 + 2500 trajectories has size 5000") {
  OfflineDataset a, b;
  for (int i = 0; i < 2500; ++i) {
    a.append(synth({0.5}), SourceLabel::optimal);
    b.append(synth({-0.5}), SourceLabel::random);
  }
  a.recompute_stats();
  b.recompute_stats();
  const OfflineDataset m = merge({&a, &b});
  CHECK(m.size() == 5000);
  std::size_t optimal = 0, random = 0;
  for (SourceLabel l : m.labels) (l == SourceLabel::optimal ? optimal : random) += 1;
  CHECK(optimal == 2500);
  CHECK(random == 2500);
}

TEST_CASE("dimension mismatch on merge/append is an error") {
  OfflineDataset a;
  a.append(synth({1.0}), SourceLabel::optimal);
  Trajectory other;
  other.scenario_id = "x";
  other.horizon = 1;
  other.n_chargers = 2;
  other.lookahead = 1;
  other.obs = {std::vector<double>(5, 0.0)};
  other.actions = {{0.0, 0.0}};
  other.rewards = {0.0};
  other.rtg = {0.0};
  CHECK_THROWS_AS(a.append(other, SourceLabel::random), std::invalid_argument);
}

TEST_CASE("sample_batch windows, padding, and normalization") {
  OfflineDataset ds;
  ds.append(synth({1.0, 2.0, 3.0, 4.0}), SourceLabel::optimal);
  ds.recompute_stats();
  Rng rng(5);
  SUBCASE("K=1 windows are single valid steps") {
    const Batch b = sample_batch(ds, rng, 8, 1);
    for (auto v : b.valid) CHECK(v == 1);
  }
  SUBCASE("short windows are left padded") {
    // t_end can be 0..3; look for a batch slot with padding.
    const Batch b = sample_batch(ds, rng, 32, 4);
    bool saw_padding = false;
    for (int i = 0; i < b.batch_size; ++i) {
      int pads = 0;
      for (int k = 0; k < 4; ++k) pads += b.valid[static_cast<std::size_t>(i * 4 + k)] ? 0 : 1;
      if (pads == 3) {
        saw_padding = true;
        // padded slots are fully zeroed
        CHECK(b.rtg[static_cast<std::size_t>(i * 4)] == 0.0);
        CHECK(b.timesteps[static_cast<std::size_t>(i * 4)] == 0);
      }
      // valid slots are a suffix
      bool seen_valid = false;
      for (int k = 0; k < 4; ++k) {
        const bool v = b.valid[static_cast<std::size_t>(i * 4 + k)];
        if (v) seen_valid = true;
        if (seen_valid) CHECK(v);
      }
    }
    CHECK(saw_padding);
  }
  SUBCASE("rtg is scaled by the return scale") {
    const Batch b = sample_batch(ds, rng, 4, 1);
    for (std::size_t i = 0; i < b.rtg.size(); ++i) {
      CHECK(b.rtg[i] <= 10.0 / ds.stats.return_scale + 1e-12);
    }
    CHECK(ds.stats.return_scale == 10.0);
  }
  SUBCASE("empty dataset and bad K are errors") {
    OfflineDataset empty;
    CHECK_THROWS_AS(sample_batch(empty, rng, 1, 1), std::invalid_argument);
    CHECK_THROWS_AS(sample_batch(ds, rng, 1, 0), std::invalid_argument);
  }
}

TEST_CASE("trajectory selection is uniform within 3 sigma") {
  OfflineDataset ds;
  constexpr int kTraj = 10;
  for (int i = 0; i < kTraj; ++i)
    ds.append(synth({static_cast<double>(i)}), SourceLabel::optimal);
  ds.recompute_stats();
  Rng rng(9001);
  constexpr int kDraws = 100000;
  std::vector<int> counts(kTraj, 0);
  for (int d = 0; d < kDraws; ++d) {
    const Batch b = sample_batch(ds, rng, 1, 1);
    // identify the trajectory by its rtg value
    const double raw = b.rtg[0] * ds.stats.return_scale;
    counts[static_cast<std::size_t>(std::lround(raw))]++;
  }
  const double expected = static_cast<double>(kDraws) / kTraj;
  const double sigma = std::sqrt(kDraws * (1.0 / kTraj) * (1.0 - 1.0 / kTraj));
  for (int i = 0; i < kTraj; ++i)
    CHECK(std::abs(counts[static_cast<std::size_t>(i)] - expected) <= 3.0 * sigma);
}

TEST_CASE("dataset serialization round-trips and checks rtg on load") {
  GeneratorConfig cfg;
  cfg.n_chargers = 2;
  cfg.horizon = 24;
  cfg.dt_hours = 1.0;
  cfg.sojourn_min_steps = 2;
  cfg.sojourn_max_steps = 6;
  cfg.seed = 71;
  OfflineDataset ds;
  for (int i = 0; i < 4; ++i) {
    cfg.seed = 71 + static_cast<std::uint64_t>(i);
    RandomPolicy p(cfg.seed);
    ds.append(record_episode(generate(cfg), p, 3), i % 2 ? SourceLabel::random : SourceLabel::optimal);
  }
  ds.recompute_stats();
  const std::string path = "roundtrip_dataset.bin";
  save_dataset(ds, path);
  const OfflineDataset back = load_dataset(path);
  REQUIRE(back.size() == ds.size());
  CHECK(back.stats.mean == ds.stats.mean);
  CHECK(back.stats.return_scale == ds.stats.return_scale);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    CHECK(back.labels[i] == ds.labels[i]);
    CHECK(back.trajectories[i].obs == ds.trajectories[i].obs);
    CHECK(back.trajectories[i].actions == ds.trajectories[i].actions);
    CHECK(back.trajectories[i].rewards == ds.trajectories[i].rewards);
    CHECK(back.trajectories[i].rtg == ds.trajectories[i].rtg);
  }
  SUBCASE("truncated file is a structured error") {
    std::ifstream in(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();
    std::ofstream out("truncated_dataset.bin", std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
    out.close();
    CHECK_THROWS_WITH_AS(load_dataset("truncated_dataset.bin"), doctest::Contains("truncated"),
                         std::runtime_error);
    std::remove("truncated_dataset.bin");
  }
  SUBCASE("bad magic is rejected") {
    std::ofstream out("not_a_dataset.bin", std::ios::binary | std::ios::trunc);
    out << "garbage bytes here";
    out.close();
    CHECK_THROWS_WITH_AS(load_dataset("not_a_dataset.bin"), doctest::Contains("magic"),
                         std::runtime_error);
    std::remove("not_a_dataset.bin");
  }
  std::remove(path.c_str());
}
