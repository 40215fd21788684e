#include "v2g/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace v2g {

namespace {

constexpr double kStdFloor = 1e-6;
constexpr double kReturnScaleFloor = 1e-9;

// The observation layout packs the occupied flag at slot 2 of each 6-wide
// charger block (see Env::observe).
std::size_t occupied_index(int lookahead, int charger) {
  return 2 + 2 * static_cast<std::size_t>(lookahead) + 6 * static_cast<std::size_t>(charger) + 2;
}

}  // namespace

const char* to_string(SourceLabel l) {
  return l == SourceLabel::optimal ? "optimal" : "random";
}

std::vector<std::string> Trajectory::check() const {
  std::vector<std::string> problems;
  const std::size_t T = obs.size();
  if (actions.size() != T || rewards.size() != T || rtg.size() != T)
    problems.push_back("series lengths differ");
  if (static_cast<int>(T) != horizon) problems.push_back("horizon does not match series length");
  if (problems.empty() && T > 0) {
    double suffix = 0.0;
    for (std::size_t t = T; t-- > 0;) {
      suffix += rewards[t];
      if (std::abs(rtg[t] - suffix) > 1e-9 * std::max(1.0, std::abs(suffix))) {
        problems.push_back("rtg is not the reward suffix sum at t=" + std::to_string(t));
        break;
      }
    }
    if (std::abs(total_return - rtg.front()) > 1e-9 * std::max(1.0, std::abs(total_return)))
      problems.push_back("total_return does not equal rtg[0]");
  }
  return problems;
}

void OfflineDataset::recompute_stats() {
  const int dim = obs_dim();
  stats.mean.assign(static_cast<std::size_t>(dim), 0.0);
  stats.stdev.assign(static_cast<std::size_t>(dim), 1.0);
  stats.return_scale = kReturnScaleFloor;
  if (trajectories.empty() || dim == 0) return;
  std::size_t count = 0;
  for (const Trajectory& tr : trajectories) {
    for (const auto& row : tr.obs) {
      for (int j = 0; j < dim; ++j) stats.mean[static_cast<std::size_t>(j)] += row[static_cast<std::size_t>(j)];
      ++count;
    }
  }
  for (double& m : stats.mean) m /= static_cast<double>(count);
  std::vector<double> var(static_cast<std::size_t>(dim), 0.0);
  for (const Trajectory& tr : trajectories) {
    for (const auto& row : tr.obs) {
      for (int j = 0; j < dim; ++j) {
        const double d = row[static_cast<std::size_t>(j)] - stats.mean[static_cast<std::size_t>(j)];
        var[static_cast<std::size_t>(j)] += d * d;
      }
    }
  }
  for (int j = 0; j < dim; ++j)
    stats.stdev[static_cast<std::size_t>(j)] =
        std::max(kStdFloor, std::sqrt(var[static_cast<std::size_t>(j)] / static_cast<double>(count)));
  double scale = 0.0;
  for (const Trajectory& tr : trajectories) scale = std::max(scale, std::abs(tr.total_return));
  stats.return_scale = std::max(scale, kReturnScaleFloor);
}

double OfflineDataset::mean_return() const {
  if (trajectories.empty()) return 0.0;
  double s = 0.0;
  for (const Trajectory& tr : trajectories) s += tr.total_return;
  return s / static_cast<double>(trajectories.size());
}

double OfflineDataset::best_return() const {
  double best = -std::numeric_limits<double>::infinity();
  for (const Trajectory& tr : trajectories) best = std::max(best, tr.total_return);
  return best;
}

double OfflineDataset::mean_return(SourceLabel l) const {
  double s = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    if (labels[i] == l) {
      s += trajectories[i].total_return;
      ++n;
    }
  }
  return n == 0 ? 0.0 : s / static_cast<double>(n);
}

void OfflineDataset::append(Trajectory t, SourceLabel label) {
  if (!trajectories.empty() && t.obs_dim() != obs_dim())
    throw std::invalid_argument("dataset: observation dimension mismatch: " +
                                std::to_string(t.obs_dim()) + " vs " + std::to_string(obs_dim()));
  trajectories.push_back(std::move(t));
  labels.push_back(label);
}

Trajectory record_episode(const Scenario& scenario, Policy& policy, int lookahead,
                          const RewardWeights& weights) {
  Env env(scenario);
  policy.reset(scenario);
  Trajectory tr;
  tr.scenario_id = scenario.id;
  tr.horizon = scenario.horizon;
  tr.n_chargers = static_cast<int>(scenario.chargers.size());
  tr.lookahead = lookahead;
  EnvState st = env.reset();
  for (int t = 0; t < scenario.horizon; ++t) {
    Observation obs = env.observe(st, lookahead);
    std::vector<double> action = policy.act(obs, env.view(st));
    auto [next, out] = env.step(st, action, weights);
    policy.observe_outcome(out);
    tr.obs.push_back(std::move(obs.features));
    tr.actions.push_back(std::move(action));
    tr.rewards.push_back(out.reward);
    st = std::move(next);
  }
  tr.rtg.resize(tr.rewards.size());
  double suffix = 0.0;
  for (std::size_t t = tr.rewards.size(); t-- > 0;) {
    suffix += tr.rewards[t];
    tr.rtg[t] = suffix;
  }
  tr.total_return = suffix;
  return tr;
}

OfflineDataset merge(const std::vector<const OfflineDataset*>& parts) {
  OfflineDataset out;
  for (const OfflineDataset* p : parts) {
    for (std::size_t i = 0; i < p->trajectories.size(); ++i)
      out.append(p->trajectories[i], p->labels[i]);
  }
  out.recompute_stats();
  return out;
}

Batch sample_batch(const OfflineDataset& ds, Rng& rng, int batch_size, int context) {
  if (ds.trajectories.empty()) throw std::invalid_argument("sample_batch: empty dataset");
  if (context < 1) throw std::invalid_argument("sample_batch: context must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("sample_batch: batch size must be >= 1");
  const int dim = ds.obs_dim();
  const int adim = ds.trajectories.front().n_chargers;
  const int lookahead = ds.trajectories.front().lookahead;
  Batch b;
  b.batch_size = batch_size;
  b.context = context;
  b.obs_dim = dim;
  b.action_dim = adim;
  const std::size_t bk = static_cast<std::size_t>(batch_size) * static_cast<std::size_t>(context);
  b.obs.assign(bk * static_cast<std::size_t>(dim), 0.0);
  b.actions.assign(bk * static_cast<std::size_t>(adim), 0.0);
  b.rtg.assign(bk, 0.0);
  b.timesteps.assign(bk, 0);
  b.valid.assign(bk, 0);
  b.occupied.assign(bk * static_cast<std::size_t>(adim), 0);

  for (int i = 0; i < batch_size; ++i) {
    const auto& tr =
        ds.trajectories[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(ds.size()) - 1))];
    const int t_end = static_cast<int>(rng.uniform_int(0, tr.horizon - 1));
    for (int k = 0; k < context; ++k) {
      const int t = t_end - (context - 1 - k);
      if (t < 0) continue;  // left padding stays zeroed
      const std::size_t slot = static_cast<std::size_t>(i) * static_cast<std::size_t>(context) +
                               static_cast<std::size_t>(k);
      b.valid[slot] = 1;
      b.timesteps[slot] = t;
      b.rtg[slot] = tr.rtg[static_cast<std::size_t>(t)] / ds.stats.return_scale;
      const auto& row = tr.obs[static_cast<std::size_t>(t)];
      double* ob = b.obs.data() + slot * static_cast<std::size_t>(dim);
      for (int j = 0; j < dim; ++j)
        ob[j] = (row[static_cast<std::size_t>(j)] - ds.stats.mean[static_cast<std::size_t>(j)]) /
                ds.stats.stdev[static_cast<std::size_t>(j)];
      for (int c = 0; c < adim; ++c) {
        b.actions[slot * static_cast<std::size_t>(adim) + static_cast<std::size_t>(c)] =
            tr.actions[static_cast<std::size_t>(t)][static_cast<std::size_t>(c)];
        b.occupied[slot * static_cast<std::size_t>(adim) + static_cast<std::size_t>(c)] =
            row[occupied_index(lookahead, c)] > 0.5 ? 1 : 0;
      }
    }
  }
  return b;
}

namespace {

static_assert(std::endian::native == std::endian::little, "dataset format assumes little-endian");

constexpr char kMagic[8] = {'V', '2', 'G', 'D', 'S', 'E', 'T', '\0'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ofstream& f, const T& v) {
  f.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& f, const char* what) {
  T v{};
  f.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!f) throw std::runtime_error(std::string("dataset: truncated file while reading ") + what);
  return v;
}

void put_doubles(std::ofstream& f, const std::vector<double>& v) {
  put(f, static_cast<std::uint64_t>(v.size()));
  f.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
}

std::vector<double> get_doubles(std::ifstream& f, const char* what) {
  const auto n = get<std::uint64_t>(f, what);
  std::vector<double> v(n);
  f.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
  if (!f) throw std::runtime_error(std::string("dataset: truncated file while reading ") + what);
  return v;
}

void put_string(std::ofstream& f, const std::string& s) {
  put(f, static_cast<std::uint32_t>(s.size()));
  f.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::ifstream& f, const char* what) {
  const auto n = get<std::uint32_t>(f, what);
  std::string s(n, '\0');
  f.read(s.data(), n);
  if (!f) throw std::runtime_error(std::string("dataset: truncated file while reading ") + what);
  return s;
}

}  // namespace

void save_dataset(const OfflineDataset& ds, const std::string& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("dataset: cannot open '" + path + "' for writing");
  f.write(kMagic, sizeof(kMagic));
  put(f, kVersion);
  put(f, static_cast<std::uint64_t>(ds.trajectories.size()));
  put_doubles(f, ds.stats.mean);
  put_doubles(f, ds.stats.stdev);
  put(f, ds.stats.return_scale);
  for (std::size_t i = 0; i < ds.trajectories.size(); ++i) {
    const Trajectory& tr = ds.trajectories[i];
    put(f, static_cast<std::uint8_t>(ds.labels[i]));
    put_string(f, tr.scenario_id);
    put(f, static_cast<std::int32_t>(tr.horizon));
    put(f, static_cast<std::int32_t>(tr.n_chargers));
    put(f, static_cast<std::int32_t>(tr.lookahead));
    put(f, tr.total_return);
    put(f, static_cast<std::uint32_t>(tr.obs_dim()));
    for (const auto& row : tr.obs)
      f.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size() * sizeof(double)));
    for (const auto& row : tr.actions)
      f.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size() * sizeof(double)));
    f.write(reinterpret_cast<const char*>(tr.rewards.data()),
            static_cast<std::streamsize>(tr.rewards.size() * sizeof(double)));
    f.write(reinterpret_cast<const char*>(tr.rtg.data()),
            static_cast<std::streamsize>(tr.rtg.size() * sizeof(double)));
  }
  if (!f) throw std::runtime_error("dataset: write failed for '" + path + "'");
}

OfflineDataset load_dataset(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("dataset: cannot open '" + path + "'");
  char magic[8];
  f.read(magic, sizeof(magic));
  if (!f || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("dataset: bad magic in '" + path + "'");
  const auto version = get<std::uint32_t>(f, "version");
  if (version != kVersion)
    throw std::runtime_error("dataset: version " + std::to_string(version) + " unsupported (want " +
                             std::to_string(kVersion) + ")");
  OfflineDataset ds;
  const auto count = get<std::uint64_t>(f, "trajectory count");
  ds.stats.mean = get_doubles(f, "stats mean");
  ds.stats.stdev = get_doubles(f, "stats stdev");
  ds.stats.return_scale = get<double>(f, "return scale");
  for (std::uint64_t i = 0; i < count; ++i) {
    Trajectory tr;
    const auto label = get<std::uint8_t>(f, "label");
    if (label > 1) throw std::runtime_error("dataset: unknown source label");
    tr.scenario_id = get_string(f, "scenario id");
    tr.horizon = get<std::int32_t>(f, "horizon");
    tr.n_chargers = get<std::int32_t>(f, "charger count");
    tr.lookahead = get<std::int32_t>(f, "lookahead");
    tr.total_return = get<double>(f, "total return");
    const auto dim = get<std::uint32_t>(f, "obs dim");
    if (tr.horizon < 0 || tr.n_chargers < 0)
      throw std::runtime_error("dataset: negative dimensions in record");
    const std::size_t T = static_cast<std::size_t>(tr.horizon);
    tr.obs.assign(T, std::vector<double>(dim));
    for (auto& row : tr.obs) {
      f.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(dim * sizeof(double)));
      if (!f) throw std::runtime_error("dataset: truncated observations in '" + path + "'");
    }
    tr.actions.assign(T, std::vector<double>(static_cast<std::size_t>(tr.n_chargers)));
    for (auto& row : tr.actions) {
      f.read(reinterpret_cast<char*>(row.data()),
             static_cast<std::streamsize>(row.size() * sizeof(double)));
      if (!f) throw std::runtime_error("dataset: truncated actions in '" + path + "'");
    }
    tr.rewards.resize(T);
    f.read(reinterpret_cast<char*>(tr.rewards.data()), static_cast<std::streamsize>(T * sizeof(double)));
    tr.rtg.resize(T);
    f.read(reinterpret_cast<char*>(tr.rtg.data()), static_cast<std::streamsize>(T * sizeof(double)));
    if (!f) throw std::runtime_error("dataset: truncated rewards in '" + path + "'");
    const auto problems = tr.check();
    if (!problems.empty())
      throw std::runtime_error("dataset: corrupt trajectory " + std::to_string(i) + ": " + problems.front());
    ds.trajectories.push_back(std::move(tr));
    ds.labels.push_back(static_cast<SourceLabel>(label));
  }
  return ds;
}

}  // namespace v2g
