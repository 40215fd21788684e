#include "v2g/dt.hpp"

#include <cmath>
#include <fstream>
#include <json.hpp>
#include <stdexcept>

#include "v2g/checkpoint.hpp"

namespace v2g {

using nn::Graph;
using nn::Value;

void DtConfig::validate() const {
  if (context < 1) throw std::invalid_argument("dt config: context must be >= 1");
  if (d_model < 1 || blocks < 1 || heads < 1 || ff < 1)
    throw std::invalid_argument("dt config: model dimensions must be positive");
  if (d_model % heads != 0)
    throw std::invalid_argument("dt config: d_model " + std::to_string(d_model) +
                                " not divisible by heads " + std::to_string(heads));
  if (dropout < 0.0 || dropout >= 1.0)
    throw std::invalid_argument("dt config: dropout must be in [0, 1)");
  if (action_dim < 1) throw std::invalid_argument("dt config: action_dim must be >= 1");
  if (max_timesteps < 1) throw std::invalid_argument("dt config: max_timesteps must be >= 1");
  if (lookahead < 0) throw std::invalid_argument("dt config: lookahead must be >= 0");
  if (gnn_hidden < 1 || gnn_layers < 0) throw std::invalid_argument("dt config: bad gnn sizes");
  if (batch_size < 1 || train_steps < 0 || warmup_steps < 0)
    throw std::invalid_argument("dt config: bad training sizes");
}

DtConfig load_dt_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open dt config '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(f);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error("dt config parse error in " + path + ": " + e.what());
  }
  DtConfig cfg;
  auto maybe = [&](const char* k, auto& out) {
    if (j.contains(k)) out = j[k].get<std::decay_t<decltype(out)>>();
  };
  maybe("context", cfg.context);
  maybe("d_model", cfg.d_model);
  maybe("blocks", cfg.blocks);
  maybe("heads", cfg.heads);
  maybe("ff", cfg.ff);
  maybe("dropout", cfg.dropout);
  maybe("action_dim", cfg.action_dim);
  maybe("max_timesteps", cfg.max_timesteps);
  maybe("lookahead", cfg.lookahead);
  maybe("gnn_hidden", cfg.gnn_hidden);
  maybe("gnn_layers", cfg.gnn_layers);
  maybe("lr", cfg.lr);
  maybe("warmup_steps", cfg.warmup_steps);
  maybe("train_steps", cfg.train_steps);
  maybe("batch_size", cfg.batch_size);
  maybe("weight_decay", cfg.weight_decay);
  maybe("seed", cfg.seed);
  cfg.validate();
  return cfg;
}

DtModel::DtModel(DtConfig cfg) : DtModel(cfg, true, cfg.seed) {}

DtModel::DtModel(DtConfig cfg, bool /*init*/, std::uint64_t init_seed) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(init_seed);
  GnnConfig gc;
  gc.hidden = cfg_.gnn_hidden;
  gc.layers = cfg_.gnn_layers;
  gc.d_model = cfg_.d_model;
  gc.lookahead = cfg_.lookahead;
  gc.n_chargers = cfg_.action_dim;
  gnn_ = std::make_unique<GnnEncoder>(gc, params_, rng);

  const int d = cfg_.d_model;
  const int n = cfg_.action_dim;
  auto ones = [](int k) { return std::vector<double>(static_cast<std::size_t>(k), 1.0); };
  params_.create("dt.embed.rtg.w", {1, d}, nn::xavier_uniform(rng, 1, d));
  params_.create("dt.embed.rtg.b", {d});
  params_.create("dt.embed.act.w", {n, d}, nn::xavier_uniform(rng, n, d));
  params_.create("dt.embed.act.b", {d});
  params_.create("dt.embed.t", {cfg_.max_timesteps, d},
                 nn::xavier_uniform(rng, cfg_.max_timesteps, d));
  for (int b = 0; b < cfg_.blocks; ++b) {
    const std::string p = "dt.blk" + std::to_string(b) + ".";
    params_.create(p + "ln1.g", {d}, ones(d));
    params_.create(p + "ln1.b", {d});
    for (const char* m : {"wq", "wk", "wv"})
      params_.create(p + "attn." + m, {d, d}, nn::xavier_uniform(rng, d, d));
    for (const char* m : {"bq", "bk", "bv"}) params_.create(p + "attn." + m, {d});
    params_.create(p + "attn.po.w", {d, d}, nn::xavier_uniform(rng, d, d));
    params_.create(p + "attn.po.b", {d});
    params_.create(p + "ln2.g", {d}, ones(d));
    params_.create(p + "ln2.b", {d});
    params_.create(p + "mlp.w1", {d, cfg_.ff}, nn::xavier_uniform(rng, d, cfg_.ff));
    params_.create(p + "mlp.b1", {cfg_.ff});
    params_.create(p + "mlp.w2", {cfg_.ff, d}, nn::xavier_uniform(rng, cfg_.ff, d));
    params_.create(p + "mlp.b2", {d});
  }
  params_.create("dt.lnf.g", {d}, ones(d));
  params_.create("dt.lnf.b", {d});
  params_.create("dt.head.w", {d, n}, nn::xavier_uniform(rng, d, n));
  params_.create("dt.head.b", {n});

  stats_.mean.assign(static_cast<std::size_t>(observation_dim(n, cfg_.lookahead)), 0.0);
  stats_.stdev.assign(stats_.mean.size(), 1.0);
  stats_.return_scale = 1.0;
}

Value DtModel::forward(Graph& g, const Batch& batch, bool train, Rng* dropout_rng) const {
  if (batch.action_dim != cfg_.action_dim)
    throw std::invalid_argument("dt: batch action_dim " + std::to_string(batch.action_dim) +
                                " != config " + std::to_string(cfg_.action_dim));
  const int B = batch.batch_size;
  const int K = batch.context;
  const int BK = B * K;
  const int d = cfg_.d_model;
  const int n = cfg_.action_dim;
  for (int t : batch.timesteps) {
    if (t < 0 || t >= cfg_.max_timesteps)
      throw std::invalid_argument("dt: timestep " + std::to_string(t) +
                                  " outside the embedding table (max_timesteps " +
                                  std::to_string(cfg_.max_timesteps) + ")");
  }
  const bool use_dropout = train && cfg_.dropout > 0.0;
  if (use_dropout && dropout_rng == nullptr)
    throw std::invalid_argument("dt: training forward needs a dropout rng");

  auto P = [&](const std::string& name) { return g.leaf(params_.get(name)); };
  auto dropped = [&](Value v) { return use_dropout ? g.dropout(v, cfg_.dropout, *dropout_rng) : v; };
  auto ln = [&](Value x, const std::string& p) {
    return g.add(g.mul(g.layer_norm(x), P(p + ".g")), P(p + ".b"));
  };

  const auto graphs = graphs_from_batch(batch);
  Value s_emb = gnn_->encode_batch(g, graphs);  // (BK, d)
  Value r_emb = g.add(g.matmul(g.input({BK, 1}, batch.rtg), P("dt.embed.rtg.w")),
                      P("dt.embed.rtg.b"));
  Value a_emb = g.add(g.matmul(g.input({BK, n}, batch.actions), P("dt.embed.act.w")),
                      P("dt.embed.act.b"));
  Value t_emb = g.gather_rows(P("dt.embed.t"), batch.timesteps);
  r_emb = g.add(r_emb, t_emb);
  s_emb = g.add(s_emb, t_emb);
  a_emb = g.add(a_emb, t_emb);

  // Interleave (R, s, a) per step across the whole batch.
  Value all3 = g.concat({r_emb, s_emb, a_emb}, 0);
  std::vector<int> inter(static_cast<std::size_t>(3 * BK));
  for (int b = 0; b < B; ++b) {
    for (int k = 0; k < K; ++k) {
      for (int m = 0; m < 3; ++m)
        inter[static_cast<std::size_t>(b * 3 * K + 3 * k + m)] = m * BK + b * K + k;
    }
  }
  Value x = g.gather_rows(all3, inter);  // (B*3K, d)

  // Valid step counts per window; padding is a prefix by construction.
  std::vector<int> vlen(static_cast<std::size_t>(B), 0);
  for (int b = 0; b < B; ++b) {
    int v = 0;
    for (int k = 0; k < K; ++k) v += batch.valid[static_cast<std::size_t>(b * K + k)] ? 1 : 0;
    vlen[static_cast<std::size_t>(b)] = v > 0 ? 3 * v : 3 * K;
  }

  const int hd = d / cfg_.heads;
  for (int blk = 0; blk < cfg_.blocks; ++blk) {
    const std::string p = "dt.blk" + std::to_string(blk) + ".";
    {
      Value y = ln(x, p + "ln1");
      Value q = g.add(g.matmul(y, P(p + "attn.wq")), P(p + "attn.bq"));
      Value k = g.add(g.matmul(y, P(p + "attn.wk")), P(p + "attn.bk"));
      Value v = g.add(g.matmul(y, P(p + "attn.wv")), P(p + "attn.bv"));
      std::vector<Value> outs;
      outs.reserve(static_cast<std::size_t>(B));
      for (int b = 0; b < B; ++b) {
        Value qb = g.reshape(g.slice(q, 0, b * 3 * K, 3 * K), {3 * K, cfg_.heads, hd});
        Value kb = g.reshape(g.slice(k, 0, b * 3 * K, 3 * K), {3 * K, cfg_.heads, hd});
        Value vb = g.reshape(g.slice(v, 0, b * 3 * K, 3 * K), {3 * K, cfg_.heads, hd});
        Value ob = g.causal_attention(qb, kb, vb, vlen[static_cast<std::size_t>(b)]);
        outs.push_back(g.reshape(ob, {3 * K, d}));
      }
      Value a = g.concat(outs, 0);
      a = g.add(g.matmul(a, P(p + "attn.po.w")), P(p + "attn.po.b"));
      x = g.add(x, dropped(a));
    }
    {
      Value z = ln(x, p + "ln2");
      Value m = g.gelu(g.add(g.matmul(z, P(p + "mlp.w1")), P(p + "mlp.b1")));
      m = g.add(g.matmul(m, P(p + "mlp.w2")), P(p + "mlp.b2"));
      x = g.add(x, dropped(m));
    }
  }
  x = ln(x, "dt.lnf");

  // Predictions read the state tokens (position 3k+1).
  std::vector<int> sidx(static_cast<std::size_t>(BK));
  for (int b = 0; b < B; ++b) {
    for (int k = 0; k < K; ++k)
      sidx[static_cast<std::size_t>(b * K + k)] = b * 3 * K + 3 * k + 1;
  }
  Value h = g.gather_rows(x, sidx);
  return g.tanh(g.add(g.matmul(h, P("dt.head.w")), P("dt.head.b")));
}

Value DtModel::loss(Graph& g, const Batch& batch, bool train, Rng* dropout_rng,
                    Value* predictions) const {
  Value preds = forward(g, batch, train, dropout_rng);
  if (predictions) *predictions = preds;
  const int BK = batch.batch_size * batch.context;
  const int n = cfg_.action_dim;
  Value targets = g.input({BK, n}, batch.actions);
  Value diff = g.add(preds, g.scale(targets, -1.0));
  std::vector<double> mask(static_cast<std::size_t>(BK) * static_cast<std::size_t>(n), 0.0);
  long count = 0;
  for (int s = 0; s < BK; ++s) {
    if (!batch.valid[static_cast<std::size_t>(s)]) continue;
    ++count;
    for (int c = 0; c < n; ++c)
      mask[static_cast<std::size_t>(s) * static_cast<std::size_t>(n) + static_cast<std::size_t>(c)] = 1.0;
  }
  Value masked = g.mul(g.mul(diff, diff), g.input({BK, n}, std::move(mask)));
  const double denom = static_cast<double>(std::max(1L, count) * n);
  return g.scale(g.sum_all(masked), 1.0 / denom);
}

DtTrainLog DtModel::train(const OfflineDataset& ds,
                          const std::function<void(int, double)>& progress, int log_every) {
  if (ds.trajectories.empty()) throw std::invalid_argument("dt train: empty dataset");
  if (ds.stats.mean.size() != static_cast<std::size_t>(ds.obs_dim()))
    throw std::invalid_argument("dt train: dataset stats not computed");
  for (const Trajectory& tr : ds.trajectories) {
    if (tr.n_chargers != cfg_.action_dim)
      throw std::invalid_argument("dt train: trajectory charger count " +
                                  std::to_string(tr.n_chargers) + " != action_dim");
    if (tr.lookahead != cfg_.lookahead)
      throw std::invalid_argument("dt train: trajectory lookahead mismatch");
    if (tr.horizon > cfg_.max_timesteps)
      throw std::invalid_argument("dt train: horizon " + std::to_string(tr.horizon) +
                                  " exceeds max_timesteps");
  }
  stats_ = ds.stats;
  best_dataset_return_ = ds.best_return();

  nn::AdamW opt({.lr = cfg_.lr, .weight_decay = cfg_.weight_decay});
  Rng sample_rng(Rng::derive(cfg_.seed, 1));
  Rng drop_rng(Rng::derive(cfg_.seed, 2));
  DtTrainLog log;
  log.losses.reserve(static_cast<std::size_t>(cfg_.train_steps));
  for (int step = 0; step < cfg_.train_steps; ++step) {
    double lr = cfg_.lr;
    if (step < cfg_.warmup_steps) {
      lr = cfg_.lr * static_cast<double>(step + 1) / static_cast<double>(cfg_.warmup_steps);
    } else if (cfg_.train_steps > cfg_.warmup_steps) {
      const double f = static_cast<double>(step - cfg_.warmup_steps) /
                       static_cast<double>(cfg_.train_steps - cfg_.warmup_steps);
      lr = cfg_.lr * 0.5 * (1.0 + std::cos(3.141592653589793238462643383279502884 * f));
    }
    opt.set_lr(lr);
    const Batch batch = sample_batch(ds, sample_rng, cfg_.batch_size, cfg_.context);
    Graph g;
    Value l = loss(g, batch, true, &drop_rng);
    const double lv = g.data(l)[0];
    if (!std::isfinite(lv))
      throw std::runtime_error("dt train: non-finite loss " + std::to_string(lv) + " at step " +
                               std::to_string(step) + " (lr " + std::to_string(lr) + ")");
    g.backward(l);
    opt.step(params_);
    log.losses.push_back(lv);
    if (progress && (step % log_every == 0 || step + 1 == cfg_.train_steps)) progress(step, lv);
  }
  return log;
}

std::vector<double> DtModel::predict_action(const std::vector<std::vector<double>>& window_obs,
                                            const std::vector<std::vector<double>>& window_actions,
                                            const std::vector<double>& window_rtg,
                                            const std::vector<int>& window_timesteps) const {
  const int w = static_cast<int>(window_obs.size());
  if (w < 1) throw std::invalid_argument("dt predict: empty window");
  const int dim = static_cast<int>(stats_.mean.size());
  const int n = cfg_.action_dim;
  Batch b;
  b.batch_size = 1;
  b.context = w;
  b.obs_dim = dim;
  b.action_dim = n;
  b.obs.resize(static_cast<std::size_t>(w) * static_cast<std::size_t>(dim));
  b.actions.resize(static_cast<std::size_t>(w) * static_cast<std::size_t>(n));
  b.rtg.resize(static_cast<std::size_t>(w));
  b.timesteps = window_timesteps;
  b.valid.assign(static_cast<std::size_t>(w), 1);
  b.occupied.resize(static_cast<std::size_t>(w) * static_cast<std::size_t>(n));
  for (int k = 0; k < w; ++k) {
    const auto& row = window_obs[static_cast<std::size_t>(k)];
    if (static_cast<int>(row.size()) != dim)
      throw std::invalid_argument("dt predict: observation width mismatch");
    for (int j = 0; j < dim; ++j)
      b.obs[static_cast<std::size_t>(k * dim + j)] =
          (row[static_cast<std::size_t>(j)] - stats_.mean[static_cast<std::size_t>(j)]) /
          stats_.stdev[static_cast<std::size_t>(j)];
    for (int c = 0; c < n; ++c) {
      b.actions[static_cast<std::size_t>(k * n + c)] =
          window_actions[static_cast<std::size_t>(k)][static_cast<std::size_t>(c)];
      const std::size_t occ_idx =
          static_cast<std::size_t>(2 + 2 * cfg_.lookahead + 6 * c + 2);
      b.occupied[static_cast<std::size_t>(k * n + c)] = row[occ_idx] > 0.5 ? 1 : 0;
    }
    b.rtg[static_cast<std::size_t>(k)] = window_rtg[static_cast<std::size_t>(k)] / stats_.return_scale;
  }
  Graph g;
  Value preds = forward(g, b, false, nullptr);
  const auto& data = g.data(preds);
  std::vector<double> action(static_cast<std::size_t>(n));
  for (int c = 0; c < n; ++c)
    action[static_cast<std::size_t>(c)] = data[static_cast<std::size_t>((w - 1) * n + c)];
  return action;
}

void DtModel::save(const std::string& path) const {
  std::vector<std::pair<std::string, const nn::TensorData*>> tensors;
  for (const auto& name : params_.names()) tensors.emplace_back(name, params_.get(name).get());
  nn::TensorData meta_cfg;
  meta_cfg.shape = {11};
  meta_cfg.data = {static_cast<double>(cfg_.context), static_cast<double>(cfg_.d_model),
                   static_cast<double>(cfg_.blocks),  static_cast<double>(cfg_.heads),
                   static_cast<double>(cfg_.ff),      cfg_.dropout,
                   static_cast<double>(cfg_.action_dim), static_cast<double>(cfg_.max_timesteps),
                   static_cast<double>(cfg_.lookahead), static_cast<double>(cfg_.gnn_hidden),
                   static_cast<double>(cfg_.gnn_layers)};
  nn::TensorData meta_mean, meta_std, meta_scalars;
  meta_mean.shape = {static_cast<int>(stats_.mean.size())};
  meta_mean.data = stats_.mean;
  meta_std.shape = {static_cast<int>(stats_.stdev.size())};
  meta_std.data = stats_.stdev;
  meta_scalars.shape = {2};
  meta_scalars.data = {stats_.return_scale, best_dataset_return_};
  tensors.emplace_back("meta.config", &meta_cfg);
  tensors.emplace_back("meta.stats.mean", &meta_mean);
  tensors.emplace_back("meta.stats.std", &meta_std);
  tensors.emplace_back("meta.scalars", &meta_scalars);
  nn::save_checkpoint(path, tensors);
}

DtModel DtModel::load(const std::string& path) {
  auto records = nn::load_checkpoint(path);
  const nn::TensorData* meta_cfg = nullptr;
  const nn::TensorData* meta_mean = nullptr;
  const nn::TensorData* meta_std = nullptr;
  const nn::TensorData* meta_scalars = nullptr;
  for (const auto& [name, t] : records) {
    if (name == "meta.config") meta_cfg = &t;
    if (name == "meta.stats.mean") meta_mean = &t;
    if (name == "meta.stats.std") meta_std = &t;
    if (name == "meta.scalars") meta_scalars = &t;
  }
  if (!meta_cfg || !meta_mean || !meta_std || !meta_scalars || meta_cfg->data.size() != 11 ||
      meta_scalars->data.size() != 2)
    throw std::runtime_error("dt load: '" + path + "' is not a model checkpoint");
  DtConfig cfg;
  cfg.context = static_cast<int>(meta_cfg->data[0]);
  cfg.d_model = static_cast<int>(meta_cfg->data[1]);
  cfg.blocks = static_cast<int>(meta_cfg->data[2]);
  cfg.heads = static_cast<int>(meta_cfg->data[3]);
  cfg.ff = static_cast<int>(meta_cfg->data[4]);
  cfg.dropout = meta_cfg->data[5];
  cfg.action_dim = static_cast<int>(meta_cfg->data[6]);
  cfg.max_timesteps = static_cast<int>(meta_cfg->data[7]);
  cfg.lookahead = static_cast<int>(meta_cfg->data[8]);
  cfg.gnn_hidden = static_cast<int>(meta_cfg->data[9]);
  cfg.gnn_layers = static_cast<int>(meta_cfg->data[10]);
  DtModel model(cfg, true, 0);
  std::size_t loaded = 0;
  for (auto& [name, t] : records) {
    if (name.rfind("meta.", 0) == 0) continue;
    if (!model.params_.has(name))
      throw std::runtime_error("dt load: unexpected parameter '" + name + "'");
    auto dst = model.params_.get(name);
    if (dst->shape != t.shape)
      throw std::runtime_error("dt load: shape mismatch for '" + name + "'");
    dst->data = std::move(t.data);
    ++loaded;
  }
  if (loaded != model.params_.names().size())
    throw std::runtime_error("dt load: checkpoint is missing parameters");
  model.stats_.mean = meta_mean->data;
  model.stats_.stdev = meta_std->data;
  model.stats_.return_scale = meta_scalars->data[0];
  model.best_dataset_return_ = meta_scalars->data[1];
  return model;
}

void DtPolicy::reset(const Scenario&) {
  rtg_ = target_return_;
  t_ = 0;
  obs_window_.clear();
  act_window_.clear();
  rtg_window_.clear();
  step_window_.clear();
}

std::vector<double> DtPolicy::act(const Observation& obs, const StateView&) {
  obs_window_.push_back(obs.features);
  act_window_.emplace_back(static_cast<std::size_t>(model_->config().action_dim), 0.0);
  rtg_window_.push_back(rtg_);
  step_window_.push_back(t_);
  const int K = model_->config().context;
  if (static_cast<int>(obs_window_.size()) > K) {
    obs_window_.erase(obs_window_.begin());
    act_window_.erase(act_window_.begin());
    rtg_window_.erase(rtg_window_.begin());
    step_window_.erase(step_window_.begin());
  }
  std::vector<double> a = model_->predict_action(obs_window_, act_window_, rtg_window_, step_window_);
  act_window_.back() = a;
  ++t_;
  return a;
}

void DtPolicy::observe_outcome(const StepOutcome& outcome) { rtg_ -= outcome.reward; }

RolloutResult rollout(const DtModel& model, const Scenario& scenario, double target_return,
                      const RewardWeights& weights) {
  DtPolicy policy(model, target_return);
  RolloutResult r;
  r.trajectory = record_episode(scenario, policy, model.config().lookahead, weights);
  r.total_reward = r.trajectory.total_return;
  return r;
}

}  // namespace v2g
