#include "v2g/graph.hpp"

#include <stdexcept>

namespace v2g {

using nn::Value;

GraphFeatureWidths graph_feature_widths(int lookahead) {
  GraphFeatureWidths w;
  w.cpo = 2 + 2 * lookahead;
  return w;
}

namespace {

void add_edge(GraphState& gs, int a, int b) {
  gs.edges.emplace_back(a, b);
  gs.edges.emplace_back(b, a);
  gs.neighbors[static_cast<std::size_t>(a)].push_back(b);
  gs.neighbors[static_cast<std::size_t>(b)].push_back(a);
}

}  // namespace

GraphState graph_from_row(std::span<const double> row, int n_chargers, int lookahead,
                          std::span<const std::uint8_t> occupied) {
  const int dim = observation_dim(n_chargers, lookahead);
  if (static_cast<int>(row.size()) != dim)
    throw std::invalid_argument("graph_from_row: row width " + std::to_string(row.size()) +
                                " != observation dim " + std::to_string(dim));
  if (static_cast<int>(occupied.size()) != n_chargers)
    throw std::invalid_argument("graph_from_row: occupancy width mismatch");
  const int L = lookahead;
  GraphState gs;

  GraphState::Node cpo{NodeType::cpo, std::vector<double>(row.begin(), row.begin() + 2 + 2 * L)};
  gs.nodes.push_back(std::move(cpo));
  GraphState::Node tf{NodeType::transformer, {row[static_cast<std::size_t>(2 + L)], row[static_cast<std::size_t>(dim - 1)]}};
  gs.nodes.push_back(std::move(tf));
  for (int c = 0; c < n_chargers; ++c) {
    const std::size_t off = static_cast<std::size_t>(2 + 2 * L + 6 * c);
    gs.charger_nodes.push_back(static_cast<int>(gs.nodes.size()));
    gs.nodes.push_back({NodeType::charger, {row[off], row[off + 1], row[off + 2]}});
  }
  for (int c = 0; c < n_chargers; ++c) {
    if (!occupied[static_cast<std::size_t>(c)]) continue;
    const std::size_t off = static_cast<std::size_t>(2 + 2 * L + 6 * c);
    gs.ev_charger.push_back(c);
    gs.nodes.push_back(
        {NodeType::ev, {row[off + 3], row[off + 4], row[off + 5], row[off], row[off + 1]}});
  }

  gs.neighbors.resize(gs.nodes.size());
  add_edge(gs, 0, 1);  // cpo - transformer
  for (int c = 0; c < n_chargers; ++c) add_edge(gs, 1, gs.charger_nodes[static_cast<std::size_t>(c)]);
  const int ev_base = 2 + n_chargers;
  for (int e = 0; e < gs.n_evs(); ++e)
    add_edge(gs, ev_base + e, gs.charger_nodes[static_cast<std::size_t>(gs.ev_charger[static_cast<std::size_t>(e)])]);
  return gs;
}

GraphState build_graph(const Observation& obs) {
  std::vector<std::uint8_t> occupied(static_cast<std::size_t>(obs.n_chargers));
  for (int c = 0; c < obs.n_chargers; ++c) {
    const std::size_t off = static_cast<std::size_t>(2 + 2 * obs.lookahead + 6 * c + 2);
    occupied[static_cast<std::size_t>(c)] = obs.features[off] > 0.5 ? 1 : 0;
  }
  return graph_from_row(obs.features, obs.n_chargers, obs.lookahead, occupied);
}

std::vector<GraphState> graphs_from_batch(const Batch& batch) {
  const int n = batch.action_dim;
  // Recover the lookahead from the observation width.
  const int L2 = batch.obs_dim - 3 - 6 * n;
  if (L2 < 0 || L2 % 2 != 0)
    throw std::invalid_argument("graphs_from_batch: observation width does not match layout");
  const int L = L2 / 2;
  const std::size_t total = static_cast<std::size_t>(batch.batch_size) * static_cast<std::size_t>(batch.context);
  std::vector<GraphState> out;
  out.reserve(total);
  for (std::size_t s = 0; s < total; ++s) {
    out.push_back(graph_from_row(
        std::span<const double>(batch.obs.data() + s * static_cast<std::size_t>(batch.obs_dim),
                                static_cast<std::size_t>(batch.obs_dim)),
        n, L,
        std::span<const std::uint8_t>(batch.occupied.data() + s * static_cast<std::size_t>(n),
                                      static_cast<std::size_t>(n))));
  }
  return out;
}

namespace {

const char* type_tag(NodeType t) {
  switch (t) {
    case NodeType::cpo: return "cpo";
    case NodeType::transformer: return "tf";
    case NodeType::charger: return "ch";
    case NodeType::ev: return "ev";
  }
  return "?";
}

constexpr NodeType kTypes[4] = {NodeType::cpo, NodeType::transformer, NodeType::charger,
                                NodeType::ev};

int type_width(const GraphFeatureWidths& w, NodeType t) {
  switch (t) {
    case NodeType::cpo: return w.cpo;
    case NodeType::transformer: return w.transformer;
    case NodeType::charger: return w.charger;
    case NodeType::ev: return w.ev;
  }
  return 0;
}

}  // namespace

GnnEncoder::GnnEncoder(GnnConfig cfg, nn::ParamStore& params, Rng& rng)
    : cfg_(cfg), params_(&params) {
  const GraphFeatureWidths w = graph_feature_widths(cfg.lookahead);
  for (NodeType t : kTypes) {
    const std::string p = std::string("gnn.enc.") + type_tag(t);
    const int in = type_width(w, t);
    params.create(p + ".w1", {in, cfg.hidden}, nn::xavier_uniform(rng, in, cfg.hidden));
    params.create(p + ".b1", {cfg.hidden});
    params.create(p + ".w2", {cfg.hidden, cfg.hidden}, nn::xavier_uniform(rng, cfg.hidden, cfg.hidden));
    params.create(p + ".b2", {cfg.hidden});
  }
  for (int l = 0; l < cfg.layers; ++l) {
    for (NodeType t : kTypes) {
      const std::string p = "gnn.mp" + std::to_string(l) + "." + type_tag(t);
      params.create(p + ".self", {cfg.hidden, cfg.hidden},
                    nn::xavier_uniform(rng, cfg.hidden, cfg.hidden));
      params.create(p + ".nbr", {cfg.hidden, cfg.hidden},
                    nn::xavier_uniform(rng, cfg.hidden, cfg.hidden));
    }
  }
  const int concat_w = (cfg.n_chargers + 1) * cfg.hidden;
  params.create("gnn.proj.w", {concat_w, cfg.d_model},
                nn::xavier_uniform(rng, concat_w, cfg.d_model));
  params.create("gnn.proj.b", {cfg.d_model});
}

GnnEncoder::GnnEncoder(GnnConfig cfg, nn::ParamStore& params) : cfg_(cfg), params_(&params) {
  params.get("gnn.proj.w");  // presence check; throws when missing
}

nn::Value GnnEncoder::encode_batch(nn::Graph& g, std::span<const GraphState> graphs) const {
  const GraphFeatureWidths w = graph_feature_widths(cfg_.lookahead);
  const int G = static_cast<int>(graphs.size());
  const int n = cfg_.n_chargers;
  const int hid = cfg_.hidden;

  // Global node order: all CPO rows, all transformer rows, all charger rows
  // (graph-major), then all EV rows. Per-graph node index -> global row.
  int total_evs = 0;
  for (const GraphState& gs : graphs) {
    if (gs.n_chargers() != n)
      throw std::invalid_argument("gnn: graph charger count does not match config");
    total_evs += gs.n_evs();
  }
  const int ch_base = 2 * G;
  const int ev_base = 2 * G + G * n;

  // Per-type raw feature matrices.
  std::vector<double> f_cpo, f_tf, f_ch, f_ev;
  f_cpo.reserve(static_cast<std::size_t>(G) * static_cast<std::size_t>(w.cpo));
  f_tf.reserve(static_cast<std::size_t>(G) * 2);
  f_ch.reserve(static_cast<std::size_t>(G) * static_cast<std::size_t>(n) * 3);
  f_ev.reserve(static_cast<std::size_t>(total_evs) * 5);
  std::vector<std::vector<int>> groups(static_cast<std::size_t>(ev_base + total_evs));
  int ev_row = 0;
  for (int gi = 0; gi < G; ++gi) {
    const GraphState& gs = graphs[static_cast<std::size_t>(gi)];
    const auto& cpo_f = gs.nodes[0].features;
    const auto& tf_f = gs.nodes[1].features;
    f_cpo.insert(f_cpo.end(), cpo_f.begin(), cpo_f.end());
    f_tf.insert(f_tf.end(), tf_f.begin(), tf_f.end());
    // cpo <-> transformer
    groups[static_cast<std::size_t>(gi)].push_back(G + gi);
    groups[static_cast<std::size_t>(G + gi)].push_back(gi);
    for (int c = 0; c < n; ++c) {
      const auto& ch_f = gs.nodes[static_cast<std::size_t>(gs.charger_nodes[static_cast<std::size_t>(c)])].features;
      f_ch.insert(f_ch.end(), ch_f.begin(), ch_f.end());
      const int ch_row = ch_base + gi * n + c;
      groups[static_cast<std::size_t>(G + gi)].push_back(ch_row);
      groups[static_cast<std::size_t>(ch_row)].push_back(G + gi);
    }
    for (int e = 0; e < gs.n_evs(); ++e) {
      const auto& ev_f = gs.nodes[static_cast<std::size_t>(2 + n + e)].features;
      f_ev.insert(f_ev.end(), ev_f.begin(), ev_f.end());
      const int ch_row = ch_base + gi * n + gs.ev_charger[static_cast<std::size_t>(e)];
      groups[static_cast<std::size_t>(ev_base + ev_row)].push_back(ch_row);
      groups[static_cast<std::size_t>(ch_row)].push_back(ev_base + ev_row);
      ++ev_row;
    }
  }

  auto P = [&](const std::string& name) { return g.leaf(params_->get(name)); };
  auto mlp = [&](Value x, const char* tag) {
    const std::string p = std::string("gnn.enc.") + tag;
    Value h = g.relu(g.add(g.matmul(x, P(p + ".w1")), P(p + ".b1")));
    return g.add(g.matmul(h, P(p + ".w2")), P(p + ".b2"));
  };

  Value h_cpo = mlp(g.input({G, w.cpo}, std::move(f_cpo)), "cpo");
  Value h_tf = mlp(g.input({G, w.transformer}, std::move(f_tf)), "tf");
  Value h_ch = mlp(g.input({G * n, w.charger}, std::move(f_ch)), "ch");
  Value h_ev = mlp(g.input({total_evs, w.ev}, std::move(f_ev)), "ev");
  Value h = g.concat({h_cpo, h_tf, h_ch, h_ev}, 0);

  for (int l = 0; l < cfg_.layers; ++l) {
    const std::string lp = "gnn.mp" + std::to_string(l) + ".";
    Value agg = g.gather_mean(h, groups);
    auto mix = [&](int start, int len, const char* tag) {
      const std::string p = lp + tag;
      Value self = g.matmul(g.slice(h, 0, start, len), P(p + ".self"));
      Value nbr = g.matmul(g.slice(agg, 0, start, len), P(p + ".nbr"));
      return g.relu(g.add(self, nbr));
    };
    Value n_cpo = mix(0, G, "cpo");
    Value n_tf = mix(G, G, "tf");
    Value n_ch = mix(ch_base, G * n, "ch");
    Value n_ev = mix(ev_base, total_evs, "ev");
    h = g.concat({n_cpo, n_tf, n_ch, n_ev}, 0);
  }

  Value cpo_block = g.slice(h, 0, 0, G);
  Value ch_block = g.reshape(g.slice(h, 0, ch_base, G * n), {G, n * hid});
  Value state = g.concat({cpo_block, ch_block}, 1);
  return g.add(g.matmul(state, P("gnn.proj.w")), P("gnn.proj.b"));
}

GnnEncodeOut GnnEncoder::encode(nn::Graph& g, const GraphState& gs) const {
  const GraphFeatureWidths w = graph_feature_widths(cfg_.lookahead);
  const int n = gs.n_chargers();
  if (n != cfg_.n_chargers)
    throw std::invalid_argument("gnn: graph has " + std::to_string(n) + " chargers, config has " +
                                std::to_string(cfg_.n_chargers));
  const int evs = gs.n_evs();

  auto P = [&](const std::string& name) { return g.leaf(params_->get(name)); };
  auto check_width = [&](NodeType t, const std::vector<double>& f) {
    if (static_cast<int>(f.size()) != type_width(w, t))
      throw nn::ShapeError("gnn_encode", std::string("node feature width ") +
                                             std::to_string(f.size()) + " != expected " +
                                             std::to_string(type_width(w, t)));
  };
  auto mlp = [&](Value x, const char* tag) {
    const std::string p = std::string("gnn.enc.") + tag;
    Value hh = g.relu(g.add(g.matmul(x, P(p + ".w1")), P(p + ".b1")));
    return g.add(g.matmul(hh, P(p + ".w2")), P(p + ".b2"));
  };

  check_width(NodeType::cpo, gs.nodes[0].features);
  check_width(NodeType::transformer, gs.nodes[1].features);
  std::vector<double> f_ch, f_ev;
  for (int c = 0; c < n; ++c) {
    const auto& f = gs.nodes[static_cast<std::size_t>(gs.charger_nodes[static_cast<std::size_t>(c)])].features;
    check_width(NodeType::charger, f);
    f_ch.insert(f_ch.end(), f.begin(), f.end());
  }
  for (int e = 0; e < evs; ++e) {
    const auto& f = gs.nodes[static_cast<std::size_t>(2 + n + e)].features;
    check_width(NodeType::ev, f);
    f_ev.insert(f_ev.end(), f.begin(), f.end());
  }

  Value h_cpo = mlp(g.input({1, w.cpo}, gs.nodes[0].features), "cpo");
  Value h_tf = mlp(g.input({1, w.transformer}, gs.nodes[1].features), "tf");
  Value h_ch = mlp(g.input({n, w.charger}, std::move(f_ch)), "ch");
  Value h_ev = mlp(g.input({evs, w.ev}, std::move(f_ev)), "ev");
  Value h = g.concat({h_cpo, h_tf, h_ch, h_ev}, 0);

  // Node order matches GraphState (cpo, tf, chargers, evs), so the stored
  // adjacency is the aggregation map.
  for (int l = 0; l < cfg_.layers; ++l) {
    const std::string lp = "gnn.mp" + std::to_string(l) + ".";
    Value agg = g.gather_mean(h, gs.neighbors);
    auto mix = [&](int start, int len, const char* tag) {
      const std::string p = lp + tag;
      Value self = g.matmul(g.slice(h, 0, start, len), P(p + ".self"));
      Value nbr = g.matmul(g.slice(agg, 0, start, len), P(p + ".nbr"));
      return g.relu(g.add(self, nbr));
    };
    h = g.concat({mix(0, 1, "cpo"), mix(1, 1, "tf"), mix(2, n, "ch"), mix(2 + n, evs, "ev")}, 0);
  }

  GnnEncodeOut out;
  out.global = g.slice(h, 0, 0, 1);
  out.per_charger = g.slice(h, 0, 2, n);
  Value state = g.concat({out.global, g.reshape(out.per_charger, {1, n * cfg_.hidden})}, 1);
  out.state = g.add(g.matmul(state, P("gnn.proj.w")), P("gnn.proj.b"));
  return out;
}

}  // namespace v2g
