// Typed-graph view of one environment observation (CPO, transformer,
// charger, and EV nodes) and its encoder: per-type two-layer MLPs followed
// by mean-aggregation message passing, projected to the model width. The
// batched path concatenates node groups across graphs so the per-type
// transforms run as single matmuls.
#pragma once

#include <span>
#include <vector>

#include "v2g/dataset.hpp"
#include "v2g/env.hpp"
#include "v2g/tensor.hpp"

namespace v2g {

enum class NodeType : std::uint8_t { cpo = 0, transformer = 1, charger = 2, ev = 3 };

struct GraphState {
  struct Node {
    NodeType type;
    std::vector<double> features;
  };
  // Node order: cpo, transformer, chargers in charger order, EVs in charger
  // order of their charger.
  std::vector<Node> nodes;
  std::vector<std::pair<int, int>> edges;   // directed; both directions stored
  std::vector<std::vector<int>> neighbors;  // adjacency, by node index
  std::vector<int> charger_nodes;           // node index per charger
  std::vector<int> ev_charger;              // charger index per EV node, in node order

  int n_chargers() const { return static_cast<int>(charger_nodes.size()); }
  int n_evs() const { return static_cast<int>(ev_charger.size()); }
};

// Feature widths per node type, given the price/limit lookahead L.
struct GraphFeatureWidths {
  int cpo = 0;          // 2 + 2L
  int transformer = 2;  // current limit, utilization
  int charger = 3;      // max powers, occupied
  int ev = 5;           // soc, time-to-departure, remaining demand, powers
};
GraphFeatureWidths graph_feature_widths(int lookahead);

// Builds the typed graph straight from the flat observation layout.
GraphState build_graph(const Observation& obs);
// Same unpacking for one row of a training batch; `occupied` supplies the
// topology because the row itself may be z-scored.
GraphState graph_from_row(std::span<const double> row, int n_chargers, int lookahead,
                          std::span<const std::uint8_t> occupied);
std::vector<GraphState> graphs_from_batch(const Batch& batch);

struct GnnConfig {
  int hidden = 64;
  int layers = 2;
  int d_model = 128;
  int lookahead = 8;
  int n_chargers = 5;
};

struct GnnEncodeOut {
  nn::Value per_charger;  // (n_chargers, hidden), pre-projection
  nn::Value global;       // (1, hidden) CPO embedding, pre-projection
  nn::Value state;        // (1, d_model) projected state embedding
};

class GnnEncoder {
 public:
  // Creates all parameters in `params` under the "gnn." prefix.
  GnnEncoder(GnnConfig cfg, nn::ParamStore& params, Rng& rng);
  // Binds existing parameters (e.g. after loading a checkpoint).
  GnnEncoder(GnnConfig cfg, nn::ParamStore& params);

  const GnnConfig& config() const { return cfg_; }

  GnnEncodeOut encode(nn::Graph& g, const GraphState& gs) const;
  // State embeddings for a batch of graphs: (G, d_model).
  nn::Value encode_batch(nn::Graph& g, std::span<const GraphState> graphs) const;

 private:
  GnnConfig cfg_;
  nn::ParamStore* params_;
};

}  // namespace v2g
