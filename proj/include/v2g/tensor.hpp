// Dense float64 tensors on a tape: ops execute eagerly when recorded, the
// tape replays forward after leaf edits (recompute) and runs reverse-mode
// backward. Record order is the topological order. Single-threaded per
// graph; independent graphs are safe on separate threads.
#pragma once

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "v2g/rng.hpp"

namespace v2g::nn {

using Shape = std::vector<int>;

std::size_t numel(const Shape& s);
std::string shape_str(const Shape& s);

struct ShapeError : std::runtime_error {
  explicit ShapeError(const std::string& op, const std::string& msg)
      : std::runtime_error(op + ": " + msg), op_name(op) {}
  std::string op_name;
};

struct TensorData {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // allocated by backward; same length as data
};

struct Value {
  int id = -1;
  bool valid() const { return id >= 0; }
};

enum class OpKind {
  leaf,
  matmul,
  add,
  mul,
  scale,
  relu,
  gelu,
  tanh_op,
  softmax,
  layer_norm,
  gather_rows,
  gather_mean,
  concat,
  mean_axis,
  slice,
  masked_fill,
  causal_attention,
  reshape,
  sum_all,
  dropout,
};

const char* op_name(OpKind k);

class Graph {
 public:
  // Leaves. input() owns its storage; leaf() binds external storage (used
  // for parameters), whose grad accumulates across all bindings.
  Value input(Shape shape);
  Value input(Shape shape, std::vector<double> data);
  Value leaf(std::shared_ptr<TensorData> external);

  Value matmul(Value a, Value b);
  // add/mul accept equal shapes, or one operand whose shape is a suffix of
  // the other's (broadcast over the leading axes).
  Value add(Value a, Value b);
  Value mul(Value a, Value b);
  Value scale(Value a, double alpha);
  Value relu(Value a);
  Value gelu(Value a);
  Value tanh(Value a);
  Value softmax(Value a);     // last axis
  Value layer_norm(Value a);  // last axis, normalize only (no affine)
  // Embedding lookup: out row j = table row idx[j].
  Value gather_rows(Value table, std::vector<int> idx);
  // out row g = mean of src rows listed in groups[g]; empty group -> zeros.
  Value gather_mean(Value src, const std::vector<std::vector<int>>& groups);
  Value concat(const std::vector<Value>& parts, int axis);
  Value mean_axis(Value a, int axis);
  Value slice(Value a, int axis, int start, int len);
  // keep[i] != 0 keeps a[i], else the output is `fill`.
  Value masked_fill(Value a, std::vector<std::uint8_t> keep, double fill);
  // q,k,v: (T, heads, head_dim). Scores scaled by 1/sqrt(head_dim); output
  // at position t reads positions <= t only. The first T - valid_len
  // positions are left padding: they are masked out as keys (-1e9 before
  // softmax).
  Value causal_attention(Value q, Value k, Value v, int valid_len);
  Value reshape(Value a, Shape new_shape);
  Value sum_all(Value a);  // -> shape {1}
  // Inverted dropout; rate 0 returns `a` unchanged. The keep mask is drawn
  // once at record time and reused by recompute().
  Value dropout(Value a, double rate, Rng& rng);

  // Re-runs every non-leaf node in tape order.
  void recompute();
  // Zeroes all grads, seeds d(loss)=1, sweeps the tape in reverse.
  // Gradients accumulate additively across multiple uses of a tensor.
  void backward(Value loss);

  const Shape& shape(Value v) const { return node(v).t->shape; }
  const std::vector<double>& data(Value v) const { return node(v).t->data; }
  std::vector<double>& mutable_data(Value v) { return node(v).t->data; }
  const std::vector<double>& grad(Value v) const { return node(v).t->grad; }
  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    OpKind op = OpKind::leaf;
    std::vector<int> in;
    std::shared_ptr<TensorData> t;
    int axis = 0;
    int start = 0;
    int len = 0;
    double alpha = 0.0;
    int valid_len = 0;
    std::vector<int> idx;
    std::vector<int> group_off;
    std::vector<int> group_idx;
    std::vector<std::uint8_t> mask;
    std::vector<double> aux;  // op scratch persisted for backward
  };

  Node& node(Value v);
  const Node& node(Value v) const;
  Value push(Node n);
  void run_forward(Node& n);
  void run_backward(Node& n);
  TensorData& in_t(const Node& n, int i) { return *nodes_[static_cast<std::size_t>(n.in[static_cast<std::size_t>(i)])].t; }

  std::vector<Node> nodes_;
};

// Named parameter set shared by model modules; iteration order is creation
// order so training is deterministic.
class ParamStore {
 public:
  std::shared_ptr<TensorData> create(const std::string& name, Shape shape);
  std::shared_ptr<TensorData> create(const std::string& name, Shape shape, std::vector<double> data);
  std::shared_ptr<TensorData> get(const std::string& name) const;
  bool has(const std::string& name) const;
  const std::vector<std::string>& names() const { return order_; }
  void zero_grads();
  std::size_t total_elements() const;

 private:
  std::vector<std::string> order_;
  std::vector<std::shared_ptr<TensorData>> tensors_;
};

// Uniform in +-sqrt(6 / (fan_in + fan_out)).
std::vector<double> xavier_uniform(Rng& rng, int fan_in, int fan_out);

}  // namespace v2g::nn
