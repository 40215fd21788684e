#include "v2g/tensor.hpp"

#include <cmath>
#include <cstring>

#include "v2g/kernels.hpp"

namespace v2g::nn {

namespace {

constexpr double kMaskFill = -1e9;
constexpr double kLayerNormEps = 1e-5;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;

// outer * axis_len * inner decomposition around `axis`.
struct AxisSplit {
  std::size_t outer, len, inner;
};

AxisSplit split(const Shape& s, int axis) {
  AxisSplit r{1, static_cast<std::size_t>(s[static_cast<std::size_t>(axis)]), 1};
  for (int i = 0; i < axis; ++i) r.outer *= static_cast<std::size_t>(s[static_cast<std::size_t>(i)]);
  for (std::size_t i = static_cast<std::size_t>(axis) + 1; i < s.size(); ++i)
    r.inner *= static_cast<std::size_t>(s[i]);
  return r;
}

bool is_suffix(const Shape& small, const Shape& big) {
  if (small.size() > big.size()) return false;
  const std::size_t off = big.size() - small.size();
  for (std::size_t i = 0; i < small.size(); ++i) {
    if (small[i] != big[off + i]) return false;
  }
  return true;
}

// For broadcasting binary ops: the carrier is the operand whose shape the
// output takes; the other broadcasts over its leading axes. Decided by the
// suffix relation so zero-sized tensors resolve correctly.
bool first_is_carrier(const Shape& sa, const Shape& sb) {
  if (sa == sb) return true;
  return is_suffix(sb, sa);
}

}  // namespace

std::size_t numel(const Shape& s) {
  std::size_t n = 1;
  for (int d : s) n *= static_cast<std::size_t>(d);
  return n;
}

std::string shape_str(const Shape& s) {
  std::string r = "(";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) r += ",";
    r += std::to_string(s[i]);
  }
  return r + ")";
}

const char* op_name(OpKind k) {
  switch (k) {
    case OpKind::leaf: return "leaf";
    case OpKind::matmul: return "matmul";
    case OpKind::add: return "add";
    case OpKind::mul: return "multiply";
    case OpKind::scale: return "scale";
    case OpKind::relu: return "relu";
    case OpKind::gelu: return "gelu";
    case OpKind::tanh_op: return "tanh";
    case OpKind::softmax: return "softmax";
    case OpKind::layer_norm: return "layer_norm";
    case OpKind::gather_rows: return "gather_rows";
    case OpKind::gather_mean: return "gather_mean";
    case OpKind::concat: return "concat";
    case OpKind::mean_axis: return "mean_axis";
    case OpKind::slice: return "slice";
    case OpKind::masked_fill: return "masked_fill";
    case OpKind::causal_attention: return "causal_attention";
    case OpKind::reshape: return "reshape";
    case OpKind::sum_all: return "sum_all";
    case OpKind::dropout: return "dropout";
  }
  return "?";
}

Graph::Node& Graph::node(Value v) {
  if (!v.valid() || static_cast<std::size_t>(v.id) >= nodes_.size())
    throw std::invalid_argument("graph: invalid value handle");
  return nodes_[static_cast<std::size_t>(v.id)];
}

const Graph::Node& Graph::node(Value v) const {
  if (!v.valid() || static_cast<std::size_t>(v.id) >= nodes_.size())
    throw std::invalid_argument("graph: invalid value handle");
  return nodes_[static_cast<std::size_t>(v.id)];
}

Value Graph::push(Node n) {
  nodes_.push_back(std::move(n));
  run_forward(nodes_.back());
  return Value{static_cast<int>(nodes_.size()) - 1};
}

Value Graph::input(Shape shape) { return input(shape, std::vector<double>(numel(shape), 0.0)); }

Value Graph::input(Shape shape, std::vector<double> data) {
  if (data.size() != numel(shape))
    throw ShapeError("input", "data length " + std::to_string(data.size()) + " != numel of " + shape_str(shape));
  Node n;
  n.op = OpKind::leaf;
  n.t = std::make_shared<TensorData>();
  n.t->shape = std::move(shape);
  n.t->data = std::move(data);
  nodes_.push_back(std::move(n));
  return Value{static_cast<int>(nodes_.size()) - 1};
}

Value Graph::leaf(std::shared_ptr<TensorData> external) {
  if (!external) throw std::invalid_argument("leaf: null tensor");
  if (external->data.size() != numel(external->shape))
    throw ShapeError("leaf", "data length does not match shape " + shape_str(external->shape));
  Node n;
  n.op = OpKind::leaf;
  n.t = std::move(external);
  nodes_.push_back(std::move(n));
  return Value{static_cast<int>(nodes_.size()) - 1};
}

Value Graph::matmul(Value a, Value b) {
  const Shape& sa = shape(a);
  const Shape& sb = shape(b);
  if (sa.size() != 2 || sb.size() != 2 || sa[1] != sb[0])
    throw ShapeError("matmul", "incompatible shapes " + shape_str(sa) + " x " + shape_str(sb));
  Node n;
  n.op = OpKind::matmul;
  n.in = {a.id, b.id};
  n.t = std::make_shared<TensorData>();
  n.t->shape = {sa[0], sb[1]};
  return push(std::move(n));
}

Value Graph::add(Value a, Value b) {
  const Shape& sa = shape(a);
  const Shape& sb = shape(b);
  if (!(sa == sb || is_suffix(sb, sa) || is_suffix(sa, sb)))
    throw ShapeError("add", "shapes " + shape_str(sa) + " and " + shape_str(sb) +
                                " differ and neither broadcasts on leading axes");
  Node n;
  n.op = OpKind::add;
  n.in = {a.id, b.id};
  n.t = std::make_shared<TensorData>();
  n.t->shape = first_is_carrier(sa, sb) ? sa : sb;
  return push(std::move(n));
}

Value Graph::mul(Value a, Value b) {
  const Shape& sa = shape(a);
  const Shape& sb = shape(b);
  if (!(sa == sb || is_suffix(sb, sa) || is_suffix(sa, sb)))
    throw ShapeError("multiply", "shapes " + shape_str(sa) + " and " + shape_str(sb) +
                                     " differ and neither broadcasts on leading axes");
  Node n;
  n.op = OpKind::mul;
  n.in = {a.id, b.id};
  n.t = std::make_shared<TensorData>();
  n.t->shape = first_is_carrier(sa, sb) ? sa : sb;
  return push(std::move(n));
}

Value Graph::scale(Value a, double alpha) {
  Node n;
  n.op = OpKind::scale;
  n.in = {a.id};
  n.alpha = alpha;
  n.t = std::make_shared<TensorData>();
  n.t->shape = shape(a);
  return push(std::move(n));
}

Value Graph::relu(Value a) {
  Node n;
  n.op = OpKind::relu;
  n.in = {a.id};
  n.t = std::make_shared<TensorData>();
  n.t->shape = shape(a);
  return push(std::move(n));
}

Value Graph::gelu(Value a) {
  Node n;
  n.op = OpKind::gelu;
  n.in = {a.id};
  n.t = std::make_shared<TensorData>();
  n.t->shape = shape(a);
  return push(std::move(n));
}

Value Graph::tanh(Value a) {
  Node n;
  n.op = OpKind::tanh_op;
  n.in = {a.id};
  n.t = std::make_shared<TensorData>();
  n.t->shape = shape(a);
  return push(std::move(n));
}

Value Graph::softmax(Value a) {
  if (shape(a).empty() || shape(a).back() < 1)
    throw ShapeError("softmax", "needs a non-empty last axis, got " + shape_str(shape(a)));
  Node n;
  n.op = OpKind::softmax;
  n.in = {a.id};
  n.t = std::make_shared<TensorData>();
  n.t->shape = shape(a);
  return push(std::move(n));
}

Value Graph::layer_norm(Value a) {
  if (shape(a).empty() || shape(a).back() < 1)
    throw ShapeError("layer_norm", "needs a non-empty last axis, got " + shape_str(shape(a)));
  Node n;
  n.op = OpKind::layer_norm;
  n.in = {a.id};
  n.t = std::make_shared<TensorData>();
  n.t->shape = shape(a);
  return push(std::move(n));
}

Value Graph::gather_rows(Value table, std::vector<int> idx) {
  const Shape& s = shape(table);
  if (s.empty()) throw ShapeError("gather_rows", "table must have rank >= 1");
  const int rows = s[0];
  for (int i : idx) {
    if (i < 0 || i >= rows)
      throw ShapeError("gather_rows", "index " + std::to_string(i) + " out of range for " + shape_str(s));
  }
  Node n;
  n.op = OpKind::gather_rows;
  n.in = {table.id};
  n.idx = std::move(idx);
  n.t = std::make_shared<TensorData>();
  Shape out = s;
  out[0] = static_cast<int>(n.idx.size());
  n.t->shape = std::move(out);
  return push(std::move(n));
}

Value Graph::gather_mean(Value src, const std::vector<std::vector<int>>& groups) {
  const Shape& s = shape(src);
  if (s.empty()) throw ShapeError("gather_mean", "source must have rank >= 1");
  const int rows = s[0];
  Node n;
  n.op = OpKind::gather_mean;
  n.in = {src.id};
  n.group_off.reserve(groups.size() + 1);
  n.group_off.push_back(0);
  for (const auto& g : groups) {
    for (int i : g) {
      if (i < 0 || i >= rows)
        throw ShapeError("gather_mean", "index " + std::to_string(i) + " out of range for " + shape_str(s));
      n.group_idx.push_back(i);
    }
    n.group_off.push_back(static_cast<int>(n.group_idx.size()));
  }
  n.t = std::make_shared<TensorData>();
  Shape out = s;
  out[0] = static_cast<int>(groups.size());
  n.t->shape = std::move(out);
  return push(std::move(n));
}

Value Graph::concat(const std::vector<Value>& parts, int axis) {
  if (parts.empty()) throw ShapeError("concat", "no inputs");
  const Shape& s0 = shape(parts[0]);
  if (axis < 0 || static_cast<std::size_t>(axis) >= s0.size())
    throw ShapeError("concat", "axis " + std::to_string(axis) + " out of range for " + shape_str(s0));
  int total = 0;
  for (const Value& p : parts) {
    const Shape& s = shape(p);
    if (s.size() != s0.size())
      throw ShapeError("concat", "rank mismatch: " + shape_str(s0) + " vs " + shape_str(s));
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (static_cast<int>(i) != axis && s[i] != s0[i])
        throw ShapeError("concat", "shapes " + shape_str(s0) + " and " + shape_str(s) +
                                       " differ outside axis " + std::to_string(axis));
    }
    total += s[static_cast<std::size_t>(axis)];
  }
  Node n;
  n.op = OpKind::concat;
  for (const Value& p : parts) n.in.push_back(p.id);
  n.axis = axis;
  n.t = std::make_shared<TensorData>();
  Shape out = s0;
  out[static_cast<std::size_t>(axis)] = total;
  n.t->shape = std::move(out);
  return push(std::move(n));
}

Value Graph::mean_axis(Value a, int axis) {
  const Shape& s = shape(a);
  if (axis < 0 || static_cast<std::size_t>(axis) >= s.size())
    throw ShapeError("mean_axis", "axis " + std::to_string(axis) + " out of range for " + shape_str(s));
  if (s[static_cast<std::size_t>(axis)] < 1)
    throw ShapeError("mean_axis", "empty axis in " + shape_str(s));
  Node n;
  n.op = OpKind::mean_axis;
  n.in = {a.id};
  n.axis = axis;
  n.t = std::make_shared<TensorData>();
  Shape out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (static_cast<int>(i) != axis) out.push_back(s[i]);
  }
  n.t->shape = std::move(out);
  return push(std::move(n));
}

Value Graph::slice(Value a, int axis, int start, int len) {
  const Shape& s = shape(a);
  if (axis < 0 || static_cast<std::size_t>(axis) >= s.size())
    throw ShapeError("slice", "axis " + std::to_string(axis) + " out of range for " + shape_str(s));
  if (start < 0 || len < 0 || start + len > s[static_cast<std::size_t>(axis)])
    throw ShapeError("slice", "range [" + std::to_string(start) + "," + std::to_string(start + len) +
                                  ") out of bounds for " + shape_str(s));
  Node n;
  n.op = OpKind::slice;
  n.in = {a.id};
  n.axis = axis;
  n.start = start;
  n.len = len;
  n.t = std::make_shared<TensorData>();
  Shape out = s;
  out[static_cast<std::size_t>(axis)] = len;
  n.t->shape = std::move(out);
  return push(std::move(n));
}

Value Graph::masked_fill(Value a, std::vector<std::uint8_t> keep, double fill) {
  if (keep.size() != numel(shape(a)))
    throw ShapeError("masked_fill", "mask length " + std::to_string(keep.size()) +
                                        " != numel of " + shape_str(shape(a)));
  Node n;
  n.op = OpKind::masked_fill;
  n.in = {a.id};
  n.mask = std::move(keep);
  n.alpha = fill;
  n.t = std::make_shared<TensorData>();
  n.t->shape = shape(a);
  return push(std::move(n));
}

Value Graph::causal_attention(Value q, Value k, Value v, int valid_len) {
  const Shape& sq = shape(q);
  if (sq.size() != 3)
    throw ShapeError("causal_attention", "expected (seq, heads, head_dim), got " + shape_str(sq));
  if (shape(k) != sq || shape(v) != sq)
    throw ShapeError("causal_attention", "q/k/v shapes differ: " + shape_str(sq) + " vs " +
                                             shape_str(shape(k)) + " vs " + shape_str(shape(v)));
  if (sq[0] < 1) throw ShapeError("causal_attention", "sequence length 0");
  if (valid_len < 1 || valid_len > sq[0])
    throw ShapeError("causal_attention", "valid_len " + std::to_string(valid_len) +
                                             " outside [1, " + std::to_string(sq[0]) + "]");
  Node n;
  n.op = OpKind::causal_attention;
  n.in = {q.id, k.id, v.id};
  n.valid_len = valid_len;
  n.t = std::make_shared<TensorData>();
  n.t->shape = sq;
  return push(std::move(n));
}

Value Graph::reshape(Value a, Shape new_shape) {
  if (numel(new_shape) != numel(shape(a)))
    throw ShapeError("reshape", "cannot reshape " + shape_str(shape(a)) + " to " + shape_str(new_shape));
  Node n;
  n.op = OpKind::reshape;
  n.in = {a.id};
  n.t = std::make_shared<TensorData>();
  n.t->shape = std::move(new_shape);
  return push(std::move(n));
}

Value Graph::sum_all(Value a) {
  Node n;
  n.op = OpKind::sum_all;
  n.in = {a.id};
  n.t = std::make_shared<TensorData>();
  n.t->shape = {1};
  return push(std::move(n));
}

Value Graph::dropout(Value a, double rate, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0)
    throw std::invalid_argument("dropout: rate must be in [0, 1)");
  if (rate == 0.0) return a;
  Node n;
  n.op = OpKind::dropout;
  n.in = {a.id};
  n.alpha = rate;
  const std::size_t m = numel(shape(a));
  n.mask.resize(m);
  for (std::size_t i = 0; i < m; ++i) n.mask[i] = rng.uniform01() >= rate ? 1 : 0;
  n.t = std::make_shared<TensorData>();
  n.t->shape = shape(a);
  return push(std::move(n));
}

void Graph::run_forward(Node& n) {
  const auto& K = kern::active();
  TensorData& out = *n.t;
  out.data.resize(numel(out.shape));
  switch (n.op) {
    case OpKind::leaf:
      break;
    case OpKind::matmul: {
      const TensorData& a = in_t(n, 0);
      const TensorData& b = in_t(n, 1);
      const std::size_t m = static_cast<std::size_t>(a.shape[0]);
      const std::size_t kk = static_cast<std::size_t>(a.shape[1]);
      const std::size_t nn = static_cast<std::size_t>(b.shape[1]);
      std::fill(out.data.begin(), out.data.end(), 0.0);
      for (std::size_t i = 0; i < m; ++i) {
        double* out_row = out.data.data() + i * nn;
        const double* a_row = a.data.data() + i * kk;
        for (std::size_t x = 0; x < kk; ++x) {
          if (a_row[x] != 0.0) K.axpy(a_row[x], b.data.data() + x * nn, out_row, nn);
        }
      }
      break;
    }
    case OpKind::add: {
      const TensorData& a = in_t(n, 0);
      const TensorData& b = in_t(n, 1);
      const bool a_big = first_is_carrier(a.shape, b.shape);
      const TensorData& big = a_big ? a : b;
      const TensorData& small = a_big ? b : a;
      const std::size_t sn = small.data.size();
      if (big.shape == small.shape) {
        K.add(a.data.data(), b.data.data(), out.data.data(), out.data.size());
      } else {
        for (std::size_t off = 0; off < big.data.size(); off += sn)
          K.add(big.data.data() + off, small.data.data(), out.data.data() + off, sn);
      }
      break;
    }
    case OpKind::mul: {
      const TensorData& a = in_t(n, 0);
      const TensorData& b = in_t(n, 1);
      const bool a_big = first_is_carrier(a.shape, b.shape);
      const TensorData& big = a_big ? a : b;
      const TensorData& small = a_big ? b : a;
      const std::size_t sn = small.data.size();
      if (big.shape == small.shape) {
        K.mul(a.data.data(), b.data.data(), out.data.data(), out.data.size());
      } else {
        for (std::size_t off = 0; off < big.data.size(); off += sn)
          K.mul(big.data.data() + off, small.data.data(), out.data.data() + off, sn);
      }
      break;
    }
    case OpKind::scale:
      K.scale(in_t(n, 0).data.data(), n.alpha, out.data.data(), out.data.size());
      break;
    case OpKind::relu:
      K.relu(in_t(n, 0).data.data(), out.data.data(), out.data.size());
      break;
    case OpKind::gelu: {
      const std::vector<double>& x = in_t(n, 0).data;
      for (std::size_t i = 0; i < x.size(); ++i)
        out.data[i] = 0.5 * x[i] * (1.0 + std::erf(x[i] * 0.7071067811865475244));
      break;
    }
    case OpKind::tanh_op: {
      const std::vector<double>& x = in_t(n, 0).data;
      for (std::size_t i = 0; i < x.size(); ++i) out.data[i] = std::tanh(x[i]);
      break;
    }
    case OpKind::softmax: {
      const TensorData& a = in_t(n, 0);
      const std::size_t w = static_cast<std::size_t>(a.shape.back());
      for (std::size_t off = 0; off < a.data.size(); off += w) {
        const double* row = a.data.data() + off;
        double* orow = out.data.data() + off;
        const double m = K.vmax(row, w);
        for (std::size_t i = 0; i < w; ++i) orow[i] = std::exp(row[i] - m);
        const double s = K.sum(orow, w);
        K.scale(orow, 1.0 / s, orow, w);
      }
      break;
    }
    case OpKind::layer_norm: {
      const TensorData& a = in_t(n, 0);
      const std::size_t w = static_cast<std::size_t>(a.shape.back());
      n.aux.resize(a.data.size() / w);  // inv-stddev per row
      std::size_t r = 0;
      for (std::size_t off = 0; off < a.data.size(); off += w, ++r) {
        const double* row = a.data.data() + off;
        double* orow = out.data.data() + off;
        const double mu = K.sum(row, w) / static_cast<double>(w);
        double var = 0.0;
        for (std::size_t i = 0; i < w; ++i) {
          const double c = row[i] - mu;
          orow[i] = c;
          var += c * c;
        }
        var /= static_cast<double>(w);
        const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
        n.aux[r] = inv;
        K.scale(orow, inv, orow, w);
      }
      break;
    }
    case OpKind::gather_rows: {
      const TensorData& a = in_t(n, 0);
      const std::size_t w = a.shape[0] > 0 ? a.data.size() / static_cast<std::size_t>(a.shape[0])
                                           : numel(Shape(a.shape.begin() + 1, a.shape.end()));
      for (std::size_t j = 0; j < n.idx.size(); ++j)
        std::memcpy(out.data.data() + j * w, a.data.data() + static_cast<std::size_t>(n.idx[j]) * w,
                    w * sizeof(double));
      break;
    }
    case OpKind::gather_mean: {
      const TensorData& a = in_t(n, 0);
      const std::size_t w = a.shape[0] > 0 ? a.data.size() / static_cast<std::size_t>(a.shape[0])
                                           : numel(Shape(a.shape.begin() + 1, a.shape.end()));
      std::fill(out.data.begin(), out.data.end(), 0.0);
      const std::size_t g_count = n.group_off.size() - 1;
      for (std::size_t g = 0; g < g_count; ++g) {
        const int lo = n.group_off[g];
        const int hi = n.group_off[g + 1];
        if (hi == lo) continue;
        double* orow = out.data.data() + g * w;
        const double inv = 1.0 / static_cast<double>(hi - lo);
        for (int j = lo; j < hi; ++j)
          K.axpy(inv, a.data.data() + static_cast<std::size_t>(n.group_idx[static_cast<std::size_t>(j)]) * w, orow, w);
      }
      break;
    }
    case OpKind::concat: {
      const AxisSplit sp = split(out.shape, n.axis);
      std::size_t col_off = 0;
      for (std::size_t p = 0; p < n.in.size(); ++p) {
        const TensorData& a = in_t(n, static_cast<int>(p));
        const std::size_t plen = static_cast<std::size_t>(a.shape[static_cast<std::size_t>(n.axis)]) * sp.inner;
        for (std::size_t o = 0; o < sp.outer; ++o)
          std::memcpy(out.data.data() + o * sp.len * sp.inner + col_off, a.data.data() + o * plen,
                      plen * sizeof(double));
        col_off += plen;
      }
      break;
    }
    case OpKind::mean_axis: {
      const TensorData& a = in_t(n, 0);
      const AxisSplit sp = split(a.shape, n.axis);
      std::fill(out.data.begin(), out.data.end(), 0.0);
      const double inv = 1.0 / static_cast<double>(sp.len);
      for (std::size_t o = 0; o < sp.outer; ++o) {
        double* orow = out.data.data() + o * sp.inner;
        for (std::size_t j = 0; j < sp.len; ++j)
          K.axpy(inv, a.data.data() + (o * sp.len + j) * sp.inner, orow, sp.inner);
      }
      break;
    }
    case OpKind::slice: {
      const TensorData& a = in_t(n, 0);
      const AxisSplit sp = split(a.shape, n.axis);
      const std::size_t chunk = static_cast<std::size_t>(n.len) * sp.inner;
      for (std::size_t o = 0; o < sp.outer; ++o)
        std::memcpy(out.data.data() + o * chunk,
                    a.data.data() + (o * sp.len + static_cast<std::size_t>(n.start)) * sp.inner,
                    chunk * sizeof(double));
      break;
    }
    case OpKind::masked_fill: {
      const std::vector<double>& x = in_t(n, 0).data;
      for (std::size_t i = 0; i < x.size(); ++i) out.data[i] = n.mask[i] ? x[i] : n.alpha;
      break;
    }
    case OpKind::causal_attention: {
      const TensorData& q = in_t(n, 0);
      const TensorData& k = in_t(n, 1);
      const TensorData& v = in_t(n, 2);
      const std::size_t T = static_cast<std::size_t>(q.shape[0]);
      const std::size_t H = static_cast<std::size_t>(q.shape[1]);
      const std::size_t D = static_cast<std::size_t>(q.shape[2]);
      const std::size_t pad = T - static_cast<std::size_t>(n.valid_len);
      const double sc = 1.0 / std::sqrt(static_cast<double>(D));
      n.aux.assign(H * T * T, 0.0);  // probabilities, lower triangle used
      std::fill(out.data.begin(), out.data.end(), 0.0);
      std::vector<double> srow;
      for (std::size_t h = 0; h < H; ++h) {
        for (std::size_t t = 0; t < T; ++t) {
          srow.resize(t + 1);
          const double* qrow = q.data.data() + (t * H + h) * D;
          for (std::size_t u = 0; u <= t; ++u) {
            srow[u] = u < pad ? kMaskFill
                              : sc * K.dot(qrow, k.data.data() + (u * H + h) * D, D);
          }
          const double m = K.vmax(srow.data(), t + 1);
          for (std::size_t u = 0; u <= t; ++u) srow[u] = std::exp(srow[u] - m);
          const double s = K.sum(srow.data(), t + 1);
          double* prow = n.aux.data() + (h * T + t) * T;
          double* orow = out.data.data() + (t * H + h) * D;
          for (std::size_t u = 0; u <= t; ++u) {
            const double p = srow[u] / s;
            prow[u] = p;
            if (p != 0.0) K.axpy(p, v.data.data() + (u * H + h) * D, orow, D);
          }
        }
      }
      break;
    }
    case OpKind::reshape:
      out.data = in_t(n, 0).data;
      break;
    case OpKind::sum_all:
      out.data[0] = K.sum(in_t(n, 0).data.data(), in_t(n, 0).data.size());
      break;
    case OpKind::dropout: {
      const std::vector<double>& x = in_t(n, 0).data;
      const double s = 1.0 / (1.0 - n.alpha);
      for (std::size_t i = 0; i < x.size(); ++i) out.data[i] = n.mask[i] ? x[i] * s : 0.0;
      break;
    }
  }
}

void Graph::run_backward(Node& n) {
  const auto& K = kern::active();
  const TensorData& out = *n.t;
  const std::vector<double>& g = out.grad;
  switch (n.op) {
    case OpKind::leaf:
      break;
    case OpKind::matmul: {
      TensorData& a = in_t(n, 0);
      TensorData& b = in_t(n, 1);
      const std::size_t m = static_cast<std::size_t>(a.shape[0]);
      const std::size_t kk = static_cast<std::size_t>(a.shape[1]);
      const std::size_t nn = static_cast<std::size_t>(b.shape[1]);
      for (std::size_t i = 0; i < m; ++i) {
        const double* grow = g.data() + i * nn;
        const double* a_row = a.data.data() + i * kk;
        double* da_row = a.grad.data() + i * kk;
        for (std::size_t x = 0; x < kk; ++x) {
          da_row[x] += K.dot(grow, b.data.data() + x * nn, nn);
          if (a_row[x] != 0.0) K.axpy(a_row[x], grow, b.grad.data() + x * nn, nn);
        }
      }
      break;
    }
    case OpKind::add: {
      TensorData& a = in_t(n, 0);
      TensorData& b = in_t(n, 1);
      for (TensorData* t : {&a, &b}) {
        const std::size_t sn = t->data.size();
        if (sn == g.size()) {
          K.axpy(1.0, g.data(), t->grad.data(), sn);
        } else {
          for (std::size_t off = 0; off < g.size(); off += sn) K.axpy(1.0, g.data() + off, t->grad.data(), sn);
        }
      }
      break;
    }
    case OpKind::mul: {
      TensorData& a = in_t(n, 0);
      TensorData& b = in_t(n, 1);
      const bool a_big = first_is_carrier(a.shape, b.shape);
      TensorData& big = a_big ? a : b;
      TensorData& small = a_big ? b : a;
      const std::size_t sn = small.data.size();
      if (big.shape == small.shape) {
        K.mul_acc(g.data(), b.data.data(), a.grad.data(), sn);
        K.mul_acc(g.data(), a.data.data(), b.grad.data(), sn);
      } else {
        for (std::size_t off = 0; off < big.data.size(); off += sn) {
          K.mul_acc(g.data() + off, small.data.data(), big.grad.data() + off, sn);
          K.mul_acc(g.data() + off, big.data.data() + off, small.grad.data(), sn);
        }
      }
      break;
    }
    case OpKind::scale:
      K.axpy(n.alpha, g.data(), in_t(n, 0).grad.data(), g.size());
      break;
    case OpKind::relu:
      K.relu_bwd_acc(in_t(n, 0).data.data(), g.data(), in_t(n, 0).grad.data(), g.size());
      break;
    case OpKind::gelu: {
      TensorData& a = in_t(n, 0);
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double x = a.data[i];
        const double cdf = 0.5 * (1.0 + std::erf(x * 0.7071067811865475244));
        const double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
        a.grad[i] += g[i] * (cdf + x * pdf);
      }
      break;
    }
    case OpKind::tanh_op: {
      TensorData& a = in_t(n, 0);
      for (std::size_t i = 0; i < g.size(); ++i) a.grad[i] += g[i] * (1.0 - out.data[i] * out.data[i]);
      break;
    }
    case OpKind::softmax: {
      TensorData& a = in_t(n, 0);
      const std::size_t w = static_cast<std::size_t>(a.shape.back());
      for (std::size_t off = 0; off < g.size(); off += w) {
        const double* y = out.data.data() + off;
        const double* gy = g.data() + off;
        const double dyy = K.dot(gy, y, w);
        double* da = a.grad.data() + off;
        for (std::size_t i = 0; i < w; ++i) da[i] += y[i] * (gy[i] - dyy);
      }
      break;
    }
    case OpKind::layer_norm: {
      TensorData& a = in_t(n, 0);
      const std::size_t w = static_cast<std::size_t>(a.shape.back());
      const double invw = 1.0 / static_cast<double>(w);
      std::size_t r = 0;
      for (std::size_t off = 0; off < g.size(); off += w, ++r) {
        const double* y = out.data.data() + off;
        const double* gy = g.data() + off;
        const double inv = n.aux[r];
        const double mean_g = K.sum(gy, w) * invw;
        const double mean_gy = K.dot(gy, y, w) * invw;
        double* da = a.grad.data() + off;
        for (std::size_t i = 0; i < w; ++i) da[i] += inv * (gy[i] - mean_g - y[i] * mean_gy);
      }
      break;
    }
    case OpKind::gather_rows: {
      TensorData& a = in_t(n, 0);
      const std::size_t w = a.shape[0] > 0 ? a.data.size() / static_cast<std::size_t>(a.shape[0]) : 0;
      for (std::size_t j = 0; j < n.idx.size(); ++j)
        K.axpy(1.0, g.data() + j * w, a.grad.data() + static_cast<std::size_t>(n.idx[j]) * w, w);
      break;
    }
    case OpKind::gather_mean: {
      TensorData& a = in_t(n, 0);
      const std::size_t w = a.shape[0] > 0 ? a.data.size() / static_cast<std::size_t>(a.shape[0]) : 0;
      const std::size_t g_count = n.group_off.size() - 1;
      for (std::size_t gi = 0; gi < g_count; ++gi) {
        const int lo = n.group_off[gi];
        const int hi = n.group_off[gi + 1];
        if (hi == lo) continue;
        const double inv = 1.0 / static_cast<double>(hi - lo);
        const double* grow = g.data() + gi * w;
        for (int j = lo; j < hi; ++j)
          K.axpy(inv, grow, a.grad.data() + static_cast<std::size_t>(n.group_idx[static_cast<std::size_t>(j)]) * w, w);
      }
      break;
    }
    case OpKind::concat: {
      const AxisSplit sp = split(out.shape, n.axis);
      std::size_t col_off = 0;
      for (std::size_t p = 0; p < n.in.size(); ++p) {
        TensorData& a = in_t(n, static_cast<int>(p));
        const std::size_t plen = static_cast<std::size_t>(a.shape[static_cast<std::size_t>(n.axis)]) * sp.inner;
        for (std::size_t o = 0; o < sp.outer; ++o)
          K.axpy(1.0, g.data() + o * sp.len * sp.inner + col_off, a.grad.data() + o * plen, plen);
        col_off += plen;
      }
      break;
    }
    case OpKind::mean_axis: {
      TensorData& a = in_t(n, 0);
      const AxisSplit sp = split(a.shape, n.axis);
      const double inv = 1.0 / static_cast<double>(sp.len);
      for (std::size_t o = 0; o < sp.outer; ++o) {
        const double* grow = g.data() + o * sp.inner;
        for (std::size_t j = 0; j < sp.len; ++j)
          K.axpy(inv, grow, a.grad.data() + (o * sp.len + j) * sp.inner, sp.inner);
      }
      break;
    }
    case OpKind::slice: {
      TensorData& a = in_t(n, 0);
      const AxisSplit sp = split(a.shape, n.axis);
      const std::size_t chunk = static_cast<std::size_t>(n.len) * sp.inner;
      for (std::size_t o = 0; o < sp.outer; ++o)
        K.axpy(1.0, g.data() + o * chunk,
               a.grad.data() + (o * sp.len + static_cast<std::size_t>(n.start)) * sp.inner, chunk);
      break;
    }
    case OpKind::masked_fill: {
      TensorData& a = in_t(n, 0);
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (n.mask[i]) a.grad[i] += g[i];
      }
      break;
    }
    case OpKind::causal_attention: {
      TensorData& q = in_t(n, 0);
      TensorData& k = in_t(n, 1);
      TensorData& v = in_t(n, 2);
      const std::size_t T = static_cast<std::size_t>(q.shape[0]);
      const std::size_t H = static_cast<std::size_t>(q.shape[1]);
      const std::size_t D = static_cast<std::size_t>(q.shape[2]);
      const std::size_t pad = T - static_cast<std::size_t>(n.valid_len);
      const double sc = 1.0 / std::sqrt(static_cast<double>(D));
      std::vector<double> dp;
      for (std::size_t h = 0; h < H; ++h) {
        for (std::size_t t = 0; t < T; ++t) {
          const double* grow = g.data() + (t * H + h) * D;
          const double* prow = n.aux.data() + (h * T + t) * T;
          dp.resize(t + 1);
          double sdot = 0.0;
          for (std::size_t u = 0; u <= t; ++u) {
            dp[u] = K.dot(grow, v.data.data() + (u * H + h) * D, D);
            sdot += prow[u] * dp[u];
          }
          const double* qrow = q.data.data() + (t * H + h) * D;
          double* dqrow = q.grad.data() + (t * H + h) * D;
          for (std::size_t u = 0; u <= t; ++u) {
            const double p = prow[u];
            if (p != 0.0) K.axpy(p, grow, v.grad.data() + (u * H + h) * D, D);
            // Padded keys carry the constant mask fill, not q.k, so no
            // gradient reaches q/k through them.
            if (u < pad) continue;
            const double ds = p * (dp[u] - sdot) * sc;
            if (ds != 0.0) {
              K.axpy(ds, k.data.data() + (u * H + h) * D, dqrow, D);
              K.axpy(ds, qrow, k.grad.data() + (u * H + h) * D, D);
            }
          }
        }
      }
      break;
    }
    case OpKind::reshape:
      K.axpy(1.0, g.data(), in_t(n, 0).grad.data(), g.size());
      break;
    case OpKind::sum_all: {
      TensorData& a = in_t(n, 0);
      const double gv = g[0];
      for (double& d : a.grad) d += gv;
      break;
    }
    case OpKind::dropout: {
      TensorData& a = in_t(n, 0);
      const double s = 1.0 / (1.0 - n.alpha);
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (n.mask[i]) a.grad[i] += g[i] * s;
      }
      break;
    }
  }
}

void Graph::recompute() {
  for (Node& n : nodes_) {
    if (n.op != OpKind::leaf) run_forward(n);
  }
}

void Graph::backward(Value loss) {
  Node& ln = node(loss);
  if (numel(ln.t->shape) != 1)
    throw std::invalid_argument("backward: loss must be scalar, got shape " + shape_str(ln.t->shape));
  for (Node& n : nodes_) n.t->grad.assign(n.t->data.size(), 0.0);
  ln.t->grad[0] = 1.0;
  for (std::size_t i = nodes_.size(); i-- > 0;) {
    Node& n = nodes_[i];
    if (n.op != OpKind::leaf) run_backward(n);
  }
}

std::shared_ptr<TensorData> ParamStore::create(const std::string& name, Shape shape) {
  return create(name, shape, std::vector<double>(numel(shape), 0.0));
}

std::shared_ptr<TensorData> ParamStore::create(const std::string& name, Shape shape,
                                               std::vector<double> data) {
  if (has(name)) throw std::invalid_argument("param '" + name + "' already exists");
  if (data.size() != numel(shape))
    throw ShapeError("param", "'" + name + "': data length does not match " + shape_str(shape));
  auto t = std::make_shared<TensorData>();
  t->shape = std::move(shape);
  t->data = std::move(data);
  order_.push_back(name);
  tensors_.push_back(t);
  return t;
}

std::shared_ptr<TensorData> ParamStore::get(const std::string& name) const {
  for (std::size_t i = 0; i < order_.size(); ++i) {
    if (order_[i] == name) return tensors_[i];
  }
  throw std::invalid_argument("param '" + name + "' not found");
}

bool ParamStore::has(const std::string& name) const {
  for (const auto& n : order_) {
    if (n == name) return true;
  }
  return false;
}

void ParamStore::zero_grads() {
  for (auto& t : tensors_) t->grad.assign(t->data.size(), 0.0);
}

std::size_t ParamStore::total_elements() const {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += t->data.size();
  return n;
}

std::vector<double> xavier_uniform(Rng& rng, int fan_in, int fan_out) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::vector<double> w(static_cast<std::size_t>(fan_in) * static_cast<std::size_t>(fan_out));
  for (double& x : w) x = rng.uniform(-bound, bound);
  return w;
}

}  // namespace v2g::nn
