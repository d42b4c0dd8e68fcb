#ifndef METAGCD_AUTODIFF_HPP
#define METAGCD_AUTODIFF_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "metagcd/tensor.hpp"

namespace metagcd {

class Graph;

/// Handle to a node of a Graph. Cheap to copy; valid while the graph lives.
struct Var {
  Graph* graph = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
};

enum class OpTag {
  kParam,
  kConstant,
  kMatMul,
  kMatMulNT,
  kAddRowBias,
  kAdd,
  kScale,
  kRelu,
  kL2NormalizeRows,
  kSum,
  kWeightedSum,
  kContrastiveLogProb,
  kMaskedRowMaxCenter,
};

/// Append-only reverse-mode tape. Every node's inputs precede it, so a single
/// reverse sweep over node ids is a valid topological order.
///
/// relu uses subgradient 0 at the kink.
class Graph {
 public:
  struct Node {
    OpTag op;
    std::vector<std::size_t> inputs;
    Tensor value;
    Tensor aux;                       // constant mask / weights
    std::vector<std::size_t> index;   // argmax cache
    double scalar = 0.0;
    bool requires_grad = false;
  };

  Var param(Tensor value) { return leaf(OpTag::kParam, std::move(value), true); }
  Var constant(Tensor value) { return leaf(OpTag::kConstant, std::move(value), false); }

  const Node& node(std::size_t id) const { return nodes_.at(id); }
  std::size_t size() const { return nodes_.size(); }

  /// Gradient of the last backward() root with respect to `v`.
  const Tensor& grad(Var v) const {
    if (!backward_done_) throw GraphError("grad() requested before backward()");
    return grads_.at(v.id);
  }

  /// Reverse-mode accumulation from a scalar root. A second call without
  /// reset_grad() is rejected.
  void backward(Var root);

  /// Clears gradient accumulators so backward() may run again.
  void reset_grad() {
    grads_.clear();
    backward_done_ = false;
  }

  // Node construction used by the free-function operators below.
  Var push(Node n) {
    if (!n.value.all_finite())
      throw DegenerateInputError("non-finite value produced by graph op " +
                                 std::to_string(static_cast<int>(n.op)));
    nodes_.push_back(std::move(n));
    return Var{this, nodes_.size() - 1};
  }

  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

 private:
  Var leaf(OpTag tag, Tensor value, bool is_param) {
    Node n{tag, {}, std::move(value), {}, {}, 0.0, is_param};
    return push(std::move(n));
  }

  void accumulate(std::size_t id, const Tensor& g) {
    auto& dst = grads_[id].data();
    const auto& src = g.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  }

  std::vector<Node> nodes_;
  std::vector<Tensor> grads_;
  bool backward_done_ = false;
};

inline const Tensor& Var::value() const { return graph->node(id).value; }

namespace detail {

inline Graph& same_graph(Var a, Var b) {
  if (a.graph != b.graph || a.graph == nullptr) throw GraphError("operands belong to different graphs");
  return *a.graph;
}

inline bool any_grad(Graph& g, std::initializer_list<Var> vs) {
  for (Var v : vs)
    if (g.requires_grad(v.id)) return true;
  return false;
}

}  // namespace detail

inline Var matmul(Var a, Var b) {
  Graph& g = detail::same_graph(a, b);
  Tensor out = matmul(a.value(), b.value());
  return g.push({OpTag::kMatMul, {a.id, b.id}, std::move(out), {}, {}, 0.0, detail::any_grad(g, {a, b})});
}

/// a · bᵀ.
inline Var matmul_nt(Var a, Var b) {
  Graph& g = detail::same_graph(a, b);
  Tensor out = matmul_nt(a.value(), b.value());
  return g.push({OpTag::kMatMulNT, {a.id, b.id}, std::move(out), {}, {}, 0.0, detail::any_grad(g, {a, b})});
}

/// Adds a length-n bias to every row of an m×n matrix.
inline Var add_row_bias(Var a, Var bias) {
  Graph& g = detail::same_graph(a, bias);
  const Tensor& x = a.value();
  const Tensor& b = bias.value();
  require_matrix(x, "add_row_bias");
  if (b.size() != x.cols())
    throw DimensionError("add_row_bias: bias " + shape_string(b.shape()) + " vs matrix " +
                         shape_string(x.shape()));
  Tensor out = x;
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) out(i, j) += b[j];
  return g.push({OpTag::kAddRowBias, {a.id, bias.id}, std::move(out), {}, {}, 0.0, detail::any_grad(g, {a, bias})});
}

inline Var add(Var a, Var b) {
  Graph& g = detail::same_graph(a, b);
  require_same_shape(a.value(), b.value(), "add");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
  return g.push({OpTag::kAdd, {a.id, b.id}, std::move(out), {}, {}, 0.0, detail::any_grad(g, {a, b})});
}

inline Var scale(Var a, double c) {
  Graph& g = *a.graph;
  Tensor out = a.value();
  for (double& v : out.data()) v *= c;
  return g.push({OpTag::kScale, {a.id}, std::move(out), {}, {}, c, g.requires_grad(a.id)});
}

/// Elementwise max(0, x).
inline Var relu(Var a) {
  Graph& g = *a.graph;
  Tensor out = a.value();
  for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
  return g.push({OpTag::kRelu, {a.id}, std::move(out), {}, {}, 0.0, g.requires_grad(a.id)});
}

inline Var l2_normalize_rows(Var a) {
  Graph& g = *a.graph;
  Tensor out = normalized_rows(a.value());
  return g.push({OpTag::kL2NormalizeRows, {a.id}, std::move(out), {}, {}, 0.0, g.requires_grad(a.id)});
}

inline Var sum(Var a) {
  Graph& g = *a.graph;
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  return g.push({OpTag::kSum, {a.id}, Tensor::scalar(s), {}, {}, 0.0, g.requires_grad(a.id)});
}

/// Σ w_ij a_ij with a constant weight tensor of the same shape.
inline Var weighted_sum(Var a, Tensor weights) {
  Graph& g = *a.graph;
  require_same_shape(a.value(), weights, "weighted_sum");
  double s = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i)
    if (weights[i] != 0.0) s += weights[i] * a.value()[i];
  return g.push({OpTag::kWeightedSum, {a.id}, Tensor::scalar(s), std::move(weights), {}, 0.0,
                 g.requires_grad(a.id)});
}

/// For a square logit matrix S returns L with
///   L_ij = S_ij − log Σ_{n≠i} exp(S_in)   (j ≠ i),   L_ii = 0.
/// This is the log-probability term shared by every contrastive loss.
inline Var contrastive_log_prob(Var logits) {
  Graph& g = *logits.graph;
  const Tensor& s = logits.value();
  require_matrix(s, "contrastive_log_prob");
  const std::size_t n = s.rows();
  if (s.cols() != n || n < 2)
    throw DimensionError("contrastive_log_prob expects a square matrix with at least 2 rows, got " +
                         shape_string(s.shape()));
  Tensor out({n, n});
  for (std::size_t i = 0; i < n; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < n; ++k)
      if (k != i) mx = std::max(mx, s(i, k));
    double acc = 0.0;
    for (std::size_t k = 0; k < n; ++k)
      if (k != i) acc += std::exp(s(i, k) - mx);
    const double lse = mx + std::log(acc);
    for (std::size_t j = 0; j < n; ++j) out(i, j) = j == i ? 0.0 : s(i, j) - lse;
  }
  return g.push({OpTag::kContrastiveLogProb, {logits.id}, std::move(out), {}, {}, 0.0,
                 g.requires_grad(logits.id)});
}

/// For each row i, C_ij = A_ij − max_{k: mask_ik≠0} A_ik on masked entries and 0
/// elsewhere. Rows with an empty mask are all zero.
inline Var masked_row_max_center(Var a, Tensor mask) {
  Graph& g = *a.graph;
  const Tensor& x = a.value();
  require_matrix(x, "masked_row_max_center");
  require_same_shape(x, mask, "masked_row_max_center");
  Tensor out(x.shape());
  std::vector<std::size_t> argmax(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < x.cols(); ++j)
      if (mask(i, j) != 0.0 && (argmax[i] == x.cols() || x(i, j) > x(i, argmax[i]))) argmax[i] = j;
    if (argmax[i] == x.cols()) continue;
    const double mx = x(i, argmax[i]);
    for (std::size_t j = 0; j < x.cols(); ++j)
      if (mask(i, j) != 0.0) out(i, j) = x(i, j) - mx;
  }
  return g.push({OpTag::kMaskedRowMaxCenter, {a.id}, std::move(out), std::move(mask), std::move(argmax),
                 0.0, g.requires_grad(a.id)});
}

inline void Graph::backward(Var root) {
  if (root.graph != this) throw GraphError("backward root belongs to another graph");
  if (backward_done_) throw GraphError("backward() called twice without reset_grad()");
  if (!nodes_.at(root.id).value.is_scalar())
    throw GraphError("backward root must be scalar, got shape " + shape_string(nodes_[root.id].value.shape()));

  grads_.clear();
  grads_.reserve(nodes_.size());
  for (const auto& n : nodes_) grads_.emplace_back(n.value.shape());
  grads_[root.id][0] = 1.0;
  backward_done_ = true;

  for (std::size_t id = root.id + 1; id-- > 0;) {
    const Node& n = nodes_[id];
    if (!n.requires_grad || n.inputs.empty()) continue;
    const Tensor& gout = grads_[id];
    switch (n.op) {
      case OpTag::kParam:
      case OpTag::kConstant:
        break;
      case OpTag::kMatMul: {
        const Tensor& a = nodes_[n.inputs[0]].value;
        const Tensor& b = nodes_[n.inputs[1]].value;
        if (requires_grad(n.inputs[0])) accumulate(n.inputs[0], matmul_nt(gout, b));
        if (requires_grad(n.inputs[1])) accumulate(n.inputs[1], matmul(transpose(a), gout));
        break;
      }
      case OpTag::kMatMulNT: {
        const Tensor& a = nodes_[n.inputs[0]].value;
        const Tensor& b = nodes_[n.inputs[1]].value;
        if (requires_grad(n.inputs[0])) accumulate(n.inputs[0], matmul(gout, b));
        if (requires_grad(n.inputs[1])) accumulate(n.inputs[1], matmul(transpose(gout), a));
        break;
      }
      case OpTag::kAddRowBias: {
        if (requires_grad(n.inputs[0])) accumulate(n.inputs[0], gout);
        if (requires_grad(n.inputs[1])) {
          Tensor gb(nodes_[n.inputs[1]].value.shape());
          for (std::size_t i = 0; i < gout.rows(); ++i)
            for (std::size_t j = 0; j < gout.cols(); ++j) gb[j] += gout(i, j);
          accumulate(n.inputs[1], gb);
        }
        break;
      }
      case OpTag::kAdd:
        if (requires_grad(n.inputs[0])) accumulate(n.inputs[0], gout);
        if (requires_grad(n.inputs[1])) accumulate(n.inputs[1], gout);
        break;
      case OpTag::kScale: {
        Tensor gi = gout;
        for (double& v : gi.data()) v *= n.scalar;
        accumulate(n.inputs[0], gi);
        break;
      }
      case OpTag::kRelu: {
        const Tensor& x = nodes_[n.inputs[0]].value;
        Tensor gi = gout;
        for (std::size_t i = 0; i < gi.size(); ++i)
          if (!(x[i] > 0.0)) gi[i] = 0.0;
        accumulate(n.inputs[0], gi);
        break;
      }
      case OpTag::kL2NormalizeRows: {
        // y = x/‖x‖  ⇒  dx = (g − y (y·g)) / ‖x‖
        const Tensor& x = nodes_[n.inputs[0]].value;
        const Tensor& y = n.value;
        Tensor gi(x.shape());
        for (std::size_t i = 0; i < x.rows(); ++i) {
          const double norm = std::sqrt(dot(x.row(i), x.row(i)));
          const double yg = dot(y.row(i), gout.row(i));
          for (std::size_t j = 0; j < x.cols(); ++j) gi(i, j) = (gout(i, j) - y(i, j) * yg) / norm;
        }
        accumulate(n.inputs[0], gi);
        break;
      }
      case OpTag::kSum: {
        Tensor gi(nodes_[n.inputs[0]].value.shape(), gout[0]);
        accumulate(n.inputs[0], gi);
        break;
      }
      case OpTag::kWeightedSum: {
        Tensor gi = n.aux;
        for (double& v : gi.data()) v *= gout[0];
        accumulate(n.inputs[0], gi);
        break;
      }
      case OpTag::kContrastiveLogProb: {
        const Tensor& l = n.value;
        const std::size_t m = l.rows();
        Tensor gi({m, m});
        for (std::size_t i = 0; i < m; ++i) {
          double row_total = 0.0;
          for (std::size_t j = 0; j < m; ++j)
            if (j != i) row_total += gout(i, j);
          for (std::size_t k = 0; k < m; ++k) {
            if (k == i) continue;
            const double p = std::exp(l(i, k));  // softmax over n ≠ i
            gi(i, k) = gout(i, k) - p * row_total;
          }
        }
        accumulate(n.inputs[0], gi);
        break;
      }
      case OpTag::kMaskedRowMaxCenter: {
        const Tensor& mask = n.aux;
        Tensor gi(mask.shape());
        for (std::size_t i = 0; i < mask.rows(); ++i) {
          if (n.index[i] == mask.cols()) continue;
          double row_total = 0.0;
          for (std::size_t j = 0; j < mask.cols(); ++j)
            if (mask(i, j) != 0.0) {
              gi(i, j) += gout(i, j);
              row_total += gout(i, j);
            }
          gi(i, n.index[i]) -= row_total;
        }
        accumulate(n.inputs[0], gi);
        break;
      }
    }
  }
}

/// Central-difference gradient (f(p + h·e_i) − f(p − h·e_i)) / 2h per coordinate.
inline Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f, const Tensor& p, double h) {
  if (!(h > 0.0)) throw ValidationError("finite_diff_grad: step must be positive");
  Tensor g(p.shape());
  Tensor probe = p;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + h;
    const double fp = f(probe);
    probe[i] = orig - h;
    const double fm = f(probe);
    probe[i] = orig;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

/// max_i |a_i − b_i| / max(|a_i|, |b_i|, floor). The floor keeps near-zero
/// coordinates from dominating through cancellation noise.
inline double max_relative_error(const Tensor& a, const Tensor& b, double floor = 1e-6) {
  require_same_shape(a, b, "max_relative_error");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double denom = std::max({std::abs(a[i]), std::abs(b[i]), floor});
    worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
  }
  return worst;
}

}  // namespace metagcd

#endif  // METAGCD_AUTODIFF_HPP
