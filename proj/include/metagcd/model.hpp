#ifndef METAGCD_MODEL_HPP
#define METAGCD_MODEL_HPP

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "metagcd/autodiff.hpp"
#include "metagcd/rng.hpp"
#include "metagcd/tensor.hpp"

namespace metagcd {

using Widths = std::vector<std::size_t>;

/// Affine map x·W + b with W stored in×out.
struct Layer {
  Tensor weight;
  Tensor bias;

  friend bool operator==(const Layer&, const Layer&) = default;
};

struct MetaParamsTag {};
struct AdaptedParamsTag {};
struct GradientTag {};

/// Network parameters θ = {θ^E, θ^P}: an MLP encoder f and a projection head φ,
/// plus the optional learned attention maps f₁, f₂ used by the positiveness
/// module. The tag keeps meta-parameters, inner-loop adapted parameters and
/// gradients from being mixed up.
template <typename Tag>
struct BasicParams {
  Widths encoder_widths;
  Widths projection_widths;
  std::vector<Layer> encoder;
  std::vector<Layer> projection;
  std::vector<Tensor> attention;  // empty, or {f1, f2} each d_z × d_z

  std::size_t input_dim() const { return encoder_widths.front(); }
  std::size_t feature_dim() const { return encoder_widths.back(); }
  std::size_t embedding_dim() const { return projection_widths.back(); }
  bool has_attention() const { return !attention.empty(); }

  /// Every trainable tensor in a fixed order.
  template <typename F>
  void for_each_tensor(F&& f) {
    for (auto& l : encoder) { f(l.weight); f(l.bias); }
    for (auto& l : projection) { f(l.weight); f(l.bias); }
    for (auto& t : attention) f(t);
  }
  template <typename F>
  void for_each_tensor(F&& f) const {
    for (const auto& l : encoder) { f(l.weight); f(l.bias); }
    for (const auto& l : projection) { f(l.weight); f(l.bias); }
    for (const auto& t : attention) f(t);
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for_each_tensor([&](const Tensor& t) { n += t.size(); });
    return n;
  }

  /// Same structure and widths, values taken from `other`.
  template <typename OtherTag>
  static BasicParams from(const BasicParams<OtherTag>& other) {
    return BasicParams{other.encoder_widths, other.projection_widths, other.encoder, other.projection,
                       other.attention};
  }

  /// Zero tensors with this structure.
  BasicParams zeros_like() const {
    BasicParams z = *this;
    z.for_each_tensor([](Tensor& t) { t = Tensor(t.shape()); });
    return z;
  }

  friend bool operator==(const BasicParams&, const BasicParams&) = default;
};

using ModelParams = BasicParams<MetaParamsTag>;
using AdaptedParams = BasicParams<AdaptedParamsTag>;

inline void validate_widths(const Widths& encoder, const Widths& projection) {
  if (encoder.size() < 2) throw ValidationError("encoder width list needs at least an input and an output width");
  if (projection.empty()) throw ValidationError("projection width list is empty");
  for (std::size_t w : encoder)
    if (w == 0) throw ValidationError("encoder widths must be positive");
  for (std::size_t w : projection)
    if (w == 0) throw ValidationError("projection widths must be positive");
  if (encoder.back() != projection.front())
    throw ValidationError("projection input width " + std::to_string(projection.front()) +
                          " does not match encoder output width " + std::to_string(encoder.back()));
}

namespace detail {

inline std::vector<Layer> xavier_layers(const Widths& widths, Rng& rng) {
  std::vector<Layer> layers;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    const std::size_t fan_in = widths[i], fan_out = widths[i + 1];
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Tensor w({fan_in, fan_out});
    for (double& v : w.data()) v = rng.uniform(-bound, bound);
    layers.push_back({std::move(w), Tensor({fan_out})});
  }
  return layers;
}

}  // namespace detail

/// Xavier-uniform weights, zero biases. With `learned_attention` the two
/// attention maps start at the identity so both positiveness modes agree at
/// initialization.
inline ModelParams init_params(const Widths& encoder, const Widths& projection, Rng& rng,
                               bool learned_attention = false) {
  validate_widths(encoder, projection);
  ModelParams p;
  p.encoder_widths = encoder;
  p.projection_widths = projection;
  p.encoder = detail::xavier_layers(encoder, rng);
  p.projection = detail::xavier_layers(projection, rng);
  if (learned_attention) {
    p.attention.push_back(Tensor::identity(projection.back()));
    p.attention.push_back(Tensor::identity(projection.back()));
  }
  return p;
}

/// Functional SGD update p − lr·g. Neither input is modified.
template <typename Tag>
BasicParams<Tag> sgd_step(const BasicParams<Tag>& params, const BasicParams<GradientTag>& grads, double lr) {
  BasicParams<Tag> out = params;
  std::vector<const Tensor*> gs;
  grads.for_each_tensor([&](const Tensor& t) { gs.push_back(&t); });
  std::size_t k = 0;
  out.for_each_tensor([&](Tensor& t) {
    if (k >= gs.size()) throw DimensionError("sgd_step: gradient has fewer tensors than parameters");
    require_same_shape(t, *gs[k], "sgd_step");
    for (std::size_t i = 0; i < t.size(); ++i) t[i] -= lr * (*gs[k])[i];
    ++k;
  });
  if (k != gs.size()) throw DimensionError("sgd_step: gradient has more tensors than parameters");
  return out;
}

using Gradients = BasicParams<GradientTag>;

/// Parameters placed on a graph as leaf nodes.
struct BoundParams {
  struct BoundLayer {
    Var weight;
    Var bias;
  };
  std::vector<BoundLayer> encoder;
  std::vector<BoundLayer> projection;
  std::vector<Var> attention;
};

template <typename Tag>
BoundParams bind(Graph& g, const BasicParams<Tag>& p, bool trainable = true) {
  auto leaf = [&](const Tensor& t) { return trainable ? g.param(t) : g.constant(t); };
  BoundParams b;
  for (const auto& l : p.encoder) b.encoder.push_back({leaf(l.weight), leaf(l.bias)});
  for (const auto& l : p.projection) b.projection.push_back({leaf(l.weight), leaf(l.bias)});
  for (const auto& t : p.attention) b.attention.push_back(leaf(t));
  return b;
}

/// Gradients of the bound leaves after g.backward(), shaped like `like`.
template <typename Tag>
Gradients collect_grads(const Graph& g, const BoundParams& b, const BasicParams<Tag>& like) {
  Gradients out = Gradients::from(like);
  std::vector<Var> vars;
  for (const auto& l : b.encoder) { vars.push_back(l.weight); vars.push_back(l.bias); }
  for (const auto& l : b.projection) { vars.push_back(l.weight); vars.push_back(l.bias); }
  for (Var v : b.attention) vars.push_back(v);
  std::size_t k = 0;
  out.for_each_tensor([&](Tensor& t) { t = g.grad(vars[k++]); });
  return out;
}

namespace detail {

inline Var run_layers(const std::vector<BoundParams::BoundLayer>& layers, Var x) {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (i > 0) x = relu(x);
    x = add_row_bias(matmul(x, layers[i].weight), layers[i].bias);
  }
  return x;
}

inline void check_input(const Tensor& x, std::size_t dim) {
  require_matrix(x, "model input");
  if (x.cols() != dim)
    throw DimensionError("model input has " + std::to_string(x.cols()) + " columns, encoder expects " +
                         std::to_string(dim));
}

}  // namespace detail

/// Encoder output h = f(x), before normalization.
inline Var encode(const BoundParams& b, Var x) { return detail::run_layers(b.encoder, x); }

/// z = φ(f(x)), l2-normalized. relu sits between consecutive layers of the
/// whole encoder+projection chain; the final projection layer is linear.
inline Var embed(const BoundParams& b, Var x) {
  Var h = encode(b, x);
  if (!b.projection.empty()) h = detail::run_layers(b.projection, relu(h));
  return l2_normalize_rows(h);
}

inline Var features(const BoundParams& b, Var x) { return l2_normalize_rows(encode(b, x)); }

template <typename Tag>
Tensor embed(const BasicParams<Tag>& p, const Tensor& x) {
  detail::check_input(x, p.input_dim());
  Graph g;
  const BoundParams b = bind(g, p, false);
  return embed(b, g.constant(x)).value();
}

/// Clustering features: normalized encoder output, projection head discarded.
template <typename Tag>
Tensor features(const BasicParams<Tag>& p, const Tensor& x) {
  detail::check_input(x, p.input_dim());
  Graph g;
  const BoundParams b = bind(g, p, false);
  return features(b, g.constant(x)).value();
}

}  // namespace metagcd

#endif  // METAGCD_MODEL_HPP
