#ifndef METAGCD_LOSSES_HPP
#define METAGCD_LOSSES_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "metagcd/autodiff.hpp"
#include "metagcd/tensor.hpp"

namespace metagcd {

enum class AttentionMode { kIdentity, kLearned };

struct LossConfig {
  double tau = 0.1;
  double lambda = 0.35;
  double epsilon = 0.85;
  AttentionMode attention = AttentionMode::kIdentity;
  bool stop_gradient_on_w = true;

  void validate() const {
    if (!(tau > 0.0)) throw ValidationError("tau must be positive");
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw ValidationError("lambda must lie in [0, 1]");
    if (!(epsilon > -1.0 - 1e-12 && epsilon <= 1.0)) throw ValidationError("epsilon must lie in [-1, 1]");
  }
};

/// Row bookkeeping of a two-view batch: which row is the other view of each
/// row, and (for labeled data) the class of each row. Both views of an
/// instance carry the instance label.
struct BatchLayout {
  std::vector<std::size_t> pair_index;
  std::optional<std::vector<int>> row_labels;

  std::size_t rows() const { return pair_index.size(); }
  bool labeled() const { return row_labels.has_value(); }

  /// Standard layout [view1 of 0..B−1 ; view2 of 0..B−1].
  static BatchLayout two_views(std::size_t instances, std::optional<std::vector<int>> instance_labels = {}) {
    BatchLayout l;
    l.pair_index.resize(2 * instances);
    for (std::size_t i = 0; i < instances; ++i) {
      l.pair_index[i] = i + instances;
      l.pair_index[i + instances] = i;
    }
    if (instance_labels) {
      if (instance_labels->size() != instances)
        throw DimensionError("label count " + std::to_string(instance_labels->size()) + " does not match " +
                             std::to_string(instances) + " instances");
      std::vector<int> rl(2 * instances);
      for (std::size_t i = 0; i < instances; ++i) rl[i] = rl[i + instances] = (*instance_labels)[i];
      l.row_labels = std::move(rl);
    }
    return l;
  }

  void validate() const {
    const std::size_t n = rows();
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t j = pair_index[i];
      if (j >= n || j == i || pair_index[j] != i)
        throw ValidationError("pair_index must be a fixed-point-free involution (row " + std::to_string(i) + ")");
    }
    if (row_labels && row_labels->size() != n)
      throw DimensionError("row label count does not match batch rows");
    if (row_labels)
      for (std::size_t i = 0; i < n; ++i)
        if ((*row_labels)[i] != (*row_labels)[pair_index[i]])
          throw ValidationError("both views of an instance must share its label");
  }
};

/// Embeddings of B instances under two augmented views, with their layout.
struct ViewBatch {
  Tensor z;
  BatchLayout layout;

  static ViewBatch from_views(Tensor z, std::optional<std::vector<int>> instance_labels = {}) {
    require_matrix(z, "ViewBatch");
    if (z.rows() % 2 != 0) throw DimensionError("ViewBatch needs an even number of rows");
    BatchLayout l = BatchLayout::two_views(z.rows() / 2, std::move(instance_labels));
    return {std::move(z), std::move(l)};
  }
};

/// NN(z_i): in-batch rows whose cosine with row i reaches ε, plus the paired
/// view. Indices ascend within each row.
struct NeighborSet {
  std::vector<std::vector<std::size_t>> index;
  std::vector<std::vector<double>> similarity;

  std::size_t rows() const { return index.size(); }

  double mean_size() const {
    if (index.empty()) return 0.0;
    double s = 0.0;
    for (const auto& r : index) s += static_cast<double>(r.size());
    return s / static_cast<double>(index.size());
  }

  Tensor mask() const {
    const std::size_t n = rows();
    Tensor m({n, n});
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k : index[i]) m(i, k) = 1.0;
    return m;
  }

  /// Each row holds only its paired view.
  static NeighborSet pairs_only(const BatchLayout& layout) {
    NeighborSet s;
    s.index.resize(layout.rows());
    s.similarity.resize(layout.rows());
    for (std::size_t i = 0; i < layout.rows(); ++i) {
      s.index[i] = {layout.pair_index[i]};
      s.similarity[i] = {0.0};
    }
    return s;
  }
};

/// w_i aligned with NeighborSet::index; each non-empty row has max exactly 1.
struct Positiveness {
  std::vector<std::vector<double>> weights;

  static Positiveness ones(const NeighborSet& n) {
    Positiveness p;
    for (const auto& r : n.index) p.weights.emplace_back(r.size(), 1.0);
    return p;
  }
};

namespace detail {

inline void check_batch(const Tensor& z, const BatchLayout& layout) {
  require_matrix(z, "contrastive loss");
  if (z.rows() != layout.rows())
    throw DimensionError("batch has " + std::to_string(z.rows()) + " rows but layout describes " +
                         std::to_string(layout.rows()));
  if (z.rows() < 4) throw ValidationError("contrastive losses need at least 4 rows (2 views of 2 instances)");
  layout.validate();
}

inline void check_unit_rows(const Tensor& z) {
  for (std::size_t i = 0; i < z.rows(); ++i) {
    const double nrm = std::sqrt(dot(z.row(i), z.row(i)));
    if (std::abs(nrm - 1.0) > 1e-6)
      throw DegenerateInputError("row " + std::to_string(i) + " is not unit norm (" + std::to_string(nrm) + ")");
  }
}

/// log p_ij = z_i·z_j/τ − log Σ_{n≠i} exp(z_i·z_n/τ).
inline Var log_prob_matrix(Var z, double tau) { return contrastive_log_prob(scale(matmul_nt(z, z), 1.0 / tau)); }

/// Weight matrix averaging log-probabilities over each anchor's positive set
/// and over anchors: M_ij = 1 / (n·|P_i|) for j ∈ P_i.
inline Tensor averaging_weights(const std::vector<std::vector<std::size_t>>& positives) {
  const std::size_t n = positives.size();
  Tensor m({n, n});
  for (std::size_t i = 0; i < n; ++i) {
    if (positives[i].empty()) continue;
    const double w = 1.0 / (static_cast<double>(n) * static_cast<double>(positives[i].size()));
    for (std::size_t j : positives[i]) m(i, j) += w;
  }
  return m;
}

inline std::vector<std::vector<std::size_t>> same_label_rows(const BatchLayout& layout) {
  if (!layout.row_labels) throw ValidationError("supervised contrastive loss needs labels");
  const auto& y = *layout.row_labels;
  std::vector<std::vector<std::size_t>> positives(layout.rows());
  for (std::size_t i = 0; i < layout.rows(); ++i) {
    for (std::size_t q = 0; q < layout.rows(); ++q)
      if (q != i && y[q] == y[i]) positives[i].push_back(q);
    if (positives[i].empty()) positives[i].push_back(layout.pair_index[i]);
  }
  return positives;
}

}  // namespace detail

/// Unsupervised contrastive loss, mean over all 2B anchors, the paired view
/// being the only positive.
inline Var ucl_loss(Var z, const BatchLayout& layout, const LossConfig& cfg) {
  detail::check_batch(z.value(), layout);
  std::vector<std::vector<std::size_t>> positives(layout.rows());
  for (std::size_t i = 0; i < layout.rows(); ++i) positives[i] = {layout.pair_index[i]};
  return scale(weighted_sum(detail::log_prob_matrix(z, cfg.tau), detail::averaging_weights(positives)), -1.0);
}

/// Supervised contrastive loss: positives are all other rows with the anchor's label.
inline Var scl_loss(Var z, const BatchLayout& layout, const LossConfig& cfg) {
  detail::check_batch(z.value(), layout);
  const auto positives = detail::same_label_rows(layout);
  return scale(weighted_sum(detail::log_prob_matrix(z, cfg.tau), detail::averaging_weights(positives)), -1.0);
}

/// (1−λ)·ucl + λ·scl.
inline Var labeled_loss(Var z, const BatchLayout& layout, const LossConfig& cfg) {
  return add(scale(ucl_loss(z, layout, cfg), 1.0 - cfg.lambda), scale(scl_loss(z, layout, cfg), cfg.lambda));
}

/// Candidate neighborhood by cosine threshold. Rows must be unit norm; the
/// paired view is always a member.
inline NeighborSet candidate_neighbors(const Tensor& z, const BatchLayout& layout, const LossConfig& cfg) {
  require_matrix(z, "candidate_neighbors");
  if (z.rows() != layout.rows()) throw DimensionError("candidate_neighbors: layout does not match batch");
  detail::check_unit_rows(z);
  const std::size_t n = z.rows();
  const Tensor sims = matmul_nt(z, z);
  NeighborSet out;
  out.index.resize(n);
  out.similarity.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double c = std::clamp(sims(i, j), -1.0, 1.0);
      if (c >= cfg.epsilon || j == layout.pair_index[i]) {
        out.index[i].push_back(j);
        out.similarity[i].push_back(c);
      }
    }
  }
  return out;
}

inline NeighborSet candidate_neighbors(const ViewBatch& batch, const LossConfig& cfg) {
  return candidate_neighbors(batch.z, batch.layout, cfg);
}

/// Positiveness logits f₁(z_i)·f₂(z_k) for all row pairs. With no attention
/// maps this is the identity-mapping form z_i·z_k.
inline Var positiveness_logits(Var z, const std::vector<Var>& attention) {
  if (attention.empty()) return matmul_nt(z, z);
  if (attention.size() != 2) throw DimensionError("learned attention needs exactly two maps");
  return matmul_nt(matmul(z, attention[0]), matmul(z, attention[1]));
}

/// log w_ik = logit_ik − max_k logit_ik over the neighbor set, i.e. the log of
/// a per-anchor softmax divided by its maximum.
inline Var positiveness_log_weights(Var z, const NeighborSet& nbrs, const std::vector<Var>& attention) {
  return masked_row_max_center(positiveness_logits(z, attention), nbrs.mask());
}

/// Max-normalized softmax weights per anchor. `attention` holds the learned
/// maps {f1, f2}; pass none for identity mappings.
inline Positiveness positiveness(const Tensor& z, const NeighborSet& nbrs, const std::vector<Tensor>& attention = {}) {
  if (nbrs.rows() != z.rows()) throw DimensionError("positiveness: neighbor set does not match batch");
  Graph g;
  std::vector<Var> maps;
  for (const auto& t : attention) maps.push_back(g.constant(t));
  const Tensor logits = positiveness_logits(g.constant(z), maps).value();
  Positiveness out;
  out.weights.resize(nbrs.rows());
  for (std::size_t i = 0; i < nbrs.rows(); ++i) {
    const auto& idx = nbrs.index[i];
    if (idx.empty()) continue;
    double mx = logits(i, idx[0]);
    for (std::size_t k : idx) mx = std::max(mx, logits(i, k));
    for (std::size_t k : idx) out.weights[i].push_back(std::exp(logits(i, k) - mx));
  }
  return out;
}

inline Positiveness positiveness(const ViewBatch& batch, const NeighborSet& nbrs, const LossConfig& cfg,
                                 const std::vector<Tensor>& attention = {}) {
  if (cfg.attention == AttentionMode::kLearned && attention.size() != 2)
    throw ValidationError("learned attention mode needs the two attention maps");
  return positiveness(batch.z, nbrs, cfg.attention == AttentionMode::kLearned ? attention : std::vector<Tensor>{});
}

/// Dense n×n log-weight tensor from per-neighbor weights; rejects w ≤ 0.
inline Tensor log_weight_matrix(const NeighborSet& nbrs, const Positiveness& w) {
  const std::size_t n = nbrs.rows();
  if (w.weights.size() != n) throw DimensionError("positiveness rows do not match neighbor set");
  Tensor out({n, n});
  for (std::size_t i = 0; i < n; ++i) {
    if (w.weights[i].size() != nbrs.index[i].size())
      throw DimensionError("positiveness row " + std::to_string(i) + " is not aligned with its neighbors");
    for (std::size_t k = 0; k < nbrs.index[i].size(); ++k) {
      const double v = w.weights[i][k];
      if (!(v > 0.0))
        throw DegenerateInputError("positiveness weight " + std::to_string(v) + " at row " + std::to_string(i) +
                                   " makes the log numerator undefined");
      out(i, nbrs.index[i][k]) = std::log(v);
    }
  }
  return out;
}

/// Soft neighborhood contrastive loss with log-weights supplied as a graph
/// node (a constant when the weights carry no gradient).
inline Var soft_loss(Var z, const BatchLayout& layout, const NeighborSet& nbrs, Var log_weights,
                     const LossConfig& cfg) {
  detail::check_batch(z.value(), layout);
  if (nbrs.rows() != layout.rows()) throw DimensionError("soft_loss: neighbor set does not match batch");
  const Tensor m = detail::averaging_weights(nbrs.index);
  Var contrast = weighted_sum(detail::log_prob_matrix(z, cfg.tau), m);
  Var weighting = weighted_sum(log_weights, m);
  return scale(add(contrast, weighting), -1.0);
}

/// Soft neighborhood loss with fixed weights.
inline Var soft_loss(Var z, const BatchLayout& layout, const NeighborSet& nbrs, const Positiveness& w,
                     const LossConfig& cfg) {
  return soft_loss(z, layout, nbrs, z.graph->constant(log_weight_matrix(nbrs, w)), cfg);
}

/// Which pieces of the unlabeled objective are active.
struct SoftLossOptions {
  bool use_neighbors = true;          // false: NN(z_i) = {paired view}
  bool use_soft_positiveness = true;  // false: every w_ik = 1
};

struct SoftLossTerms {
  Var loss;
  double mean_neighbors = 0.0;
};

/// Mines neighbors on the current embeddings, weights them, and builds the
/// soft loss. Weights stay on the graph only in the configurations that need
/// their gradient (learned attention, or stop_gradient_on_w disabled).
inline SoftLossTerms soft_neighborhood_loss(Var z, const BatchLayout& layout, const LossConfig& cfg,
                                            const SoftLossOptions& opts, const std::vector<Var>& attention = {}) {
  const NeighborSet nbrs =
      opts.use_neighbors ? candidate_neighbors(z.value(), layout, cfg) : NeighborSet::pairs_only(layout);
  Graph& g = *z.graph;
  Var log_w;
  if (!opts.use_soft_positiveness) {
    log_w = g.constant(Tensor({layout.rows(), layout.rows()}));
  } else {
    const bool learned = cfg.attention == AttentionMode::kLearned;
    if (learned && attention.size() != 2) throw ValidationError("learned attention mode needs the two attention maps");
    Var raw = positiveness_log_weights(z, nbrs, learned ? attention : std::vector<Var>{});
    const bool detach = !learned && cfg.stop_gradient_on_w;
    log_w = detach ? g.constant(raw.value()) : raw;
  }
  return {soft_loss(z, layout, nbrs, log_w, cfg), nbrs.mean_size()};
}

// Value-level conveniences over an already embedded batch.

inline double ucl_loss(const ViewBatch& b, const LossConfig& cfg) {
  Graph g;
  return ucl_loss(g.constant(b.z), b.layout, cfg).value().item();
}

inline double scl_loss(const ViewBatch& b, const LossConfig& cfg) {
  Graph g;
  return scl_loss(g.constant(b.z), b.layout, cfg).value().item();
}

inline double labeled_loss(const ViewBatch& b, const LossConfig& cfg) {
  Graph g;
  return labeled_loss(g.constant(b.z), b.layout, cfg).value().item();
}

inline double soft_loss(const ViewBatch& b, const NeighborSet& nbrs, const Positiveness& w, const LossConfig& cfg) {
  Graph g;
  return soft_loss(g.constant(b.z), b.layout, nbrs, w, cfg).value().item();
}

}  // namespace metagcd

#endif  // METAGCD_LOSSES_HPP
