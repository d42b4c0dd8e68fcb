#ifndef METAGCD_TRAINER_HPP
#define METAGCD_TRAINER_HPP

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "metagcd/autodiff.hpp"
#include "metagcd/cluster_eval.hpp"
#include "metagcd/losses.hpp"
#include "metagcd/model.hpp"
#include "metagcd/protocol.hpp"
#include "metagcd/rng.hpp"

namespace metagcd {

/// Loss used by the outer meta-update on the cumulative test set.
enum class MetaLoss { kSupervised, kUnsupervised };

struct AblationFlags {
  bool use_neighbors = true;
  bool use_soft_positiveness = true;
  bool use_meta = true;
};

struct TrainConfig {
  double gamma = 0.1;    // offline warmup rate
  double alpha = 0.001;  // inner adaptation rate
  double beta = 0.0001;  // outer meta rate
  std::size_t warmup_epochs = 50;
  std::size_t inner_steps = 10;
  std::size_t outer_steps = 1;
  std::size_t metatest_steps = 20;
  std::size_t batch_size = 256;  // instances per batch; the loss sees 2× rows
  std::size_t episodes = 5;
  AblationFlags ablation;
  LossConfig loss;
  MetaLoss meta_loss = MetaLoss::kSupervised;
  double augment_strength = 0.5;
  double mask_prob = 0.1;
  std::size_t kmeans_restarts = 10;
  Widths encoder_widths = {32, 128, 64};
  Widths projection_widths = {64, 64, 32};
  EpisodeConfig episode;

  void validate() const {
    if (!(gamma > 0.0 && alpha > 0.0 && beta > 0.0)) throw ValidationError("learning rates must be positive");
    if (batch_size < 2) throw ValidationError("batch_size must be at least 2");
    if (!(augment_strength >= 0.0)) throw ValidationError("augment_strength must be non-negative");
    if (!(mask_prob >= 0.0 && mask_prob < 1.0)) throw ValidationError("mask_prob must lie in [0, 1)");
    if (kmeans_restarts == 0) throw ValidationError("kmeans_restarts must be at least 1");
    loss.validate();
    episode.validate();
    validate_widths(encoder_widths, projection_widths);
  }
};

/// Two feature-space views of each row: Gaussian jitter of std `strength`,
/// then each coordinate dropped with probability `mask_prob` and the
/// survivors rescaled by 1/(1 − mask_prob). Returns [view1 ; view2].
inline Tensor augment_views(const Tensor& x, Rng& rng, double strength, double mask_prob = 0.1) {
  require_matrix(x, "augment_views");
  if (!(strength >= 0.0)) throw ValidationError("augment strength must be non-negative");
  const std::size_t b = x.rows(), d = x.cols();
  Tensor out({2 * b, d});
  const double keep_scale = 1.0 / (1.0 - mask_prob);
  for (std::size_t v = 0; v < 2; ++v)
    for (std::size_t i = 0; i < b; ++i) {
      auto dst = out.row(v * b + i);
      const auto src = x.row(i);
      for (std::size_t p = 0; p < d; ++p) {
        double val = src[p];
        if (strength > 0.0) val += rng.normal(0.0, strength);
        if (mask_prob > 0.0) val = rng.bernoulli(mask_prob) ? 0.0 : val * keep_scale;
        dst[p] = val;
      }
    }
  return out;
}

struct StepResult {
  Gradients grads;
  double loss = 0.0;
  double mean_neighbors = 0.0;
};

namespace detail {

template <typename Tag>
StepResult finish_step(Graph& g, const BoundParams& b, const BasicParams<Tag>& params, Var loss,
                       double mean_neighbors = 0.0) {
  g.backward(loss);
  return {collect_grads(g, b, params), loss.value().item(), mean_neighbors};
}

inline std::vector<std::size_t> draw_batch(std::size_t n, std::size_t batch, Rng& rng) {
  std::vector<std::size_t> p = rng.permutation(n);
  p.resize(std::min(batch, n));
  return p;
}

}  // namespace detail

/// Gradient of the λ-weighted labeled loss on one augmented batch.
template <typename Tag>
StepResult labeled_step(const BasicParams<Tag>& params, const Tensor& x, const std::vector<int>& y,
                        const TrainConfig& cfg, Rng& rng) {
  Graph g;
  const BoundParams b = bind(g, params);
  Var z = embed(b, g.constant(augment_views(x, rng, cfg.augment_strength, cfg.mask_prob)));
  return detail::finish_step(g, b, params, labeled_loss(z, BatchLayout::two_views(x.rows(), y), cfg.loss));
}

/// Gradient of the unlabeled objective: soft neighborhood loss, reduced by
/// the ablation flags (pairs only → ucl, unit weights → binary neighbors).
template <typename Tag>
StepResult soft_step(const BasicParams<Tag>& params, const Tensor& x, const TrainConfig& cfg, Rng& rng) {
  Graph g;
  const BoundParams b = bind(g, params);
  Var z = embed(b, g.constant(augment_views(x, rng, cfg.augment_strength, cfg.mask_prob)));
  const SoftLossOptions opts{cfg.ablation.use_neighbors, cfg.ablation.use_soft_positiveness};
  const SoftLossTerms terms = soft_neighborhood_loss(z, BatchLayout::two_views(x.rows()), cfg.loss, opts, b.attention);
  return detail::finish_step(g, b, params, terms.loss, terms.mean_neighbors);
}

/// Gradient of the meta-objective on one batch of labeled test samples,
/// evaluated at `params`.
template <typename Tag>
StepResult meta_objective_step(const BasicParams<Tag>& params, const Tensor& x, const std::vector<int>& y,
                               const TrainConfig& cfg, Rng& rng) {
  Graph g;
  const BoundParams b = bind(g, params);
  Var z = embed(b, g.constant(augment_views(x, rng, cfg.augment_strength, cfg.mask_prob)));
  const BatchLayout layout = BatchLayout::two_views(x.rows(), y);
  Var loss = cfg.meta_loss == MetaLoss::kSupervised ? scl_loss(z, layout, cfg.loss) : ucl_loss(z, layout, cfg.loss);
  return detail::finish_step(g, b, params, loss);
}

/// Offline training on labeled data: `warmup_epochs` passes of shuffled
/// mini-batches, each an SGD step at rate γ on the labeled loss. Per-epoch
/// mean losses are appended to `trace` when given.
inline ModelParams offline_warmup(const ModelParams& params, const LabeledSet& d0, const TrainConfig& cfg, Rng& rng,
                                  std::vector<double>* trace = nullptr) {
  if (cfg.warmup_epochs == 0) return params;
  d0.validate();
  if (d0.size() < 2) throw CapacityError("warmup needs at least 2 labeled samples");
  ModelParams p = params;
  const std::size_t b = std::min(cfg.batch_size, d0.size());
  for (std::size_t e = 0; e < cfg.warmup_epochs; ++e) {
    const std::vector<std::size_t> order = rng.permutation(d0.size());
    double total = 0.0;
    std::size_t steps = 0;
    for (std::size_t start = 0; start + 2 <= order.size(); start += b) {
      const std::size_t end = std::min(order.size(), start + b);
      const std::span<const std::size_t> idx(order.data() + start, end - start);
      const LabeledSet batch = d0.subset(idx);
      const StepResult s = labeled_step(p, batch.x, batch.y, cfg, rng);
      p = sgd_step(p, s.grads, cfg.gamma);
      total += s.loss;
      ++steps;
    }
    if (trace) trace->push_back(total / static_cast<double>(std::max<std::size_t>(steps, 1)));
  }
  return p;
}

struct AdaptTrace {
  std::vector<double> losses;
  std::vector<double> mean_neighbors;
};

/// θ̃ = θ after `steps` SGD steps at rate α on the unlabeled objective. Only
/// features are consumed. θ itself is left untouched.
template <typename Tag>
AdaptedParams inner_adapt(const BasicParams<Tag>& params, const Tensor& unlabeled, std::size_t steps,
                          const TrainConfig& cfg, Rng& rng, AdaptTrace* trace = nullptr) {
  AdaptedParams p = AdaptedParams::from(params);
  if (steps == 0) return p;
  require_matrix(unlabeled, "inner_adapt");
  if (unlabeled.rows() < 2) throw CapacityError("inner adaptation needs at least 2 unlabeled samples");
  for (std::size_t s = 0; s < steps; ++s) {
    const auto idx = detail::draw_batch(unlabeled.rows(), cfg.batch_size, rng);
    const StepResult r = soft_step(p, gather_rows(unlabeled, idx), cfg, rng);
    p = sgd_step(p, r.grads, cfg.alpha);
    if (trace) {
      trace->losses.push_back(r.loss);
      trace->mean_neighbors.push_back(r.mean_neighbors);
    }
  }
  return p;
}

template <typename Tag>
AdaptedParams inner_adapt(const BasicParams<Tag>& params, const Tensor& unlabeled, const TrainConfig& cfg, Rng& rng,
                          AdaptTrace* trace = nullptr) {
  return inner_adapt(params, unlabeled, cfg.inner_steps, cfg, rng, trace);
}

/// First-order meta-update: the meta-objective gradient taken at θ̃ on a
/// uniform batch of P, applied to θ at rate β. Repeated `outer_steps` times
/// with fresh batches.
inline ModelParams outer_meta_update(const ModelParams& params, const AdaptedParams& adapted,
                                     const CumulativeTestSet& p, const TrainConfig& cfg, Rng& rng,
                                     std::vector<double>* trace = nullptr) {
  if (p.empty()) throw ValidationError("outer meta-update needs a non-empty cumulative test set");
  if (p.size() < 2) throw CapacityError("outer meta-update needs at least 2 test samples");
  ModelParams out = params;
  for (std::size_t s = 0; s < cfg.outer_steps; ++s) {
    const auto idx = detail::draw_batch(p.size(), cfg.batch_size, rng);
    const LabeledSet batch = p.data.subset(idx);
    const StepResult r = meta_objective_step(adapted, batch.x, batch.y, cfg, rng);
    out = sgd_step(out, r.grads, cfg.beta);
    if (trace) trace->push_back(r.loss);
  }
  return out;
}

struct EpisodeTrace {
  std::vector<double> warmup;       // per-epoch mean labeled loss
  std::vector<double> inner;        // per inner step
  std::vector<double> outer;        // per outer step
  std::vector<std::size_t> p_sizes; // |P| after each accumulate
};

/// Bi-level meta-training over sampled pseudo-incremental episodes. Returns
/// the learned initialization θ.
inline ModelParams meta_train(const ModelParams& init, const LabeledSet& s0, const TrainConfig& cfg, Rng& rng,
                              std::vector<EpisodeTrace>* traces = nullptr) {
  ModelParams theta = init;
  for (std::size_t e = 0; e < cfg.episodes; ++e) {
    EpisodeTrace tr;
    const EpisodeSequence ep = sample_episode(s0, cfg.episode, rng);
    CumulativeTestSet P;
    theta = offline_warmup(theta, ep.warmup, cfg, rng, &tr.warmup);
    P = accumulate(P, ep.tests[0]);
    tr.p_sizes.push_back(P.size());
    for (std::size_t j = 1; j < ep.tests.size(); ++j) {
      AdaptTrace at;
      const AdaptedParams adapted = inner_adapt(theta, ep.unlabeled[j - 1].features(), cfg, rng, &at);
      tr.inner.insert(tr.inner.end(), at.losses.begin(), at.losses.end());
      P = accumulate(P, ep.tests[j]);
      tr.p_sizes.push_back(P.size());
      theta = outer_meta_update(theta, adapted, P, cfg, rng, &tr.outer);
    }
    if (traces) traces->push_back(std::move(tr));
  }
  return theta;
}

}  // namespace metagcd

#endif  // METAGCD_TRAINER_HPP
