#ifndef METAGCD_EVALUATION_HPP
#define METAGCD_EVALUATION_HPP

// Session evaluation and the continual run driver. This is the only place
// that reads hidden session labels (through Evaluator).

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "metagcd/cluster_eval.hpp"
#include "metagcd/protocol.hpp"
#include "metagcd/trainer.hpp"

namespace metagcd {

struct SessionReport {
  std::size_t session = 0;
  std::size_t k = 0;
  SessionMetrics metrics;
  double acc_unlabeled = -1.0;  // ACC on the session's unlabeled train data; −1 for session 0
  AdaptTrace adapt;
  AccResult detail;             // per-sample matching, for confusion export
};

struct RunReport {
  std::uint64_t seed = 0;
  std::string ablation;
  std::map<std::string, std::string> config;
  std::vector<double> warmup_losses;
  std::vector<EpisodeTrace> episodes;
  std::vector<SessionReport> sessions;

  const SessionReport& final_session() const { return sessions.back(); }

  double mean_all() const { return mean_of([](const SessionMetrics& m) { return m.acc_all; }); }
  double mean_old() const { return mean_of([](const SessionMetrics& m) { return m.acc_old; }); }
  double mean_new() const { return mean_of([](const SessionMetrics& m) { return m.acc_new; }); }

 private:
  // Averages over incremental sessions t ≥ 1 (session 0 when it is the only one).
  template <typename F>
  double mean_of(F f) const {
    double s = 0.0;
    std::size_t n = 0;
    for (const auto& r : sessions)
      if (r.session > 0 || sessions.size() == 1) {
        s += f(r.metrics);
        ++n;
      }
    return n ? s / static_cast<double>(n) : 0.0;
  }
};

/// k-means on normalized encoder features of `data` with k = number of
/// classes seen so far, then ACC with the All-set permutation split into
/// Old/New.
template <typename Tag>
SessionMetrics evaluate_split(const BasicParams<Tag>& params, const LabeledSet& data, std::size_t k,
                              const std::set<int>& old_classes, const std::set<int>& new_classes, Rng& rng,
                              std::size_t restarts, AccResult* detail = nullptr) {
  const Tensor feats = features(params, data.x);
  const Clustering c = kmeans(feats, std::min(k, data.size()), rng, {restarts, 300});
  const std::vector<int> pred(c.assignment.begin(), c.assignment.end());
  AccResult acc = clustering_acc(data.y, pred);
  SessionMetrics m = split_acc(acc, old_classes, new_classes);
  if (detail) *detail = std::move(acc);
  return m;
}

/// Transductive ACC on an unlabeled split, scored against its hidden labels.
template <typename Tag>
double evaluate_unlabeled(const BasicParams<Tag>& params, const UnlabeledSplit& split, std::size_t k, Rng& rng,
                          std::size_t restarts) {
  const Tensor feats = features(params, split.features());
  const Clustering c = kmeans(feats, std::min(k, split.size()), rng, {restarts, 300});
  const std::vector<int> pred(c.assignment.begin(), c.assignment.end());
  return clustering_acc(Evaluator::labels(split), pred).acc;
}

namespace rng_salt {
inline constexpr std::uint64_t kStream = 1;
inline constexpr std::uint64_t kInit = 2;
inline constexpr std::uint64_t kWarmup = 3;
inline constexpr std::uint64_t kMetaTrain = 4;
inline constexpr std::uint64_t kMetaTest = 5;
inline constexpr std::uint64_t kEval = 6;
}  // namespace rng_salt

/// Meta-testing: per session, `metatest_steps` inner adaptation steps on the
/// session's unlabeled features (continuing from the previous session's
/// model), then evaluation on all test data accumulated so far. Session 0
/// reports the starting model on the offline test split.
template <typename Tag>
RunReport meta_test(const BasicParams<Tag>& params, const SessionStream& stream, const TrainConfig& cfg, Rng& rng,
                    AdaptedParams* final_params = nullptr) {
  RunReport report;
  Rng eval_rng = rng.fork(rng_salt::kEval);
  AdaptedParams theta = AdaptedParams::from(params);
  CumulativeTestSet seen;
  seen = accumulate(seen, stream.offline_test);
  std::set<int> known = stream.offline_classes();

  SessionReport s0;
  s0.k = known.size();
  s0.metrics = evaluate_split(theta, seen.data, s0.k, known, {}, eval_rng, cfg.kmeans_restarts, &s0.detail);
  report.sessions.push_back(std::move(s0));

  for (std::size_t t = 0; t < stream.sessions.size(); ++t) {
    const Session& sess = stream.sessions[t];
    SessionReport r;
    r.session = t + 1;
    theta = inner_adapt(theta, sess.train.features(), cfg.metatest_steps, cfg, rng, &r.adapt);
    seen = accumulate(seen, sess.test);
    const std::set<int> all = sess.all_classes();
    r.k = all.size();
    r.metrics = evaluate_split(theta, seen.data, r.k, sess.old_classes, sess.new_classes, eval_rng,
                               cfg.kmeans_restarts, &r.detail);
    r.acc_unlabeled = evaluate_unlabeled(theta, sess.train, r.k, eval_rng, cfg.kmeans_restarts);
    report.sessions.push_back(std::move(r));
  }
  if (final_params) *final_params = theta;
  return report;
}

inline std::string ablation_name(const AblationFlags& f) {
  if (f.use_meta && f.use_neighbors && f.use_soft_positiveness) return "meta";
  if (!f.use_meta && f.use_neighbors && f.use_soft_positiveness) return "sp";
  if (!f.use_meta && f.use_neighbors && !f.use_soft_positiveness) return "cn";
  if (!f.use_meta && !f.use_neighbors && !f.use_soft_positiveness) return "baseline";
  return "custom";
}

inline AblationFlags ablation_flags(const std::string& name) {
  if (name == "meta" || name == "full") return {true, true, true};
  if (name == "sp") return {true, true, false};
  if (name == "cn") return {true, false, false};
  if (name == "baseline") return {false, false, false};
  throw ValidationError("unknown ablation '" + name + "' (expected baseline|cn|sp|meta)");
}

/// Random initialization for a run seed.
inline ModelParams initial_params(const TrainConfig& cfg, std::uint64_t seed) {
  Rng rng = Rng(seed).fork(rng_salt::kInit);
  return init_params(cfg.encoder_widths, cfg.projection_widths, rng, cfg.loss.attention == AttentionMode::kLearned);
}

/// Offline warmup on all of S^0 from the seed's random initialization.
inline ModelParams warmup_start(const SessionStream& stream, const TrainConfig& cfg, std::uint64_t seed,
                                std::vector<double>* trace = nullptr) {
  Rng rng = Rng(seed).fork(rng_salt::kWarmup);
  return offline_warmup(initial_params(cfg, seed), stream.offline, cfg, rng, trace);
}

/// Meta-trained initialization on S^0.
inline ModelParams meta_start(const SessionStream& stream, const TrainConfig& cfg, std::uint64_t seed,
                              std::vector<EpisodeTrace>* traces = nullptr) {
  Rng rng = Rng(seed).fork(rng_salt::kMetaTrain);
  return meta_train(initial_params(cfg, seed), stream.offline, cfg, rng, traces);
}

struct ExperimentResult {
  ModelParams start;
  AdaptedParams final_params;
  RunReport report;
};

/// Full run on a prepared stream. With use_meta the starting model is the
/// meta-trained θ; without it (or with zero episodes) it is the offline
/// warmup model. `cached_warmup` may supply a previously computed
/// warmup_start for the same stream, config and seed.
inline ExperimentResult run_experiment(const SessionStream& stream, const TrainConfig& cfg, std::uint64_t seed,
                                       const ModelParams* cached_warmup = nullptr) {
  cfg.validate();
  ExperimentResult out;
  RunReport pre;
  if (cfg.ablation.use_meta && cfg.episodes > 0) {
    out.start = meta_start(stream, cfg, seed, &pre.episodes);
  } else if (cached_warmup) {
    out.start = *cached_warmup;
  } else {
    out.start = warmup_start(stream, cfg, seed, &pre.warmup_losses);
  }
  Rng test_rng = Rng(seed).fork(rng_salt::kMetaTest);
  out.report = meta_test(out.start, stream, cfg, test_rng, &out.final_params);
  out.report.seed = seed;
  out.report.ablation = ablation_name(cfg.ablation);
  out.report.warmup_losses = std::move(pre.warmup_losses);
  out.report.episodes = std::move(pre.episodes);
  return out;
}

/// Benchmark stream for a seed.
inline SessionStream stream_for_seed(const LabeledSet& dataset, const StreamConfig& cfg, std::uint64_t seed) {
  Rng rng = Rng(seed).fork(rng_salt::kStream);
  return make_benchmark_stream(dataset, cfg, rng);
}

}  // namespace metagcd

#endif  // METAGCD_EVALUATION_HPP
