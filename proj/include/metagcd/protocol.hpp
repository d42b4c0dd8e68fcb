#ifndef METAGCD_PROTOCOL_HPP
#define METAGCD_PROTOCOL_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <ostream>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "metagcd/data.hpp"
#include "metagcd/rng.hpp"
#include "metagcd/tensor.hpp"

namespace metagcd {

class Evaluator;

/// Capability token for reading hidden labels. Only Evaluator can mint one,
/// so code paths that never see an Evaluator cannot reach the labels.
class EvaluationKey {
  EvaluationKey() = default;
  friend class Evaluator;
};

/// Training-facing view of an unlabeled session: features only. The true
/// classes ride along for evaluation and are readable only with a key.
class UnlabeledSplit {
 public:
  UnlabeledSplit() = default;
  UnlabeledSplit(Tensor features, std::vector<int> hidden_labels)
      : features_(std::move(features)), hidden_(std::move(hidden_labels)) {
    if (features_.rows() != hidden_.size()) throw DimensionError("unlabeled split: feature/label count mismatch");
  }

  const Tensor& features() const { return features_; }
  std::size_t size() const { return hidden_.size(); }
  bool empty() const { return hidden_.empty(); }

  const std::vector<int>& hidden_labels(const EvaluationKey&) const { return hidden_; }

 private:
  Tensor features_;
  std::vector<int> hidden_;
};

/// Grants label access to evaluation code.
class Evaluator {
 public:
  static const std::vector<int>& labels(const UnlabeledSplit& s) { return s.hidden_labels(EvaluationKey{}); }
};

struct Session {
  UnlabeledSplit train;
  LabeledSet test;              // held-out samples of the classes introduced this session
  std::set<int> old_classes;    // Y^{t-1}
  std::set<int> new_classes;    // Y^t_n

  std::set<int> all_classes() const {
    std::set<int> s = old_classes;
    s.insert(new_classes.begin(), new_classes.end());
    return s;
  }
};

/// One continual run: labeled offline set S^0 (with its test split) and the
/// unlabeled sessions S^1..S^T.
struct SessionStream {
  LabeledSet offline;
  LabeledSet offline_test;
  std::vector<Session> sessions;

  std::set<int> offline_classes() const { return {offline.classes.begin(), offline.classes.end()}; }
};

struct StreamConfig {
  std::size_t offline_classes = 14;
  std::size_t sessions = 3;
  std::size_t novel_per_session = 2;
  std::size_t train_per_class = 100;
  std::size_t test_per_class = 50;
  double offline_fraction = 0.8;  // share of an offline class's train samples that is labeled
  double debut_fraction = 0.6;    // share of a novel class's train samples in its first session

  void validate() const {
    if (offline_classes < 1) throw ValidationError("offline_classes must be at least 1");
    if (train_per_class < 1 || test_per_class < 1) throw ValidationError("per-class counts must be positive");
    if (!(offline_fraction > 0.0 && offline_fraction <= 1.0)) throw ValidationError("offline_fraction must lie in (0, 1]");
    if (!(debut_fraction > 0.0 && debut_fraction <= 1.0)) throw ValidationError("debut_fraction must lie in (0, 1]");
  }
};

namespace detail {

/// Splits `items` into `parts` contiguous chunks whose sizes differ by at most one.
inline std::vector<std::vector<std::size_t>> chunk(const std::vector<std::size_t>& items, std::size_t parts) {
  std::vector<std::vector<std::size_t>> out(parts);
  if (parts == 0) return out;
  const std::size_t base = items.size() / parts, extra = items.size() % parts;
  std::size_t pos = 0;
  for (std::size_t p = 0; p < parts; ++p) {
    const std::size_t len = base + (p < extra ? 1 : 0);
    out[p].assign(items.begin() + static_cast<std::ptrdiff_t>(pos), items.begin() + static_cast<std::ptrdiff_t>(pos + len));
    pos += len;
  }
  return out;
}

inline LabeledSet labeled_from(const LabeledSet& src, const std::vector<std::size_t>& idx) {
  LabeledSet s = src.subset(idx);
  s.refresh_classes();
  return s;
}

inline UnlabeledSplit unlabeled_from(const LabeledSet& src, const std::vector<std::size_t>& idx) {
  LabeledSet s = src.subset(idx);
  return UnlabeledSplit(std::move(s.x), std::move(s.y));
}

}  // namespace detail

/// Session-wise benchmark split of a labeled dataset. Classes are ordered by
/// `rng`; the first `offline_classes` form S^0, each later session introduces
/// `novel_per_session` classes. Per class, the first `test_per_class` shuffled
/// samples are test data and the next `train_per_class` are train data.
/// Offline classes put `offline_fraction` of their train data in S^0 and
/// spread the rest over all sessions; a novel class puts `debut_fraction` in
/// its first session and spreads the rest over later sessions.
inline SessionStream make_benchmark_stream(const LabeledSet& dataset, const StreamConfig& cfg, Rng& rng) {
  cfg.validate();
  dataset.validate();
  const std::size_t needed = cfg.offline_classes + cfg.sessions * cfg.novel_per_session;
  if (dataset.classes.size() < needed)
    throw CapacityError("stream needs " + std::to_string(needed) + " classes, dataset has " +
                        std::to_string(dataset.classes.size()));
  std::vector<int> order = dataset.classes;
  rng.shuffle(order);

  const std::size_t T = cfg.sessions;
  std::vector<std::vector<std::size_t>> session_train(T), session_test(T);
  std::vector<std::size_t> offline_train, offline_test;
  SessionStream stream;
  stream.sessions.resize(T);

  auto split_class = [&](int cls) {
    std::vector<std::size_t> idx = dataset.indices_of(cls);
    if (idx.size() < cfg.train_per_class + cfg.test_per_class)
      throw CapacityError("class " + std::to_string(cls) + " has " + std::to_string(idx.size()) +
                          " samples, stream needs " + std::to_string(cfg.train_per_class + cfg.test_per_class));
    rng.shuffle(idx);
    std::vector<std::size_t> test(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(cfg.test_per_class));
    std::vector<std::size_t> train(idx.begin() + static_cast<std::ptrdiff_t>(cfg.test_per_class),
                                   idx.begin() + static_cast<std::ptrdiff_t>(cfg.test_per_class + cfg.train_per_class));
    return std::make_pair(std::move(train), std::move(test));
  };

  for (std::size_t c = 0; c < cfg.offline_classes; ++c) {
    auto [train, test] = split_class(order[c]);
    const auto labeled = static_cast<std::size_t>(std::llround(cfg.offline_fraction * static_cast<double>(train.size())));
    offline_train.insert(offline_train.end(), train.begin(), train.begin() + static_cast<std::ptrdiff_t>(labeled));
    offline_test.insert(offline_test.end(), test.begin(), test.end());
    const std::vector<std::size_t> rest(train.begin() + static_cast<std::ptrdiff_t>(labeled), train.end());
    const auto parts = detail::chunk(rest, T);
    for (std::size_t t = 0; t < T; ++t) session_train[t].insert(session_train[t].end(), parts[t].begin(), parts[t].end());
  }

  std::set<int> seen(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(cfg.offline_classes));
  for (std::size_t t = 0; t < T; ++t) {
    Session& s = stream.sessions[t];
    s.old_classes = seen;
    for (std::size_t n = 0; n < cfg.novel_per_session; ++n) {
      const int cls = order[cfg.offline_classes + t * cfg.novel_per_session + n];
      s.new_classes.insert(cls);
      auto [train, test] = split_class(cls);
      session_test[t].insert(session_test[t].end(), test.begin(), test.end());
      const std::size_t later = T - t - 1;
      const std::size_t debut =
          later == 0 ? train.size()
                     : static_cast<std::size_t>(std::llround(cfg.debut_fraction * static_cast<double>(train.size())));
      session_train[t].insert(session_train[t].end(), train.begin(), train.begin() + static_cast<std::ptrdiff_t>(debut));
      const std::vector<std::size_t> rest(train.begin() + static_cast<std::ptrdiff_t>(debut), train.end());
      const auto parts = detail::chunk(rest, later);
      for (std::size_t l = 0; l < later; ++l)
        session_train[t + 1 + l].insert(session_train[t + 1 + l].end(), parts[l].begin(), parts[l].end());
    }
    seen.insert(s.new_classes.begin(), s.new_classes.end());
  }

  rng.shuffle(offline_train);
  stream.offline = detail::labeled_from(dataset, offline_train);
  stream.offline_test = detail::labeled_from(dataset, offline_test);
  for (std::size_t t = 0; t < T; ++t) {
    rng.shuffle(session_train[t]);
    stream.sessions[t].train = detail::unlabeled_from(dataset, session_train[t]);
    stream.sessions[t].test = detail::labeled_from(dataset, session_test[t]);
  }
  return stream;
}

/// Writes per-session class lists and sample counts.
inline void write_stream_manifest(std::ostream& os, const SessionStream& s) {
  auto list = [&](const auto& classes) {
    bool first = true;
    for (int c : classes) {
      os << (first ? "" : " ") << c;
      first = false;
    }
  };
  os << "# metagcd stream manifest v1\n";
  os << "session 0 labeled_train " << s.offline.size() << " test " << s.offline_test.size() << " classes ";
  list(s.offline.classes);
  os << '\n';
  for (std::size_t t = 0; t < s.sessions.size(); ++t) {
    const Session& ss = s.sessions[t];
    os << "session " << t + 1 << " unlabeled_train " << ss.train.size() << " test " << ss.test.size() << " old ";
    list(ss.old_classes);
    os << " new ";
    list(ss.new_classes);
    os << '\n';
  }
}

/// Random disjoint split of the class universe into pseudo-labeled and
/// pseudo-novel classes (both returned sorted).
inline std::pair<std::vector<int>, std::vector<int>> split_pseudo_classes(const LabeledSet& s0, std::size_t n_pseudo_novel,
                                                                          Rng& rng) {
  if (n_pseudo_novel >= s0.classes.size())
    throw CapacityError("cannot take " + std::to_string(n_pseudo_novel) + " pseudo-novel classes out of " +
                        std::to_string(s0.classes.size()));
  std::vector<int> order = s0.classes;
  rng.shuffle(order);
  std::vector<int> novel(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_pseudo_novel));
  std::vector<int> labeled(order.begin() + static_cast<std::ptrdiff_t>(n_pseudo_novel), order.end());
  std::sort(novel.begin(), novel.end());
  std::sort(labeled.begin(), labeled.end());
  return {std::move(labeled), std::move(novel)};
}

struct EpisodeConfig {
  std::size_t sessions = 3;
  std::size_t novel_per_session = 2;
  std::size_t unlabeled_known_count = 60;  // per session, spread round-robin over known classes
  std::size_t unlabeled_novel_count = 30;  // per novel class, in its debut session
  std::size_t test_per_class = 10;

  void validate() const {
    if (test_per_class == 0) throw ValidationError("episode test_per_class must be positive");
    if (sessions > 0 && novel_per_session == 0 && unlabeled_known_count == 0)
      throw ValidationError("episode sessions would be empty");
  }
};

/// One pseudo-incremental sequence drawn from S^0.
struct EpisodeSequence {
  LabeledSet warmup;                        // D^0_tr
  std::vector<UnlabeledSplit> unlabeled;    // D^1_tr .. D^T_tr
  std::vector<LabeledSet> tests;            // D^0_te .. D^T_te
  std::vector<std::vector<int>> introduced; // classes first seen at session j
};

/// Samples D = {(D^j_tr, D^j_te)}_{j=0..T} from S^0. Session j > 0 mixes
/// `unlabeled_known_count` samples of classes seen so far with
/// `unlabeled_novel_count` samples of each of its fresh pseudo-novel classes;
/// whatever the pseudo-labeled classes have left forms the warmup split.
inline EpisodeSequence sample_episode(const LabeledSet& s0, const EpisodeConfig& cfg, Rng& rng) {
  cfg.validate();
  s0.validate();
  const auto [labeled, novel] = split_pseudo_classes(s0, cfg.sessions * cfg.novel_per_session, rng);

  std::map<int, std::vector<std::size_t>> pool;
  EpisodeSequence ep;
  ep.tests.resize(cfg.sessions + 1);
  ep.introduced.resize(cfg.sessions + 1);
  std::vector<std::vector<std::size_t>> test_idx(cfg.sessions + 1), train_idx(cfg.sessions + 1);

  auto reserve_test = [&](int cls, std::size_t session) {
    std::vector<std::size_t> idx = s0.indices_of(cls);
    rng.shuffle(idx);
    if (idx.size() <= cfg.test_per_class)
      throw CapacityError("class " + std::to_string(cls) + " has " + std::to_string(idx.size()) +
                          " samples; episode needs more than " + std::to_string(cfg.test_per_class));
    test_idx[session].insert(test_idx[session].end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(cfg.test_per_class));
    pool[cls].assign(idx.begin() + static_cast<std::ptrdiff_t>(cfg.test_per_class), idx.end());
    ep.introduced[session].push_back(cls);
  };
  auto take = [&](int cls, std::size_t n, std::size_t session) {
    auto& p = pool[cls];
    if (p.size() < n)
      throw CapacityError("class " + std::to_string(cls) + " is short by " + std::to_string(n - p.size()) +
                          " samples for episode session " + std::to_string(session));
    train_idx[session].insert(train_idx[session].end(), p.end() - static_cast<std::ptrdiff_t>(n), p.end());
    p.resize(p.size() - n);
  };

  for (int c : labeled) reserve_test(c, 0);
  std::vector<int> known = labeled;
  for (std::size_t j = 1; j <= cfg.sessions; ++j) {
    std::vector<int> fresh(novel.begin() + static_cast<std::ptrdiff_t>((j - 1) * cfg.novel_per_session),
                           novel.begin() + static_cast<std::ptrdiff_t>(j * cfg.novel_per_session));
    for (int c : fresh) reserve_test(c, j);
    std::vector<std::size_t> quota(known.size(), cfg.unlabeled_known_count / std::max<std::size_t>(known.size(), 1));
    for (std::size_t r = 0; r < cfg.unlabeled_known_count % std::max<std::size_t>(known.size(), 1); ++r)
      ++quota[(j + r) % known.size()];
    for (std::size_t k = 0; k < known.size(); ++k) take(known[k], quota[k], j);
    for (int c : fresh) take(c, cfg.unlabeled_novel_count, j);
    known.insert(known.end(), fresh.begin(), fresh.end());
    std::sort(known.begin(), known.end());
  }
  for (int c : labeled) {
    const auto& p = pool[c];
    train_idx[0].insert(train_idx[0].end(), p.begin(), p.end());
  }

  std::size_t largest_later = 0;
  for (std::size_t j = 1; j <= cfg.sessions; ++j) largest_later = std::max(largest_later, train_idx[j].size());
  if (train_idx[0].size() <= largest_later)
    throw CapacityError("warmup split has " + std::to_string(train_idx[0].size()) +
                        " samples, not more than the largest session (" + std::to_string(largest_later) + ")");

  rng.shuffle(train_idx[0]);
  ep.warmup = detail::labeled_from(s0, train_idx[0]);
  for (std::size_t j = 1; j <= cfg.sessions; ++j) {
    rng.shuffle(train_idx[j]);
    ep.unlabeled.push_back(detail::unlabeled_from(s0, train_idx[j]));
  }
  for (std::size_t j = 0; j <= cfg.sessions; ++j) ep.tests[j] = detail::labeled_from(s0, test_idx[j]);
  return ep;
}

/// Labeled test samples accumulated over the sessions of one episode or run.
struct CumulativeTestSet {
  LabeledSet data;

  std::size_t size() const { return data.size(); }
  bool empty() const { return data.empty(); }
};

/// Multiset union P ∪ D.
inline CumulativeTestSet accumulate(const CumulativeTestSet& p, const LabeledSet& d) {
  CumulativeTestSet out = p;
  out.data.x = vstack(p.data.x, d.x);
  out.data.y.insert(out.data.y.end(), d.y.begin(), d.y.end());
  out.data.refresh_classes();
  return out;
}

}  // namespace metagcd

#endif  // METAGCD_PROTOCOL_HPP
