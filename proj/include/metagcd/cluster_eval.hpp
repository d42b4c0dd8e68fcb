#ifndef METAGCD_CLUSTER_EVAL_HPP
#define METAGCD_CLUSTER_EVAL_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "metagcd/rng.hpp"
#include "metagcd/tensor.hpp"

namespace metagcd {

struct Clustering {
  Tensor centroids;                      // k × d
  std::vector<std::size_t> assignment;   // per sample
  double objective = 0.0;                // Σ squared distance to assigned centroid
  std::vector<double> objective_trace;   // objective after each assignment step of the winning restart
  std::size_t iterations = 0;
};

struct KMeansOptions {
  std::size_t restarts = 10;
  std::size_t max_iterations = 300;
};

namespace detail {

/// Nearest centroid; ties resolve to the lowest id.
inline std::size_t nearest_centroid(std::span<const double> x, const Tensor& c, double* dist = nullptr) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < c.rows(); ++j) {
    const double d = squared_distance(x, c.row(j));
    if (d < best_d) {
      best_d = d;
      best = j;
    }
  }
  if (dist) *dist = best_d;
  return best;
}

/// D²-weighted draw; falls back to the last point with positive weight when
/// rounding exhausts `u`.
inline std::size_t d2_draw(const std::vector<double>& d2, double total, Rng& rng) {
  double u = rng.uniform(0.0, total);
  std::size_t pick = 0;
  for (std::size_t i = 0; i < d2.size(); ++i)
    if (d2[i] > 0.0) pick = i;
  for (std::size_t i = 0; i < d2.size(); ++i) {
    if (u < d2[i]) return i;
    u -= d2[i];
  }
  return pick;
}

/// Greedy k-means++: each new center is the best of 2 + ⌊ln k⌋ D²-sampled
/// candidates, judged by the resulting potential.
inline Tensor kmeanspp_seed(const Tensor& x, std::size_t k, Rng& rng) {
  const std::size_t n = x.rows();
  const std::size_t trials = 2 + static_cast<std::size_t>(std::log(static_cast<double>(k)));
  Tensor c({k, x.cols()});
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  std::size_t pick = rng.index(n);
  for (std::size_t j = 0; j < k; ++j) {
    std::copy(x.row(pick).begin(), x.row(pick).end(), c.row(j).begin());
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], squared_distance(x.row(i), c.row(j)));
      total += d2[i];
    }
    if (j + 1 == k) break;
    if (total <= 0.0) {
      pick = rng.index(n);
      continue;
    }
    double best_potential = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < trials; ++t) {
      const std::size_t q = d2_draw(d2, total, rng);
      double potential = 0.0;
      for (std::size_t i = 0; i < n; ++i) potential += std::min(d2[i], squared_distance(x.row(i), x.row(q)));
      if (potential < best_potential) {
        best_potential = potential;
        pick = q;
      }
    }
  }
  return c;
}

inline Clustering lloyd(const Tensor& x, Tensor centroids, std::size_t max_iterations) {
  const std::size_t n = x.rows(), k = centroids.rows(), d = x.cols();
  Clustering out;
  out.assignment.assign(n, k);  // sentinel: nothing assigned yet
  std::vector<double> dist(n);
  for (std::size_t it = 0; it < max_iterations; ++it) {
    bool changed = false;
    double objective = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t a = nearest_centroid(x.row(i), centroids, &dist[i]);
      changed |= a != out.assignment[i];
      out.assignment[i] = a;
      objective += dist[i];
    }
    out.objective_trace.push_back(objective);
    out.objective = objective;
    out.iterations = it + 1;
    if (!changed) break;

    Tensor sums({k, d});
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      auto s = sums.row(out.assignment[i]);
      const auto r = x.row(i);
      for (std::size_t p = 0; p < d; ++p) s[p] += r[p];
      ++counts[out.assignment[i]];
    }
    std::vector<bool> taken(n, false);
    for (std::size_t j = 0; j < k; ++j) {
      if (counts[j] > 0) {
        for (std::size_t p = 0; p < d; ++p) centroids(j, p) = sums(j, p) / static_cast<double>(counts[j]);
        continue;
      }
      // Empty cluster: move it onto the point farthest from its centroid.
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t i = 0; i < n; ++i)
        if (!taken[i] && dist[i] > far_d) {
          far_d = dist[i];
          far = i;
        }
      taken[far] = true;
      std::copy(x.row(far).begin(), x.row(far).end(), centroids.row(j).begin());
    }
  }
  out.centroids = std::move(centroids);
  return out;
}

/// Hartigan single-point moves from a Lloyd fixed point: point i leaves
/// cluster a for b when n_b/(n_b+1)·‖x−μ_b‖² < n_a/(n_a−1)·‖x−μ_a‖². Every
/// move strictly lowers the objective, so the trace keeps decreasing; the
/// result is again a Lloyd fixed point.
inline void hartigan_refine(const Tensor& x, Clustering& c, std::size_t max_passes) {
  const std::size_t n = x.rows(), k = c.centroids.rows(), d = x.cols();
  Tensor sums({k, d});
  std::vector<double> counts(k, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    auto s = sums.row(c.assignment[i]);
    const auto r = x.row(i);
    for (std::size_t p = 0; p < d; ++p) s[p] += r[p];
    counts[c.assignment[i]] += 1.0;
  }
  std::vector<double> mean(d);
  auto dist_to_mean = [&](std::size_t i, std::size_t j) {
    for (std::size_t p = 0; p < d; ++p) mean[p] = sums(j, p) / counts[j];
    return squared_distance(x.row(i), mean);
  };
  for (std::size_t pass = 0; pass < max_passes; ++pass) {
    bool moved = false;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t a = c.assignment[i];
      if (counts[a] <= 1.0) continue;
      const double remove = counts[a] / (counts[a] - 1.0) * dist_to_mean(i, a);
      std::size_t best = a;
      double best_add = remove * (1.0 - 1e-12);
      for (std::size_t j = 0; j < k; ++j) {
        if (j == a || counts[j] == 0.0) continue;
        const double add = counts[j] / (counts[j] + 1.0) * dist_to_mean(i, j);
        if (add < best_add) {
          best_add = add;
          best = j;
        }
      }
      if (best == a) continue;
      const auto r = x.row(i);
      for (std::size_t p = 0; p < d; ++p) {
        sums(a, p) -= r[p];
        sums(best, p) += r[p];
      }
      counts[a] -= 1.0;
      counts[best] += 1.0;
      c.assignment[i] = best;
      moved = true;
    }
    if (!moved) break;
    // Fresh means from scratch, then the objective of the new partition.
    Tensor fresh({k, d});
    std::vector<std::size_t> members(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      auto s = fresh.row(c.assignment[i]);
      const auto r = x.row(i);
      for (std::size_t p = 0; p < d; ++p) s[p] += r[p];
      ++members[c.assignment[i]];
    }
    for (std::size_t j = 0; j < k; ++j)
      if (members[j] > 0)
        for (std::size_t p = 0; p < d; ++p) c.centroids(j, p) = fresh(j, p) / static_cast<double>(members[j]);
    double objective = 0.0;
    for (std::size_t i = 0; i < n; ++i) objective += squared_distance(x.row(i), c.centroids.row(c.assignment[i]));
    c.objective_trace.push_back(objective);
    c.objective = objective;
    ++c.iterations;
  }
}

}  // namespace detail

/// k-means++ seeding, Lloyd iterations until the assignment stops changing
/// (or max_iterations), then Hartigan refinement. Best objective over
/// restarts; ties keep the earliest restart.
inline Clustering kmeans(const Tensor& x, std::size_t k, Rng& rng, const KMeansOptions& opts = {}) {
  require_matrix(x, "kmeans");
  if (k == 0) throw ValidationError("kmeans: k must be at least 1");
  if (x.rows() < k)
    throw ValidationError("kmeans: " + std::to_string(x.rows()) + " samples cannot form " + std::to_string(k) +
                          " clusters");
  Clustering best;
  bool have = false;
  for (std::size_t r = 0; r < std::max<std::size_t>(opts.restarts, 1); ++r) {
    Clustering c = detail::lloyd(x, detail::kmeanspp_seed(x, k, rng), opts.max_iterations);
    detail::hartigan_refine(x, c, opts.max_iterations);
    if (!have || c.objective < best.objective) {
      best = std::move(c);
      have = true;
    }
  }
  return best;
}

struct Assignment {
  std::vector<std::size_t> row_to_col;
  double cost = 0.0;
};

/// Minimum-cost perfect matching on a square matrix (shortest augmenting
/// path with potentials, O(k³)).
inline Assignment hungarian(const Tensor& cost) {
  require_matrix(cost, "hungarian");
  if (cost.rows() != cost.cols())
    throw DimensionError("hungarian needs a square cost matrix, got " + shape_string(cost.shape()));
  if (!cost.all_finite()) throw DegenerateInputError("hungarian: cost matrix has non-finite entries");
  const std::size_t n = cost.rows();
  if (n == 0) return {};
  const double inf = std::numeric_limits<double>::infinity();
  // 1-based arrays; column 0 is the virtual start.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> match(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    match[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = match[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  Assignment a;
  a.row_to_col.assign(n, 0);
  for (std::size_t j = 1; j <= n; ++j) a.row_to_col[match[j] - 1] = j - 1;
  for (std::size_t i = 0; i < n; ++i) a.cost += cost(i, a.row_to_col[i]);
  return a;
}

/// Clustering accuracy with the best cluster → class relabeling.
struct AccResult {
  double acc = 0.0;
  std::map<int, int> permutation;  // predicted cluster id → class id
  std::vector<int> y_true;
  std::vector<int> y_mapped;       // prediction after relabeling
};

struct SessionMetrics {
  double acc_all = 0.0;
  double acc_old = 0.0;
  double acc_new = 0.0;
  std::size_t n_all = 0;
  std::size_t n_old = 0;
  std::size_t n_new = 0;
  bool new_defined = true;  // false when n_new == 0 (acc_new reported as 1.0)
  bool old_defined = true;  // false when n_old == 0 (acc_old reported as 1.0)
  std::map<int, int> permutation;
};

/// max over label permutations p of (1/N) Σ 1{y_i = p(ŷ_i)}, via Hungarian
/// matching on negated contingency counts padded to square.
inline AccResult clustering_acc(const std::vector<int>& y_true, const std::vector<int>& y_pred) {
  if (y_true.size() != y_pred.size())
    throw DimensionError("clustering_acc: " + std::to_string(y_true.size()) + " labels vs " +
                         std::to_string(y_pred.size()) + " predictions");
  if (y_true.empty()) throw ValidationError("clustering_acc: empty input");

  const std::set<int> classes(y_true.begin(), y_true.end());
  const std::set<int> clusters(y_pred.begin(), y_pred.end());
  const std::vector<int> cls(classes.begin(), classes.end());
  const std::vector<int> clu(clusters.begin(), clusters.end());
  const std::size_t k = std::max(cls.size(), clu.size());
  std::map<int, std::size_t> cls_idx, clu_idx;
  for (std::size_t i = 0; i < cls.size(); ++i) cls_idx[cls[i]] = i;
  for (std::size_t i = 0; i < clu.size(); ++i) clu_idx[clu[i]] = i;

  Tensor counts({k, k});  // row = cluster, col = class
  for (std::size_t i = 0; i < y_true.size(); ++i) counts(clu_idx[y_pred[i]], cls_idx[y_true[i]]) += 1.0;
  Tensor cost = counts;
  for (double& c : cost.data()) c = -c;
  const Assignment a = hungarian(cost);

  AccResult r;
  r.y_true = y_true;
  for (std::size_t row = 0; row < clu.size(); ++row) {
    const std::size_t col = a.row_to_col[row];
    // Padding columns stand for "no class"; such clusters map to an id that
    // matches nothing.
    r.permutation[clu[row]] = col < cls.size() ? cls[col] : std::numeric_limits<int>::min();
  }
  std::size_t correct = 0;
  r.y_mapped.resize(y_pred.size());
  for (std::size_t i = 0; i < y_pred.size(); ++i) {
    r.y_mapped[i] = r.permutation[y_pred[i]];
    correct += r.y_mapped[i] == y_true[i];
  }
  r.acc = static_cast<double>(correct) / static_cast<double>(y_true.size());
  return r;
}

/// Old/New decomposition under the single permutation found on All samples.
inline SessionMetrics split_acc(const AccResult& all, const std::set<int>& old_classes,
                                const std::set<int>& new_classes) {
  for (int c : old_classes)
    if (new_classes.count(c)) throw ValidationError("class " + std::to_string(c) + " is both old and new");
  std::size_t correct_old = 0, correct_new = 0;
  SessionMetrics m;
  for (std::size_t i = 0; i < all.y_true.size(); ++i) {
    const int y = all.y_true[i];
    const bool hit = all.y_mapped[i] == y;
    if (old_classes.count(y)) {
      ++m.n_old;
      correct_old += hit;
    } else if (new_classes.count(y)) {
      ++m.n_new;
      correct_new += hit;
    } else {
      throw ValidationError("class " + std::to_string(y) + " is neither old nor new");
    }
  }
  m.n_all = all.y_true.size();
  m.acc_all = all.acc;
  m.old_defined = m.n_old > 0;
  m.new_defined = m.n_new > 0;
  m.acc_old = m.n_old ? static_cast<double>(correct_old) / static_cast<double>(m.n_old) : 1.0;
  m.acc_new = m.n_new ? static_cast<double>(correct_new) / static_cast<double>(m.n_new) : 1.0;
  m.permutation = all.permutation;
  return m;
}

/// Confusion matrix after relabeling: row = true class, column = matched
/// predicted class, both over the sorted true class ids.
inline void write_confusion_csv(std::ostream& os, const AccResult& r) {
  const std::set<int> classes(r.y_true.begin(), r.y_true.end());
  const std::vector<int> cls(classes.begin(), classes.end());
  std::map<int, std::size_t> idx;
  for (std::size_t i = 0; i < cls.size(); ++i) idx[cls[i]] = i;
  std::vector<std::vector<std::size_t>> m(cls.size(), std::vector<std::size_t>(cls.size() + 1, 0));
  for (std::size_t i = 0; i < r.y_true.size(); ++i) {
    const auto it = idx.find(r.y_mapped[i]);
    m[idx[r.y_true[i]]][it == idx.end() ? cls.size() : it->second]++;
  }
  os << "true\\pred";
  for (int c : cls) os << ',' << c;
  os << ",unmatched\n";
  for (std::size_t i = 0; i < cls.size(); ++i) {
    os << cls[i];
    for (std::size_t v : m[i]) os << ',' << v;
    os << '\n';
  }
}

}  // namespace metagcd

#endif  // METAGCD_CLUSTER_EVAL_HPP
