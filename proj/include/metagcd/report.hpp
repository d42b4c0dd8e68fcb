#ifndef METAGCD_REPORT_HPP
#define METAGCD_REPORT_HPP

// RunReport serialization and multi-seed aggregation.
//
// metrics CSV columns (one row per session, session 0 = offline model):
//   session,k,acc_all,acc_old,acc_new,n_all,n_old,n_new,acc_unlabeled
// aggregate CSV columns (one row per session, then a "mean" row holding the
// averages over incremental sessions, i.e. mA/mO/mN):
//   session,runs,all_mean,all_std,old_mean,old_std,new_mean,new_std

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "metagcd/evaluation.hpp"

namespace metagcd {

inline constexpr const char* kRunReportSchema = "metagcd.run_report/1";

namespace detail {

/// Fixed 17-significant-digit rendering; identical doubles give identical text.
inline std::string csv_num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

inline nlohmann::json to_json(const RunReport& r) {
  using nlohmann::json;
  json j;
  j["schema"] = kRunReportSchema;
  j["seed"] = r.seed;
  j["ablation"] = r.ablation;
  j["config"] = r.config;
  j["warmup_losses"] = r.warmup_losses;
  json eps = json::array();
  for (const auto& e : r.episodes)
    eps.push_back({{"warmup", e.warmup}, {"inner", e.inner}, {"outer", e.outer}, {"p_sizes", e.p_sizes}});
  j["episodes"] = eps;
  json sess = json::array();
  for (const auto& s : r.sessions) {
    json perm = json::array();
    for (const auto& [cluster, cls] : s.metrics.permutation) perm.push_back({cluster, cls});
    sess.push_back({{"session", s.session},
                    {"k", s.k},
                    {"acc_all", s.metrics.acc_all},
                    {"acc_old", s.metrics.acc_old},
                    {"acc_new", s.metrics.acc_new},
                    {"n_all", s.metrics.n_all},
                    {"n_old", s.metrics.n_old},
                    {"n_new", s.metrics.n_new},
                    {"old_defined", s.metrics.old_defined},
                    {"new_defined", s.metrics.new_defined},
                    {"acc_unlabeled", s.acc_unlabeled},
                    {"permutation", perm},
                    {"adapt_losses", s.adapt.losses},
                    {"adapt_mean_neighbors", s.adapt.mean_neighbors}});
  }
  j["sessions"] = sess;
  j["summary"] = {{"mean_all", r.mean_all()}, {"mean_old", r.mean_old()}, {"mean_new", r.mean_new()}};
  return j;
}

inline RunReport run_report_from_json(const nlohmann::json& j) {
  if (!j.contains("schema") || j["schema"] != kRunReportSchema)
    throw FormatError("not a run report (missing or unknown schema)");
  RunReport r;
  try {
    r.seed = j.at("seed").get<std::uint64_t>();
    r.ablation = j.at("ablation").get<std::string>();
    r.config = j.at("config").get<std::map<std::string, std::string>>();
    r.warmup_losses = j.at("warmup_losses").get<std::vector<double>>();
    for (const auto& e : j.at("episodes"))
      r.episodes.push_back({e.at("warmup").get<std::vector<double>>(), e.at("inner").get<std::vector<double>>(),
                            e.at("outer").get<std::vector<double>>(), e.at("p_sizes").get<std::vector<std::size_t>>()});
    for (const auto& s : j.at("sessions")) {
      SessionReport sr;
      sr.session = s.at("session").get<std::size_t>();
      sr.k = s.at("k").get<std::size_t>();
      sr.metrics.acc_all = s.at("acc_all").get<double>();
      sr.metrics.acc_old = s.at("acc_old").get<double>();
      sr.metrics.acc_new = s.at("acc_new").get<double>();
      sr.metrics.n_all = s.at("n_all").get<std::size_t>();
      sr.metrics.n_old = s.at("n_old").get<std::size_t>();
      sr.metrics.n_new = s.at("n_new").get<std::size_t>();
      sr.metrics.old_defined = s.at("old_defined").get<bool>();
      sr.metrics.new_defined = s.at("new_defined").get<bool>();
      sr.acc_unlabeled = s.at("acc_unlabeled").get<double>();
      for (const auto& p : s.at("permutation")) sr.metrics.permutation[p.at(0).get<int>()] = p.at(1).get<int>();
      sr.adapt.losses = s.at("adapt_losses").get<std::vector<double>>();
      sr.adapt.mean_neighbors = s.at("adapt_mean_neighbors").get<std::vector<double>>();
      r.sessions.push_back(std::move(sr));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed run report: ") + e.what());
  }
  if (r.sessions.empty()) throw FormatError("run report has no sessions");
  return r;
}

inline void save_run_report(const std::filesystem::path& path, const RunReport& r) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << to_json(r).dump(2) << '\n';
}

inline RunReport load_run_report(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path.string());
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return run_report_from_json(j);
}

inline void write_metrics_csv(std::ostream& os, const RunReport& r) {
  using detail::csv_num;
  os << "session,k,acc_all,acc_old,acc_new,n_all,n_old,n_new,acc_unlabeled\n";
  for (const auto& s : r.sessions)
    os << s.session << ',' << s.k << ',' << csv_num(s.metrics.acc_all) << ',' << csv_num(s.metrics.acc_old) << ','
       << csv_num(s.metrics.acc_new) << ',' << s.metrics.n_all << ',' << s.metrics.n_old << ',' << s.metrics.n_new
       << ',' << csv_num(s.acc_unlabeled) << '\n';
}

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

inline MeanStd mean_std(const std::vector<double>& v) {
  MeanStd m;
  if (v.empty()) return m;
  for (double x : v) m.mean += x;
  m.mean /= static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - m.mean) * (x - m.mean);
    m.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return m;
}

struct AggregateRow {
  std::string session;  // session index, or "mean" for the mA/mO/mN row
  std::size_t runs = 0;
  MeanStd all, old, fresh;
};

/// Config keys allowed to differ between reports being aggregated.
inline bool is_per_run_key(const std::string& key) {
  return key == "seed" || key == "data_seed" || key == "output_dir" || key == "run_name" || key == "dataset";
}

/// Mean ± sample std across runs per session cell, plus the averages over
/// incremental sessions. Reports must come from the same experiment shape.
inline std::vector<AggregateRow> aggregate_reports(const std::vector<RunReport>& reports) {
  if (reports.empty()) throw ValidationError("report needs at least one run report");
  const RunReport& ref = reports.front();
  for (const auto& r : reports) {
    if (r.sessions.size() != ref.sessions.size())
      throw ValidationError("reports have different session counts (" + std::to_string(r.sessions.size()) + " vs " +
                            std::to_string(ref.sessions.size()) + ")");
    if (r.ablation != ref.ablation) throw ValidationError("reports mix ablations " + r.ablation + " and " + ref.ablation);
    for (std::size_t t = 0; t < r.sessions.size(); ++t)
      if (r.sessions[t].k != ref.sessions[t].k || r.sessions[t].metrics.n_all != ref.sessions[t].metrics.n_all)
        throw ValidationError("reports disagree on session " + std::to_string(t) + " shape");
    for (const auto& [key, value] : r.config) {
      if (is_per_run_key(key)) continue;
      const auto it = ref.config.find(key);
      if (it == ref.config.end() || it->second != value)
        throw ValidationError("reports use incompatible configs (key '" + key + "')");
    }
  }
  std::vector<AggregateRow> rows;
  for (std::size_t t = 0; t < ref.sessions.size(); ++t) {
    std::vector<double> a, o, n;
    for (const auto& r : reports) {
      a.push_back(r.sessions[t].metrics.acc_all);
      o.push_back(r.sessions[t].metrics.acc_old);
      n.push_back(r.sessions[t].metrics.acc_new);
    }
    rows.push_back({std::to_string(ref.sessions[t].session), reports.size(), mean_std(a), mean_std(o), mean_std(n)});
  }
  std::vector<double> ma, mo, mn;
  for (const auto& r : reports) {
    ma.push_back(r.mean_all());
    mo.push_back(r.mean_old());
    mn.push_back(r.mean_new());
  }
  rows.push_back({"mean", reports.size(), mean_std(ma), mean_std(mo), mean_std(mn)});
  return rows;
}

inline void write_aggregate_csv(std::ostream& os, const std::vector<AggregateRow>& rows) {
  using detail::csv_num;
  os << "session,runs,all_mean,all_std,old_mean,old_std,new_mean,new_std\n";
  for (const auto& r : rows)
    os << r.session << ',' << r.runs << ',' << csv_num(r.all.mean) << ',' << csv_num(r.all.std) << ','
       << csv_num(r.old.mean) << ',' << csv_num(r.old.std) << ',' << csv_num(r.fresh.mean) << ','
       << csv_num(r.fresh.std) << '\n';
}

}  // namespace metagcd

#endif  // METAGCD_REPORT_HPP
