#ifndef METAGCD_CLI_HPP
#define METAGCD_CLI_HPP

// Command implementations behind tools/metagcd. Each command validates its
// whole configuration before touching the filesystem.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "metagcd/checkpoint.hpp"
#include "metagcd/config.hpp"
#include "metagcd/data.hpp"
#include "metagcd/evaluation.hpp"
#include "metagcd/report.hpp"

namespace metagcd {

enum ExitCode : int { kExitOk = 0, kExitValidation = 2, kExitCapacity = 3, kExitIo = 4 };

/// Maps the library's exception hierarchy onto process exit codes.
inline int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const CapacityError*>(&e)) return kExitCapacity;
  if (dynamic_cast<const IoError*>(&e)) return kExitIo;
  return kExitValidation;
}

/// Opens `path` for writing or throws IoError.
inline std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  return os;
}

inline void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

// ---------------------------------------------------------------------------
// gen-data

inline void cmd_gen_data(ExperimentConfig cfg, const std::filesystem::path& out_path) {
  cfg.finalize();
  const LabeledSet d = gen_gaussian_mixture(cfg.data);
  if (out_path.has_parent_path()) ensure_dir(out_path.parent_path());
  save_dataset(out_path, d, cfg.data.seed);
}

// ---------------------------------------------------------------------------
// train

/// Dataset named by the config, or a synthetic one generated in memory when
/// `dataset` is empty. The stream geometry is checked against what the data
/// actually holds.
inline LabeledSet prepare_dataset(ExperimentConfig& cfg) {
  LabeledSet d;
  if (cfg.dataset.empty()) {
    cfg.finalize();
    d = gen_gaussian_mixture(cfg.data);
  } else {
    d = load_dataset(cfg.dataset).data;
    cfg.data.dim = d.dim();
    cfg.data.num_classes = d.classes.size();
    std::size_t smallest = d.size();
    for (int c : d.classes) smallest = std::min(smallest, d.indices_of(c).size());
    cfg.data.samples_per_class = smallest;
    cfg.finalize();
  }
  return d;
}

inline std::string run_name(const ExperimentConfig& cfg) {
  return cfg.run_name.empty() ? cfg.ablation + "-seed" + std::to_string(cfg.seed) : cfg.run_name;
}

struct TrainOutputs {
  std::filesystem::path dir;
  RunReport report;
};

/// Runs one experiment and writes into <output_dir>/<run_name>/:
///   model.ckpt     starting model (meta-trained or warmup)
///   final.ckpt     model after the last session's adaptation
///   report.json    full RunReport
///   metrics.csv    per-session metrics table
///   stream.txt     class and sample composition of every session
///   confusion.csv  final-session sample-level matching
inline TrainOutputs cmd_train(ExperimentConfig cfg) {
  const LabeledSet data = prepare_dataset(cfg);
  const SessionStream stream = stream_for_seed(data, cfg.stream, cfg.seed);
  ExperimentResult res = run_experiment(stream, cfg.train, cfg.seed);
  res.report.config = cfg.to_map();

  TrainOutputs out{resolve_output_dir(cfg) / run_name(cfg), res.report};
  ensure_dir(out.dir);
  save_checkpoint(out.dir / "model.ckpt", res.start);
  save_checkpoint(out.dir / "final.ckpt", res.final_params);
  save_run_report(out.dir / "report.json", res.report);
  {
    auto os = open_output(out.dir / "metrics.csv");
    write_metrics_csv(os, res.report);
  }
  {
    auto os = open_output(out.dir / "stream.txt");
    write_stream_manifest(os, stream);
  }
  {
    auto os = open_output(out.dir / "confusion.csv");
    write_confusion_csv(os, res.report.final_session().detail);
  }
  return out;
}

// ---------------------------------------------------------------------------
// report

inline std::vector<AggregateRow> cmd_report(const std::vector<std::filesystem::path>& reports, std::ostream& out) {
  if (reports.empty()) throw ValidationError("report needs at least one report.json");
  std::vector<RunReport> runs;
  for (const auto& p : reports) runs.push_back(load_run_report(p));
  const auto rows = aggregate_reports(runs);
  write_aggregate_csv(out, rows);
  return rows;
}

// ---------------------------------------------------------------------------
// sweep

struct SweepRow {
  std::string param;
  std::string value;
  std::vector<std::uint64_t> seeds;
  std::vector<double> final_acc_all;
  std::vector<double> mean_all;
  double probe_neighbors = 0.0;  // mean |NN(i)| on a fixed probe batch, averaged over seeds
};

inline const std::vector<std::string>& sweep_params() {
  static const std::vector<std::string> p = {"epsilon", "novel_per_session"};
  return p;
}

namespace detail {

/// Mean candidate-neighbor count of the warmup model on two augmented views
/// of the first session's unlabeled features. Everything except ε is fixed
/// by the seed, so the value is monotone non-increasing in ε.
inline double probe_neighbors(const SessionStream& stream, const ModelParams& warm, const TrainConfig& cfg,
                              std::uint64_t seed) {
  const Tensor& u = stream.sessions.empty() ? stream.offline.x : stream.sessions.front().train.features();
  Rng rng = Rng(seed).fork(0x9e0be);
  const auto idx = draw_batch(u.rows(), cfg.batch_size, rng);
  const Tensor views = augment_views(gather_rows(u, idx), rng, cfg.augment_strength, cfg.mask_prob);
  const ViewBatch vb = ViewBatch::from_views(embed(warm, views));
  return candidate_neighbors(vb, cfg.loss).mean_size();
}

inline void apply_sweep_value(ExperimentConfig& cfg, const std::string& param, const std::string& value) {
  if (param == "epsilon")
    cfg.set("epsilon", value);
  else if (param == "novel_per_session")
    cfg.set("episode_novel_per_session", value);
  else
    throw ValidationError("cannot sweep '" + param + "' (expected epsilon or novel_per_session)");
}

}  // namespace detail

/// Columns: param,value,runs,final_acc_all_mean,final_acc_all_std,mean_all_mean,probe_mean_neighbors
inline void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
  os << "param,value,runs,final_acc_all_mean,final_acc_all_std,mean_all_mean,probe_mean_neighbors\n";
  for (const auto& r : rows) {
    const MeanStd f = mean_std(r.final_acc_all);
    os << r.param << ',' << r.value << ',' << r.seeds.size() << ',' << detail::csv_num(f.mean) << ','
       << detail::csv_num(f.std) << ',' << detail::csv_num(mean_std(r.mean_all).mean) << ','
       << detail::csv_num(r.probe_neighbors) << '\n';
  }
}

/// One arm per value over a shared seed set. Every arm config is finalized
/// up front; arms then run on up to `jobs` workers. Per-arm outputs go to
/// <output_dir>/<run_name>/<param>=<value>/seed<s>/, and the merged table
/// is returned.
inline std::vector<SweepRow> cmd_sweep(ExperimentConfig base, const std::string& param,
                                       const std::vector<std::string>& values, const std::vector<std::uint64_t>& seeds,
                                       std::size_t jobs = 1) {
  if (values.empty()) throw ValidationError("sweep needs at least one value");
  if (seeds.empty()) throw ValidationError("sweep needs at least one seed");
  if (std::find(sweep_params().begin(), sweep_params().end(), param) == sweep_params().end())
    throw ValidationError("cannot sweep '" + param + "' (expected epsilon or novel_per_session)");

  const LabeledSet data = prepare_dataset(base);
  struct Arm {
    std::size_t value_index;
    ExperimentConfig cfg;
  };
  std::vector<Arm> arms;
  for (std::size_t v = 0; v < values.size(); ++v)
    for (std::uint64_t s : seeds) {
      ExperimentConfig c = base;
      detail::apply_sweep_value(c, param, values[v]);
      c.set("seed", std::to_string(s));
      if (!base.data_seed_set) c.set("data_seed", std::to_string(base.data.seed));
      c.finalize();
      arms.push_back({v, std::move(c)});
    }

  const std::filesystem::path root = resolve_output_dir(base) / (base.run_name.empty() ? "sweep" : base.run_name);
  auto run_arm = [&](const Arm& arm) {
    const ExperimentConfig& c = arm.cfg;
    const SessionStream stream = stream_for_seed(data, c.stream, c.seed);
    const ModelParams warm = warmup_start(stream, c.train, c.seed);
    const double probe = detail::probe_neighbors(stream, warm, c.train, c.seed);
    ExperimentResult res = run_experiment(stream, c.train, c.seed, &warm);
    res.report.config = c.to_map();
    const auto dir = root / (param + "=" + values[arm.value_index]) / ("seed" + std::to_string(c.seed));
    ensure_dir(dir);
    save_run_report(dir / "report.json", res.report);
    auto os = open_output(dir / "metrics.csv");
    write_metrics_csv(os, res.report);
    return std::make_pair(res.report, probe);
  };

  std::vector<std::pair<RunReport, double>> results(arms.size());
  jobs = std::max<std::size_t>(jobs, 1);
  for (std::size_t start = 0; start < arms.size(); start += jobs) {
    std::vector<std::future<std::pair<RunReport, double>>> batch;
    for (std::size_t i = start; i < std::min(arms.size(), start + jobs); ++i)
      batch.push_back(std::async(jobs > 1 ? std::launch::async : std::launch::deferred, run_arm, std::cref(arms[i])));
    for (std::size_t i = 0; i < batch.size(); ++i) results[start + i] = batch[i].get();
  }

  std::vector<SweepRow> rows(values.size());
  for (std::size_t v = 0; v < values.size(); ++v) {
    rows[v].param = param;
    rows[v].value = values[v];
  }
  for (std::size_t i = 0; i < arms.size(); ++i) {
    SweepRow& r = rows[arms[i].value_index];
    r.seeds.push_back(arms[i].cfg.seed);
    r.final_acc_all.push_back(results[i].first.final_session().metrics.acc_all);
    r.mean_all.push_back(results[i].first.mean_all());
    r.probe_neighbors += results[i].second / static_cast<double>(seeds.size());
  }
  ensure_dir(root);
  auto os = open_output(root / "sweep.csv");
  write_sweep_csv(os, rows);
  return rows;
}

}  // namespace metagcd

#endif  // METAGCD_CLI_HPP
