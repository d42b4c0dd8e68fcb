// metagcd: generate data, train, aggregate reports and sweep hyperparameters.
//
//   metagcd gen-data [--config f] [--set k=v]... --out data.bin
//   metagcd train    [--config f] [--set k=v]... [--seed s] [--ablation a] [--episodes n] [--dataset p] [--out dir]
//   metagcd report   report.json... [--out table.csv]
//   metagcd sweep    [--config f] [--set k=v]... --param epsilon --values 0.75,0.85,0.95 [--seeds 1,2,3] [--jobs n]

#include <exception>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "metagcd/cli.hpp"

namespace {

struct CommonOptions {
  std::string config_path;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config_path, "key = value config file");
  cmd->add_option("--set", o.overrides, "override one config key (key=value), repeatable");
}

metagcd::ExperimentConfig build_config(const CommonOptions& o) {
  metagcd::ExperimentConfig cfg;
  if (!o.config_path.empty()) metagcd::load_config(o.config_path, cfg);
  for (const auto& kv : o.overrides) metagcd::apply_override(cfg, kv);
  return cfg;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    tok = metagcd::detail::trim(tok);
    if (!tok.empty()) out.push_back(tok);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MetaGCD continual category discovery on feature vectors"};
  app.require_subcommand(1);

  CommonOptions gen_opts, train_opts, sweep_opts;
  std::string gen_out;
  auto* gen = app.add_subcommand("gen-data", "write a synthetic Gaussian-mixture dataset");
  add_common(gen, gen_opts);
  gen->add_option("--out", gen_out, "dataset path")->required();

  std::string seed, ablation, episodes, dataset, train_out;
  auto* train = app.add_subcommand("train", "meta-train and run the continual protocol");
  add_common(train, train_opts);
  train->add_option("--seed", seed, "run seed");
  train->add_option("--ablation", ablation, "baseline|cn|sp|meta");
  train->add_option("--episodes", episodes, "meta-training episodes (0 = warmup model only)");
  train->add_option("--dataset", dataset, "dataset file from gen-data");
  train->add_option("--out", train_out, "output directory");

  std::vector<std::string> report_inputs;
  std::string report_out;
  auto* report = app.add_subcommand("report", "aggregate run reports into a mean/std table");
  report->add_option("reports", report_inputs, "report.json files")->required();
  report->add_option("--out", report_out, "write the table here instead of stdout");

  std::string param, values, seeds = "1";
  std::size_t jobs = 1;
  auto* sweep = app.add_subcommand("sweep", "run one arm per value over a shared seed set");
  add_common(sweep, sweep_opts);
  sweep->add_option("--param", param, "epsilon|novel_per_session")->required();
  sweep->add_option("--values", values, "comma-separated values")->required();
  sweep->add_option("--seeds", seeds, "comma-separated seeds");
  sweep->add_option("--jobs", jobs, "concurrent arms");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : metagcd::kExitValidation;
  }

  try {
    if (*gen) {
      metagcd::cmd_gen_data(build_config(gen_opts), gen_out);
      std::cout << "wrote " << gen_out << '\n';
    } else if (*train) {
      metagcd::ExperimentConfig cfg = build_config(train_opts);
      if (!seed.empty()) cfg.set("seed", seed);
      if (!ablation.empty()) cfg.set("ablation", ablation);
      if (!episodes.empty()) cfg.set("episodes", episodes);
      if (!dataset.empty()) cfg.set("dataset", dataset);
      if (!train_out.empty()) cfg.set("output_dir", train_out);
      const auto out = metagcd::cmd_train(cfg);
      metagcd::write_metrics_csv(std::cout, out.report);
      std::cout << "wrote " << out.dir.string() << '\n';
    } else if (*report) {
      std::vector<std::filesystem::path> paths(report_inputs.begin(), report_inputs.end());
      if (report_out.empty()) {
        metagcd::cmd_report(paths, std::cout);
      } else {
        std::ostringstream table;
        metagcd::cmd_report(paths, table);
        auto os = metagcd::open_output(report_out);
        os << table.str();
      }
    } else if (*sweep) {
      std::vector<std::uint64_t> seed_list;
      for (const auto& s : split_list(seeds)) seed_list.push_back(metagcd::detail::parse_number<std::uint64_t>("seeds", s));
      const auto rows = metagcd::cmd_sweep(build_config(sweep_opts), param, split_list(values), seed_list, jobs);
      metagcd::write_sweep_csv(std::cout, rows);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return metagcd::exit_code_for(e);
  }
  return metagcd::kExitOk;
}
