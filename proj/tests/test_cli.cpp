#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "metagcd/metagcd.hpp"

namespace fs = std::filesystem;

namespace {

const char* const kTinyConfig =
    "num_classes = 6\n"
    "dim = 8\n"
    "samples_per_class = 40\n"
    "offline_classes = 4\n"
    "sessions = 2\n"
    "novel_per_session = 1\n"
    "train_per_class = 25\n"
    "test_per_class = 10\n"
    "warmup_epochs = 3\n"
    "episodes = 1\n"
    "inner_steps = 2\n"
    "metatest_steps = 2\n"
    "batch_size = 32\n"
    "encoder_hidden = 32,16\n"
    "projection_hidden = 16\n"
    "episode_novel_per_session = 1\n"
    "episode_unlabeled_known = 6\n"
    "episode_unlabeled_novel = 6\n"
    "episode_test_per_class = 5\n"
    "kmeans_restarts = 2\n";

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("metagcd_cli_") + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    std::ofstream(dir_ / "tiny.cfg") << kTinyConfig;
    ::unsetenv("METAGCD_OUTPUT_ROOT");
  }
  void TearDown() override {
    ::unsetenv("METAGCD_OUTPUT_ROOT");
    fs::remove_all(dir_);
  }

  /// Runs the CLI with `args`; stdout lands in dir_/stdout.txt.
  int run(const std::string& args) const {
    const std::string cmd = std::string("\"") + METAGCD_CLI_PATH + "\" " + args + " > \"" +
                            (dir_ / "stdout.txt").string() + "\" 2> \"" + (dir_ / "stderr.txt").string() + "\"";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  std::string cfg() const { return "--config \"" + (dir_ / "tiny.cfg").string() + "\""; }
  std::string path(const std::string& rel) const { return "\"" + (dir_ / rel).string() + "\""; }

  static std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
  }
  std::string out() const { return slurp(dir_ / "stdout.txt"); }
  std::string err() const { return slurp(dir_ / "stderr.txt"); }

  fs::path dir_;
};

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream is(text);
  for (std::string l; std::getline(is, l);) out.push_back(l);
  return out;
}

std::vector<std::string> fields(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream is(line);
  for (std::string f; std::getline(is, f, ',');) out.push_back(f);
  return out;
}

}  // namespace

TEST_F(Cli, GenerateThenTrain) {
  ASSERT_EQ(run("gen-data " + cfg() + " --set seed=5 --out " + path("data/d.bin")), 0) << err();
  const auto file = metagcd::load_dataset(dir_ / "data/d.bin");
  EXPECT_EQ(file.header.seed, 5u);
  EXPECT_EQ(file.header.classes, 6u);
  EXPECT_EQ(file.header.samples, 240u);

  ASSERT_EQ(run("train " + cfg() + " --seed 3 --dataset " + path("data/d.bin") + " --out " + path("runs")), 0)
      << err();
  const fs::path run_dir = dir_ / "runs" / "meta-seed3";
  for (const char* f : {"model.ckpt", "final.ckpt", "report.json", "metrics.csv", "stream.txt", "confusion.csv"})
    EXPECT_TRUE(fs::exists(run_dir / f)) << f;
  const auto rows = lines(slurp(run_dir / "metrics.csv"));
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0], "session,k,acc_all,acc_old,acc_new,n_all,n_old,n_new,acc_unlabeled");
  EXPECT_NE(out().find(rows[0]), std::string::npos);
  const metagcd::RunReport r = metagcd::load_run_report(run_dir / "report.json");
  EXPECT_EQ(r.seed, 3u);
  EXPECT_EQ(r.sessions.size(), 3u);
  EXPECT_EQ(r.episodes.size(), 1u);
  EXPECT_EQ(r.sessions.back().k, 6u);
  const auto ckpt = metagcd::load_checkpoint(run_dir / "model.ckpt");
  EXPECT_EQ(ckpt.encoder_widths, (metagcd::Widths{8, 32, 16}));
}

TEST_F(Cli, SameSeedSameMetrics) {
  ASSERT_EQ(run("train " + cfg() + " --seed 2 --out " + path("a")), 0) << err();
  ASSERT_EQ(run("train " + cfg() + " --seed 2 --out " + path("b")), 0) << err();
  EXPECT_EQ(slurp(dir_ / "a/meta-seed2/metrics.csv"), slurp(dir_ / "b/meta-seed2/metrics.csv"));
  EXPECT_EQ(slurp(dir_ / "a/meta-seed2/model.ckpt"), slurp(dir_ / "b/meta-seed2/model.ckpt"));
}

TEST_F(Cli, ZeroEpisodesAndAblationSelection) {
  ASSERT_EQ(run("train " + cfg() + " --episodes 0 --out " + path("runs")), 0) << err();
  EXPECT_TRUE(metagcd::load_run_report(dir_ / "runs/meta-seed1/report.json").episodes.empty());
  ASSERT_EQ(run("train " + cfg() + " --ablation baseline --out " + path("runs")), 0) << err();
  const auto r = metagcd::load_run_report(dir_ / "runs/baseline-seed1/report.json");
  EXPECT_EQ(r.ablation, "baseline");
  EXPECT_EQ(r.config.at("ablation"), "baseline");
  EXPECT_TRUE(r.episodes.empty());
}

TEST_F(Cli, ExitCodes) {
  EXPECT_EQ(run("train " + cfg() + " --set epsilonn=0.8 --out " + path("runs")), 2);
  EXPECT_NE(err().find("epsilonn"), std::string::npos);
  EXPECT_EQ(run("train " + cfg() + " --ablation partial --out " + path("runs")), 2);
  EXPECT_EQ(run("train --bogus-flag"), 2);
  EXPECT_EQ(run("train " + cfg() + " --set num_classes=5 --out " + path("runs")), 3);
  EXPECT_EQ(run("train " + cfg() + " --dataset " + path("missing.bin") + " --out " + path("runs")), 4);
  EXPECT_EQ(run("train --config " + path("missing.cfg")), 4);
  std::ofstream(dir_ / "blocker") << "file, not a directory";
  EXPECT_EQ(run("train " + cfg() + " --out " + path("blocker/sub")), 4);
  EXPECT_EQ(run("report " + path("missing.json")), 4);
  EXPECT_FALSE(fs::exists(dir_ / "runs"));
}

TEST_F(Cli, ReportAggregatesRuns) {
  ASSERT_EQ(run("train " + cfg() + " --seed 1 --out " + path("runs")), 0) << err();
  ASSERT_EQ(run("train " + cfg() + " --seed 2 --out " + path("runs")), 0) << err();
  ASSERT_EQ(run("report " + path("runs/meta-seed1/report.json") + " " + path("runs/meta-seed2/report.json") +
                " --out " + path("table.csv")),
            0)
      << err();
  const auto rows = lines(slurp(dir_ / "table.csv"));
  ASSERT_EQ(rows.size(), 5u);
  EXPECT_EQ(rows[0], "session,runs,all_mean,all_std,old_mean,old_std,new_mean,new_std");
  EXPECT_EQ(fields(rows[4])[0], "mean");
  EXPECT_EQ(fields(rows[4])[1], "2");

  ASSERT_EQ(run("train " + cfg() + " --seed 1 --set epsilon=0.5 --set run_name=other --out " + path("runs")), 0);
  EXPECT_EQ(run("report " + path("runs/meta-seed1/report.json") + " " + path("runs/other/report.json")), 2);
}

TEST_F(Cli, SweepNeighborhoodShrinksWithEpsilon) {
  ASSERT_EQ(run("sweep " + cfg() + " --set output_dir=" + path("sw") +
                " --param epsilon --values 0.75,0.85,0.95 --seeds 1,2 --jobs 2"),
            0)
      << err();
  const auto rows = lines(out());
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0], "param,value,runs,final_acc_all_mean,final_acc_all_std,mean_all_mean,probe_mean_neighbors");
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto f = fields(rows[i]);
    ASSERT_EQ(f.size(), 7u);
    EXPECT_EQ(f[2], "2");
    const double probe = std::stod(f[6]);
    EXPECT_GE(probe, 1.0);
    EXPECT_LE(probe, prev);
    prev = probe;
  }
  EXPECT_EQ(slurp(dir_ / "sw/sweep/sweep.csv"), out());
  EXPECT_TRUE(fs::exists(dir_ / "sw/sweep/epsilon=0.85/seed2/report.json"));
}

TEST_F(Cli, SingleArmSweepMatchesTrain) {
  ASSERT_EQ(run("gen-data " + cfg() + " --out " + path("d.bin")), 0) << err();
  ASSERT_EQ(run("sweep " + cfg() + " --set dataset=" + path("d.bin") + " --set output_dir=" + path("sw") +
                " --param epsilon --values 0.85 --seeds 4"),
            0)
      << err();
  ASSERT_EQ(run("train " + cfg() + " --seed 4 --dataset " + path("d.bin") + " --out " + path("tr")), 0) << err();
  EXPECT_EQ(slurp(dir_ / "sw/sweep/epsilon=0.85/seed4/metrics.csv"), slurp(dir_ / "tr/meta-seed4/metrics.csv"));
}

TEST_F(Cli, OutputRootPrefixesRelativeDirs) {
  ::setenv("METAGCD_OUTPUT_ROOT", dir_.c_str(), 1);
  ASSERT_EQ(run("train " + cfg() + " --episodes 0 --out rel-runs"), 0) << err();
  EXPECT_TRUE(fs::exists(dir_ / "rel-runs/meta-seed1/report.json"));
}
