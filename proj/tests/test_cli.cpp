#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>

#include "kgf/cli.hpp"

namespace kgf::cli {
namespace {

namespace fs = std::filesystem;

struct Outcome {
  int code;
  std::string out, err;
};

Outcome run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = dispatch(args, out, err);
  return {code, out.str(), err.str()};
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag)
      : path_(fs::temp_directory_path() / ("kgf_cli_" + tag + "_" + std::to_string(::getpid()))) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }
  std::string operator/(const std::string& name) const { return (path_ / name).string(); }

 private:
  fs::path path_;
};

const std::string kToy = std::string(KGF_SOURCE_DIR) + "/data/toy/";

std::vector<std::string> ingest_args(const std::string& out) {
  return {"ingest",  "--combo", kToy + "combo.csv", "--mono",          kToy + "mono.csv", "--targets",
          kToy + "targets.csv", "--ppi", kToy + "ppi.csv", "--min-pse-count", "10", "--out", out};
}

const std::vector<std::string> kTrainSettings{
    "--set", "model.family=simple",       "--set", "model.dim=8",
    "--set", "train.strategy=1vsAll",     "--set", "train.loss=kl",
    "--set", "train.optimizer=adam",      "--set", "train.lr=0.05",
    "--set", "train.batch_size=16",       "--set", "train.early_stop.first_eval=2",
    "--set", "train.early_stop.eval_every=2", "--set", "train.early_stop.min_epochs=2",
    "--set", "train.early_stop.max_epochs=6", "--set", "train.seed=3"};

std::vector<std::string> with(std::vector<std::string> base, const std::vector<std::string>& extra) {
  base.insert(base.end(), extra.begin(), extra.end());
  return base;
}

// Runs every stage against the toy tables and returns the bytes of its outputs.
std::map<std::string, std::string> pipeline(const TempDir& dir) {
  const auto data = dir / "data";
  const auto run_dir = dir / "run";
  std::map<std::string, std::string> files;
  auto stage = [&](const std::vector<std::string>& args) {
    const auto r = run(args);
    EXPECT_EQ(r.code, 0) << args.front() << ": " << r.err;
    return r;
  };
  stage(ingest_args(data));
  const auto split = stage({"split", "--dataset", data, "--fraction", "0.2", "--seed", "7"});
  EXPECT_NE(split.out.find("holdout\t"), std::string::npos);
  stage(with({"train", "--dataset", data, "--out", run_dir, "--save-every-epoch"}, kTrainSettings));
  stage({"eval", "--dataset", data, "--checkpoint", run_dir + "/final.ckpt", "--seed", "5", "--out",
         dir / "report.csv"});
  stage(with({"hpo", "--dataset", data, "--trials", "3", "--seed", "2", "--journal", dir / "journal.tsv"},
             {"--set", "train.early_stop.max_epochs=2", "--set", "train.early_stop.first_eval=2", "--set",
              "train.early_stop.min_epochs=1", "--set", "model.dim=8"}));
  stage({"curve", "--checkpoints", run_dir, "--dataset", data, "--seed", "5", "--out", dir / "curve.csv"});
  files["report"] =
      stage({"report", "--journal", dir / "journal.tsv", "--eval", dir / "report.csv"}).out;
  for (const auto& entry : fs::recursive_directory_iterator(dir.path())) {
    if (!entry.is_regular_file()) continue;
    const auto rel = fs::relative(entry.path(), dir.path()).string();
    if (rel.find("train_log") != std::string::npos || rel == "journal.tsv" || rel == "curve.csv") continue;
    files[rel] = text::read_file(entry.path());
  }
  // Wall-clock columns vary between runs; compare everything else.
  for (const auto& line : text::read_lines(dir / "journal.tsv")) {
    const auto f = text::split(line, '\t');
    std::string stable;
    for (std::size_t i = 0; i < f.size(); ++i) {
      if (i != 3) stable += std::string(f[i]) + "\t";
    }
    files["journal.tsv"] += stable + "\n";
  }
  for (const auto& line : text::read_lines(dir / "curve.csv")) {
    files["curve.csv"] += line.substr(0, line.rfind(',')) + "\n";
  }
  return files;
}

TEST(Cli, NoArgumentsIsUsageError) {
  const auto r = run({});
  EXPECT_EQ(r.code, kUsage);
  EXPECT_NE(r.err.find("ingest"), std::string::npos);
}

TEST(Cli, BinaryExitCodes) {
  const auto status = [](const std::string& args) {
    const int s = std::system((std::string(KGF_BINARY) + " " + args + " >/dev/null 2>&1").c_str());
    return WEXITSTATUS(s);
  };
  EXPECT_EQ(status(""), 1);
  EXPECT_EQ(status("--help"), 0);
  EXPECT_EQ(status("split --dataset /nonexistent --seed 1"), 2);
  EXPECT_EQ(status("split --dataset /nonexistent --fraction 1.5 --seed 1"), 1);
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run({"split", "--dataset", "x", "--fraction", "1.5", "--seed", "1"}).code, kUsage);
  EXPECT_EQ(run({"split", "--dataset", "x", "--fraction", "0", "--seed", "1"}).code, kUsage);
  EXPECT_EQ(run({"split", "--dataset", "x"}).code, kUsage);
  EXPECT_EQ(run({"frobnicate"}).code, kUsage);
  EXPECT_EQ(run({"train", "--dataset", "x", "--set", "noequals"}).code, kUsage);
  EXPECT_EQ(run({"train", "--dataset", "x", "--set", "train.lr=-1"}).code, kUsage);
}

TEST(Cli, HelpListsEveryOption) {
  const std::map<std::string, std::vector<std::string>> options{
      {"ingest", {"--combo", "--mono", "--targets", "--ppi", "--variant", "--min-pse-count", "--lenient", "--out"}},
      {"split", {"--dataset", "--fraction", "--valid-fraction", "--seed", "--out"}},
      {"train", {"--dataset", "--config", "--set", "--out", "--save-every-epoch"}},
      {"eval", {"--dataset", "--checkpoint", "--seed", "--out", "--summary", "--trapezoid", "--no-ranking"}},
      {"hpo", {"--dataset", "--space", "--config", "--set", "--trials", "--sobol", "--workers", "--seed", "--journal"}},
      {"curve", {"--checkpoints", "--dataset", "--seed", "--out"}},
      {"report", {"--journal", "--eval"}},
  };
  for (const auto& [command, flags] : options) {
    const auto r = run({command, "--help"});
    EXPECT_EQ(r.code, 0) << command;
    for (const auto& flag : flags) EXPECT_NE(r.out.find(flag), std::string::npos) << command << " " << flag;
  }
}

TEST(Cli, DataErrors) {
  TempDir dir("errors");
  EXPECT_EQ(run({"split", "--dataset", dir / "missing", "--seed", "1"}).code, kData);
  EXPECT_EQ(run({"report", "--journal", dir / "missing.tsv"}).code, kData);
  auto args = ingest_args(dir / "d");
  args[2] = dir / "absent.csv";
  EXPECT_EQ(run(args).code, kData);
}

TEST(Cli, ToyPipelineIsDeterministic) {
  TempDir a("pipe_a"), b("pipe_b");
  const auto first = pipeline(a);
  const auto second = pipeline(b);
  ASSERT_FALSE(HasFailure());
  EXPECT_EQ(first.size(), second.size());
  for (const auto& [name, bytes] : first) {
    const auto it = second.find(name);
    ASSERT_NE(it, second.end()) << name;
    EXPECT_EQ(it->second, bytes) << name;
  }
  for (const auto* name : {"run/final.ckpt", "run/epoch_00001.ckpt", "report.csv", "report_summary.csv",
                           "data/entities.tsv"}) {
    EXPECT_TRUE(first.count(name)) << name;
  }
  EXPECT_NE(first.at("report").find("Median performance across"), std::string::npos);
  EXPECT_FALSE(first.at("journal.tsv").empty());
}

TEST(Cli, SplitRefusesResplit) {
  TempDir dir("resplit");
  ASSERT_EQ(run(ingest_args(dir / "d")).code, 0);
  ASSERT_EQ(run({"split", "--dataset", dir / "d", "--seed", "1"}).code, 0);
  EXPECT_EQ(run({"split", "--dataset", dir / "d", "--seed", "1"}).code, kUsage);
}

TEST(Cli, EvalRejectsMismatchedCheckpoint) {
  TempDir dir("mismatch");
  ASSERT_EQ(run(ingest_args(dir / "d")).code, 0);
  ASSERT_EQ(run({"split", "--dataset", dir / "d", "--seed", "1"}).code, 0);
  const auto params = init_params<double>({ModelFamily::DistMult, 4}, 3, 2, XavierUniformInit{}, XavierUniformInit{}, 1);
  Checkpoint checkpoint;
  add_model(checkpoint, params);
  checkpoint.save(dir / "bad.ckpt");
  EXPECT_EQ(run({"eval", "--dataset", dir / "d", "--checkpoint", dir / "bad.ckpt", "--seed", "1", "--out",
                 dir / "r.csv"})
                .code,
            kData);
}

}  // namespace
}  // namespace kgf::cli
