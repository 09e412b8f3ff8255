#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "commands.hpp"
#include "lstmviz/ingest.hpp"
#include "lstmviz/lstm.hpp"
#include "lstmviz/trainer.hpp"
#include "run_config.hpp"
#include "svg.hpp"

namespace fs = std::filesystem;
using namespace lstmviz;
using namespace lstmviz::cli;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::vector<std::string> fields(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  for (std::string f; std::getline(in, f, ',');) out.push_back(f);
  return out;
}

// Runs the built binary, returning its exit status; stdout+stderr go to `log`.
int run_tool(const std::string& args, const fs::path& log) {
  const std::string cmd =
      std::string(LSTMVIZ_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// Minimal well-formedness: balanced element tags, single root, no external refs.
void expect_well_formed_svg(const std::string& svg) {
  ASSERT_NE(svg.find("<svg"), std::string::npos);
  EXPECT_EQ(svg.find("href"), std::string::npos);
  EXPECT_EQ(svg.find("<image"), std::string::npos);
  std::vector<std::string> stack;
  std::size_t pos = 0;
  while ((pos = svg.find('<', pos)) != std::string::npos) {
    const std::size_t end = svg.find('>', pos);
    ASSERT_NE(end, std::string::npos);
    const std::string tag = svg.substr(pos + 1, end - pos - 1);
    pos = end + 1;
    if (tag.empty() || tag[0] == '?' || tag[0] == '!') continue;
    if (tag[0] == '/') {
      ASSERT_FALSE(stack.empty());
      EXPECT_EQ(stack.back(), tag.substr(1));
      stack.pop_back();
    } else if (tag.back() != '/') {
      stack.push_back(tag.substr(0, tag.find(' ')));
    }
  }
  EXPECT_TRUE(stack.empty());
}

}  // namespace

TEST(RunConfig, DefaultsComeFromTheTable) {
  RunConfig cfg;
  EXPECT_EQ(cfg.integer("hidden"), 128);
  EXPECT_DOUBLE_EQ(cfg.real("lr"), 0.001);
  EXPECT_EQ(cfg.str("technique"), "mask");
  EXPECT_EQ(cfg.reals("alphas").size(), 9u);
  EXPECT_EQ(cfg.source("hidden"), RunConfig::Source::builtin);
}

TEST(RunConfig, FlagsBeatFileBeatsDefault) {
  RunConfig cfg;
  cfg.set_flag("hidden", "7");
  cfg.apply_file_text("# comment\nhidden = 64\nepochs=3\n\n", "test.cfg");
  EXPECT_EQ(cfg.integer("hidden"), 7);
  EXPECT_EQ(cfg.source("hidden"), RunConfig::Source::flag);
  EXPECT_EQ(cfg.integer("epochs"), 3);
  EXPECT_EQ(cfg.source("epochs"), RunConfig::Source::file);
  EXPECT_EQ(cfg.integer("layers"), 1);

  std::ostringstream os;
  cfg.print(os);
  EXPECT_NE(os.str().find("hidden"), std::string::npos);
  EXPECT_NE(os.str().find("flag"), std::string::npos);
}

TEST(RunConfig, RejectsUnknownKeysAndBadLines) {
  RunConfig cfg;
  EXPECT_THROW(cfg.apply_file_text("hiden=3\n", "x.cfg"), UsageError);
  EXPECT_THROW(cfg.apply_file_text("just words\n", "x.cfg"), UsageError);
  EXPECT_THROW(cfg.set_flag("nope", "1"), UsageError);
  cfg.set_flag("hidden", "abc");
  EXPECT_THROW(cfg.integer("hidden"), UsageError);
}

TEST(Svg, EscapesMarkup) {
  EXPECT_EQ(xml_escape("a<b&\"c'>"), "a&lt;b&amp;&quot;c&apos;&gt;");
}

TEST(ExitCodes, UsageErrorsMapToTwo) {
  const fs::path dir = fs::current_path() / "cli_exit_codes";
  fs::create_directories(dir);
  EXPECT_EQ(run_tool("train --train-data " + (dir / "missing.seq").string() + " --out " +
                         dir.string(),
                     dir / "log1.txt"),
            2);
  EXPECT_EQ(run_tool("train --no-such-flag 3", dir / "log2.txt"), 2);
  EXPECT_EQ(run_tool("", dir / "log3.txt"), 2);
  EXPECT_EQ(run_tool("--help", dir / "log4.txt"), 0);

  RunConfig cfg;
  cfg.set_flag("technique", "saliencyish");
  std::ostringstream log, err;
  EXPECT_EQ(run_command("salience", cfg, log, err), kUsageError);
  EXPECT_FALSE(err.str().empty());
}

TEST(ExitCodes, CorruptContainerIsAUsageError) {
  const fs::path dir = fs::current_path() / "cli_corrupt";
  fs::create_directories(dir);
  std::ofstream(dir / "train.seq") << "not a dataset";
  RunConfig cfg;
  cfg.set_flag("out", dir.string());
  std::ostringstream log, err;
  EXPECT_EQ(run_command("train", cfg, log, err), kUsageError);
}

class SpikePipeline : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = fs::current_path() / "cli_pipeline";
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    const std::string out = " --out " + dir_.string();
    codes_.push_back(run_tool("ingest --source spike --spike-train 300 --spike-test 60 --seed 4" + out,
                              dir_ / "ingest.log"));
    codes_.push_back(run_tool("train --hidden 12 --epochs 3 --minibatch 30 --lr 0.005 --dropout 0.1"
                              " --seed 4" + out,
                              dir_ / "train.log"));
    codes_.push_back(run_tool("salience --technique mask --iterations 40 --index 1" + out,
                              dir_ / "mask.log"));
    codes_.push_back(run_tool("salience --technique occlusion --w 3 --index 1" + out,
                              dir_ / "occlusion.log"));
    codes_.push_back(run_tool("temporal --index 1" + out, dir_ / "temporal.log"));
    codes_.push_back(run_tool("evaluate --limit 6 --iterations 20" + out, dir_ / "evaluate.log"));
  }

  static fs::path dir_;
  static std::vector<int> codes_;
};

fs::path SpikePipeline::dir_;
std::vector<int> SpikePipeline::codes_;

TEST_F(SpikePipeline, EveryStepSucceeds) {
  for (std::size_t i = 0; i < codes_.size(); ++i) EXPECT_EQ(codes_[i], 0) << "step " << i;
  for (const char* f : {"train.seq", "val.seq", "test.seq", "model.lstm", "history.csv"})
    EXPECT_TRUE(fs::exists(dir_ / f)) << f;
  EXPECT_NE(slurp(dir_ / "train.log").find("= 12  (flag)"), std::string::npos);
}

TEST_F(SpikePipeline, HistoryHasOneRowPerEpoch) {
  const auto rows = lines(slurp(dir_ / "history.csv"));
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0], "epoch,train_loss,val_loss,val_accuracy");
}

TEST_F(SpikePipeline, SalienceCsvIsBoundedAndComplete) {
  for (const char* name : {"mask_1.csv", "occlusion_1.csv"}) {
    const auto rows = lines(slurp(dir_ / name));
    ASSERT_EQ(rows.size(), 65u) << name;
    EXPECT_EQ(rows[0], "t,x_0,salience_0");
    double lo = 1.0, hi = 0.0;
    for (std::size_t i = 1; i < rows.size(); ++i) {
      const auto f = fields(rows[i]);
      ASSERT_EQ(f.size(), 3u);
      EXPECT_EQ(std::stoi(f[0]), static_cast<int>(i - 1));
      const double s = std::stod(f[2]);
      lo = std::min(lo, s);
      hi = std::max(hi, s);
    }
    EXPECT_GE(lo, 0.0);
    EXPECT_LE(hi, 1.0);
  }
}

TEST_F(SpikePipeline, TemporalLastRowIsTheModelPrediction) {
  const auto rows = lines(slurp(dir_ / "temporal_1.csv"));
  ASSERT_EQ(rows.size(), 65u);
  const auto last = fields(rows.back());
  const Dataset test = read_dataset((dir_ / "test.seq").string());
  const LoadedModel m = load_model((dir_ / "model.lstm").string());
  const int predicted = predict(std::span(&test[1], 1), m.params, m.config).front();
  EXPECT_EQ(std::stoi(last[last.size() - 2]), predicted);
}

TEST_F(SpikePipeline, SvgFilesAreSelfContained) {
  for (const char* name : {"mask_1.svg", "occlusion_1.svg", "temporal_1.svg", "evaluation.svg"}) {
    SCOPED_TRACE(name);
    expect_well_formed_svg(slurp(dir_ / name));
  }
}

TEST_F(SpikePipeline, EvaluationTableHasNineAlphas) {
  const auto rows = lines(slurp(dir_ / "evaluation.csv"));
  ASSERT_EQ(rows.size(), 10u);
  EXPECT_EQ(rows[0], "alpha,gradient,occlusion,mask");
  EXPECT_EQ(fields(rows[1])[0], "0.1");
  EXPECT_EQ(fields(rows[9])[0], "0.9");
  const auto curves = lines(slurp(dir_ / "evaluation_curves.csv"));
  ASSERT_EQ(curves.size(), 10u);
  EXPECT_EQ(fields(curves[0]).size(), 7u);
}

TEST_F(SpikePipeline, RerunsAreByteIdentical) {
  const fs::path again = dir_ / "again";
  fs::create_directories(again);
  for (const char* f : {"train.seq", "val.seq", "test.seq"}) fs::copy_file(dir_ / f, again / f);
  const std::string out = " --out " + again.string();
  ASSERT_EQ(run_tool("train --hidden 12 --epochs 3 --minibatch 30 --lr 0.005 --dropout 0.1 --seed 4" + out,
                     again / "train.log"),
            0);
  ASSERT_EQ(run_tool("salience --technique mask --iterations 40 --index 1" + out, again / "m.log"), 0);
  ASSERT_EQ(run_tool("evaluate --limit 6 --iterations 20" + out, again / "e.log"), 0);
  EXPECT_EQ(slurp(dir_ / "model.lstm"), slurp(again / "model.lstm"));
  EXPECT_EQ(slurp(dir_ / "history.csv"), slurp(again / "history.csv"));
  EXPECT_EQ(slurp(dir_ / "mask_1.csv"), slurp(again / "mask_1.csv"));
  EXPECT_EQ(slurp(dir_ / "evaluation_curves.csv"), slurp(again / "evaluation_curves.csv"));
}

TEST(Evaluate, SingleTechniqueAndZeroModel) {
  const fs::path dir = fs::current_path() / "cli_zero_model";
  fs::remove_all(dir);
  fs::create_directories(dir);
  ASSERT_EQ(run_tool("ingest --source spike --spike-train 40 --spike-test 10 --out " + dir.string(),
                     dir / "ingest.log"),
            0);
  LstmConfig cfg;
  cfg.hidden = 4;
  save_model((dir / "model.lstm").string(), cfg, LstmParams::zeros(cfg));
  ASSERT_EQ(run_tool("evaluate --techniques occlusion --out " + dir.string(), dir / "eval.log"), 0);
  const auto rows = lines(slurp(dir / "evaluation.csv"));
  ASSERT_EQ(rows.size(), 10u);
  EXPECT_EQ(rows[0], "alpha,occlusion");
  for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_EQ(std::stod(fields(rows[i])[1]), 0.0);
}
