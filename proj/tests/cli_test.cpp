#include "phishaudit/cli.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "phishaudit/config.hpp"
#include "phishaudit/csv.hpp"
#include "phishaudit/error.hpp"
#include "phishaudit/url_features.hpp"

namespace phishaudit {
namespace {

namespace fs = std::filesystem;

const std::string kData = PHISHAUDIT_TEST_DATA_DIR;

struct Run {
  int code;
  std::string out, err;
};

Run cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli_main(args, out, err);
  return {code, out.str(), err.str()};
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag)
      : path_(fs::temp_directory_path() /
              ("phishaudit_" + tag + "_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()))) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string operator/(const std::string& name) const { return (path_ / name).string(); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

nlohmann::json read_json(const std::string& path) { return nlohmann::json::parse(slurp(path)); }

void write_text(const std::string& path, const std::string& text) {
  std::ofstream(path, std::ios::binary) << text;
}

const char* kTinyConfig = R"([run]
seed = 5
out = out

[data]
synthetic = true
synthetic_d1_rows = 600
synthetic_d2_rows = 400
merge_per_class = 60

[model.gbdt]
n_rounds = 15
max_depth = 3

[experiments]
run = Exp-3, Exp-4, Exp-5
extra_pairs = false

[explain]
n_per_class = 15
background_size = 16
)";

RunConfig parse_config(const std::string& text) {
  std::istringstream in(text);
  return RunConfig::parse(in, "/base");
}

ErrorCode config_error(const std::string& text) {
  try {
    parse_config(text);
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kIo;
}

// ---------------------------------------------------------------------------

TEST(RunConfig, ParsesSectionsAndResolvesPaths) {
  const auto c = parse_config(kTinyConfig);
  EXPECT_EQ(c.seed, 5u);
  EXPECT_EQ(fs::path(c.out_dir), fs::path("/base/out"));
  EXPECT_TRUE(c.data.synthetic);
  EXPECT_EQ(c.data.synth.d1_rows, 600u);
  EXPECT_EQ(c.data.pipeline.merge_per_class, 60u);
  EXPECT_EQ(c.models.gbdt.n_rounds, 15u);
  EXPECT_EQ(c.experiments.run, (std::vector<std::string>{"Exp-3", "Exp-4", "Exp-5"}));
  EXPECT_FALSE(c.experiments.extra_pairs);
  EXPECT_EQ(c.explain.explain.background_size, 16u);
}

TEST(RunConfig, DefaultsRunAllNineExperiments) {
  const auto c = parse_config("[run]\nseed = 1\n[data]\nsynthetic = true\n");
  EXPECT_EQ(c.experiments.run.size(), 9u);
  EXPECT_EQ(c.experiments.model, "gbdt_second");
}

TEST(RunConfig, RejectsBadInput) {
  EXPECT_EQ(config_error("[data]\nsynthetic = true\n"), ErrorCode::kConfig);
  EXPECT_EQ(config_error("[run]\nseed = 1\nsede = 2\n"), ErrorCode::kConfig);
  EXPECT_EQ(config_error("[run]\nseed = 1\n[modle.gbdt]\n"), ErrorCode::kConfig);
  EXPECT_EQ(config_error("[run]\nseed = one\n"), ErrorCode::kConfig);
  EXPECT_EQ(config_error("[run\nseed = 1\n"), ErrorCode::kConfig);
  EXPECT_EQ(config_error("[run]\nseed = 1\n[data]\nsynthetic = true\ntest_fraction = 1.5\n"),
            ErrorCode::kConfig);
  EXPECT_EQ(config_error("[run]\nseed = 1\n[data]\nsynthetic = true\n[experiments]\nrun = Exp-9\n"),
            ErrorCode::kConfig);
  EXPECT_EQ(config_error("[run]\nseed = 1\n[data]\nsynthetic = true\nd1_test_phishing = 5\n"),
            ErrorCode::kConfig);
  EXPECT_EQ(config_error("[run]\nseed = 1\n[data]\nd1_path = x.csv\n"), ErrorCode::kConfig);
}

TEST(RunConfig, MissingInputFilesFailOnlyWhenChecked) {
  const auto c = parse_config("[run]\nseed = 1\n[data]\nd1_path = nowhere.csv\nd2_path = x.csv\n");
  EXPECT_EQ(fs::path(c.data.d1_path), fs::path("/base/nowhere.csv"));
  try {
    c.check_inputs();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kConfig);
  }
}

// ---------------------------------------------------------------------------

TEST(Cli, UsageErrorsExitOne) {
  const auto unknown = cli({"frob"});
  EXPECT_EQ(unknown.code, 1);
  EXPECT_NE(unknown.err.find("run-matrix"), std::string::npos);
  EXPECT_EQ(cli({}).code, 1);
  EXPECT_EQ(cli({"run-matrix"}).code, 1);
  EXPECT_EQ(cli({"stats", "--input", "/no/such/file.csv", "--out", "x"}).code, 1);
  EXPECT_EQ(cli({"--help"}).code, 0);
}

TEST(Cli, ExtractMatchesGoldenFeatureRows) {
  TempDir tmp("extract");
  const auto r = cli({"extract", "--input", kData + "/golden_urls.csv", "--resolver",
                      kData + "/golden_resolver.csv", "--out", tmp / "features.csv"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto got = csv::read_file(tmp / "features.csv");
  const auto want = csv::read_file(kData + "/golden_urls.csv");
  ASSERT_EQ(got.size(), want.size());
  EXPECT_EQ(got[0], FeatureSchema::common().names());
  for (std::size_t i = 1; i < want.size(); ++i) {
    for (std::size_t j = 0; j < got[0].size(); ++j) {
      const auto w = std::find(want[0].begin(), want[0].end(), got[0][j]) - want[0].begin();
      EXPECT_EQ(std::stod(got[i][j]), std::stod(want[i][w])) << want[i][0] << " " << got[0][j];
    }
  }
}

TEST(Cli, ExtractWithoutUrlColumnIsValidationError) {
  TempDir tmp("extract_bad");
  write_text(tmp / "in.csv", "link\nhttp://a.com\n");
  const auto r = cli({"extract", "--input", tmp / "in.csv", "--out", tmp / "f.csv"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("url"), std::string::npos);
}

TEST(Cli, TrainEvalExplainCompareChain) {
  TempDir tmp("chain");
  write_text(tmp / "run.ini", kTinyConfig);
  ASSERT_EQ(cli({"prepare", "--config", tmp / "run.ini"}).code, 0);
  const std::string prepared = tmp / "out/prepared";
  ASSERT_TRUE(fs::exists(prepared + "/D1_train.csv"));
  EXPECT_TRUE(fs::exists(prepared + "/manifest.json"));

  const auto trained = cli({"train", "--config", tmp / "run.ini", "--train",
                            prepared + "/D1_train.csv", "--out", tmp / "m.json"});
  ASSERT_EQ(trained.code, 0) << trained.err;

  ASSERT_EQ(cli({"eval", "--model", tmp / "m.json", "--test", prepared + "/D1_test.csv", "--out",
                 tmp / "eval"})
                .code,
            0);
  const auto metrics = read_json(tmp / "eval/metrics.json");
  EXPECT_GT(metrics["accuracy"].get<double>(), 0.8);
  EXPECT_EQ(csv::read_file(tmp / "eval/predictions.csv").size(),
            csv::read_file(prepared + "/D1_test.csv").size());

  for (const char* name : {"a", "b"}) {
    const auto r = cli({"explain", "--seed", "3", "--model", tmp / "m.json", "--data",
                        prepared + (name[0] == 'a' ? "/D1_test.csv" : "/D2_test.csv"),
                        "--background", prepared + "/D1_train.csv", "--n-per-class", "10",
                        "--background-size", "16", "--out", tmp / name});
    ASSERT_EQ(r.code, 0) << r.err;
    for (const char* f : {"shap.csv", "shap_header.json", "importance.json", "bar.svg",
                          "beeswarm.svg"}) {
      EXPECT_TRUE(fs::exists(tmp / (std::string(name) + "/" + f))) << f;
    }
  }
  EXPECT_EQ(read_json(tmp / "a/importance.json")["features"].size(), 20u);

  ASSERT_EQ(cli({"compare", "--a", tmp / "a/importance.json", "--b", tmp / "a/importance.json",
                 "--out", tmp / "self.json"})
                .code,
            0);
  const auto self = read_json(tmp / "self.json");
  EXPECT_EQ(self["kendall_tau"].get<double>(), 1.0);
  EXPECT_TRUE(self["sign_flips"].empty());
  ASSERT_EQ(cli({"compare", "--a", tmp / "a/importance.json", "--b", tmp / "b/importance.json",
                 "--k", "5", "--out", tmp / "ab.json"})
                .code,
            0);
  const auto ab = read_json(tmp / "ab.json");
  EXPECT_GE(ab["kendall_tau"].get<double>(), -1.0);
  EXPECT_LE(ab["kendall_tau"].get<double>(), 1.0);
}

TEST(Cli, ExplainRejectsNonTreeModel) {
  TempDir tmp("explain_lr");
  ASSERT_EQ(cli({"synth", "--seed", "2", "--d1-rows", "200", "--d2-rows", "150", "--out", tmp / "s"})
                .code,
            0);
  ASSERT_EQ(cli({"stats", "--input", tmp / "s/d1.csv", "--label", "phishing", "--native", "d1",
                 "--out", tmp / "st"})
                .code,
            0);
  EXPECT_TRUE(fs::exists(tmp / "st/means.csv"));
  EXPECT_TRUE(fs::exists(tmp / "st/percentages.csv"));

  // A model file holding a logistic regression.
  write_text(tmp / "t.csv", "length_url,label\n1,0\n2,1\n3,0\n4,1\n");
  ASSERT_EQ(cli({"train", "--model", "lr", "--train", tmp / "t.csv", "--out", tmp / "lr.json"})
                .code,
            0);
  const auto r = cli({"explain", "--model", tmp / "lr.json", "--data", tmp / "t.csv",
                      "--background", tmp / "t.csv", "--out", tmp / "x"});
  EXPECT_EQ(r.code, 1);
}

TEST(Cli, RunMatrixWritesTheLayout) {
  TempDir tmp("matrix");
  write_text(tmp / "run.ini", kTinyConfig);
  const auto r = cli({"run-matrix", "--config", tmp / "run.ini"});
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string out = tmp / "out";
  for (const char* f : {"manifest.json", "summary.json", "run.log", "stats/stats.json",
                        "stats/D1_means.csv", "stats/D2_percentages.csv", "Exp-3/bar.svg",
                        "Exp-4/beeswarm.svg", "Exp-5/importance.json",
                        "divergence/Exp-3__Exp-4.json", "divergence/Exp-4__Exp-5.json"}) {
    EXPECT_TRUE(fs::exists(out + "/" + f)) << f;
  }
  EXPECT_FALSE(fs::exists(out + "/zoo"));
  EXPECT_FALSE(fs::exists(out + "/Exp-1"));
  const auto summary = read_json(out + "/summary.json");
  EXPECT_EQ(summary["experiments"].size(), 3u);
  EXPECT_EQ(summary["seed"].get<int>(), 5);
}

}  // namespace
}  // namespace phishaudit
