#include <sys/wait.h>

#include <cstdlib>
#include <map>
#include <sstream>

#include <gtest/gtest.h>

#include "vcnet/pipeline.hpp"

using namespace vcnet;

namespace {

// Per-test scratch directory, so tests can run in parallel.
fs::path scratch() {
  return fs::temp_directory_path() / "vcnet_pipeline_test" /
         ::testing::UnitTest::GetInstance()->current_test_info()->name();
}

int cli(const std::string& args, std::string* err = nullptr) {
  const auto err_file = scratch() / "stderr.txt";
  fs::create_directories(scratch());
  const std::string cmd = std::string(VCNET_CLI_PATH) + " " + args + " > /dev/null 2> " + err_file.string();
  const int status = std::system(cmd.c_str());
  if (err) *err = detail::read_file(err_file);
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// Small synthetic run that exercises every stage quickly.
std::string small_config() {
  return "synthetic = true\n"
         "synth_n_firms = 150\n"
         "synth_n_investors = 90\n"
         "kmeans_inits = 10\n"
         "balance_reps = 20\n"
         "dendrogram_k = 3\n"
         "sweep_min = 9\n"
         "sweep_max = 11\n"
         "backtest_measures = degree_centrality_org,voterank_org\n";
}

fs::path write_config(const std::string& name, const std::string& body) {
  fs::create_directories(scratch());
  const auto p = scratch() / name;
  detail::write_file(p, body);
  return p;
}

std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = detail::read_file(e.path());
  return out;
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    fs::remove_all(scratch());
    fs::create_directories(scratch());
  }
};

}  // namespace

TEST(RunConfigParse, CommentsBlankLinesAndTrim) {
  RunConfig cfg;
  std::stringstream ss("# header\n\n  window = 8   # inline\nseed=42\nsynthetic = true\n");
  cfg.load(ss);
  EXPECT_EQ(cfg.window, 8);
  EXPECT_EQ(cfg.seed, 42u);
  EXPECT_TRUE(cfg.synthetic);
  EXPECT_NO_THROW(cfg.validate());
}

TEST(RunConfigParse, RejectsBadInput) {
  RunConfig cfg;
  std::stringstream unknown("colour = blue\n");
  EXPECT_THROW(cfg.load(unknown), ConfigError);
  std::stringstream noeq("window 8\n");
  EXPECT_THROW(cfg.load(noeq), ConfigError);
  EXPECT_THROW(cfg.set("window", "ten"), ConfigError);
  EXPECT_THROW(cfg.set("window", "10x"), ConfigError);
  EXPECT_THROW(cfg.set("seed", "-1"), ConfigError);
  EXPECT_THROW(cfg.set("kmeans_log_scale", "maybe"), ConfigError);
}

TEST(RunConfigParse, ExactlyOneInputSource) {
  RunConfig none;
  EXPECT_THROW(none.validate(), ConfigError);
  RunConfig both;
  both.synthetic = true;
  both.deals = "d.csv";
  both.firms = "f.csv";
  EXPECT_THROW(both.validate(), ConfigError);
  RunConfig half;
  half.deals = "d.csv";
  EXPECT_THROW(half.validate(), ConfigError);
  RunConfig range;
  range.synthetic = true;
  range.window = 13;
  EXPECT_THROW(range.validate(), ConfigError);
}

TEST(RunConfigParse, EveryKeyIsSettableAndEchoed) {
  RunConfig cfg;
  const auto echo = cfg.echo();
  for (const auto& k : RunConfig::keys()) {
    if (k == "output") continue;
    ASSERT_TRUE(echo.count(k)) << k;
    EXPECT_NO_THROW(cfg.set(k, echo.at(k))) << k;
  }
  EXPECT_EQ(cfg.echo(), echo);
  EXPECT_EQ(echo.size() + 1, RunConfig::keys().size());
}

TEST(RunConfigParse, ShippedConfigsLoad) {
  RunConfig syn;
  syn.load_file((fs::path(VCNET_SOURCE_DIR) / "config" / "synthetic.cfg").string());
  EXPECT_NO_THROW(syn.validate());
  EXPECT_EQ(syn.echo(), [] {
    RunConfig d;
    d.synthetic = true;
    return d.echo();
  }());
  RunConfig files;
  files.load_file((fs::path(VCNET_SOURCE_DIR) / "config" / "files.cfg").string());
  EXPECT_NO_THROW(files.validate());
}

TEST_F(Cli, MissingInputFileExitsTwoWithoutArtifacts) {
  const auto out = scratch() / "missing_out";
  std::string err;
  const int rc = cli("run --deals " + (scratch() / "nope.csv").string() + " --firms " +
                         (scratch() / "nope2.csv").string() + " --output " + out.string(),
                     &err);
  EXPECT_EQ(rc, 2);
  EXPECT_FALSE(fs::exists(out));
  EXPECT_NE(err.find("nope.csv"), std::string::npos);
}

TEST_F(Cli, StageWithoutUpstreamExitsThree) {
  const auto cfg = write_config("small.cfg", small_config());
  const auto out = scratch() / "partial";
  std::string err;
  EXPECT_EQ(cli("stage regress --config " + cfg.string() + " --output " + out.string(), &err), 3);
  EXPECT_NE(err.find("covariates.csv"), std::string::npos) << err;
  EXPECT_EQ(cli("stage ingest --config " + cfg.string() + " --output " + out.string()), 0);
  EXPECT_EQ(cli("stage graph --config " + cfg.string() + " --output " + out.string()), 0);
  EXPECT_EQ(cli("stage centrality --config " + cfg.string() + " --output " + out.string()), 0);
  EXPECT_TRUE(fs::exists(out / "centrality" / "covariates.csv"));
  EXPECT_EQ(cli("stage nonsense --config " + cfg.string() + " --output " + out.string()), 2);
}

TEST_F(Cli, BadConfigKeyExitsTwo) {
  const auto cfg = write_config("bad.cfg", "synthetic = true\nwindw = 3\n");
  std::string err;
  EXPECT_EQ(cli("run --config " + cfg.string() + " --output " + (scratch() / "bad").string(), &err), 2);
  EXPECT_NE(err.find("windw"), std::string::npos);
}

TEST_F(Cli, FullRunIsDeterministicAndConsistent) {
  const auto cfg = write_config("small.cfg", small_config());
  const auto a = scratch() / "run_a", b = scratch() / "run_b";
  ASSERT_EQ(cli("run --config " + cfg.string() + " --output " + a.string()), 0);
  ASSERT_EQ(cli("run --config " + cfg.string() + " --output " + b.string()), 0);
  const auto ta = tree(a), tb = tree(b);
  EXPECT_EQ(ta.size(), tb.size());
  for (const auto& [path, bytes] : ta) {
    ASSERT_TRUE(tb.count(path)) << path;
    EXPECT_TRUE(tb.at(path) == bytes) << path;
  }
  for (const char* f : {"manifest.json", "ingest/deals.csv", "graph/summary.csv", "centrality/covariates.csv",
                        "features/groups.csv", "features/dendrogram.csv", "trajectories/regimes.csv",
                        "trajectories/exclusions.csv", "regress/logistic_leaderboard.csv",
                        "regress/linear_best.json", "regress/functional.csv", "regress/window_sweep.csv",
                        "regress/confusion.json", "backtest/report.csv"})
    EXPECT_TRUE(ta.count(f)) << f;

  const auto m = json::parse(ta.at("manifest.json"));
  EXPECT_EQ(m["status"], "ok");
  EXPECT_EQ(m["seed"], 7);
  const auto& tr = m["stages"]["trajectories"];
  EXPECT_EQ(tr["retained"].get<std::size_t>() + tr["excluded"].get<std::size_t>(),
            tr["firms_with_deals"].get<std::size_t>());
  std::size_t by_reason = 0;
  for (const auto& [k, v] : tr["exclusion_reasons"].items()) by_reason += v.get<std::size_t>();
  EXPECT_EQ(by_reason, tr["excluded"].get<std::size_t>());
  // Exclusions report has one line per excluded firm plus the header.
  const auto& ex = ta.at("trajectories/exclusions.csv");
  EXPECT_EQ(static_cast<std::size_t>(std::count(ex.begin(), ex.end(), '\n')), tr["excluded"].get<std::size_t>() + 1);

  EXPECT_EQ(cli("report --output " + a.string()), 0);
}

TEST_F(Cli, StageRerunIsIdempotent) {
  const auto cfg = write_config("small.cfg", small_config());
  const auto out = scratch() / "idem";
  ASSERT_EQ(cli("run --config " + cfg.string() + " --output " + out.string()), 0);
  const auto before = tree(out);
  for (const char* s : kStages) ASSERT_EQ(cli(std::string("stage ") + s + " --config " + cfg.string() + " --output " +
                                              out.string()),
                                          0)
      << s;
  EXPECT_TRUE(tree(out) == before);
}

TEST_F(Cli, FlagsOverrideConfigFile) {
  const auto cfg = write_config("small.cfg", small_config());
  const auto out = scratch() / "override";
  ASSERT_EQ(cli("stage ingest --config " + cfg.string() + " --synth_n_firms 60 --output " + out.string()), 0);
  const auto m = json::parse(detail::read_file(out / "manifest.json"));
  EXPECT_EQ(m["config"]["synth_n_firms"], "60");
  EXPECT_EQ(m["stages"]["ingest"]["firms"], 60);
}

TEST_F(Cli, ReportWithoutManifestExitsThree) {
  fs::create_directories(scratch() / "empty");
  EXPECT_EQ(cli("report --output " + (scratch() / "empty").string()), 3);
  EXPECT_EQ(cli("report --output " + (scratch() / "does_not_exist").string()), 2);
}

TEST_F(Cli, SynthWritesInputsUsableByRun) {
  const auto data = scratch() / "synth_data";
  ASSERT_EQ(cli("synth --synth_n_firms 120 --synth_n_investors 80 --output " + data.string()), 0);
  const auto cfg = write_config("files.cfg", "deals = " + (data / "deals.csv").string() + "\nfirms = " +
                                                 (data / "firms.csv").string() + "\n");
  const auto out = scratch() / "from_files";
  ASSERT_EQ(cli("stage ingest --config " + cfg.string() + " --output " + out.string()), 0);
  const auto m = json::parse(detail::read_file(out / "manifest.json"));
  EXPECT_EQ(m["stages"]["ingest"]["deal_rejects"], 0);
  EXPECT_EQ(m["inputs"]["deals"]["fnv1a64"].get<std::string>().size(), 16u);
  EXPECT_EQ(detail::read_file(out / "ingest" / "deals.csv"), detail::read_file(data / "deals.csv"));
}
