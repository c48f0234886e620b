#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "reciprank/common.hpp"
#include "reciprank/pipeline.hpp"

using namespace reciprank;
namespace fs = std::filesystem;

namespace {

ExperimentConfig tiny_config(const std::string& workdir) {
  ExperimentConfig c;
  c.synth.num_companies = 45;
  c.synth.num_seekers = 250;
  c.synth.exposures_per_company = 50;
  c.learner.epochs = 4;
  c.meta.num_trees = 20;
  c.meta.max_depth = 3;
  c.meta.min_samples_leaf = 10;
  c.eval.k = 10;
  c.eval.folds = 3;
  c.eval.global_alpha_grid = {0.0, 0.5};
  c.eval.segment_alpha_grid = {0.0, 0.5};
  c.eval.seeds = {3};
  c.workdir = workdir;
  return c;
}

std::string read_all(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

struct TempDir {
  fs::path path;
  explicit TempDir(const char* name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("config text round-trips through parse and render") {
  const ExperimentConfig def;
  const std::string text = render_config(def);
  const ExperimentConfig parsed = parse_config_text(text);
  CHECK(render_config(parsed) == text);
  CHECK(parsed.eval.global_alpha_grid == def.eval.global_alpha_grid);
  CHECK(parsed.eval.seeds == def.eval.seeds);
  CHECK(parsed.synth.num_companies == def.synth.num_companies);
}

TEST_CASE("config parser rejects unknown keys and sections") {
  CHECK_THROWS(parse_config_text("[synth]\nnum_compagnies = 10\n"));
  CHECK_THROWS(parse_config_text("[nope]\nx = 1\n"));
  CHECK_THROWS(parse_config_text("k = 10\n"));
  CHECK_THROWS(parse_config_text("[eval]\nk = zero\n"));
}

TEST_CASE("config parser applies overrides and comments") {
  const ExperimentConfig c = parse_config_text(
      "[synth]\nnum_companies = 77  # comment\n[eval]\nseeds = 1,2\n"
      "global_alpha_grid = 0.0, 0.5, 1.0\n[paths]\nworkdir = w\n");
  CHECK(c.synth.num_companies == 77);
  CHECK(c.eval.seeds == std::vector<std::uint64_t>{1, 2});
  CHECK(c.eval.global_alpha_grid == std::vector<double>{0.0, 0.5, 1.0});
  CHECK(c.workdir == "w");
}

TEST_CASE("full tiny pipeline: method set, determinism, caching"
          * doctest::timeout(600)) {
  TempDir tmp("reciprank_pipe_test");
  ExperimentConfig config = tiny_config((tmp.path / "w1").string());
  PipelineOptions options;

  const PipelineReport report = run_pipeline(config, options);
  REQUIRE(report.seeds.size() == 1);

  // Method set: oracle + 4 baselines + dmp + one per grid alpha + personalized.
  std::vector<std::string> methods;
  for (const MethodEvaluation& m : report.seeds[0].methods) methods.push_back(m.method);
  const std::vector<std::string> expected = {
      "oracle",         "scout-only",    "reply-only", "multiplication",
      "harmonic-mean",  "dmp",           "bob-global-0", "bob-global-0.5",
      "bob-personalized"};
  CHECK(methods == expected);
  for (const MethodEvaluation& m : report.seeds[0].methods) {
    CHECK(m.overall.mean_ndcg >= 0.0);
    CHECK(m.overall.mean_ndcg <= 1.0);
  }

  const fs::path seed_dir = fs::path(config.workdir) / "seed_3";
  const std::string report_before = read_all(seed_dir / "report.csv");
  const std::string seeds_before = read_all(fs::path(config.workdir) / "report_seeds.csv");

  SUBCASE("rerun reuses caches and reproduces files byte-identically") {
    const auto model_time = fs::last_write_time(seed_dir / "scout_model.txt");
    const PipelineReport again = run_pipeline(config, options);
    CHECK(read_all(seed_dir / "report.csv") == report_before);
    CHECK(read_all(fs::path(config.workdir) / "report_seeds.csv") == seeds_before);
    CHECK(fs::last_write_time(seed_dir / "scout_model.txt") == model_time);
    CHECK(again.seeds[0].methods.size() == report.seeds[0].methods.size());
  }

  SUBCASE("fresh directory reproduces the same bytes") {
    ExperimentConfig fresh = config;
    fresh.workdir = (tmp.path / "w2").string();
    run_pipeline(fresh, options);
    CHECK(read_all(fs::path(fresh.workdir) / "seed_3" / "report.csv") == report_before);
    CHECK(read_all(fs::path(fresh.workdir) / "report_seeds.csv") == seeds_before);
  }

  SUBCASE("changing only the eval section never retrains models") {
    const auto scout_time = fs::last_write_time(seed_dir / "scout_model.txt");
    const auto reply_time = fs::last_write_time(seed_dir / "reply_model.txt");
    const auto dmp_time = fs::last_write_time(seed_dir / "dmp_model.txt");
    const auto meta_time = fs::last_write_time(seed_dir / "meta_g0.5.txt");
    ExperimentConfig changed = config;
    changed.eval.k = 5;
    run_pipeline(changed, options);
    CHECK(fs::last_write_time(seed_dir / "scout_model.txt") == scout_time);
    CHECK(fs::last_write_time(seed_dir / "reply_model.txt") == reply_time);
    CHECK(fs::last_write_time(seed_dir / "dmp_model.txt") == dmp_time);
    CHECK(fs::last_write_time(seed_dir / "meta_g0.5.txt") == meta_time);
  }

  SUBCASE("threaded evaluation produces identical aggregate csvs") {
    PipelineOptions threaded;
    threaded.threads = 4;
    run_pipeline(config, threaded);
    CHECK(read_all(fs::path(config.workdir) / "report_seeds.csv") == seeds_before);
    CHECK(read_all(seed_dir / "report.csv") == report_before);
  }
}

TEST_CASE("a singleton global grid yields exactly one bob-global method" *
          doctest::timeout(300)) {
  TempDir tmp("reciprank_pipe_single");
  ExperimentConfig config = tiny_config((tmp.path / "w").string());
  config.eval.global_alpha_grid = {0.0};
  const PipelineReport report = run_pipeline(config, {});
  int bob_global_rows = 0;
  for (const MethodEvaluation& m : report.seeds[0].methods) {
    if (m.method.rfind("bob-global-", 0) == 0) ++bob_global_rows;
  }
  CHECK(bob_global_rows == 1);

  // One overall + one per segment row for it in the report csv.
  const std::string report_csv =
      read_all(fs::path(config.workdir) / "seed_3" / "report.csv");
  int global_lines = 0;
  std::istringstream in(report_csv);
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("bob-global-0,", 0) == 0) ++global_lines;
  }
  CHECK(global_lines == 4);
}

TEST_CASE("subcommand-style stages require upstream artifacts") {
  TempDir tmp("reciprank_pipe_missing");
  ExperimentConfig config = tiny_config((tmp.path / "w").string());
  PipelineOptions options;
  SeedRunner runner(config, 3, options);

  try {
    runner.build_split();
    FAIL("expected missing events.csv");
  } catch (const std::exception& e) {
    const std::string what = e.what();
    CHECK(what.find("events.csv") != std::string::npos);
    CHECK(what.find("reciprank synth") != std::string::npos);
  }

  try {
    runner.evaluate_available();
    FAIL("expected missing upstream");
  } catch (const std::exception& e) {
    const std::string what = e.what();
    CHECK(what.find("run `reciprank") != std::string::npos);
  }

  runner.build_synth();
  runner.build_split();
  try {
    runner.evaluate_available();
    FAIL("expected missing model");
  } catch (const std::exception& e) {
    const std::string what = e.what();
    CHECK(what.find("scout_model.txt") != std::string::npos);
    CHECK(what.find("train-directional") != std::string::npos);
  }

  try {
    runner.build_meta("g0.5");
    FAIL("expected missing pseudo labels");
  } catch (const std::exception& e) {
    CHECK(std::string(e.what()).find("build-pseudo") != std::string::npos);
  }
}

TEST_CASE("tune-alpha subcommand matches the shared-sweep pipeline result" *
          doctest::timeout(300)) {
  TempDir tmp("reciprank_pipe_tune");
  ExperimentConfig config = tiny_config((tmp.path / "w").string());
  PipelineOptions options;
  SeedRunner a(config, 3, options);
  a.build_synth();
  a.build_split();
  const TuneResult global_alone = a.build_tuning(AlphaPolicy::Mode::Global);
  const TuneResult segment_alone = a.build_tuning(AlphaPolicy::Mode::PerSegment);

  a.build_tuning_both();
  const AlphaPolicy global_both = a.load_tuned_policy(AlphaPolicy::Mode::Global);
  const AlphaPolicy segment_both = a.load_tuned_policy(AlphaPolicy::Mode::PerSegment);
  CHECK(global_both.global_alpha == global_alone.policy.global_alpha);
  CHECK(segment_both.segment_alphas == segment_alone.policy.segment_alphas);
}
