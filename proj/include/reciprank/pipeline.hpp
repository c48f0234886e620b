#ifndef RECIPRANK_PIPELINE_HPP
#define RECIPRANK_PIPELINE_HPP

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "reciprank/eval.hpp"
#include "reciprank/meta.hpp"
#include "reciprank/synth.hpp"

namespace reciprank {

struct SplitConfig {
  double train_fraction = 0.8;  // boundary at this event-count quantile
};

struct EvalSection {
  int k = 10;
  int folds = 5;
  std::vector<double> global_alpha_grid = {0.0, 0.25, 0.5, 0.75, 1.0};
  std::vector<double> segment_alpha_grid = {0.0, 0.25, 0.5, 0.75};
  std::vector<std::uint64_t> seeds = {11, 12, 13, 14, 15};
};

/// One config to drive the whole experiment. Per-stage RNG seeds are derived
/// from the pipeline seed; the rng_seed fields inside synth/learner/meta are
/// ignored here.
struct ExperimentConfig {
  SynthConfig synth;
  SplitConfig split;
  TrainConfig learner;
  GbdtConfig meta;
  EvalSection eval;
  std::string workdir = "out";
};

void validate(const ExperimentConfig& config);

/// Flat key-value sections: `[synth]`, `[split]`, `[learner]`, `[meta]`,
/// `[eval]`, `[paths]`. Lists are comma-separated. `#` starts a comment.
/// Unknown sections or keys are rejected.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config_file(const std::string& path);
std::string render_config(const ExperimentConfig& config);

struct PipelineOptions {
  int threads = 1;
  std::optional<std::uint64_t> seed_override;  // replaces the seeds list
  bool force = false;                          // rebuild ignoring cached stages
  bool full_truth = false;                     // dump the full truth sidecar
  std::ostream* progress = nullptr;
};

struct SeedReport {
  std::uint64_t seed = 0;
  std::vector<MethodEvaluation> methods;
  AlphaPolicy tuned_global;
  AlphaPolicy tuned_per_segment;
};

struct PipelineReport {
  int k = 10;
  std::vector<SeedReport> seeds;
  // Median NDCG over seeds per (method, segment); num_companies carries the
  // seed count here.
  std::vector<MethodEvaluation> median;
};

/// Full experiment: synth -> split -> directional models -> baselines -> DMP
/// -> per-alpha BoB -> tuning (both modes) -> personalized BoB -> report,
/// looped over the seeds list. Stage outputs are cached in the workdir under
/// content keys; reruns with an unchanged config reuse them.
PipelineReport run_pipeline(const ExperimentConfig& config,
                            const PipelineOptions& options = {});

std::string bob_global_method_name(double alpha);
inline constexpr const char* kBobPersonalizedMethod = "bob-personalized";

/// Per-seed stage runner behind both `run_pipeline` and the CLI subcommands.
/// `build_*` members build one stage and require upstream artifacts to exist
/// (the error names the missing file and the subcommand that creates it);
/// `ensure_*` members rebuild the chain as needed, reusing cached stages.
class SeedRunner {
 public:
  SeedRunner(const ExperimentConfig& config, std::uint64_t seed,
             const PipelineOptions& options);

  const std::filesystem::path& dir() const { return dir_; }

  void build_synth();
  void build_split();
  void build_directional();
  void build_dmp();
  void build_pseudo(const AlphaPolicy& policy, const std::string& tag);
  void build_meta(const std::string& tag);
  TuneResult build_tuning(AlphaPolicy::Mode mode);
  /// Both tuning modes from one shared fold sweep over the union grid.
  void build_tuning_both();

  void ensure_synth();
  void ensure_split();
  void ensure_directional();
  void ensure_dmp();
  void ensure_pseudo(const AlphaPolicy& policy, const std::string& tag);
  void ensure_meta(const AlphaPolicy& policy, const std::string& tag);
  void ensure_tuning_both();
  bool tuning_cached(AlphaPolicy::Mode mode) const;

  /// Evaluates every method whose artifacts exist (oracle, the four
  /// aggregation baselines, DMP, one BoB method per trained meta-model) and
  /// writes per-method fragments plus eval/methods.txt.
  std::vector<MethodEvaluation> evaluate_available();

  /// Merges fragments into report.csv and returns the table text.
  std::string write_report();

  AlphaPolicy load_tuned_policy(AlphaPolicy::Mode mode) const;

  static std::string alpha_tag(double alpha);
  static constexpr const char* kPersonalizedTag = "pers";

 private:
  bool stage_cached(const std::string& stage, const std::string& key,
                    const std::vector<std::string>& files) const;
  void write_stamp(const std::string& stage, const std::string& key) const;
  void require_file(const std::string& file, const std::string& prior_subcommand) const;
  void write_tuning_outputs(AlphaPolicy::Mode mode, const TuneResult& result) const;
  TuneConfig tune_config(AlphaPolicy::Mode mode) const;

  std::string key_synth() const;
  std::string key_split() const;
  std::string key_models() const;
  std::string key_dmp() const;
  std::string key_pseudo(const AlphaPolicy& policy) const;
  std::string key_meta(const std::string& tag) const;  // hashes the pseudo csv
  std::string key_tuning(AlphaPolicy::Mode mode) const;

  Dataset load_events() const;
  Dataset load_train() const;
  Dataset load_test() const;
  SegmentAssignment load_segments() const;

  ExperimentConfig config_;
  std::uint64_t seed_ = 0;
  PipelineOptions options_;
  std::filesystem::path dir_;
};

}  // namespace reciprank

#endif
