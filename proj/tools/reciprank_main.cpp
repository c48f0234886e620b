#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "reciprank/pipeline.hpp"

namespace {

using namespace reciprank;

struct GlobalArgs {
  std::string config_path;
  std::string workdir_override;
  int threads = 1;
  std::optional<std::uint64_t> seed_override;
  bool force = false;
};

ExperimentConfig resolve_config(const GlobalArgs& args) {
  ExperimentConfig config;
  if (!args.config_path.empty()) {
    config = load_config_file(args.config_path);
  }
  if (!args.workdir_override.empty()) config.workdir = args.workdir_override;
  validate(config);
  return config;
}

PipelineOptions resolve_options(const GlobalArgs& args) {
  PipelineOptions options;
  options.threads = args.threads;
  options.seed_override = args.seed_override;
  options.force = args.force;
  options.progress = &std::cout;
  return options;
}

std::uint64_t single_seed(const ExperimentConfig& config, const GlobalArgs& args) {
  return args.seed_override.value_or(config.eval.seeds.front());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"reciprocal match recommendation experiment toolkit"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand

  GlobalArgs args;
  app.add_option("--config", args.config_path, "experiment config file (defaults built in)");
  app.add_option("--workdir", args.workdir_override, "override [paths] workdir");
  app.add_option("--threads", args.threads, "evaluation threads (default 1)")
      ->check(CLI::PositiveNumber);
  std::uint64_t seed_value = 0;
  auto* seed_opt = app.add_option("--seed-override", seed_value,
                                  "run only this seed instead of the config seeds list");
  app.add_flag("--force", args.force, "rebuild stages even when cached");

  auto* run_cmd = app.add_subcommand("run", "run the full multi-seed experiment");
  auto* synth_cmd = app.add_subcommand("synth", "generate the synthetic market");
  bool full_truth = false;
  synth_cmd->add_flag("--full-truth", full_truth, "dump every pair to truth.csv");
  auto* split_cmd = app.add_subcommand("split", "time-split events and assign segments");
  auto* dir_cmd = app.add_subcommand("train-directional", "train scout and reply models");
  auto* dmp_cmd = app.add_subcommand("train-dmp", "train the direct match prediction model");

  auto* pseudo_cmd = app.add_subcommand("build-pseudo", "build pseudo-match labels");
  std::string pseudo_mode = "global";
  double alpha = 0.25;
  double alpha_high = 0.0, alpha_middle = 0.0, alpha_low = 0.0;
  pseudo_cmd->add_option("--mode", pseudo_mode, "global | per-segment")
      ->check(CLI::IsMember({"global", "per-segment"}));
  pseudo_cmd->add_option("--alpha", alpha, "global blend weight");
  pseudo_cmd->add_option("--alpha-high", alpha_high, "High-segment weight");
  pseudo_cmd->add_option("--alpha-middle", alpha_middle, "Middle-segment weight");
  pseudo_cmd->add_option("--alpha-low", alpha_low, "Low-segment weight");
  std::string tag_override;
  pseudo_cmd->add_option("--tag", tag_override, "artifact tag (defaults from the policy)");

  auto* meta_cmd = app.add_subcommand("train-meta", "train the BoB meta-model");
  std::string meta_tag;
  meta_cmd->add_option("--tag", meta_tag, "pseudo-label tag to train on")->required();

  auto* tune_cmd = app.add_subcommand("tune-alpha", "cross-validated alpha selection");
  std::string tune_mode = "global";
  tune_cmd->add_option("--mode", tune_mode, "global | per-segment")
      ->check(CLI::IsMember({"global", "per-segment"}));

  auto* eval_cmd = app.add_subcommand("evaluate", "evaluate all available methods");
  auto* report_cmd = app.add_subcommand("report", "merge fragments into report.csv");
  auto* print_cmd = app.add_subcommand("print-config", "print the effective config");

  CLI11_PARSE(app, argc, argv);
  if (seed_opt->count() > 0) args.seed_override = seed_value;

  try {
    ExperimentConfig config = resolve_config(args);
    PipelineOptions options = resolve_options(args);
    options.full_truth = full_truth;

    if (print_cmd->parsed()) {
      std::cout << render_config(config);
      return 0;
    }
    if (run_cmd->parsed()) {
      run_pipeline(config, options);
      return 0;
    }

    SeedRunner runner(config, single_seed(config, args), options);
    if (synth_cmd->parsed()) {
      runner.build_synth();
      std::cout << "wrote " << (runner.dir() / "events.csv").string() << " and truth.csv\n";
    } else if (split_cmd->parsed()) {
      runner.build_split();
      std::cout << "wrote train.csv, test.csv, segments.csv under " << runner.dir().string()
                << '\n';
    } else if (dir_cmd->parsed()) {
      runner.build_directional();
      std::cout << "wrote scout_model.txt and reply_model.txt\n";
    } else if (dmp_cmd->parsed()) {
      runner.build_dmp();
      std::cout << "wrote dmp_model.txt\n";
    } else if (pseudo_cmd->parsed()) {
      AlphaPolicy policy = pseudo_mode == "global"
                               ? AlphaPolicy::global(alpha)
                               : AlphaPolicy::per_segment(alpha_high, alpha_middle, alpha_low);
      std::string tag = tag_override;
      if (tag.empty()) {
        tag = pseudo_mode == "global" ? SeedRunner::alpha_tag(alpha)
                                      : SeedRunner::kPersonalizedTag;
      }
      runner.build_pseudo(policy, tag);
      std::cout << "wrote pseudo_" << tag << ".csv\n";
    } else if (meta_cmd->parsed()) {
      runner.build_meta(meta_tag);
      std::cout << "wrote meta_" << meta_tag << ".txt\n";
    } else if (tune_cmd->parsed()) {
      const auto mode = tune_mode == "global" ? AlphaPolicy::Mode::Global
                                              : AlphaPolicy::Mode::PerSegment;
      const TuneResult result = runner.build_tuning(mode);
      std::cout << "selected ";
      if (result.policy.mode == AlphaPolicy::Mode::Global) {
        std::cout << "global alpha " << result.policy.global_alpha << '\n';
      } else {
        std::cout << "per-segment alphas High=" << result.policy.segment_alphas[0]
                  << " Middle=" << result.policy.segment_alphas[1]
                  << " Low=" << result.policy.segment_alphas[2] << '\n';
      }
    } else if (eval_cmd->parsed()) {
      runner.evaluate_available();
      std::cout << "wrote eval fragments under " << (runner.dir() / "eval").string() << '\n';
    } else if (report_cmd->parsed()) {
      std::cout << runner.write_report();
    }
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
