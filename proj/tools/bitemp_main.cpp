// bitemp: bi-temporal CTP tissue characterization toolkit.
//
// Subcommands:
//   phantom     generate a synthetic CTP volume plus T1/T2 masks
//   features    build ROI maps and extract BL/GLCM/embedding feature tables
//   stats       Mann-Whitney / Bonferroni / Cliff's delta comparisons
//   similarity  cosine similarity matrices and separation indices
//   tsne        2D t-SNE coordinates per feature family
//   report      box-plot summaries
//   run         full pipeline plus run manifest
//
// Exit codes: 0 success, 2 configuration/validation error, 3 data error.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "bitemp/pipeline.hpp"
#include "bitemp/types.hpp"
#include "bitemp/version.hpp"

namespace {

int exit_code_for(const bitemp::Error& e) {
  switch (e.code()) {
    case bitemp::ErrorCode::ConfigError:
    case bitemp::ErrorCode::ConfigConflict:
      return 2;
    default:
      return 3;
  }
}

struct CommonArgs {
  std::string config_path;
  std::optional<std::string> out_override;
  std::optional<std::uint64_t> seed_override;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "JSON run configuration")
      ->required();
  cmd->add_option_function<std::string>(
      "--out", [&args](const std::string& v) { args.out_override = v; },
      "Override the output directory");
  cmd->add_option_function<std::uint64_t>(
      "--seed", [&args](std::uint64_t v) { args.seed_override = v; },
      "Override the t-SNE seed");
}

int run_stage(const CommonArgs& args,
              void (*stage)(const bitemp::pipeline::RunConfig&)) {
  auto config = bitemp::pipeline::load_run_config(args.config_path);
  bitemp::pipeline::apply_overrides(config, args.out_override,
                                    args.seed_override);
  stage(config);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bi-temporal CTP tissue characterization toolkit"};
  app.set_version_flag("--version", bitemp::kVersion);
  app.require_subcommand(1);

  CommonArgs phantom_args;
  std::string phantom_out;
  auto* phantom_cmd =
      app.add_subcommand("phantom", "Generate a synthetic CTP phantom");
  phantom_cmd->add_option("--config", phantom_args.config_path,
                          "Phantom JSON configuration")
      ->required();
  phantom_cmd->add_option("--out", phantom_out, "Output directory")
      ->required();
  phantom_cmd->add_option_function<std::uint64_t>(
      "--seed",
      [&phantom_args](std::uint64_t v) { phantom_args.seed_override = v; },
      "Override the phantom seed");

  CommonArgs features_args, stats_args, similarity_args, tsne_args,
      report_args, run_args;
  add_common(app.add_subcommand("features",
                                "Build ROI maps and extract feature tables"),
             features_args);
  add_common(app.add_subcommand("stats", "Region-pair statistical tests"),
             stats_args);
  add_common(app.add_subcommand("similarity",
                                "Cosine similarity and separation indices"),
             similarity_args);
  add_common(app.add_subcommand("tsne", "t-SNE projections"), tsne_args);
  add_common(app.add_subcommand("report", "Box-plot summaries"), report_args);
  add_common(app.add_subcommand("run", "Run the full pipeline"), run_args);

  CLI11_PARSE(app, argc, argv);

  try {
    if (phantom_cmd->parsed()) {
      bitemp::pipeline::cmd_phantom(phantom_args.config_path, phantom_out,
                                    phantom_args.seed_override);
      return 0;
    }
    if (app.got_subcommand("features")) {
      return run_stage(features_args, bitemp::pipeline::cmd_features);
    }
    if (app.got_subcommand("stats")) {
      return run_stage(stats_args, bitemp::pipeline::cmd_stats);
    }
    if (app.got_subcommand("similarity")) {
      return run_stage(similarity_args, bitemp::pipeline::cmd_similarity);
    }
    if (app.got_subcommand("tsne")) {
      return run_stage(tsne_args, bitemp::pipeline::cmd_tsne);
    }
    if (app.got_subcommand("report")) {
      return run_stage(report_args, bitemp::pipeline::cmd_report);
    }
    if (app.got_subcommand("run")) {
      return run_stage(run_args, bitemp::pipeline::cmd_run);
    }
  } catch (const bitemp::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
