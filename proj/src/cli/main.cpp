// graspseq command-line entry point.
//
// Exit codes: 0 success, 1 runtime failure (geometry, numeric, data), 2 usage
// or configuration error.

#include <CLI11.hpp>

#include <iostream>
#include <optional>

#include "graspseq/pipeline/commands.hpp"
#include "graspseq/pipeline/store.hpp"

namespace fs = std::filesystem;
using namespace graspseq;

int main(int argc, char** argv) {
  CLI::App app{"Synthesizes annotated hand-tool manipulation sequences"};
  app.require_subcommand(1);

  fs::path configPath;
  std::optional<std::uint64_t> seed;
  std::optional<fs::path> out;
  int jobs = 1;
  int port = 8765;
  std::string host = "127.0.0.1";
  std::vector<fs::path> templateStores;
  fs::path predictions, groundTruth, target;
  bool noRootAlign = false, noScale = false;

  auto* generate = app.add_subcommand("generate", "Sample, refine and score grasp candidates into a store");
  generate->add_option("--config", configPath, "Pipeline config")->required()->check(CLI::ExistingFile);
  generate->add_option("--seed", seed, "Override the config seed");
  generate->add_option("--out", out, "Store directory (defaults to <outputDir>/store)");
  generate->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);

  auto* serve = app.add_subcommand("serve", "Serve a candidate store to the curation UI");
  serve->add_option("store", target, "Store directory")->required()->check(CLI::ExistingDirectory);
  serve->add_option("--port", port, "Port (0 picks a free one)")->check(CLI::Range(0, 65535));
  serve->add_option("--host", host, "Bind address");

  auto* synthesize = app.add_subcommand("synthesize", "Build sequences and export per-frame annotations");
  synthesize->add_option("--config", configPath, "Pipeline config")->required()->check(CLI::ExistingFile);
  synthesize->add_option("--seed", seed, "Override the config seed");
  synthesize->add_option("--out", out, "Output directory");
  synthesize->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
  synthesize->add_option("--templates", templateStores, "Candidate stores to take templates from")
      ->check(CLI::ExistingDirectory);

  auto* evaluateCmd = app.add_subcommand("evaluate", "Score predictions against a synthesized sequence");
  evaluateCmd->add_option("--predictions", predictions, "Predictions document")->required()->check(CLI::ExistingFile);
  evaluateCmd->add_option("--ground-truth", groundTruth, "Sequence directory")->required()->check(
      CLI::ExistingDirectory);
  evaluateCmd->add_option("--out", out, "Write the report document here");
  evaluateCmd->add_flag("--no-root-align", noRootAlign, "Compare absolute joint positions");
  evaluateCmd->add_flag("--no-scale", noScale, "Rigid instead of similarity Procrustes");

  auto* inspect = app.add_subcommand("inspect", "Summarize a store, an output directory or a document");
  inspect->add_option("path", target, "Path")->required()->check(CLI::ExistingPath);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (generate->parsed()) {
      PipelineConfig config = loadConfig(configPath);
      applyOverrides(config, seed, std::nullopt);
      const fs::path storeDir = out ? *out : config.outputDir / "store";
      if (storeDir.empty() || storeDir == "store") throw ConfigError("generate needs --out or outputDir");
      const GenerateSummary s = cmdGenerate(config, storeDir, jobs);
      std::cout << "stored " << s.candidates << " candidates in " << storeDir.string() << " (" << s.passing
                << " within the filter thresholds)\n";
    } else if (serve->parsed()) {
      cmdServe(target, port, host, [&](int bound) {
        std::cout << "serving " << target.string() << " on http://" << host << ":" << bound << std::endl;
      });
    } else if (synthesize->parsed()) {
      PipelineConfig config = loadConfig(configPath);
      applyOverrides(config, seed, out);
      const SynthesisSummary s = cmdSynthesize(config, templateStores, jobs);
      std::cout << "wrote " << s.sequences << " sequences, " << s.frames << " frames; manifest "
                << s.manifest.string() << "\n";
    } else if (evaluateCmd->parsed()) {
      EvaluationOptions options;
      options.rootAlign = !noRootAlign;
      options.paScale = !noScale;
      const MetricReport r = cmdEvaluate(predictions, groundTruth, options, out.value_or(fs::path{}));
      std::cout << formatTable({r});
      for (const auto& d : r.diagnostics) std::cout << "  " << d << "\n";
    } else if (inspect->parsed()) {
      std::cout << cmdInspect(target);
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const StoreLockedError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
