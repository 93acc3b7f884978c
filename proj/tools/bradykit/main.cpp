#include <CLI11.hpp>

#include <exception>
#include <iostream>
#include <nlohmann/json.hpp>
#include <string>

#include "brady/config.hpp"
#include "brady/errors.hpp"
#include "commands.hpp"

namespace {

using brady::cli::ExitCode;

int exit_code_for(const std::string& kind) {
  if (kind == "ConfigError" || kind == "MissingArtifact" || kind == "LengthMismatch" ||
      kind == "InvalidConfig" || kind == "InvalidFilterConfig") {
    return brady::cli::kExitUsage;
  }
  return brady::cli::kExitPartial;
}

int report_error(bool as_json, const std::string& kind, const std::string& message, int code) {
  if (as_json) {
    nlohmann::json j = {{"error", {{"kind", kind}, {"message", message}, {"exit_code", code}}}};
    std::cerr << j.dump() << "\n";
  } else {
    std::cerr << "bradykit: " << kind << ": " << message << "\n";
  }
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  using namespace brady::cli;

  CLI::App app{"bradykit: bradykinesia scoring from hand-landmark recordings"};
  app.fallthrough();
  app.require_subcommand(0, 1);

  GlobalOptions g;
  bool dump = false;
  std::uint64_t seed = 0;
  app.add_option("--config", g.config_path, "JSON configuration file")->check(CLI::ExistingFile);
  auto* seed_opt = app.add_option("--seed", seed, "Override the top-level seed");
  app.add_flag("--json", g.json, "Print errors and diagnostics as JSON on stderr");
  app.add_flag("--debug", g.debug, "Write per-recording debug CSVs (extract)");
  app.add_option("--threads", g.threads, "Worker threads")->check(CLI::Range(1, 1024));
  app.add_flag("--dump-config", dump, "Print the effective configuration and exit");

  ExtractArgs ex;
  auto* c_extract = app.add_subcommand("extract", "Landmark recordings to a feature CSV");
  c_extract->add_option("inputs", ex.inputs, "Recording files or directories")->required();
  c_extract->add_option("-o,--output", ex.output, "Feature CSV")->required();
  c_extract->add_option("--debug-dir", ex.debug_dir,
                        "Directory for debug CSVs (default <output>.debug)");

  TrainArrestArgs ta;
  auto* c_train_arrest = app.add_subcommand("train-arrest", "Train the arrest network");
  c_train_arrest->add_option("inputs", ta.inputs, "Recording files or directories")->required();
  c_train_arrest->add_option("-o,--output", ta.output, "Network file")->required();
  c_train_arrest->add_option("--history", ta.history,
                             "Loss history JSON (default <output>.history.json)");

  TrainClassifierArgs tc;
  auto* c_train_cls = app.add_subcommand("train-classifier", "Train the score classifiers");
  c_train_cls->add_option("features", tc.features, "Feature CSV")->required();
  c_train_cls->add_option("-o,--output", tc.output, "Classifier file")->required();
  c_train_cls->add_option("--report", tc.report,
                          "Cross-validation report (default <output>.cv.json)");

  ScoreArgs sc;
  auto* c_score = app.add_subcommand("score", "Score recordings into a score sheet");
  c_score->add_option("inputs", sc.inputs, "Recording files or directories")->required();
  c_score->add_option("--arrest-model", sc.arrest_model, "Network file")->required();
  c_score->add_option("--classifier", sc.classifier, "Classifier file")->required();
  c_score->add_option("-o,--output", sc.output, "Score sheet JSON (default stdout)");

  EvaluateArgs ev;
  auto* c_eval = app.add_subcommand("evaluate", "Compare a score sheet with ground truth");
  c_eval->add_option("--truth", ev.truth, "Feature CSV with scores")->required();
  c_eval->add_option("--pred", ev.pred, "Score sheet JSON")->required();
  c_eval->add_option("-o,--output", ev.output, "Report JSON (default stdout)");

  SigtestArgs st;
  auto* c_sig = app.add_subcommand("sigtest", "Feature significance per movement and side");
  c_sig->add_option("features", st.features, "Feature CSV with scores")->required();
  c_sig->add_option("-o,--output", st.output, "Report JSON (default stdout)");

  SynthArgs sy;
  auto* c_synth = app.add_subcommand("synth", "Generate a synthetic labelled dataset");
  c_synth->add_option("--counts", sy.counts, "Recordings per score 0,1,2,3")->delimiter(',');
  c_synth->add_option("-o,--output", sy.out_dir, "Output directory")->required();
  c_synth->add_option("--fps", sy.fps, "Frame rate")->check(CLI::PositiveNumber);
  c_synth->add_option("--cycles", sy.n_cycles, "Movement cycles per recording")
      ->check(CLI::Range(1, 100));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error(g.json, "UsageError", e.what(), kExitUsage);
  }
  if (*seed_opt) g.seed = seed;

  try {
    if (dump) {
      std::cout << brady::dump_config(resolve_config(g));
      return kExitOk;
    }
    if (c_extract->parsed()) return cmd_extract(g, ex);
    if (c_train_arrest->parsed()) return cmd_train_arrest(g, ta);
    if (c_train_cls->parsed()) return cmd_train_classifier(g, tc);
    if (c_score->parsed()) return cmd_score(g, sc);
    if (c_eval->parsed()) return cmd_evaluate(g, ev);
    if (c_sig->parsed()) return cmd_sigtest(g, st);
    if (c_synth->parsed()) return cmd_synth(g, sy);
    std::cerr << app.help();
    return kExitUsage;
  } catch (const brady::Error& e) {
    return report_error(g.json, e.kind(), e.what(), exit_code_for(e.kind()));
  } catch (const std::exception& e) {
    return report_error(g.json, "InternalError", e.what(), kExitInternal);
  }
}
