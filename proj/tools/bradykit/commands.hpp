#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "brady/config.hpp"

namespace brady::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitPartial = 1,
  kExitUsage = 2,
  kExitInternal = 3,
};

struct GlobalOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  bool json = false;
  bool debug = false;
  int threads = 1;
};

// Loads --config (or defaults) and applies --seed.
PipelineConfig resolve_config(const GlobalOptions& g);

struct ExtractArgs {
  std::vector<std::string> inputs;
  std::string output;
  std::string debug_dir;
};
struct TrainArrestArgs {
  std::vector<std::string> inputs;
  std::string output;
  std::string history;
};
struct TrainClassifierArgs {
  std::string features;
  std::string output;
  std::string report;
};
struct ScoreArgs {
  std::vector<std::string> inputs;
  std::string arrest_model;
  std::string classifier;
  std::string output;
};
struct EvaluateArgs {
  std::string truth;
  std::string pred;
  std::string output;
};
struct SigtestArgs {
  std::string features;
  std::string output;
};
struct SynthArgs {
  std::array<int, 4> counts{10, 10, 10, 10};
  std::string out_dir;
  double fps = 30.0;
  int n_cycles = 12;
};

int cmd_extract(const GlobalOptions& g, const ExtractArgs& a);
int cmd_train_arrest(const GlobalOptions& g, const TrainArrestArgs& a);
int cmd_train_classifier(const GlobalOptions& g, const TrainClassifierArgs& a);
int cmd_score(const GlobalOptions& g, const ScoreArgs& a);
int cmd_evaluate(const GlobalOptions& g, const EvaluateArgs& a);
int cmd_sigtest(const GlobalOptions& g, const SigtestArgs& a);
int cmd_synth(const GlobalOptions& g, const SynthArgs& a);

}  // namespace brady::cli
