#pragma once

#include <array>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "brady/arrest_net.hpp"
#include "brady/config.hpp"
#include "brady/evaluation.hpp"
#include "brady/features.hpp"
#include "brady/mixed_model.hpp"
#include "brady/ordinal_boost.hpp"
#include "brady/plam.hpp"
#include "brady/signal.hpp"

namespace brady {

// Data-quality flags attached to extracted recordings and score sheets.
inline constexpr const char* kFlagFewCycles = "few_cycles";          // fatigue window not filled
inline constexpr const char* kFlagTruncated = "truncated_cycles";    // more than 10 peaks found
inline constexpr const char* kFlagArrestFromLabel = "arrest_from_label";
inline constexpr const char* kFlagArrestFromModel = "arrest_from_model";

// Everything computed from one recording up to the feature vector. The
// arrest feature holds the recording's arrest label when it has one, else 0.
struct ExtractedRecording {
  FeatureRow row;
  std::optional<int> arrest_label;
  DistanceSeries raw;
  SmoothedSeries smooth;
  ExtremaSet extrema;
  CycleSeries cycles;
  std::vector<std::string> flags;
};

// Throws the signal/features errors (DegenerateFrame, NoCyclesDetected,
// InsufficientCycles, ...).
ExtractedRecording extract_recording(const Recording& r, const PipelineConfig& cfg);

// Network input for one extracted recording, per NetConfig::input_mode.
SeriesSample arrest_sample(const ExtractedRecording& e, const NetConfig& net,
                           std::optional<int> label = {});

// Runs `fn(i)` for i in [0, n) on up to `threads` workers. Results must be
// written to per-index slots so output does not depend on the thread count.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

// Trains the arrest network on every recording with an arrest label.
// Throws DegenerateDataset.
TrainResult train_arrest_model(std::span<const ExtractedRecording> data, const PipelineConfig& cfg);

// Either one classifier per movement or a single joint one.
struct ClassifierSet {
  static constexpr int kFormatVersion = 1;

  bool per_movement = true;
  std::array<std::optional<TreeEnsemble>, 3> by_movement;
  std::optional<TreeEnsemble> joint;

  const TreeEnsemble& for_movement(MovementKind m) const;  // throws MissingArtifact
};

// Fits on the rows' features as given (arrest = ground-truth category).
ClassifierSet train_classifiers(std::span<const FeatureRow> rows, const PipelineConfig& cfg);
void save_classifiers_file(const std::string& path, const ClassifierSet& c);
ClassifierSet load_classifiers_file(const std::string& path);

// Zeroes the fatigue and arrest inputs (ablation of the two features).
FeatureVector ablate_fatigue_arrest(FeatureVector f);

struct CvOptions {
  bool ablate_fatigue_arrest = false;
  int threads = 1;
};

struct CvOutcome {
  FoldPlan plan;
  std::vector<int> truth;
  std::vector<int> pred;
  std::vector<double> severe_prob;  // P(score >= 2)
  std::vector<int> arrest_pred;     // -1 when the network was not used
  std::vector<MovementKind> movement;
};

// k-fold cross-validation of the two-stage model. Each fold trains the
// arrest network and classifiers on the training part; held-out rows get
// the network's arrest prediction as their arrest feature. Every row needs
// a score and an arrest label. Throws DegenerateDataset, ClassTooSmall.
CvOutcome cross_validate(std::span<const ExtractedRecording> data, const PipelineConfig& cfg,
                         const CvOptions& opt = {});

// Cross-validates the classifier alone on feature rows as given (the arrest
// column is used as is). Throws DegenerateDataset, ClassTooSmall.
CvOutcome cross_validate_classifier(std::span<const FeatureRow> rows, const PipelineConfig& cfg,
                                    const CvOptions& opt = {});

struct ScoreSheetRow {
  std::string subject_id;
  MovementKind movement = MovementKind::FingerTapping;
  Side side = Side::Right;
  FeatureVector features;  // arrest = network prediction
  int arrest = 0;
  int score = 0;
  std::array<double, kNumScores> probs{};
  std::optional<int> truth;
  std::vector<std::string> flags;
};

ScoreSheetRow score_recording(const ExtractedRecording& e, const NetParams& net,
                              const ClassifierSet& classifiers);

// Per movement and side: PLAM fit, deviance explained and bootstrap tests.
struct SignificanceRow {
  MovementKind movement = MovementKind::FingerTapping;
  Side side = Side::Right;
  int n = 0;
  std::optional<BootstrapResult> bootstrap;
  double deviance_explained = 0.0;
  bool separation = false;
  std::string error;  // set when this cell could not be fitted
};

std::vector<SignificanceRow> significance_table(std::span<const FeatureRow> rows,
                                                const PipelineConfig& cfg, int threads = 1);

// Throws MalformedInput.
std::vector<ScoreSheetRow> parse_score_sheet(std::string_view text);

// Pairs truth rows with score-sheet rows by position. Throws LengthMismatch
// when the counts differ and MalformedInput when a pair does not refer to
// the same recording or a truth row has no score.
CvOutcome pair_for_evaluation(std::span<const FeatureRow> truth,
                              std::span<const ScoreSheetRow> sheet);

// Report writers (JSON text, trailing newline, no timestamps).
std::string eval_report_json(const CvOutcome& cv);
std::string score_sheet_json(std::span<const ScoreSheetRow> rows);
std::string significance_json(std::span<const SignificanceRow> rows);

}  // namespace brady
