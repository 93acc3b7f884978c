#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "brady/landmark_io.hpp"
#include "brady/signal.hpp"

namespace brady {

struct FeatureVector {
  double mean_amp = 0.0;
  double rsd_amp = 0.0;
  double mean_int = 0.0;
  double rsd_int = 0.0;
  double fatigue = 0.0;
  int arrest = 0;

  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

struct SummaryStats {
  double mean_amp = 0.0;
  double rsd_amp = 0.0;
  double mean_int = 0.0;
  double rsd_int = 0.0;
};

// Arithmetic means and population-sd / mean. Throws InsufficientCycles when
// there are fewer than two amplitudes or no interval.
SummaryStats summary_stats(const CycleSeries& c);

struct LocalSlope {
  double beta = 0.0;     // OLS slope of amplitude on cycle index
  double p_value = 1.0;  // two-sided, t with (n - 2) dof
  int window_index = 0;
  double loc_amp = 0.0;  // window mean
  double amp = 0.0;      // mean over all retained cycles
};

LocalSlope local_slope(std::span<const double> window, int window_index, double amp_mean);

struct FatigueConfig {
  int window = 5;
  double alpha = 0.1;  // contribute iff p < alpha

  friend bool operator==(const FatigueConfig&, const FatigueConfig&) = default;
};

struct FatigueResult {
  double value = 0.0;
  bool insufficient = false;  // < window amplitudes; value forced to 0
  std::vector<LocalSlope> windows;
};

// Sum over stride-1 windows of -beta^3 / (sqrt(i + 1) * (loc_amp / amp)^2),
// counting only windows whose slope is significant at `alpha`.
FatigueResult fatigue_details(std::span<const double> amplitudes, const FatigueConfig& cfg = {});
double fatigue_feature(std::span<const double> amplitudes, const FatigueConfig& cfg = {});

// Feature vector with its expert (or rule-derived) score 0-3.
struct LabeledFeatures {
  FeatureVector features;
  int score = 0;
};

// Feature CSV interchange row.
struct FeatureRow {
  std::string subject_id;
  MovementKind movement = MovementKind::FingerTapping;
  Side side = Side::Right;
  FeatureVector features;
  std::optional<int> score;

  friend bool operator==(const FeatureRow&, const FeatureRow&) = default;
};

inline constexpr const char* kFeatureCsvHeader =
    "subject_id,movement,side,mean_amp,rsd_amp,mean_int,rsd_int,fatigue,arrest,score";

void write_feature_csv(std::ostream& out, std::span<const FeatureRow> rows);
std::vector<FeatureRow> read_feature_csv(std::istream& in);

}  // namespace brady
