#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

#include "brady/landmark_io.hpp"

namespace brady {

enum class DecrementOnset { None, End, Middle, AfterFirst };

std::string_view to_string(DecrementOnset d);

// Severity description of one synthetic recording.
struct SeverityProfile {
  double base_amplitude = 0.9;  // fraction of full hand opening
  double base_interval = 0.4;   // seconds per movement before slowing
  int n_arrests = 0;
  std::vector<double> arrest_durations;  // seconds, one per arrest
  bool has_freeze = false;               // some arrest >= 2 * base_interval
  DecrementOnset decrement_onset = DecrementOnset::None;
  double decay_rate = 0.07;  // amplitude loss per cycle once decrement starts
  double slowing_factor = 1.0;
  double interval_jitter = 0.0;  // cycle-to-cycle sd of the period, fraction of it
  double noise_sd = 0.0;         // fraction of base amplitude
  std::uint64_t seed = 0;
};

struct SlowingThresholds {
  double slight = 1.15;
  double mild = 1.35;
  double moderate = 1.6;
};

struct RuleLabel {
  int score = 0;
  int arrest_category = 0;

  friend bool operator==(const RuleLabel&, const RuleLabel&) = default;
};

int arrest_category(int n_arrests, bool has_freeze);
int slowing_level(double slowing_factor, const SlowingThresholds& t = {});
int decrement_level(DecrementOnset onset);

// OR-gate over the arrest, slowing and decrement channels.
RuleLabel label_from_rules(const SeverityProfile& p, const SlowingThresholds& t = {});

// Throws InvalidProfile on any broken profile invariant.
void validate_profile(const SeverityProfile& p);

struct SynthRecording {
  Recording recording;
  SeverityProfile profile;
  RuleLabel label;
  std::vector<int> arrest_gaps;  // cycle index each arrest follows
};

// Cycle index where the amplitude decrement starts (n_cycles if none).
int decrement_start_cycle(DecrementOnset onset);

// Opening scalar s(t) in [0, 1] sampled at `fps`, plus arrest placement.
struct OpeningSignal {
  std::vector<double> values;
  std::vector<int> arrest_gaps;
};
OpeningSignal opening_signal(const SeverityProfile& p, double fps, int n_cycles);

SynthRecording generate(const SeverityProfile& p, MovementKind movement, Side side = Side::Right,
                        double fps = 30.0, int n_cycles = 12);

// Draws a profile whose rule label equals `score` (bounded rejection sampling).
SeverityProfile sample_profile(int score, std::mt19937_64& rng);

struct DatasetSpec {
  std::array<int, 4> counts{};  // recordings per score
  std::vector<MovementKind> movements{MovementKind::FingerTapping, MovementKind::HandMovement,
                                      MovementKind::RapidAM};
  double fps = 30.0;
  int n_cycles = 12;
};

std::vector<SynthRecording> generate_dataset(const DatasetSpec& spec, std::uint64_t seed);

// Counter-based seed derivation (splitmix64 finaliser).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index);

}  // namespace brady
