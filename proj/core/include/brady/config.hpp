#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>

#include "brady/arrest_net.hpp"
#include "brady/features.hpp"
#include "brady/landmark_io.hpp"
#include "brady/ordinal_boost.hpp"
#include "brady/plam.hpp"
#include "brady/signal.hpp"

namespace brady {

struct FilterSetting {
  int window = 7;
  int polyorder = 3;

  friend bool operator==(const FilterSetting&, const FilterSetting&) = default;
};

// Every tunable of the pipeline. Component seeds are not configured
// separately; they are derived from `seed` (see seeded()).
struct PipelineConfig {
  std::uint64_t seed = 42;
  // Indexed by MovementKind: finger tapping, hand movement, rapid AM.
  std::array<FilterSetting, 3> filters{{{7, 3}, {7, 3}, {5, 4}}};
  ExtremaConfig extrema;
  FatigueConfig fatigue;
  NetConfig net;
  TrainConfig train;
  BoostConfig boost;
  bool per_movement_classifier = true;
  int folds = 5;
  PlamConfig plam;
  int bootstrap_replicates = 200;

  const FilterSetting& filter(MovementKind m) const {
    return filters[static_cast<std::size_t>(m)];
  }
  // Copy with every component seed derived from `seed`.
  PipelineConfig seeded() const;

  friend bool operator==(const PipelineConfig&, const PipelineConfig&) = default;
};

// Throws ConfigError.
void validate(const PipelineConfig& cfg);

// The configuration file is a single JSON object; see README for the keys.
std::string dump_config(const PipelineConfig& cfg);
PipelineConfig parse_config(std::string_view text);
PipelineConfig load_config_file(const std::string& path);

}  // namespace brady
