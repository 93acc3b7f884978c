#include "brady/config.hpp"

#include <fstream>
#include <sstream>

#include "brady/errors.hpp"
#include "brady/json_io.hpp"
#include "brady/synth.hpp"

namespace brady {

namespace {

constexpr MovementKind kMovements[] = {MovementKind::FingerTapping, MovementKind::HandMovement,
                                       MovementKind::RapidAM};

// Nested sections never carry their own seed.
template <class T>
json section(const T& value) {
  json j = value;
  j.erase("seed");
  return j;
}

template <class T>
void read_section(const json& j, const char* key, T& out) {
  const auto it = j.find(key);
  if (it == j.end()) return;
  if (it->is_object() && it->contains("seed")) {
    throw ConfigError(std::string("unknown key 'seed' in ") + key + " (seeds derive from the top-level seed)");
  }
  out = it->get<T>();
}

}  // namespace

PipelineConfig PipelineConfig::seeded() const {
  PipelineConfig c = *this;
  c.net.seed = derive_seed(seed, 1);
  c.train.seed = derive_seed(seed, 2);
  c.boost.seed = derive_seed(seed, 3);
  c.plam.seed = derive_seed(seed, 4);
  return c;
}

void validate(const PipelineConfig& cfg) {
  for (const auto& f : cfg.filters) {
    if (f.window < 1 || f.window % 2 == 0 || f.polyorder < 0 || f.polyorder >= f.window) {
      throw ConfigError("filter needs an odd window > polyorder >= 0");
    }
  }
  if (!(cfg.extrema.prominence_frac >= 0.0) || cfg.extrema.min_separation < 0) {
    throw ConfigError("extrema settings must be non-negative");
  }
  if (cfg.fatigue.window < 3 || !(cfg.fatigue.alpha > 0.0 && cfg.fatigue.alpha <= 1.0)) {
    throw ConfigError("fatigue needs window >= 3 and alpha in (0, 1]");
  }
  if (cfg.folds < 2) throw ConfigError("folds must be >= 2");
  if (cfg.bootstrap_replicates < 1) throw ConfigError("bootstrap_replicates must be >= 1");
  if (cfg.train.epochs < 0 || cfg.train.batch_size < 1 || !(cfg.train.learning_rate > 0.0)) {
    throw ConfigError("arrest_train needs epochs >= 0, batch_size >= 1, learning_rate > 0");
  }
  if (cfg.plam.n_basis < 5 || cfg.plam.max_cycles < 1 || !(cfg.plam.tol > 0.0)) {
    throw ConfigError("plam needs n_basis >= 5, max_cycles >= 1, tol > 0");
  }
  try {
    validate(cfg.net);
    validate(cfg.boost);
  } catch (const InvalidConfig& e) {
    throw ConfigError(e.what());
  }
}

std::string dump_config(const PipelineConfig& cfg) {
  json filters = json::object();
  for (auto m : kMovements) {
    const auto& f = cfg.filter(m);
    filters[std::string(to_string(m))] = {{"window", f.window}, {"polyorder", f.polyorder}};
  }
  const json j = {{"seed", cfg.seed},
                  {"filters", std::move(filters)},
                  {"extrema", cfg.extrema},
                  {"fatigue", cfg.fatigue},
                  {"arrest_net", section(cfg.net)},
                  {"arrest_train", section(cfg.train)},
                  {"classifier", section(cfg.boost)},
                  {"per_movement_classifier", cfg.per_movement_classifier},
                  {"folds", cfg.folds},
                  {"plam", section(cfg.plam)},
                  {"bootstrap_replicates", cfg.bootstrap_replicates}};
  return j.dump(2) + "\n";
}

PipelineConfig parse_config(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  reject_unknown_keys(j,
                      {"seed", "filters", "extrema", "fatigue", "arrest_net", "arrest_train",
                       "classifier", "per_movement_classifier", "folds", "plam",
                       "bootstrap_replicates"},
                      "config");
  PipelineConfig cfg;
  try {
    if (j.contains("seed")) j.at("seed").get_to(cfg.seed);
    if (j.contains("filters")) {
      const auto& f = j.at("filters");
      reject_unknown_keys(f, {"finger_tapping", "hand_movement", "rapid_am"}, "filters");
      for (auto m : kMovements) {
        const auto it = f.find(std::string(to_string(m)));
        if (it == f.end()) continue;
        reject_unknown_keys(*it, {"window", "polyorder"}, "filters");
        auto& dst = cfg.filters[static_cast<std::size_t>(m)];
        if (it->contains("window")) it->at("window").get_to(dst.window);
        if (it->contains("polyorder")) it->at("polyorder").get_to(dst.polyorder);
      }
    }
    if (j.contains("extrema")) j.at("extrema").get_to(cfg.extrema);
    if (j.contains("fatigue")) j.at("fatigue").get_to(cfg.fatigue);
    read_section(j, "arrest_net", cfg.net);
    read_section(j, "arrest_train", cfg.train);
    read_section(j, "classifier", cfg.boost);
    read_section(j, "plam", cfg.plam);
    if (j.contains("per_movement_classifier")) j.at("per_movement_classifier").get_to(cfg.per_movement_classifier);
    if (j.contains("folds")) j.at("folds").get_to(cfg.folds);
    if (j.contains("bootstrap_replicates")) j.at("bootstrap_replicates").get_to(cfg.bootstrap_replicates);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
  validate(cfg);
  return cfg;
}

PipelineConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace brady
