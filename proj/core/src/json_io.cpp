#include "brady/json_io.hpp"

#include <cmath>
#include <string>

#include "brady/errors.hpp"

namespace brady {

namespace {

template <class T>
void read_key(const json& j, const char* key, T& out) {
  const auto it = j.find(key);
  if (it == j.end()) return;
  try {
    it->get_to(out);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
  }
}

void require_object(const json& j, std::string_view section) {
  if (!j.is_object()) throw ConfigError(std::string(section) + " must be an object");
}

}  // namespace

void reject_unknown_keys(const json& j, std::initializer_list<std::string_view> allowed,
                         std::string_view section) {
  require_object(j, section);
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError("unknown key '" + key + "' in " + std::string(section));
  }
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

void to_json(json& j, const ExtremaConfig& c) {
  j = {{"prominence_frac", c.prominence_frac}, {"min_separation", c.min_separation}};
}
void from_json(const json& j, ExtremaConfig& c) {
  reject_unknown_keys(j, {"prominence_frac", "min_separation"}, "extrema");
  read_key(j, "prominence_frac", c.prominence_frac);
  read_key(j, "min_separation", c.min_separation);
}

void to_json(json& j, const FatigueConfig& c) { j = {{"window", c.window}, {"alpha", c.alpha}}; }
void from_json(const json& j, FatigueConfig& c) {
  reject_unknown_keys(j, {"window", "alpha"}, "fatigue");
  read_key(j, "window", c.window);
  read_key(j, "alpha", c.alpha);
}

void to_json(json& j, const NetConfig& c) {
  j = {{"input_mode", std::string(to_string(c.input_mode))},
       {"lstm_hidden", c.lstm_hidden},
       {"conv_channels", c.conv_channels},
       {"conv_kernels", c.conv_kernels},
       {"dropout_rate", c.dropout_rate},
       {"n_classes", c.n_classes},
       {"bn_momentum", c.bn_momentum},
       {"seed", c.seed}};
  if (c.length_override) j["length_override"] = *c.length_override;
  if (c.in_channels_override) j["in_channels_override"] = *c.in_channels_override;
}
void from_json(const json& j, NetConfig& c) {
  reject_unknown_keys(j,
                      {"input_mode", "lstm_hidden", "conv_channels", "conv_kernels", "dropout_rate",
                       "n_classes", "bn_momentum", "seed", "length_override", "in_channels_override"},
                      "arrest_net");
  if (j.contains("input_mode")) {
    std::string mode;
    read_key(j, "input_mode", mode);
    try {
      c.input_mode = parse_input_mode(mode);
    } catch (const InvalidConfig& e) {
      throw ConfigError(e.what());
    }
  }
  read_key(j, "lstm_hidden", c.lstm_hidden);
  read_key(j, "conv_channels", c.conv_channels);
  read_key(j, "conv_kernels", c.conv_kernels);
  read_key(j, "dropout_rate", c.dropout_rate);
  read_key(j, "n_classes", c.n_classes);
  read_key(j, "bn_momentum", c.bn_momentum);
  read_key(j, "seed", c.seed);
  if (j.contains("length_override")) {
    int v = 0;
    read_key(j, "length_override", v);
    c.length_override = v;
  }
  if (j.contains("in_channels_override")) {
    int v = 0;
    read_key(j, "in_channels_override", v);
    c.in_channels_override = v;
  }
}

void to_json(json& j, const TrainConfig& c) {
  j = {{"epochs", c.epochs}, {"batch_size", c.batch_size}, {"learning_rate", c.learning_rate},
       {"beta1", c.beta1},   {"beta2", c.beta2},           {"epsilon", c.epsilon},
       {"seed", c.seed}};
}
void from_json(const json& j, TrainConfig& c) {
  reject_unknown_keys(j, {"epochs", "batch_size", "learning_rate", "beta1", "beta2", "epsilon", "seed"},
                      "arrest_train");
  read_key(j, "epochs", c.epochs);
  read_key(j, "batch_size", c.batch_size);
  read_key(j, "learning_rate", c.learning_rate);
  read_key(j, "beta1", c.beta1);
  read_key(j, "beta2", c.beta2);
  read_key(j, "epsilon", c.epsilon);
  read_key(j, "seed", c.seed);
}

void to_json(json& j, const BoostConfig& c) {
  j = {{"n_rounds", c.n_rounds},   {"learning_rate", c.learning_rate}, {"max_depth", c.max_depth},
       {"min_leaf", c.min_leaf},   {"lambda_l2", c.lambda_l2},         {"seed", c.seed}};
}
void from_json(const json& j, BoostConfig& c) {
  reject_unknown_keys(j, {"n_rounds", "learning_rate", "max_depth", "min_leaf", "lambda_l2", "seed"},
                      "classifier");
  read_key(j, "n_rounds", c.n_rounds);
  read_key(j, "learning_rate", c.learning_rate);
  read_key(j, "max_depth", c.max_depth);
  read_key(j, "min_leaf", c.min_leaf);
  read_key(j, "lambda_l2", c.lambda_l2);
  read_key(j, "seed", c.seed);
}

void to_json(json& j, const PlamConfig& c) {
  j = {{"n_basis", c.n_basis},
       {"lambda", c.lambda},
       {"select_lambda", c.select_lambda},
       {"lambda_grid", c.lambda_grid},
       {"max_cycles", c.max_cycles},
       {"tol", c.tol},
       {"separation_bound", c.separation_bound},
       {"seed", c.seed}};
}
void from_json(const json& j, PlamConfig& c) {
  reject_unknown_keys(j,
                      {"n_basis", "lambda", "select_lambda", "lambda_grid", "max_cycles", "tol",
                       "separation_bound", "seed"},
                      "plam");
  read_key(j, "n_basis", c.n_basis);
  read_key(j, "lambda", c.lambda);
  read_key(j, "select_lambda", c.select_lambda);
  read_key(j, "lambda_grid", c.lambda_grid);
  read_key(j, "max_cycles", c.max_cycles);
  read_key(j, "tol", c.tol);
  read_key(j, "separation_bound", c.separation_bound);
  read_key(j, "seed", c.seed);
}

void to_json(json& j, const TreeNode& n) {
  if (n.is_leaf()) {
    j = {{"leaf", n.value}};
  } else {
    j = {{"feature", n.feature}, {"threshold", n.threshold}, {"left", n.left}, {"right", n.right}};
  }
}
void from_json(const json& j, TreeNode& n) {
  n = TreeNode{};
  if (j.contains("leaf")) {
    j.at("leaf").get_to(n.value);
    return;
  }
  j.at("feature").get_to(n.feature);
  j.at("threshold").get_to(n.threshold);
  j.at("left").get_to(n.left);
  j.at("right").get_to(n.right);
  if (n.feature < 0 || n.feature >= kBoostInputs) throw ConfigError("split feature index out of range");
}

void to_json(json& j, const TreeEnsemble& m) {
  json rounds = json::array();
  for (const auto& round : m.rounds) {
    json trees = json::array();
    for (const auto& t : round) trees.push_back(t.nodes);
    rounds.push_back(std::move(trees));
  }
  j = {{"format", "bradykit-classifier"},
       {"version", TreeEnsemble::kFormatVersion},
       {"config", m.config},
       {"base_score", m.base_score},
       {"rounds", std::move(rounds)}};
}
void from_json(const json& j, TreeEnsemble& m) {
  if (j.value("format", std::string()) != "bradykit-classifier") {
    throw ConfigError("not a classifier model");
  }
  if (j.at("version").get<int>() != TreeEnsemble::kFormatVersion) {
    throw ConfigError("unsupported classifier version");
  }
  m = TreeEnsemble{};
  j.at("config").get_to(m.config);
  j.at("base_score").get_to(m.base_score);
  for (const auto& round : j.at("rounds")) {
    if (round.size() != kNumScores) throw ConfigError("round must hold one tree per class");
    std::array<Tree, kNumScores> trees;
    for (std::size_t k = 0; k < kNumScores; ++k) {
      round.at(k).get_to(trees[k].nodes);
      const auto n = static_cast<int>(trees[k].nodes.size());
      for (const auto& node : trees[k].nodes) {
        if (!node.is_leaf() && (node.left <= 0 || node.left >= n || node.right <= 0 || node.right >= n)) {
          throw ConfigError("tree child index out of range");
        }
      }
    }
    m.rounds.push_back(std::move(trees));
  }
}

void to_json(json& j, const FeatureVector& f) {
  j = {{"mean_amp", f.mean_amp}, {"rsd_amp", f.rsd_amp}, {"mean_int", f.mean_int},
       {"rsd_int", f.rsd_int},   {"fatigue", f.fatigue}, {"arrest", f.arrest}};
}

void to_json(json& j, const ConfusionReport& r) {
  j = {{"confusion_matrix", r.matrix},
       {"n", r.n},
       {"exact_accuracy", r.exact_accuracy},
       {"within_one_accuracy", r.within_one_accuracy}};
}

void to_json(json& j, const AucReport& r) {
  json roc = json::array();
  for (const auto& p : r.roc) {
    roc.push_back({{"threshold", number_or_null(p.threshold)}, {"fpr", p.fpr}, {"tpr", p.tpr}});
  }
  j = {{"auc", r.auc}, {"n_severe", r.n_pos}, {"n_mild", r.n_neg}, {"roc", std::move(roc)}};
}

void to_json(json& j, const EvalReport& r) {
  j = r.confusion;
  j["binary"] = r.auc_defined ? json(r.auc) : json(nullptr);
}

void to_json(json& j, const MixedModel& m) {
  j = {{"beta0", m.beta0},         {"sigma2_u", m.sigma2_u},   {"sigma2_e", m.sigma2_e},
       {"se_beta0", m.se_beta0},   {"p_value", m.p_value},     {"n_groups", m.n_groups},
       {"n_obs", m.n_obs},         {"degenerate", m.degenerate}};
}

void to_json(json& j, const BootstrapResult& r) {
  static constexpr const char* kNames[kNumParametric] = {"beta1_fatigue", "gamma1_arrest",
                                                         "gamma2_arrest", "gamma3_arrest"};
  json coefs = json::object();
  for (std::size_t k = 0; k < kNumParametric; ++k) {
    coefs[kNames[k]] = {{"estimate", number_or_null(r.estimate[k])},
                        {"se", number_or_null(r.se[k])},
                        {"p_value", number_or_null(r.p_value[k])},
                        {"ci_low", number_or_null(r.ci_low[k])},
                        {"ci_high", number_or_null(r.ci_high[k])},
                        {"degenerate", r.degenerate[k]}};
  }
  j = {{"replicates", r.requested}, {"skipped", r.skipped}, {"coefficients", std::move(coefs)}};
}

}  // namespace brady
