#pragma once

#include <initializer_list>
#include <string_view>

#include <nlohmann/json.hpp>

#include "brady/arrest_net.hpp"
#include "brady/evaluation.hpp"
#include "brady/features.hpp"
#include "brady/mixed_model.hpp"
#include "brady/ordinal_boost.hpp"
#include "brady/plam.hpp"
#include "brady/signal.hpp"

// nlohmann::json conversions. Parsing is strict: unknown keys raise
// ConfigError, missing keys keep their defaults.
namespace brady {

using nlohmann::json;

// Throws ConfigError naming the first key of `j` not in `allowed`.
void reject_unknown_keys(const json& j, std::initializer_list<std::string_view> allowed,
                         std::string_view section);

void to_json(json& j, const ExtremaConfig& c);
void from_json(const json& j, ExtremaConfig& c);
void to_json(json& j, const FatigueConfig& c);
void from_json(const json& j, FatigueConfig& c);
void to_json(json& j, const NetConfig& c);
void from_json(const json& j, NetConfig& c);
void to_json(json& j, const TrainConfig& c);
void from_json(const json& j, TrainConfig& c);
void to_json(json& j, const BoostConfig& c);
void from_json(const json& j, BoostConfig& c);
void to_json(json& j, const PlamConfig& c);
void from_json(const json& j, PlamConfig& c);

void to_json(json& j, const TreeNode& n);
void from_json(const json& j, TreeNode& n);
void to_json(json& j, const TreeEnsemble& m);
void from_json(const json& j, TreeEnsemble& m);

void to_json(json& j, const FeatureVector& f);

void to_json(json& j, const ConfusionReport& r);
void to_json(json& j, const AucReport& r);
void to_json(json& j, const EvalReport& r);
void to_json(json& j, const MixedModel& m);
void to_json(json& j, const BootstrapResult& r);

// NaN and infinities become null.
json number_or_null(double v);

}  // namespace brady
