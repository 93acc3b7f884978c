#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "brady/features.hpp"

namespace brady {

inline constexpr int kNumScores = 4;
inline constexpr int kBoostInputs = 9;

using BoostInput = std::array<double, kBoostInputs>;

// mean_amp, rsd_amp, mean_int, rsd_int, fatigue, then the arrest category as
// four 0/1 indicators.
BoostInput expand_features(const FeatureVector& f);

struct BoostConfig {
  int n_rounds = 100;
  double learning_rate = 0.1;
  int max_depth = 3;
  int min_leaf = 2;
  double lambda_l2 = 1.0;
  std::uint64_t seed = 0;

  friend bool operator==(const BoostConfig&, const BoostConfig&) = default;
};

void validate(const BoostConfig& cfg);

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;  // x < threshold goes left
  int left = -1;
  int right = -1;
  double value = 0.0;  // leaf weight (already scaled by the learning rate)

  bool is_leaf() const { return feature < 0; }
  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  double eval(const BoostInput& x) const;
  friend bool operator==(const Tree&, const Tree&) = default;
};

struct TreeEnsemble {
  static constexpr int kFormatVersion = 1;

  BoostConfig config;
  std::array<double, kNumScores> base_score{};
  std::vector<std::array<Tree, kNumScores>> rounds;

  friend bool operator==(const TreeEnsemble&, const TreeEnsemble&) = default;
};

struct Prediction {
  int score = 0;
  std::array<double, kNumScores> probs{};
};

// Softmax boosting; every tree uses g = p - y, h = p(1 - p). When
// `loss_history` is given it receives the training log-loss before the
// first round and after each round. Throws DegenerateDataset.
TreeEnsemble fit(std::span<const LabeledFeatures> data, const BoostConfig& cfg,
                 std::vector<double>* loss_history = nullptr);
Prediction predict(const TreeEnsemble& m, const FeatureVector& f);
Prediction predict_input(const TreeEnsemble& m, const BoostInput& x);
double log_loss(const TreeEnsemble& m, std::span<const LabeledFeatures> data);

// Single regression tree on explicit gradients/hessians, exposed for tests.
Tree fit_tree(std::span<const BoostInput> x, std::span<const double> grad,
              std::span<const double> hess, const BoostConfig& cfg);

struct FoldPlan {
  int k = 0;
  std::vector<int> fold_of;  // fold index per input row

  std::vector<std::size_t> test_indices(int fold) const;
  std::vector<std::size_t> train_indices(int fold) const;
};

// Members of each class are put in a canonical order with `less` (so the
// plan depends only on content), shuffled with `seed`, then dealt round
// robin. The dealing counter carries over between classes. Throws
// ClassTooSmall when a present class has fewer than k members.
FoldPlan stratified_kfold(std::span<const int> labels, int k, std::uint64_t seed,
                          const std::function<bool(std::size_t, std::size_t)>& less);
FoldPlan stratified_kfold(std::span<const LabeledFeatures> data, int k, std::uint64_t seed);

void save(std::ostream& out, const TreeEnsemble& m);
TreeEnsemble load_ensemble(std::istream& in);
void save_ensemble_file(const std::string& path, const TreeEnsemble& m);
TreeEnsemble load_ensemble_file(const std::string& path);
void dump_text(std::ostream& out, const TreeEnsemble& m);

}  // namespace brady
