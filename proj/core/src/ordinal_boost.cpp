#include "brady/ordinal_boost.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "brady/errors.hpp"
#include "brady/json_io.hpp"

namespace brady {

BoostInput expand_features(const FeatureVector& f) {
  BoostInput x{f.mean_amp, f.rsd_amp, f.mean_int, f.rsd_int, f.fatigue, 0.0, 0.0, 0.0, 0.0};
  const int a = std::clamp(f.arrest, 0, 3);
  x[static_cast<std::size_t>(5 + a)] = 1.0;
  return x;
}

void validate(const BoostConfig& cfg) {
  if (cfg.n_rounds < 0) throw InvalidConfig("n_rounds must be >= 0");
  if (!(cfg.learning_rate > 0.0)) throw InvalidConfig("learning_rate must be positive");
  if (cfg.max_depth < 1) throw InvalidConfig("max_depth must be >= 1");
  if (cfg.min_leaf < 1) throw InvalidConfig("min_leaf must be >= 1");
  if (!(cfg.lambda_l2 >= 0.0)) throw InvalidConfig("lambda_l2 must be >= 0");
}

double Tree::eval(const BoostInput& x) const {
  if (nodes.empty()) return 0.0;
  std::size_t i = 0;
  while (!nodes[i].is_leaf()) {
    const auto& n = nodes[i];
    i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] < n.threshold ? n.left : n.right);
  }
  return nodes[i].value;
}

namespace {

struct SplitChoice {
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
};

class TreeBuilder {
 public:
  TreeBuilder(std::span<const BoostInput> x, std::span<const double> g, std::span<const double> h,
              const BoostConfig& cfg)
      : x_(x), g_(g), h_(h), cfg_(cfg) {}

  Tree build() {
    std::vector<std::size_t> all(x_.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    grow(all, 0);
    return std::move(tree_);
  }

 private:
  int grow(const std::vector<std::size_t>& idx, int depth) {
    const int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    double gs = 0.0;
    double hs = 0.0;
    for (auto i : idx) {
      gs += g_[i];
      hs += h_[i];
    }
    const SplitChoice best = depth < cfg_.max_depth ? find_split(idx, gs, hs) : SplitChoice{};
    if (best.feature < 0) {
      tree_.nodes[static_cast<std::size_t>(id)].value = -gs / (hs + cfg_.lambda_l2) * cfg_.learning_rate;
      return id;
    }
    std::vector<std::size_t> left;
    std::vector<std::size_t> right;
    for (auto i : idx) {
      (x_[i][static_cast<std::size_t>(best.feature)] < best.threshold ? left : right).push_back(i);
    }
    const int l = grow(left, depth + 1);
    const int r = grow(right, depth + 1);
    auto& node = tree_.nodes[static_cast<std::size_t>(id)];
    node.feature = best.feature;
    node.threshold = best.threshold;
    node.left = l;
    node.right = r;
    return id;
  }

  SplitChoice find_split(const std::vector<std::size_t>& idx, double gs, double hs) const {
    SplitChoice best;
    const auto n = idx.size();
    const auto min_leaf = static_cast<std::size_t>(cfg_.min_leaf);
    if (n < 2 * min_leaf) return best;
    const double lambda = cfg_.lambda_l2;
    const double parent = gs * gs / (hs + lambda);
    std::vector<std::size_t> order = idx;
    for (int f = 0; f < kBoostInputs; ++f) {
      const auto fi = static_cast<std::size_t>(f);
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return x_[a][fi] < x_[b][fi]; });
      double gl = 0.0;
      double hl = 0.0;
      for (std::size_t i = 0; i + 1 < n; ++i) {
        gl += g_[order[i]];
        hl += h_[order[i]];
        const double lo = x_[order[i]][fi];
        const double hi = x_[order[i + 1]][fi];
        if (!(lo < hi) || i + 1 < min_leaf || n - (i + 1) < min_leaf) continue;
        const double gr = gs - gl;
        const double hr = hs - hl;
        const double gain = gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - parent;
        if (gain > best.gain) {
          best.feature = f;
          best.threshold = lo + (hi - lo) / 2.0;
          best.gain = gain;
        }
      }
    }
    return best;
  }

  std::span<const BoostInput> x_;
  std::span<const double> g_;
  std::span<const double> h_;
  const BoostConfig& cfg_;
  Tree tree_;
};

std::array<double, kNumScores> softmax(const std::array<double, kNumScores>& z) {
  const double mx = *std::max_element(z.begin(), z.end());
  std::array<double, kNumScores> p{};
  double sum = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    p[k] = std::exp(z[k] - mx);
    sum += p[k];
  }
  for (auto& v : p) v /= sum;
  return p;
}

std::array<double, kNumScores> raw_scores(const TreeEnsemble& m, const BoostInput& x) {
  std::array<double, kNumScores> z = m.base_score;
  for (const auto& round : m.rounds) {
    for (std::size_t k = 0; k < z.size(); ++k) z[k] += round[k].eval(x);
  }
  return z;
}

double mean_log_loss(const std::vector<std::array<double, kNumScores>>& scores,
                     std::span<const LabeledFeatures> data) {
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto p = softmax(scores[i]);
    total -= std::log(std::max(p[static_cast<std::size_t>(data[i].score)], 1e-300));
  }
  return total / static_cast<double>(data.size());
}

}  // namespace

Tree fit_tree(std::span<const BoostInput> x, std::span<const double> grad,
              std::span<const double> hess, const BoostConfig& cfg) {
  if (x.size() != grad.size() || x.size() != hess.size() || x.empty()) {
    throw ShapeMismatch("fit_tree needs equal, nonempty inputs");
  }
  return TreeBuilder(x, grad, hess, cfg).build();
}

TreeEnsemble fit(std::span<const LabeledFeatures> data, const BoostConfig& cfg,
                 std::vector<double>* loss_history) {
  validate(cfg);
  std::array<int, kNumScores> counts{};
  std::vector<BoostInput> x;
  x.reserve(data.size());
  for (const auto& row : data) {
    if (row.score < 0 || row.score >= kNumScores) {
      throw DegenerateDataset("score " + std::to_string(row.score) + " outside 0..3");
    }
    const BoostInput in = expand_features(row.features);
    if (!std::all_of(in.begin(), in.end(), [](double v) { return std::isfinite(v); })) {
      throw DegenerateDataset("non-finite feature value");
    }
    ++counts[static_cast<std::size_t>(row.score)];
    x.push_back(in);
  }
  if (std::count_if(counts.begin(), counts.end(), [](int c) { return c > 0; }) < 2) {
    throw DegenerateDataset("training data must contain at least two classes");
  }

  TreeEnsemble m;
  m.config = cfg;
  const double n = static_cast<double>(data.size());
  for (std::size_t k = 0; k < counts.size(); ++k) {
    m.base_score[k] = std::log((counts[k] + 0.5) / (n + 0.5 * kNumScores));
  }
  std::vector<std::array<double, kNumScores>> scores(data.size(), m.base_score);
  if (loss_history) loss_history->push_back(mean_log_loss(scores, data));

  std::vector<double> g(data.size());
  std::vector<double> h(data.size());
  std::vector<std::array<double, kNumScores>> probs(data.size());
  for (int r = 0; r < cfg.n_rounds; ++r) {
    for (std::size_t i = 0; i < data.size(); ++i) probs[i] = softmax(scores[i]);
    std::array<Tree, kNumScores> round;
    for (std::size_t k = 0; k < kNumScores; ++k) {
      for (std::size_t i = 0; i < data.size(); ++i) {
        const double p = probs[i][k];
        g[i] = p - (static_cast<std::size_t>(data[i].score) == k ? 1.0 : 0.0);
        h[i] = std::max(p * (1.0 - p), 1e-16);
      }
      round[k] = fit_tree(x, g, h, cfg);
    }
    for (std::size_t i = 0; i < data.size(); ++i) {
      for (std::size_t k = 0; k < kNumScores; ++k) scores[i][k] += round[k].eval(x[i]);
    }
    m.rounds.push_back(std::move(round));
    if (loss_history) loss_history->push_back(mean_log_loss(scores, data));
  }
  return m;
}

Prediction predict_input(const TreeEnsemble& m, const BoostInput& x) {
  Prediction out;
  out.probs = softmax(raw_scores(m, x));
  out.score = static_cast<int>(std::max_element(out.probs.begin(), out.probs.end()) - out.probs.begin());
  return out;
}

Prediction predict(const TreeEnsemble& m, const FeatureVector& f) {
  return predict_input(m, expand_features(f));
}

double log_loss(const TreeEnsemble& m, std::span<const LabeledFeatures> data) {
  std::vector<std::array<double, kNumScores>> scores;
  scores.reserve(data.size());
  for (const auto& row : data) scores.push_back(raw_scores(m, expand_features(row.features)));
  return mean_log_loss(scores, data);
}

std::vector<std::size_t> FoldPlan::test_indices(int fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold_of.size(); ++i) {
    if (fold_of[i] == fold) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> FoldPlan::train_indices(int fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold_of.size(); ++i) {
    if (fold_of[i] != fold) out.push_back(i);
  }
  return out;
}

FoldPlan stratified_kfold(std::span<const int> labels, int k, std::uint64_t seed,
                          const std::function<bool(std::size_t, std::size_t)>& less) {
  if (k < 2) throw InvalidConfig("k must be >= 2");
  int max_label = -1;
  for (int y : labels) {
    if (y < 0) throw InvalidConfig("negative class label");
    max_label = std::max(max_label, y);
  }
  std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(max_label + 1));
  for (std::size_t i = 0; i < labels.size(); ++i) members[static_cast<std::size_t>(labels[i])].push_back(i);

  FoldPlan plan;
  plan.k = k;
  plan.fold_of.assign(labels.size(), -1);
  std::mt19937_64 rng(seed);
  int next = 0;
  for (std::size_t c = 0; c < members.size(); ++c) {
    auto& m = members[c];
    if (m.empty()) continue;
    if (m.size() < static_cast<std::size_t>(k)) {
      throw ClassTooSmall("class " + std::to_string(c) + " has " + std::to_string(m.size()) +
                          " members, need at least " + std::to_string(k));
    }
    std::stable_sort(m.begin(), m.end(), less);
    std::shuffle(m.begin(), m.end(), rng);
    for (auto i : m) {
      plan.fold_of[i] = next;
      next = (next + 1) % k;
    }
  }
  return plan;
}

FoldPlan stratified_kfold(std::span<const LabeledFeatures> data, int k, std::uint64_t seed) {
  std::vector<int> labels;
  labels.reserve(data.size());
  for (const auto& row : data) labels.push_back(row.score);
  auto key = [&data](std::size_t i) {
    const auto& f = data[i].features;
    return std::tuple(f.mean_amp, f.rsd_amp, f.mean_int, f.rsd_int, f.fatigue, f.arrest);
  };
  return stratified_kfold(labels, k, seed,
                          [&key](std::size_t a, std::size_t b) { return key(a) < key(b); });
}

void save(std::ostream& out, const TreeEnsemble& m) {
  out << nlohmann::json(m).dump(1) << '\n';
}

TreeEnsemble load_ensemble(std::istream& in) {
  try {
    const auto j = nlohmann::json::parse(in);
    return j.get<TreeEnsemble>();
  } catch (const nlohmann::json::exception& e) {
    throw ModelFormatError(std::string("bad classifier file: ") + e.what());
  } catch (const ConfigError& e) {
    throw ModelFormatError(std::string("bad classifier file: ") + e.what());
  }
}

void save_ensemble_file(const std::string& path, const TreeEnsemble& m) {
  std::ofstream out(path);
  if (!out) throw MissingArtifact("cannot write " + path);
  save(out, m);
}

TreeEnsemble load_ensemble_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MissingArtifact("cannot open " + path);
  return load_ensemble(in);
}

void dump_text(std::ostream& out, const TreeEnsemble& m) {
  static constexpr const char* kNames[kBoostInputs] = {
      "mean_amp", "rsd_amp", "mean_int", "rsd_int", "fatigue",
      "arrest=0", "arrest=1", "arrest=2", "arrest=3"};
  out << "base_score";
  for (double b : m.base_score) out << ' ' << b;
  out << '\n';
  for (std::size_t r = 0; r < m.rounds.size(); ++r) {
    for (std::size_t k = 0; k < kNumScores; ++k) {
      out << "round " << r << " class " << k << '\n';
      const auto& nodes = m.rounds[r][k].nodes;
      for (std::size_t i = 0; i < nodes.size(); ++i) {
        const auto& n = nodes[i];
        out << "  [" << i << "] ";
        if (n.is_leaf()) {
          out << "leaf " << n.value << '\n';
        } else {
          out << kNames[n.feature] << " < " << n.threshold << " ? " << n.left << " : " << n.right
              << '\n';
        }
      }
    }
  }
}

}  // namespace brady
