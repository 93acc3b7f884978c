#include "brady/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "brady/errors.hpp"

namespace brady {

ConfusionReport confusion_and_accuracy(std::span<const int> truth, std::span<const int> pred) {
  if (truth.size() != pred.size()) {
    throw LengthMismatch("truth has " + std::to_string(truth.size()) + " labels, predictions " +
                         std::to_string(pred.size()));
  }
  if (truth.empty()) throw LengthMismatch("empty input");
  ConfusionReport r;
  std::int64_t exact = 0;
  std::int64_t near = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const int t = truth[i];
    const int p = pred[i];
    if (t < 0 || t > 3 || p < 0 || p > 3) {
      throw MalformedInput("label outside 0..3 at position " + std::to_string(i));
    }
    ++r.matrix[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
    exact += t == p ? 1 : 0;
    near += std::abs(t - p) <= 1 ? 1 : 0;
  }
  r.n = static_cast<std::int64_t>(truth.size());
  r.exact_accuracy = static_cast<double>(exact) / static_cast<double>(r.n);
  r.within_one_accuracy = static_cast<double>(near) / static_cast<double>(r.n);
  return r;
}

AucReport binary_auc(std::span<const int> truth, std::span<const double> severe_score) {
  if (truth.size() != severe_score.size()) {
    throw LengthMismatch("truth has " + std::to_string(truth.size()) + " labels, scores " +
                         std::to_string(severe_score.size()));
  }
  if (truth.empty()) throw LengthMismatch("empty input");
  std::vector<std::size_t> order(truth.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (double s : severe_score) {
    if (std::isnan(s)) throw MalformedInput("NaN score");
  }
  // Descending score; sweeping tie groups gives one ROC vertex per distinct
  // score and the exact concordant/tie pair counts.
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return severe_score[a] > severe_score[b]; });
  AucReport r;
  for (int t : truth) (is_severe(t) ? r.n_pos : r.n_neg) += 1;
  if (r.n_pos == 0 || r.n_neg == 0) {
    throw SingleClass("both mild (0-1) and severe (2-3) cases are required");
  }
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  r.roc.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
  for (std::size_t i = 0; i < order.size();) {
    const double s = severe_score[order[i]];
    std::int64_t gp = 0;
    std::int64_t gn = 0;
    for (; i < order.size() && severe_score[order[i]] == s; ++i) {
      (is_severe(truth[order[i]]) ? gp : gn) += 1;
    }
    // Positives in this group beat every negative seen later; ties inside the group.
    r.concordant += gp * (r.n_neg - fp - gn);
    r.ties += gp * gn;
    tp += gp;
    fp += gn;
    r.roc.push_back({s, static_cast<double>(fp) / static_cast<double>(r.n_neg),
                     static_cast<double>(tp) / static_cast<double>(r.n_pos)});
  }
  r.auc = static_cast<double>(2 * r.concordant + r.ties) /
          (2.0 * static_cast<double>(r.n_pos) * static_cast<double>(r.n_neg));
  return r;
}

double trapezoid_area(std::span<const RocPoint> roc) {
  double area = 0.0;
  for (std::size_t i = 1; i < roc.size(); ++i) {
    area += (roc[i].fpr - roc[i - 1].fpr) * (roc[i].tpr + roc[i - 1].tpr) / 2.0;
  }
  return area;
}

EvalReport evaluate(std::span<const int> truth, std::span<const int> pred,
                    std::span<const double> severe_score) {
  EvalReport r;
  r.confusion = confusion_and_accuracy(truth, pred);
  try {
    r.auc = binary_auc(truth, severe_score);
  } catch (const SingleClass&) {
    r.auc_defined = false;
  }
  return r;
}

}  // namespace brady
