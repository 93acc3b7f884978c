#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace brady {

struct ConfusionReport {
  std::array<std::array<std::int64_t, 4>, 4> matrix{};  // [truth][pred]
  std::int64_t n = 0;
  double exact_accuracy = 0.0;
  double within_one_accuracy = 0.0;
};

// Throws LengthMismatch on unequal or empty inputs, MalformedInput on labels
// outside 0..3.
ConfusionReport confusion_and_accuracy(std::span<const int> truth, std::span<const int> pred);

struct RocPoint {
  double threshold = 0.0;
  double fpr = 0.0;
  double tpr = 0.0;
};

// Mild (0, 1) versus severe (2, 3).
struct AucReport {
  double auc = 0.0;
  std::int64_t n_pos = 0;
  std::int64_t n_neg = 0;
  std::int64_t concordant = 0;
  std::int64_t ties = 0;
  std::vector<RocPoint> roc;  // from (0, 0) to (1, 1), one point per distinct score
};

inline bool is_severe(int score) { return score >= 2; }

// AUC = (2 * concordant + ties) / (2 * n_pos * n_neg), from exact integer
// pair counts. Throws LengthMismatch, SingleClass.
AucReport binary_auc(std::span<const int> truth, std::span<const double> severe_score);

// Area under the piecewise-linear ROC curve.
double trapezoid_area(std::span<const RocPoint> roc);

struct EvalReport {
  ConfusionReport confusion;
  AucReport auc;
  bool auc_defined = true;  // false when only one binary class is present
};

EvalReport evaluate(std::span<const int> truth, std::span<const int> pred,
                    std::span<const double> severe_score);

}  // namespace brady
