#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "brady/bspline.hpp"
#include "brady/errors.hpp"
#include "brady/evaluation.hpp"
#include "brady/mixed_model.hpp"
#include "brady/plam.hpp"
#include "oracles/oracles.hpp"

using namespace brady;

namespace {

std::vector<LabeledFeatures> constant_rows(const std::array<int, 4>& counts) {
  std::vector<LabeledFeatures> out;
  for (int k = 0; k < 4; ++k)
    for (int i = 0; i < counts[k]; ++i) out.push_back({{1.0, 0.1, 0.4, 0.1, 0.0, 0}, k});
  return out;
}

std::vector<LabeledFeatures> sim(int n, std::uint64_t seed, double beta1 = 2.0) {
  PlamSimSpec s;
  s.n = n;
  s.seed = seed;
  s.beta1 = beta1;
  return simulate_cumulative_logit(s);
}

std::vector<GroupedValue> grouped(std::uint64_t seed, int groups, int per_group, double mu,
                                  double sd_u, double sd_e) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<GroupedValue> out;
  for (int g = 0; g < groups; ++g) {
    const double u = sd_u * n(rng);
    for (int i = 0; i < per_group; ++i) out.push_back({mu + u + sd_e * n(rng), g});
  }
  return out;
}

}  // namespace

TEST(BSpline, PartitionOfUnityAndNonNegative) {
  const BSplineBasis b(-0.7, 2.3, 10);
  EXPECT_EQ(b.size(), 10);
  for (int i = 0; i <= 300; ++i) {
    const double x = -0.7 + 3.0 * i / 300.0;
    const auto row = b.eval(x);
    EXPECT_NEAR(row.sum(), 1.0, 1e-12) << x;
    EXPECT_GE(row.minCoeff(), -1e-15);
  }
  EXPECT_EQ(b.eval(-5.0), b.eval(-0.7));
}

TEST(BSpline, PenaltyAndConstraint) {
  const auto p = difference_penalty(8, 2);
  Eigen::VectorXd lin(8);
  for (int i = 0; i < 8; ++i) lin[i] = 3.0 - 0.5 * i;
  EXPECT_LT((p * lin).norm(), 1e-12);
  EXPECT_LT((p * Eigen::VectorXd::Ones(8)).norm(), 1e-12);

  Eigen::VectorXd c = Eigen::VectorXd::LinSpaced(8, 1.0, 4.0);
  const auto z = sum_to_zero_basis(c);
  ASSERT_EQ(z.rows(), 8);
  ASSERT_EQ(z.cols(), 7);
  EXPECT_LT((c.transpose() * z).norm(), 1e-12);
  EXPECT_LT((z.transpose() * z - Eigen::MatrixXd::Identity(7, 7)).norm(), 1e-12);
}

TEST(Plam, InterceptOnlyMatchesClassFrequencies) {
  const std::array<int, 4> counts{10, 12, 8, 10};
  const auto rows = constant_rows(counts);
  const auto m = fit_plam(rows);
  EXPECT_TRUE(m.converged);
  EXPECT_TRUE(m.fatigue_aliased);
  const auto p = m.class_probs(rows[0].features);
  for (int k = 0; k < 4; ++k) EXPECT_NEAR(p[k], counts[k] / 40.0, 1e-6);
  EXPECT_NEAR(deviance_explained(m, rows), 0.0, 1e-6);
  const auto coef = parametric_coefficients(m);
  EXPECT_TRUE(std::isnan(coef[0]));
}

TEST(Plam, PermutationInvariant) {
  const auto rows = sim(200, 3);
  auto permuted = rows;
  std::mt19937_64 rng(4);
  std::shuffle(permuted.begin(), permuted.end(), rng);
  const auto a = fit_plam(rows);
  const auto b = fit_plam(permuted);
  for (const auto& r : rows) {
    const auto pa = a.class_probs(r.features);
    const auto pb = b.class_probs(r.features);
    for (int k = 0; k < 4; ++k) EXPECT_NEAR(pa[k], pb[k], 1e-9);
  }
}

TEST(Plam, ObjectiveNonDecreasing) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto m = fit_plam(sim(250, 10 + seed));
    ASSERT_GE(m.objective_history.size(), 2u);
    for (std::size_t i = 1; i < m.objective_history.size(); ++i)
      EXPECT_GE(m.objective_history[i], m.objective_history[i - 1] - 1e-10);
  }
}

TEST(Plam, SmoothsCenteredAndCumulativeMonotone) {
  const auto rows = sim(300, 5);
  const auto m = fit_plam(rows);
  std::array<double, kNumSmooths> sums{};
  for (const auto& r : rows) {
    const std::array<double, 4> x{r.features.mean_amp, r.features.rsd_amp, r.features.mean_int,
                                  r.features.rsd_int};
    for (int j = 0; j < kNumSmooths; ++j) sums[j] += m.smooths[j].eval(x[j]);
    const auto c = m.cumulative_probs(r.features);
    EXPECT_LE(c[0], c[1]);
    EXPECT_LE(c[1], c[2]);
    const auto p = m.class_probs(r.features);
    EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-12);
  }
  for (double s : sums) EXPECT_NEAR(s / rows.size(), 0.0, 1e-8);
  EXPECT_LT(m.theta[0], m.theta[1]);
  EXPECT_LT(m.theta[1], m.theta[2]);
}

TEST(Plam, SeparatedDataExplainsDeviance) {
  auto rows = sim(120, 6);
  for (auto& r : rows) {
    r.features.fatigue = r.score + 0.1 * std::sin(r.features.mean_amp * 50.0);
    r.features.arrest = 0;
  }
  const auto m = fit_plam(rows);
  EXPECT_GT(deviance_explained(m, rows), 0.95);
  EXPECT_TRUE(m.separation);
}

TEST(Plam, DegenerateInputs) {
  EXPECT_THROW(fit_plam(constant_rows({5, 5, 5, 5})), DegenerateDataset);
  EXPECT_THROW(fit_plam(constant_rows({20, 20, 0, 10})), DegenerateDataset);
}

TEST(Plam, BootstrapDeterministicAcrossThreads) {
  const auto rows = sim(150, 7);
  const auto a = bootstrap_inference(rows, {}, 8, 99, 1);
  const auto b = bootstrap_inference(rows, {}, 8, 99, 2);
  EXPECT_EQ(a.requested, 8);
  ASSERT_EQ(a.replicates.size(), b.replicates.size());
  for (std::size_t i = 0; i < a.replicates.size(); ++i) EXPECT_EQ(a.replicates[i], b.replicates[i]);
  EXPECT_EQ(a.se, b.se);
  for (int j = 0; j < kNumParametric; ++j) {
    EXPECT_LE(a.ci_low[j], a.ci_high[j]);
    EXPECT_GT(a.se[j], 0.0);
  }
}

TEST(Mixed, AllZerosIsDegenerate) {
  std::vector<GroupedValue> d;
  for (int g = 0; g < 4; ++g)
    for (int i = 0; i < 3; ++i) d.push_back({0.0, g});
  const auto m = fit_mixed(d);
  EXPECT_TRUE(m.degenerate);
  EXPECT_EQ(m.p_value, 1.0);
  EXPECT_EQ(m.beta0, 0.0);
}

TEST(Mixed, SingleGroupReducesToMeanTest) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto d = grouped(seed, 1, 12, 0.3, 0.0, 1.0);
    std::vector<double> v;
    for (const auto& x : d) v.push_back(x.value);
    const auto ref = oracle::mean_test(v);
    const auto m = fit_mixed(d);
    EXPECT_NEAR(m.beta0, ref.mean, 1e-9);
    EXPECT_NEAR(m.se_beta0, ref.se, 1e-9);
    EXPECT_NEAR(m.p_value, ref.p, 1e-9);
    EXPECT_EQ(m.n_groups, 1);
  }
}

TEST(Mixed, NullCalibration) {
  int kept = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto m = fit_mixed(grouped(1000 + seed, 10, 5, 0.0, 0.5, 1.0));
    kept += m.p_value >= 0.05;
  }
  EXPECT_GE(kept, 17);
}

TEST(Mixed, DetectsShiftAndVarianceComponents) {
  const auto m = fit_mixed(grouped(11, 20, 6, 1.0, 1.0, 0.5));
  EXPECT_LT(m.p_value, 0.01);
  EXPECT_GT(m.sigma2_u, 0.3);
  EXPECT_NEAR(m.sigma2_e, 0.25, 0.1);
  const auto d = grouped(11, 20, 6, 1.0, 1.0, 0.5);
  const double rho = m.sigma2_u / m.sigma2_e;
  const double at = reml_profile_loglik(d, rho);
  EXPECT_GE(at, reml_profile_loglik(d, rho * 1.05) - 1e-9);
  EXPECT_GE(at, reml_profile_loglik(d, rho * 0.95) - 1e-9);
}

TEST(Mixed, SmallGroupRejected) {
  std::vector<GroupedValue> d{{1.0, 0}, {2.0, 0}, {3.0, 1}};
  EXPECT_THROW(fit_mixed(d), DegenerateGroups);
  EXPECT_THROW(fit_mixed(std::vector<GroupedValue>{}), DegenerateGroups);
}

TEST(Confusion, Example) {
  const std::vector<int> truth{0, 1, 2, 3};
  const std::vector<int> pred{0, 2, 2, 1};
  const auto r = confusion_and_accuracy(truth, pred);
  EXPECT_EQ(r.n, 4);
  EXPECT_DOUBLE_EQ(r.exact_accuracy, 0.5);
  EXPECT_DOUBLE_EQ(r.within_one_accuracy, 0.75);
  EXPECT_EQ(r.matrix[1][2], 1);
  EXPECT_EQ(r.matrix[3][1], 1);
  EXPECT_THROW(confusion_and_accuracy(truth, std::vector<int>{0, 1}), LengthMismatch);
  EXPECT_THROW(confusion_and_accuracy(std::vector<int>{4}, std::vector<int>{0}), MalformedInput);
}

TEST(Auc, Examples) {
  const std::vector<int> truth{0, 1, 2, 3};
  const auto r = binary_auc(truth, std::vector<double>{0.1, 0.4, 0.35, 0.8});
  EXPECT_DOUBLE_EQ(r.auc, 0.75);
  EXPECT_EQ(r.concordant, 3);
  EXPECT_EQ(r.n_pos, 2);
  const auto t = binary_auc(truth, std::vector<double>(4, 0.5));
  EXPECT_DOUBLE_EQ(t.auc, 0.5);
  EXPECT_EQ(t.ties, 4);
  EXPECT_THROW(binary_auc(std::vector<int>{0, 1}, std::vector<double>{0.1, 0.2}), SingleClass);
  EXPECT_THROW(binary_auc(truth, std::vector<double>{0.1}), LengthMismatch);
}

TEST(Auc, MatchesBruteForceAndTrapezoid) {
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<int> label(0, 3);
  std::uniform_int_distribution<int> coarse(0, 9);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 2 + trial * 4;
    std::vector<int> truth(n);
    std::vector<double> score(n);
    for (int i = 0; i < n; ++i) {
      truth[i] = label(rng);
      score[i] = coarse(rng) / 10.0 + 0.05 * truth[i] * (trial % 2);
    }
    truth[0] = 0;
    truth[1] = 3;
    const auto r = binary_auc(truth, score);
    EXPECT_EQ(r.auc, oracle::brute_auc(truth, score));
    EXPECT_NEAR(trapezoid_area(r.roc), r.auc, 1e-12);
    EXPECT_EQ(r.roc.front().fpr, 0.0);
    EXPECT_EQ(r.roc.back().tpr, 1.0);
  }
}

TEST(Evaluate, SingleClassLeavesAucUndefined) {
  const std::vector<int> truth{0, 1, 1};
  const auto r = evaluate(truth, truth, std::vector<double>{0.1, 0.2, 0.3});
  EXPECT_FALSE(r.auc_defined);
  EXPECT_DOUBLE_EQ(r.confusion.exact_accuracy, 1.0);
}
