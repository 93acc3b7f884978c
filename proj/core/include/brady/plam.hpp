#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "brady/bspline.hpp"
#include "brady/features.hpp"

namespace brady {

// Cumulative-logit partially linear additive model:
//   logit P(Y <= c) = theta_c - eta,
//   eta = s1(mean_amp) + s2(rsd_amp) + s3(mean_int) + s4(rsd_int)
//         + beta1 * fatigue + gamma_arrest,   gamma_0 = 0.
// The regression intercept is absorbed into the thresholds.

inline constexpr int kNumSmooths = 4;

struct PlamConfig {
  int n_basis = 10;
  std::array<double, kNumSmooths> lambda{1.0, 1.0, 1.0, 1.0};
  // When set, one shared lambda is picked from `lambda_grid` by 5-fold
  // cross-validated deviance.
  bool select_lambda = false;
  std::vector<double> lambda_grid{0.01, 0.1, 1.0, 10.0, 100.0};
  int max_cycles = 1000;
  double tol = 1e-6;
  double separation_bound = 1e3;
  std::uint64_t seed = 0;  // lambda selection folds

  friend bool operator==(const PlamConfig&, const PlamConfig&) = default;
};

struct SmoothTerm {
  BSplineBasis basis;
  Eigen::MatrixXd z;     // n_basis x (n_basis - 1), sum-to-zero constraint
  Eigen::VectorXd coef;  // constrained coefficients, length n_basis - 1
  Eigen::MatrixXd penalty;  // Z^T D^T D Z
  double lambda = 1.0;
  bool aliased = false;  // constant covariate, term fixed at zero

  double eval(double x) const;
};

struct PlamModel {
  std::array<double, 3> theta{};
  std::array<SmoothTerm, kNumSmooths> smooths;
  double beta1 = 0.0;
  std::array<double, 4> gamma{};  // gamma[0] is the reference, always 0
  bool fatigue_aliased = false;
  std::array<bool, 4> gamma_aliased{true, false, false, false};
  bool separation = false;
  bool converged = false;
  int cycles = 0;
  // Penalized log-likelihood at the start and after every cycle.
  std::vector<double> objective_history;
  double log_likelihood = 0.0;

  double eta(const FeatureVector& f) const;
  // P(Y <= 0), P(Y <= 1), P(Y <= 2).
  std::array<double, 3> cumulative_probs(const FeatureVector& f) const;
  std::array<double, 4> class_probs(const FeatureVector& f) const;
};

// Throws DegenerateDataset (fewer than 30 rows or a missing score level) and
// NonConvergence. `warm_start` seeds the thresholds and parametric
// coefficients.
PlamModel fit_plam(std::span<const LabeledFeatures> rows, const PlamConfig& cfg = {},
                   const PlamModel* warm_start = nullptr);

double plam_deviance(const PlamModel& m, std::span<const LabeledFeatures> rows);
// Deviance of the thresholds-only model at the empirical class frequencies.
double null_deviance(std::span<const LabeledFeatures> rows);
double deviance_explained(const PlamModel& m, std::span<const LabeledFeatures> rows);

// Coefficients reported by the bootstrap: beta1, gamma1, gamma2, gamma3.
inline constexpr int kNumParametric = 4;
using ParametricVector = std::array<double, kNumParametric>;
ParametricVector parametric_coefficients(const PlamModel& m);  // NaN where aliased

struct BootstrapResult {
  int requested = 0;
  int skipped = 0;  // replicates that failed to converge
  std::vector<ParametricVector> replicates;
  ParametricVector estimate{};
  ParametricVector se{};
  ParametricVector p_value{};  // NaN when undefined
  ParametricVector ci_low{};   // 2.5% percentile
  ParametricVector ci_high{};  // 97.5% percentile
  std::array<bool, kNumParametric> degenerate{};
};

// Stratified-by-score row resampling; replicate b uses derive_seed(seed, b)
// so results do not depend on `threads`. Throws NonConvergence when more
// than 10% of the replicates fail.
BootstrapResult bootstrap_inference(std::span<const LabeledFeatures> rows, const PlamConfig& cfg,
                                    int n_boot, std::uint64_t seed, int threads = 1);

struct PlamSimSpec {
  int n = 500;
  double beta1 = 2.0;
  std::array<double, 4> gamma{0.0, 0.5, 1.0, 1.5};
  std::array<double, 3> theta{-1.5, 0.75, 3.0};
  std::uint64_t seed = 0;
};

// Rows from the parametric cumulative-logit model with null smooth effects:
// fatigue ~ N(0, 1), arrest uniform on 0..3, other features uniform.
std::vector<LabeledFeatures> simulate_cumulative_logit(const PlamSimSpec& spec);

}  // namespace brady
