#pragma once

#include <span>

namespace brady {

struct GroupedValue {
  double value = 0.0;
  int group = 0;
};

// One-way random-intercept model y_ij = beta0 + u_j + e_ij fitted by REML.
struct MixedModel {
  double beta0 = 0.0;
  double sigma2_u = 0.0;
  double sigma2_e = 0.0;
  double se_beta0 = 0.0;
  double p_value = 1.0;  // two-sided normal Wald test of beta0 = 0
  double reml_loglik = 0.0;
  int n_groups = 0;
  int n_obs = 0;
  bool degenerate = false;  // all values identical; p forced to 1
};

// REML log-likelihood (up to a constant) profiled over sigma2_e, as a
// function of rho = sigma2_u / sigma2_e.
double reml_profile_loglik(std::span<const GroupedValue> data, double rho);

// Throws DegenerateGroups when the data are empty or some group has fewer
// than two observations. A single group reduces to the sample-mean test.
MixedModel fit_mixed(std::span<const GroupedValue> data);

}  // namespace brady
