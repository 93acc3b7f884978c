#include "brady/mixed_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <vector>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/tools/minima.hpp>

#include "brady/errors.hpp"

namespace brady {

namespace {

struct GroupSummary {
  double n = 0.0;
  double mean = 0.0;
  double ssw = 0.0;  // within-group sum of squares
};

std::vector<GroupSummary> summarize(std::span<const GroupedValue> data) {
  std::map<int, std::vector<double>> groups;
  for (const auto& d : data) {
    if (!std::isfinite(d.value)) throw DegenerateGroups("non-finite value");
    groups[d.group].push_back(d.value);
  }
  std::vector<GroupSummary> out;
  for (const auto& [g, v] : groups) {
    if (v.size() < 2) {
      throw DegenerateGroups("group " + std::to_string(g) + " has fewer than two observations");
    }
    GroupSummary s;
    s.n = static_cast<double>(v.size());
    for (double x : v) s.mean += x;
    s.mean /= s.n;
    for (double x : v) s.ssw += (x - s.mean) * (x - s.mean);
    out.push_back(s);
  }
  return out;
}

struct Profile {
  double beta0 = 0.0;
  double sigma2 = 0.0;
  double sum_w = 0.0;
  double loglik = 0.0;
};

Profile profile(const std::vector<GroupSummary>& groups, double rho) {
  Profile p;
  double n_total = 0.0;
  double weighted = 0.0;
  double log_det = 0.0;
  for (const auto& g : groups) {
    const double w = g.n / (1.0 + g.n * rho);
    p.sum_w += w;
    weighted += w * g.mean;
    log_det += std::log1p(g.n * rho);
    n_total += g.n;
  }
  p.beta0 = weighted / p.sum_w;
  double q = 0.0;
  for (const auto& g : groups) {
    const double w = g.n / (1.0 + g.n * rho);
    q += g.ssw + w * (g.mean - p.beta0) * (g.mean - p.beta0);
  }
  p.sigma2 = q / (n_total - 1.0);
  p.loglik = -0.5 * ((n_total - 1.0) * std::log(p.sigma2) + log_det + std::log(p.sum_w));
  return p;
}

}  // namespace

double reml_profile_loglik(std::span<const GroupedValue> data, double rho) {
  return profile(summarize(data), rho).loglik;
}

MixedModel fit_mixed(std::span<const GroupedValue> data) {
  if (data.empty()) throw DegenerateGroups("no observations");
  const auto groups = summarize(data);
  MixedModel m;
  m.n_groups = static_cast<int>(groups.size());
  m.n_obs = static_cast<int>(data.size());

  const auto [lo, hi] = std::minmax_element(data.begin(), data.end(),
                                            [](const auto& a, const auto& b) { return a.value < b.value; });
  if (lo->value == hi->value) {
    m.beta0 = lo->value;
    m.degenerate = true;
    m.p_value = 1.0;
    return m;
  }

  double rho = 0.0;
  Profile best = profile(groups, 0.0);
  if (groups.size() >= 2) {
    // Coarse scan on a log grid, then Brent refinement inside the bracketing
    // cells. rho = 0 wins ties.
    double best_rho = 0.0;
    double best_ll = best.loglik;
    std::vector<double> grid{0.0};
    for (int e = -80; e <= 80; ++e) grid.push_back(std::pow(10.0, e / 10.0));
    std::size_t best_i = 0;
    for (std::size_t i = 1; i < grid.size(); ++i) {
      const double ll = profile(groups, grid[i]).loglik;
      if (ll > best_ll) {
        best_ll = ll;
        best_rho = grid[i];
        best_i = i;
      }
    }
    if (best_i > 0) {
      const double a = grid[best_i - 1];
      const double b = grid[std::min(best_i + 1, grid.size() - 1)];
      const auto neg = [&groups](double r) { return -profile(groups, r).loglik; };
      std::uintmax_t iters = 200;
      const auto [r, f] = boost::math::tools::brent_find_minima(neg, a, b, 52, iters);
      if (-f > best_ll) best_rho = r;
    }
    rho = best_rho;
    best = profile(groups, rho);
  }

  m.beta0 = best.beta0;
  m.sigma2_e = best.sigma2;
  m.sigma2_u = rho * best.sigma2;
  m.reml_loglik = best.loglik;
  m.se_beta0 = std::sqrt(best.sigma2 / best.sum_w);
  if (!(m.se_beta0 > 0.0)) {
    m.degenerate = true;
    m.p_value = 1.0;
    return m;
  }
  const boost::math::normal_distribution<double> normal;
  m.p_value = 2.0 * boost::math::cdf(boost::math::complement(normal, std::abs(m.beta0) / m.se_beta0));
  return m;
}

}  // namespace brady
