#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "brady/features.hpp"
#include "oracles/oracles.hpp"

namespace props {

inline double window_contribution(const brady::LocalSlope& w) {
  const double ratio = w.loc_amp / w.amp;
  return -w.beta * w.beta * w.beta / (std::sqrt(w.window_index + 1.0) * ratio * ratio);
}

// Checks the fatigue invariants on one seeded random case and returns a
// description of every violation (empty when all hold).
inline std::vector<std::string> fatigue_violations(std::uint64_t seed) {
  std::vector<std::string> bad;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> step(0.01, 0.12);
  std::uniform_real_distribution<double> start(0.8, 2.0);
  std::uniform_real_distribution<double> scale(0.2, 5.0);
  std::uniform_int_distribution<int> length(5, 10);
  const int n = length(rng);

  std::vector<double> dec{start(rng)};
  while (static_cast<int>(dec.size()) < n) dec.push_back(dec.back() - step(rng) * dec.front() / 4.0);
  std::vector<double> inc(dec.rbegin(), dec.rend());
  const std::vector<double> flat(n, start(rng));

  auto significant = [](const std::vector<double>& a) {
    for (std::size_t i = 0; i + 5 <= std::min<std::size_t>(a.size(), 10); ++i) {
      if (oracle::ols_slope5(std::span(a).subspan(i, 5)).p < 0.1) return true;
    }
    return false;
  };

  const double f_dec = brady::fatigue_feature(dec);
  const double f_inc = brady::fatigue_feature(inc);
  if (significant(dec) && !(f_dec > 0.0)) bad.push_back("decreasing sequence not positive");
  if (significant(inc) && !(f_inc < 0.0)) bad.push_back("increasing sequence not negative");
  if (brady::fatigue_feature(flat) != 0.0) bad.push_back("constant sequence not exactly zero");
  if (std::abs(f_dec - oracle::fatigue_direct(dec)) > 1e-9 * std::max(1.0, std::abs(f_dec)))
    bad.push_back("decreasing sequence differs from direct evaluation");

  // Cubic scaling.
  const double c = scale(rng);
  std::vector<double> scaled;
  for (double a : dec) scaled.push_back(c * a);
  const double f_scaled = brady::fatigue_feature(scaled);
  const double expected = c * c * c * f_dec;
  if (std::abs(f_scaled - expected) > 1e-9 * std::max(1e-12, std::abs(expected)))
    bad.push_back("cubic scaling violated");

  // Early-onset dominance: the same significant decrement placed in window
  // 0 versus window 3 of sequences with the same multiset of amplitudes.
  std::vector<double> w{dec.begin(), dec.begin() + 5};
  if (oracle::ols_slope5(w).p < 0.1) {
    std::uniform_real_distribution<double> pad(0.5, 2.0);
    std::vector<double> rest{pad(rng), pad(rng), pad(rng)};
    std::vector<double> early = w;
    early.insert(early.end(), rest.begin(), rest.end());
    std::vector<double> late = rest;
    late.insert(late.end(), w.begin(), w.end());
    const auto de = brady::fatigue_details(early);
    const auto dl = brady::fatigue_details(late);
    if (de.windows.size() != 4 || dl.windows.size() != 4) {
      bad.push_back("unexpected window count");
    } else {
      const double ce = window_contribution(de.windows[0]);
      const double cl = window_contribution(dl.windows[3]);
      if (!(ce > cl)) bad.push_back("window 0 does not dominate window 3");
    }
  }
  return bad;
}

}  // namespace props
