#include "brady/features.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>

#include <boost/math/distributions/students_t.hpp>

#include "brady/errors.hpp"
#include "text_util.hpp"

namespace brady {

namespace {

struct MeanRsd {
  double mean;
  double rsd;
};

MeanRsd mean_rsd(std::span<const double> x) {
  const double n = static_cast<double>(x.size());
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double ss = 0.0;
  for (const double v : x) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / n) / mean};
}

}  // namespace

SummaryStats summary_stats(const CycleSeries& c) {
  if (c.amplitudes.size() < 2 || c.intervals.empty()) {
    throw InsufficientCycles("need >= 2 amplitudes and >= 1 interval, got " +
                             std::to_string(c.amplitudes.size()) + " and " +
                             std::to_string(c.intervals.size()));
  }
  const auto amp = mean_rsd(c.amplitudes);
  const auto in = mean_rsd(c.intervals);
  return {amp.mean, amp.rsd, in.mean, in.rsd};
}

LocalSlope local_slope(std::span<const double> window, int window_index, double amp_mean) {
  const std::size_t n = window.size();
  if (n < 3) throw InsufficientCycles("local regression needs at least 3 points");
  const double xm = (static_cast<double>(n) - 1.0) / 2.0;
  const double ym = std::accumulate(window.begin(), window.end(), 0.0) / static_cast<double>(n);
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = static_cast<double>(i) - xm;
    sxx += dx * dx;
    sxy += dx * (window[i] - ym);
  }
  LocalSlope out;
  out.beta = sxy / sxx;
  out.window_index = window_index;
  out.loc_amp = ym;
  out.amp = amp_mean;

  double sse = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double fit = ym + out.beta * (static_cast<double>(i) - xm);
    sse += (window[i] - fit) * (window[i] - fit);
  }
  // Residuals at rounding level count as an exact fit.
  double scale = 0.0;
  for (const double v : window) scale = std::max(scale, std::abs(v));
  const double dof = static_cast<double>(n) - 2.0;
  if (sse <= 1e-24 * std::max(scale * scale, 1e-300) * static_cast<double>(n)) {
    if (std::abs(out.beta) <= 1e-12 * scale) {
      out.beta = 0.0;
      out.p_value = 1.0;
    } else {
      out.p_value = 0.0;
    }
    return out;
  }
  const double se = std::sqrt(sse / dof / sxx);
  const double t = out.beta / se;
  const boost::math::students_t dist(dof);
  out.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
  return out;
}

FatigueResult fatigue_details(std::span<const double> amplitudes, const FatigueConfig& cfg) {
  FatigueResult out;
  amplitudes = amplitudes.first(std::min(amplitudes.size(), kMaxCycles));
  const auto n = amplitudes.size();
  const auto w = static_cast<std::size_t>(cfg.window);
  if (n < w) {
    out.insufficient = true;
    return out;
  }
  const double amp = std::accumulate(amplitudes.begin(), amplitudes.end(), 0.0) /
                     static_cast<double>(n);
  for (std::size_t i = 0; i + w <= n; ++i) {
    auto slope = local_slope(amplitudes.subspan(i, w), static_cast<int>(i), amp);
    if (slope.p_value < cfg.alpha) {
      const double ratio = slope.loc_amp / slope.amp;
      out.value += -(slope.beta * slope.beta * slope.beta) /
                   (std::sqrt(static_cast<double>(i) + 1.0) * ratio * ratio);
    }
    out.windows.push_back(slope);
  }
  return out;
}

double fatigue_feature(std::span<const double> amplitudes, const FatigueConfig& cfg) {
  return fatigue_details(amplitudes, cfg).value;
}

void write_feature_csv(std::ostream& out, std::span<const FeatureRow> rows) {
  using detail::format_double;
  out << kFeatureCsvHeader << '\n';
  for (const auto& r : rows) {
    const auto& f = r.features;
    out << r.subject_id << ',' << to_string(r.movement) << ',' << to_string(r.side) << ','
        << format_double(f.mean_amp) << ',' << format_double(f.rsd_amp) << ','
        << format_double(f.mean_int) << ',' << format_double(f.rsd_int) << ','
        << format_double(f.fatigue) << ',' << f.arrest << ',';
    if (r.score) out << *r.score;
    out << '\n';
  }
}

std::vector<FeatureRow> read_feature_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || detail::trim(line) != kFeatureCsvHeader) {
    throw MalformedInput(std::string("feature CSV header must be: ") + kFeatureCsvHeader);
  }
  std::vector<FeatureRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const auto trimmed = detail::trim(line);
    if (trimmed.empty()) continue;
    const auto cells = detail::split(trimmed, ',');
    if (cells.size() != 10) {
      throw MalformedInput("feature CSV line " + std::to_string(line_no) + ": expected 10 cells");
    }
    try {
      FeatureRow r;
      r.subject_id = std::string(cells[0]);
      r.movement = parse_movement(detail::trim(cells[1]));
      r.side = parse_side(detail::trim(cells[2]));
      r.features.mean_amp = detail::parse_double(cells[3]);
      r.features.rsd_amp = detail::parse_double(cells[4]);
      r.features.mean_int = detail::parse_double(cells[5]);
      r.features.rsd_int = detail::parse_double(cells[6]);
      r.features.fatigue = detail::parse_double(cells[7]);
      r.features.arrest = detail::parse_int(cells[8]);
      if (!detail::trim(cells[9]).empty()) r.score = detail::parse_int(cells[9]);
      const auto& f = r.features;
      for (double v : {f.mean_amp, f.rsd_amp, f.mean_int, f.rsd_int, f.fatigue}) {
        if (!std::isfinite(v)) throw std::invalid_argument("non-finite feature value");
      }
      if (f.arrest < 0 || f.arrest > 3) throw std::invalid_argument("arrest must be 0..3");
      if (r.score && (*r.score < 0 || *r.score > 3)) throw std::invalid_argument("score must be 0..3");
      rows.push_back(std::move(r));
    } catch (const std::invalid_argument& e) {
      throw MalformedInput("feature CSV line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return rows;
}

}  // namespace brady
