#include "brady/signal.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <Eigen/Dense>

#include "brady/errors.hpp"

namespace brady {

namespace {

double dist3(const Point3& a, const Point3& b) {
  return std::sqrt((a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y) +
                   (a.z - b.z) * (a.z - b.z));
}

double dist2(const Point3& a, const Point3& b) {
  return std::sqrt((a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y));
}

void check_filter(int window, int polyorder) {
  if (window < 1 || window % 2 == 0) {
    throw InvalidFilterConfig("window must be a positive odd integer, got " +
                              std::to_string(window));
  }
  if (polyorder < 0 || polyorder >= window) {
    throw InvalidFilterConfig("polyorder must satisfy 0 <= polyorder < window");
  }
}

}  // namespace

double palm_length(const LandmarkFrame& f) {
  const double len = dist3(f.points[landmark::kThumbCmc], f.points[landmark::kMiddleMcp]);
  if (!(len >= 1e-9)) throw DegenerateFrame(std::nullopt);
  return len;
}

bool palm_faces_body(const LandmarkFrame& f, Side side) {
  const Point3& o = f.points[landmark::kWrist];
  const Point3& a = f.points[landmark::kIndexMcp];
  const Point3& b = f.points[landmark::kPinkyMcp];
  const double nz = (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
  return side == Side::Right ? nz < 0.0 : nz > 0.0;
}

DistanceSeries distance_signal(const Recording& r) {
  DistanceSeries out;
  out.fps = r.fps;
  out.movement = r.movement;
  out.side = r.side;
  out.values.reserve(r.frames.size());
  for (std::size_t i = 0; i < r.frames.size(); ++i) {
    const auto& f = r.frames[i];
    double palm = 0.0;
    try {
      palm = palm_length(f);
    } catch (const DegenerateFrame&) {
      throw DegenerateFrame(i);
    }
    const auto& p = f.points;
    double v = 0.0;
    switch (r.movement) {
      case MovementKind::FingerTapping:
        v = dist3(p[landmark::kThumbTip], p[landmark::kIndexTip]) / palm;
        break;
      case MovementKind::HandMovement:
        v = dist3(p[landmark::kThumbCmc], p[landmark::kMiddleTip]) / palm;
        break;
      case MovementKind::RapidAM:
        v = dist2(p[landmark::kIndexMcp], p[landmark::kPinkyMcp]) / palm;
        if (palm_faces_body(f, r.side)) v = -v;
        break;
    }
    out.values.push_back(v);
  }
  return out;
}

std::vector<double> savgol_coefficients(int window, int polyorder, int eval_pos) {
  check_filter(window, polyorder);
  if (eval_pos < 0 || eval_pos >= window) {
    throw InvalidFilterConfig("evaluation position outside the window");
  }
  const int ncoef = polyorder + 1;
  Eigen::MatrixXd vander(window, ncoef);
  for (int j = 0; j < window; ++j) {
    const double offset = static_cast<double>(j - eval_pos);
    double power = 1.0;
    for (int k = 0; k < ncoef; ++k) {
      vander(j, k) = power;
      power *= offset;
    }
  }
  // Row 0 of the pseudo-inverse maps samples to the constant term, i.e. the
  // polynomial's value at the evaluation position.
  const Eigen::MatrixXd pinv =
      vander.colPivHouseholderQr().solve(Eigen::MatrixXd::Identity(window, window));
  std::vector<double> w(window);
  for (int j = 0; j < window; ++j) w[j] = pinv(0, j);
  return w;
}

std::vector<double> savgol_filter(const std::vector<double>& x, int window, int polyorder) {
  check_filter(window, polyorder);
  const int n = static_cast<int>(x.size());
  if (window > n) {
    throw InvalidFilterConfig("window (" + std::to_string(window) +
                              ") longer than the signal (" + std::to_string(n) + ")");
  }
  const int half = window / 2;
  std::vector<double> y(x.size());
  const auto interior = savgol_coefficients(window, polyorder, half);
  for (int i = half; i < n - half; ++i) {
    double acc = 0.0;
    for (int j = 0; j < window; ++j) acc += interior[j] * x[i - half + j];
    y[i] = acc;
  }
  for (int i = 0; i < half; ++i) {
    const auto head = savgol_coefficients(window, polyorder, i);
    const auto tail = savgol_coefficients(window, polyorder, window - half + i);
    double acc_head = 0.0;
    double acc_tail = 0.0;
    for (int j = 0; j < window; ++j) {
      acc_head += head[j] * x[j];
      acc_tail += tail[j] * x[n - window + j];
    }
    y[i] = acc_head;
    y[n - half + i] = acc_tail;
  }
  return y;
}

SmoothedSeries savgol_smooth(const DistanceSeries& s, int window, int polyorder) {
  SmoothedSeries out;
  out.values = savgol_filter(s.values, window, polyorder);
  out.fps = s.fps;
  out.window = window;
  out.polyorder = polyorder;
  return out;
}

namespace {

struct Extremum {
  std::size_t index;
  bool is_peak;
};

// Alternating raw extrema from sign changes of the first difference. Flat
// runs are collapsed to their midpoint.
std::vector<Extremum> raw_extrema(const std::vector<double>& v) {
  std::vector<Extremum> out;
  int prev_sign = 0;
  std::size_t run_start = 0;  // first index after the last non-zero step
  for (std::size_t i = 0; i + 1 < v.size(); ++i) {
    const double d = v[i + 1] - v[i];
    const int sign = d > 0.0 ? 1 : (d < 0.0 ? -1 : 0);
    if (sign == 0) continue;
    if (prev_sign != 0 && sign != prev_sign) {
      out.push_back({(run_start + i) / 2, prev_sign > 0});
    }
    prev_sign = sign;
    run_start = i + 1;
  }
  return out;
}

}  // namespace

ExtremaSet detect_extrema(const SmoothedSeries& s, const ExtremaConfig& cfg) {
  const auto& v = s.values;
  if (v.size() < 3) throw NoCyclesDetected("series shorter than 3 samples");
  auto ext = raw_extrema(v);

  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  const double threshold = cfg.prominence_frac * (*hi - *lo);

  // (a) Repeatedly drop the adjacent peak/trough pair with the smallest
  // vertical gap while that gap is below the prominence threshold.
  while (ext.size() >= 2) {
    std::size_t best = 0;
    double best_gap = std::abs(v[ext[0].index] - v[ext[1].index]);
    for (std::size_t k = 1; k + 1 < ext.size(); ++k) {
      const double gap = std::abs(v[ext[k].index] - v[ext[k + 1].index]);
      if (gap < best_gap) {
        best_gap = gap;
        best = k;
      }
    }
    if (!(best_gap < threshold)) break;
    ext.erase(ext.begin() + static_cast<std::ptrdiff_t>(best),
              ext.begin() + static_cast<std::ptrdiff_t>(best) + 2);
  }

  // (b) Merge same-type extrema closer than min_separation frames.
  bool merged = true;
  while (merged) {
    merged = false;
    for (std::size_t k = 0; k + 2 < ext.size(); ++k) {
      const auto& a = ext[k];
      const auto& b = ext[k + 2];
      if (b.index - a.index >= static_cast<std::size_t>(std::max(cfg.min_separation, 0))) {
        continue;
      }
      const double va = v[a.index];
      const double vb = v[b.index];
      const bool keep_first = a.is_peak ? va >= vb : va <= vb;
      const std::size_t drop = keep_first ? k + 2 : k;
      // Remove the weaker extremum and the opposite one between the pair.
      ext.erase(ext.begin() + static_cast<std::ptrdiff_t>(k + 1));
      ext.erase(ext.begin() + static_cast<std::ptrdiff_t>(drop == k ? k : k + 1));
      merged = true;
      break;
    }
  }

  ExtremaSet out;
  for (const auto& e : ext) (e.is_peak ? out.peaks : out.troughs).push_back(e.index);
  if (out.peaks.size() < 2) {
    throw NoCyclesDetected("only " + std::to_string(out.peaks.size()) +
                           " peak(s) survived extremum filtering");
  }
  return out;
}

CycleSeries cycles(const SmoothedSeries& s, const ExtremaSet& e) {
  if (e.peaks.size() < 2) throw NoCyclesDetected("at least two peaks required");
  const auto& v = s.values;
  CycleSeries out;
  std::vector<std::size_t> kept;
  for (const std::size_t p : e.peaks) {
    if (kept.size() == kMaxCycles) break;
    const auto it = std::lower_bound(e.troughs.begin(), e.troughs.end(), p);
    double base = it == e.troughs.begin() ? v.front() : v[*std::prev(it)];
    // A peak on the very first samples has no rise before it; measure it
    // against the following trough instead.
    if (it == e.troughs.begin() && !(v[p] > base) && it != e.troughs.end()) base = v[*it];
    const double amp = v[p] - base;
    if (!(amp > 0.0)) continue;
    out.amplitudes.push_back(amp);
    kept.push_back(p);
  }
  for (std::size_t j = 0; j + 1 < kept.size(); ++j) {
    out.intervals.push_back(static_cast<double>(kept[j + 1] - kept[j]) / s.fps);
  }
  return out;
}

void write_debug_csv(std::ostream& out, const DistanceSeries& raw, const SmoothedSeries& smooth,
                     const ExtremaSet& e) {
  out << "frame,raw,smoothed,is_peak,is_trough\n";
  out.precision(17);
  for (std::size_t i = 0; i < raw.values.size(); ++i) {
    const bool peak = std::binary_search(e.peaks.begin(), e.peaks.end(), i);
    const bool trough = std::binary_search(e.troughs.begin(), e.troughs.end(), i);
    out << i << ',' << raw.values[i] << ',' << smooth.values[i] << ',' << (peak ? 1 : 0) << ','
        << (trough ? 1 : 0) << '\n';
  }
}

}  // namespace brady
