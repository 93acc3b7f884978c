#pragma once

#include <cstddef>
#include <iosfwd>
#include <vector>

#include "brady/landmark_io.hpp"

namespace brady {

// Per-frame distance divided by that frame's palm length.
struct DistanceSeries {
  std::vector<double> values;
  double fps = 30.0;
  MovementKind movement = MovementKind::FingerTapping;
  Side side = Side::Right;
};

struct SmoothedSeries {
  std::vector<double> values;
  double fps = 30.0;
  int window = 0;
  int polyorder = 0;
};

struct ExtremaConfig {
  double prominence_frac = 0.1;
  int min_separation = 3;  // frames

  friend bool operator==(const ExtremaConfig&, const ExtremaConfig&) = default;
};

struct ExtremaSet {
  std::vector<std::size_t> peaks;
  std::vector<std::size_t> troughs;
};

struct CycleSeries {
  std::vector<double> amplitudes;  // palm lengths
  std::vector<double> intervals;   // seconds
  std::size_t n_cycles() const { return amplitudes.size(); }
};

inline constexpr std::size_t kMaxCycles = 10;

// Euclidean distance between thumb_cmc (1) and middle_mcp (9). Throws
// DegenerateFrame when the points coincide (< 1e-9 px).
double palm_length(const LandmarkFrame& f);

// RapidAM sign rule: palm faces the body when the z component of
// (p5 - p0) x (p17 - p0) is negative for a right hand (positive for a left).
bool palm_faces_body(const LandmarkFrame& f, Side side);

DistanceSeries distance_signal(const Recording& r);

// Convolution weights evaluating the least-squares polynomial of degree
// `polyorder` (fit over `window` samples) at sample `eval_pos`, 0-based within
// the window. eval_pos = window / 2 gives the interior filter.
std::vector<double> savgol_coefficients(int window, int polyorder, int eval_pos);

// Savitzky-Golay smoothing. Edges use the full-width window shifted inside the
// signal and evaluated off-centre. Throws InvalidFilterConfig.
SmoothedSeries savgol_smooth(const DistanceSeries& s, int window, int polyorder);
std::vector<double> savgol_filter(const std::vector<double>& x, int window, int polyorder);

// Local extrema with false-extremum removal; throws NoCyclesDetected when
// fewer than two peaks survive.
ExtremaSet detect_extrema(const SmoothedSeries& s, const ExtremaConfig& cfg = {});

// Amplitude = peak minus preceding trough (signal start if none precedes,
// the following trough when the signal starts on the peak);
// interval = peak-to-peak time. Truncated to the first kMaxCycles cycles.
CycleSeries cycles(const SmoothedSeries& s, const ExtremaSet& e);

// Debug dump: frame,raw,smoothed,is_peak,is_trough
void write_debug_csv(std::ostream& out, const DistanceSeries& raw, const SmoothedSeries& smooth,
                     const ExtremaSet& e);

}  // namespace brady
