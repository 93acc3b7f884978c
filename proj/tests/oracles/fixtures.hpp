#pragma once

#include <cmath>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "brady/landmark_io.hpp"
#include "brady/signal.hpp"

namespace fixture {

// A frame whose every point sits on a small grid, with palm length 10.
inline brady::LandmarkFrame grid_frame(double t) {
  brady::LandmarkFrame f;
  f.t = t;
  for (std::size_t i = 0; i < brady::kNumLandmarks; ++i) {
    f.points[i] = {static_cast<double>(i), static_cast<double>(2 * i % 7), 0.5 * static_cast<double>(i % 3)};
  }
  f.points[1] = {0.0, 0.0, 0.0};
  f.points[9] = {0.0, 10.0, 0.0};
  return f;
}

inline brady::Recording grid_recording(std::size_t n_frames, double fps = 30.0) {
  brady::Recording r;
  r.movement = brady::MovementKind::FingerTapping;
  r.side = brady::Side::Right;
  r.fps = fps;
  r.subject_id = "s01";
  for (std::size_t i = 0; i < n_frames; ++i) r.frames.push_back(grid_frame(static_cast<double>(i) / fps));
  return r;
}

inline std::string landmark_array(std::size_t n_points, double scale = 1.0) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < n_points; ++i) {
    if (i) os << ",";
    os << "[" << scale * static_cast<double>(i) << "," << scale * static_cast<double>(i % 5) << ","
       << 0.0 << "]";
  }
  os << "]";
  return os.str();
}

inline brady::SmoothedSeries series(std::vector<double> v, double fps) {
  brady::SmoothedSeries s;
  s.values = std::move(v);
  s.fps = fps;
  return s;
}

inline std::vector<double> sine(double freq, double fps, double seconds, double amp = 1.0) {
  std::vector<double> v;
  const int n = static_cast<int>(std::lround(fps * seconds));
  for (int i = 0; i < n; ++i) {
    v.push_back(amp * std::sin(2.0 * std::numbers::pi * freq * i / fps));
  }
  return v;
}

}  // namespace fixture
