#include "brady/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "brady/errors.hpp"
#include "brady/signal.hpp"

namespace brady {

std::string_view to_string(DecrementOnset d) {
  switch (d) {
    case DecrementOnset::None: return "none";
    case DecrementOnset::End: return "end";
    case DecrementOnset::Middle: return "middle";
    case DecrementOnset::AfterFirst: return "after_first";
  }
  return "unknown";
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

int arrest_category(int n_arrests, bool has_freeze) {
  if (has_freeze || n_arrests > 5) return 3;
  if (n_arrests >= 3) return 2;
  if (n_arrests >= 1) return 1;
  return 0;
}

int slowing_level(double slowing_factor, const SlowingThresholds& t) {
  if (slowing_factor >= t.moderate) return 3;
  if (slowing_factor >= t.mild) return 2;
  if (slowing_factor >= t.slight) return 1;
  return 0;
}

int decrement_level(DecrementOnset onset) {
  switch (onset) {
    case DecrementOnset::None: return 0;
    case DecrementOnset::End: return 1;
    case DecrementOnset::Middle: return 2;
    case DecrementOnset::AfterFirst: return 3;
  }
  return 0;
}

RuleLabel label_from_rules(const SeverityProfile& p, const SlowingThresholds& t) {
  const int arrest = arrest_category(p.n_arrests, p.has_freeze);
  const int score =
      std::min(3, std::max({arrest, slowing_level(p.slowing_factor, t),
                            decrement_level(p.decrement_onset)}));
  return {score, arrest};
}

void validate_profile(const SeverityProfile& p) {
  auto fail = [](const std::string& what) { throw InvalidProfile(what); };
  if (!(p.base_interval > 0.0)) fail("base_interval must be positive");
  if (!(p.base_amplitude > 0.0 && p.base_amplitude <= 1.0)) fail("base_amplitude must be in (0, 1]");
  if (p.n_arrests < 0) fail("n_arrests must be >= 0");
  if (static_cast<int>(p.arrest_durations.size()) != p.n_arrests) {
    fail("arrest_durations must have one entry per arrest");
  }
  bool long_stop = false;
  for (const double d : p.arrest_durations) {
    if (!(d > 0.0)) fail("arrest durations must be positive");
    long_stop = long_stop || d >= 2.0 * p.base_interval;
  }
  if (long_stop != p.has_freeze) fail("has_freeze must match an arrest >= 2 * base_interval");
  if (!(p.noise_sd >= 0.0 && p.noise_sd <= 0.2)) fail("noise_sd must be in [0, 0.2]");
  if (!(p.slowing_factor >= 1.0)) fail("slowing_factor must be >= 1");
  if (!(p.decay_rate >= 0.0 && p.decay_rate < 1.0)) fail("decay_rate must be in [0, 1)");
  if (!(p.interval_jitter >= 0.0 && p.interval_jitter <= 0.2)) fail("interval_jitter must be in [0, 0.2]");
}

int decrement_start_cycle(DecrementOnset onset) {
  switch (onset) {
    case DecrementOnset::None: return 1 << 20;
    case DecrementOnset::End: return 7;
    case DecrementOnset::Middle: return 4;
    case DecrementOnset::AfterFirst: return 1;
  }
  return 1 << 20;
}

OpeningSignal opening_signal(const SeverityProfile& p, double fps, int n_cycles) {
  validate_profile(p);
  if (n_cycles < 2) throw InvalidProfile("n_cycles must be >= 2");
  // Arrests sit in the gaps visible to the first-10-cycle analysis.
  const int visible_gaps =
      std::min(n_cycles - 1, static_cast<int>(kMaxCycles) - 1);
  if (p.n_arrests > visible_gaps) {
    throw InvalidProfile("n_arrests exceeds the " + std::to_string(visible_gaps) +
                         " available inter-cycle gaps");
  }

  std::mt19937_64 place_rng(derive_seed(p.seed, 1));
  std::vector<int> gaps(static_cast<std::size_t>(visible_gaps));
  for (int g = 0; g < visible_gaps; ++g) gaps[static_cast<std::size_t>(g)] = g;
  std::shuffle(gaps.begin(), gaps.end(), place_rng);
  gaps.resize(static_cast<std::size_t>(p.n_arrests));
  std::sort(gaps.begin(), gaps.end());

  struct Segment {
    double start;
    double duration;
    double amplitude;  // < 0 marks a hold
  };
  std::vector<Segment> segments;
  const double mean_period = p.base_interval * p.slowing_factor;
  std::mt19937_64 jitter_rng(derive_seed(p.seed, 3));
  std::normal_distribution<double> jitter(0.0, 1.0);
  const int onset = decrement_start_cycle(p.decrement_onset);
  double t = 0.0;
  std::size_t next_arrest = 0;
  for (int k = 0; k < n_cycles; ++k) {
    double envelope = 1.0;
    if (k >= onset) envelope = std::max(0.2, 1.0 - p.decay_rate * (k - onset + 1));
    const double period =
        mean_period * (1.0 + p.interval_jitter * std::clamp(jitter(jitter_rng), -2.5, 2.5));
    segments.push_back({t, period, p.base_amplitude * envelope});
    t += period;
    if (next_arrest < gaps.size() && gaps[next_arrest] == k) {
      const double hold = p.arrest_durations[next_arrest];
      segments.push_back({t, hold, -1.0});
      t += hold;
      ++next_arrest;
    }
  }

  const auto n_frames = static_cast<std::size_t>(std::floor(t * fps)) + 1;
  OpeningSignal out;
  out.values.resize(n_frames);
  out.arrest_gaps = gaps;
  std::mt19937_64 noise_rng(derive_seed(p.seed, 2));
  std::normal_distribution<double> noise(0.0, 1.0);
  std::size_t seg = 0;
  for (std::size_t i = 0; i < n_frames; ++i) {
    const double ti = static_cast<double>(i) / fps;
    while (seg + 1 < segments.size() && ti >= segments[seg + 1].start) ++seg;
    const auto& s = segments[seg];
    double v = 0.0;
    if (s.amplitude >= 0.0) {
      const double phase = std::min(1.0, (ti - s.start) / s.duration);
      v = s.amplitude * 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * phase));
    }
    const double eps = noise(noise_rng);
    v += p.noise_sd * p.base_amplitude * eps;
    out.values[i] = std::clamp(v, 0.0, 1.0);
  }
  return out;
}

namespace {

using Pose = std::array<Point3, kNumLandmarks>;

// Right-hand template in pixels; palm length |p1 - p9| = 90.14.
Pose base_pose() {
  return {{{320, 420, 0}, {280, 390, 0}, {255, 360, 0}, {240, 330, 0}, {230, 300, 0},
           {300, 320, 0}, {300, 280, 0}, {300, 250, 0}, {300, 225, 0}, {330, 315, 0},
           {330, 270, 0}, {330, 240, 0}, {330, 215, 0}, {355, 322, 0}, {357, 280, 0},
           {358, 252, 0}, {359, 230, 0}, {378, 335, 0}, {382, 302, 0}, {384, 282, 0},
           {385, 265, 0}}};
}

Point3 along(const Point3& origin, double ux, double uy, double len) {
  return {origin.x + ux * len, origin.y + uy * len, origin.z};
}

// Closed (s = 0) and open (s = 1) poses; the moving landmarks travel on
// straight lines so the measured distance is affine in s.
std::pair<Pose, Pose> templates(MovementKind movement) {
  Pose closed = base_pose();
  Pose open = base_pose();
  const double palm = std::hypot(280.0 - 330.0, 390.0 - 315.0);
  using namespace landmark;
  switch (movement) {
    case MovementKind::FingerTapping: {
      const Point3 tip = closed[kThumbTip];
      closed[kIndexTip] = along(tip, 0.6, -0.8, 0.1 * palm);
      open[kIndexTip] = along(tip, 0.6, -0.8, 1.1 * palm);
      closed[7] = along(tip, 0.8, -0.6, 0.35 * palm);
      open[7] = along(tip, 0.6, -0.8, 0.9 * palm);
      break;
    }
    case MovementKind::HandMovement: {
      const Point3 base = closed[kThumbCmc];
      closed[kMiddleTip] = along(base, 0.3, -0.9539392, 0.7 * palm);
      open[kMiddleTip] = along(base, 0.3, -0.9539392, 2.0 * palm);
      for (std::size_t k : {8u, 16u, 20u}) closed[k] = along(closed[k], 0.0, 1.0, 0.8 * palm);
      break;
    }
    case MovementKind::RapidAM: {
      const Point3 wrist = closed[kWrist];
      const double half_span = 0.45 * palm;
      const double height = 0.9 * palm;
      closed[kIndexMcp] = {wrist.x + half_span, wrist.y - height, 0.0};
      closed[kPinkyMcp] = {wrist.x - half_span, wrist.y - height, 0.0};
      open[kIndexMcp] = {wrist.x - half_span, wrist.y - height, 0.0};
      open[kPinkyMcp] = {wrist.x + half_span, wrist.y - height, 0.0};
      break;
    }
  }
  return {closed, open};
}

void mirror(Pose& pose) {
  const double axis = pose[landmark::kWrist].x;
  for (auto& p : pose) p.x = 2.0 * axis - p.x;
}

}  // namespace

SynthRecording generate(const SeverityProfile& p, MovementKind movement, Side side, double fps,
                        int n_cycles) {
  if (!(fps > 0.0)) throw InvalidProfile("fps must be positive");
  auto signal = opening_signal(p, fps, n_cycles);
  auto [closed, open] = templates(movement);
  if (side == Side::Left) {
    mirror(closed);
    mirror(open);
  }

  SynthRecording out;
  out.profile = p;
  out.label = label_from_rules(p);
  out.arrest_gaps = signal.arrest_gaps;
  Recording& r = out.recording;
  r.movement = movement;
  r.side = side;
  r.fps = fps;
  r.subject_id = "synth-" + std::to_string(p.seed % 1000000007ULL);
  r.score = out.label.score;
  r.arrest = out.label.arrest_category;
  r.frames.resize(signal.values.size());
  for (std::size_t i = 0; i < signal.values.size(); ++i) {
    const double s = signal.values[i];
    auto& f = r.frames[i];
    f.t = static_cast<double>(i) / fps;
    for (std::size_t k = 0; k < kNumLandmarks; ++k) {
      f.points[k] = {(1.0 - s) * closed[k].x + s * open[k].x,
                     (1.0 - s) * closed[k].y + s * open[k].y,
                     (1.0 - s) * closed[k].z + s * open[k].z};
    }
  }
  return out;
}

SeverityProfile sample_profile(int score, std::mt19937_64& rng) {
  if (score < 0 || score > 3) throw InvalidProfile("score must be in 0..3");
  auto uniform = [&rng](double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  };
  auto pick = [&rng](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };

  for (int attempt = 0; attempt < 1000; ++attempt) {
    SeverityProfile p;
    p.base_amplitude = uniform(0.75, 1.0);
    p.base_interval = uniform(0.38, 0.42);
    p.noise_sd = uniform(0.005, 0.03);
    p.decay_rate = uniform(0.06, 0.08);
    p.interval_jitter = uniform(0.04, 0.10);
    p.seed = rng();

    // Channel levels: at least one channel at `score`, the rest below it.
    std::array<int, 3> level{};
    if (score > 0) {
      int mask = 0;
      while (mask == 0) mask = pick(0, 7);
      for (int c = 0; c < 3; ++c) level[c] = (mask >> c) & 1 ? score : pick(0, score - 1);
    }

    switch (level[0]) {
      case 0: p.n_arrests = 0; break;
      case 1: p.n_arrests = pick(1, 2); break;
      case 2: p.n_arrests = pick(3, 5); break;
      default:
        if (uniform(0.0, 1.0) < 0.3) {
          p.n_arrests = pick(1, 3);
          p.has_freeze = true;
        } else {
          p.n_arrests = pick(6, 8);
        }
    }
    for (int a = 0; a < p.n_arrests; ++a) {
      p.arrest_durations.push_back(uniform(0.8, 1.6) * p.base_interval);
    }
    if (p.has_freeze) {
      const auto which = static_cast<std::size_t>(pick(0, p.n_arrests - 1));
      p.arrest_durations[which] = uniform(2.2, 3.0) * p.base_interval;
    }

    constexpr std::array<std::array<double, 2>, 4> slowing{
        {{1.0, 1.08}, {1.2, 1.3}, {1.42, 1.52}, {1.68, 1.85}}};
    p.slowing_factor = uniform(slowing[level[1]][0], slowing[level[1]][1]);

    constexpr std::array<DecrementOnset, 4> onsets{DecrementOnset::None, DecrementOnset::End,
                                                   DecrementOnset::Middle,
                                                   DecrementOnset::AfterFirst};
    p.decrement_onset = onsets[static_cast<std::size_t>(level[2])];

    if (label_from_rules(p).score == score) return p;
  }
  throw InvalidProfile("could not sample a profile for score " + std::to_string(score));
}

std::vector<SynthRecording> generate_dataset(const DatasetSpec& spec, std::uint64_t seed) {
  if (spec.movements.empty()) throw InvalidProfile("dataset needs at least one movement");
  std::vector<SynthRecording> out;
  std::uint64_t index = 0;
  for (int score = 0; score < 4; ++score) {
    const int count = spec.counts[static_cast<std::size_t>(score)];
    if (count < 0) throw InvalidProfile("class counts must be >= 0");
    for (int j = 0; j < count; ++j, ++index) {
      std::mt19937_64 rng(derive_seed(seed, index));
      SeverityProfile p = sample_profile(score, rng);
      const auto m = spec.movements.size();
      const MovementKind movement = spec.movements[static_cast<std::size_t>(j) % m];
      const Side side = (static_cast<std::size_t>(j) / m) % 2 == 0 ? Side::Right : Side::Left;
      auto rec = generate(p, movement, side, spec.fps, spec.n_cycles);
      rec.recording.subject_id = "synth-" + std::to_string(index);
      out.push_back(std::move(rec));
    }
  }
  return out;
}

}  // namespace brady
