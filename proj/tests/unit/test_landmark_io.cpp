#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "brady/errors.hpp"
#include "brady/landmark_io.hpp"
#include "oracles/fixtures.hpp"

using namespace brady;

namespace {

std::string meta_line(const std::string& extra = "") {
  return R"({"meta":{"movement":"finger_tapping","side":"right","fps":30,"subject_id":"s1")" +
         extra + "}}\n";
}

std::string frame_line(int index, std::optional<double> t, std::size_t n_points = 21,
                       double scale = 1.0) {
  std::ostringstream os;
  os.precision(17);
  os << R"({"frame":)" << index;
  if (t) os << R"(,"t":)" << *t;
  os << R"(,"landmarks":)" << fixture::landmark_array(n_points, scale) << "}\n";
  return os.str();
}

Recording random_recording(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 100.0);
  Recording r;
  r.movement = static_cast<MovementKind>(seed % 3);
  r.side = seed % 2 ? Side::Left : Side::Right;
  r.fps = 25.0 + static_cast<double>(seed % 11);
  r.subject_id = "subject-" + std::to_string(seed);
  if (seed % 4 != 0) r.score = static_cast<int>(seed % 4);
  if (seed % 5 != 0) r.arrest = static_cast<int>(seed % 4);
  for (int i = 0; i < 7; ++i) {
    LandmarkFrame f;
    f.t = i / r.fps + 1e-4 * std::sin(i * 1.7);
    for (auto& p : f.points) p = {n(rng), n(rng), n(rng)};
    r.frames.push_back(f);
  }
  return r;
}

}  // namespace

TEST(ParseRecording, TwoFrameJsonl) {
  const auto r = parse_recording_jsonl(meta_line() + frame_line(0, 0.0) + frame_line(1, 1.0 / 30));
  ASSERT_EQ(r.frames.size(), 2u);
  EXPECT_NEAR(r.frames[1].t - r.frames[0].t, 1.0 / 30, 1e-12);
  EXPECT_EQ(r.movement, MovementKind::FingerTapping);
  EXPECT_EQ(r.side, Side::Right);
  EXPECT_EQ(r.subject_id, "s1");
  EXPECT_FALSE(r.score.has_value());
}

TEST(ParseRecording, TwentyPointsNamesFrame) {
  const std::string text =
      meta_line() + frame_line(0, 0.0) + frame_line(1, 1.0 / 30) + frame_line(2, 2.0 / 30, 20);
  try {
    parse_recording_jsonl(text);
    FAIL() << "expected LandmarkCountError";
  } catch (const LandmarkCountError& e) {
    EXPECT_EQ(e.frame(), 2u);
    EXPECT_NE(std::string(e.what()).find("frame 2"), std::string::npos);
  }
}

TEST(ParseRecording, NonMonotoneTimestamps) {
  const std::string text =
      meta_line() + frame_line(0, 0.0) + frame_line(1, 0.0333) + frame_line(2, 0.0300);
  EXPECT_THROW(parse_recording_jsonl(text), TimestampError);
}

TEST(ParseRecording, FrameIntervalOutsideTolerance) {
  const std::string text = meta_line() + frame_line(0, 0.0) + frame_line(1, 0.1);
  EXPECT_THROW(parse_recording_jsonl(text), TimestampError);
}

TEST(ParseRecording, MissingMetadata) {
  EXPECT_THROW(parse_recording_jsonl(frame_line(0, 0.0)), MissingMetadata);
  const std::string no_fps =
      R"({"meta":{"movement":"rapid_am","side":"left"}})" "\n" + frame_line(0, 0.0);
  EXPECT_THROW(parse_recording_jsonl(no_fps), MissingMetadata);
}

TEST(ParseRecording, SyntaxErrorIsMalformed) {
  EXPECT_THROW(parse_recording_jsonl(meta_line() + "{\"frame\":0,"), MalformedInput);
  EXPECT_THROW(parse_recording_jsonl(meta_line()), MalformedInput);
  const std::string bad_movement =
      R"({"meta":{"movement":"toe_tapping","side":"left","fps":30}})" "\n" + frame_line(0, 0.0);
  EXPECT_THROW(parse_recording_jsonl(bad_movement), MalformedInput);
}

TEST(ParseRecording, MissingTimestampsAreSynthesised) {
  const auto r = parse_recording_jsonl(meta_line() + frame_line(0, std::nullopt) +
                                       frame_line(1, std::nullopt) + frame_line(2, std::nullopt));
  ASSERT_EQ(r.frames.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(r.frames[i].t, i / 30.0);
}

TEST(ParseRecording, NormalisedCoordinatesAreRescaledExactly) {
  const double x = 0.123456789, y = 0.987654321, z = -0.0421;
  std::ostringstream lm;
  lm.precision(17);
  lm << "[";
  for (int i = 0; i < 21; ++i) lm << (i ? "," : "") << "[" << x << "," << y << "," << z << "]";
  lm << "]";
  const std::string text = meta_line(R"(,"image_width":1920,"image_height":1080)") +
                           R"({"frame":0,"t":0,"landmarks":)" + lm.str() + "}\n";
  const auto r = parse_recording_jsonl(text);
  for (const auto& p : r.frames[0].points) {
    EXPECT_EQ(p.x, x * 1920.0);
    EXPECT_EQ(p.y, y * 1080.0);
    EXPECT_EQ(p.z, z * 1920.0);
  }
}

TEST(ParseRecording, CsvWithSidecar) {
  const Recording r = fixture::grid_recording(4);
  std::ostringstream csv;
  write_csv(csv, r);
  std::istringstream in(csv.str());
  const Recording back = parse_recording(in, InputFormat::Csv, meta_json(r));
  EXPECT_EQ(back, r);
  std::istringstream again(csv.str());
  EXPECT_THROW(parse_recording(again, InputFormat::Csv), MissingMetadata);
}

TEST(ValidateRecording, ValidIsEmpty) {
  EXPECT_TRUE(validate_recording(fixture::grid_recording(10)).empty());
}

TEST(ValidateRecording, NanCoordinate) {
  auto r = fixture::grid_recording(10);
  r.frames[5].points[3].y = std::numeric_limits<double>::quiet_NaN();
  const auto v = validate_recording(r);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0], (Violation{5, "finite_coords"}));
}

TEST(ValidateRecording, ZeroFps) {
  auto r = fixture::grid_recording(1);
  r.fps = 0.0;
  const auto v = validate_recording(r);
  ASSERT_FALSE(v.empty());
  EXPECT_EQ(v[0].rule, "positive_fps");
  EXPECT_FALSE(v[0].frame.has_value());
}

TEST(ValidateRecording, TimestampRules) {
  auto r = fixture::grid_recording(4);
  r.frames[2].t = r.frames[1].t;
  const auto v = validate_recording(r);
  ASSERT_FALSE(v.empty());
  EXPECT_EQ(v[0], (Violation{2, "increasing_time"}));
  EXPECT_TRUE(validate_recording(Recording{}).size() >= 1);
}

TEST(RoundTrip, JsonlIsBitExact) {
  for (std::uint64_t seed = 1; seed <= 25; ++seed) {
    const Recording r = random_recording(seed);
    ASSERT_TRUE(validate_recording(r).empty());
    const Recording back = parse_recording_jsonl(to_jsonl(r));
    EXPECT_EQ(back, r) << "seed " << seed;
    EXPECT_TRUE(validate_recording(back).empty());
  }
}

TEST(RoundTrip, CsvIsBitExact) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const Recording r = random_recording(seed);
    std::ostringstream csv;
    write_csv(csv, r);
    std::istringstream in(csv.str());
    EXPECT_EQ(parse_recording(in, InputFormat::Csv, meta_json(r)), r) << "seed " << seed;
  }
}

TEST(Enums, SnakeCaseNames) {
  EXPECT_EQ(to_string(MovementKind::FingerTapping), "finger_tapping");
  EXPECT_EQ(to_string(MovementKind::HandMovement), "hand_movement");
  EXPECT_EQ(to_string(MovementKind::RapidAM), "rapid_am");
  EXPECT_EQ(to_string(Side::Left), "left");
  for (auto m : {MovementKind::FingerTapping, MovementKind::HandMovement, MovementKind::RapidAM}) {
    EXPECT_EQ(parse_movement(to_string(m)), m);
  }
  EXPECT_THROW(parse_side("middle"), MalformedInput);
}
