#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace brady {

inline constexpr std::size_t kNumLandmarks = 21;

// 0-indexed 21-point hand layout.
namespace landmark {
inline constexpr std::size_t kWrist = 0;
inline constexpr std::size_t kThumbCmc = 1;
inline constexpr std::size_t kThumbTip = 4;
inline constexpr std::size_t kIndexMcp = 5;
inline constexpr std::size_t kIndexTip = 8;
inline constexpr std::size_t kMiddleMcp = 9;
inline constexpr std::size_t kMiddleTip = 12;
inline constexpr std::size_t kPinkyMcp = 17;
}  // namespace landmark

enum class MovementKind { FingerTapping, HandMovement, RapidAM };
enum class Side { Left, Right };

std::string_view to_string(MovementKind m);
std::string_view to_string(Side s);
MovementKind parse_movement(std::string_view s);
Side parse_side(std::string_view s);

struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  friend bool operator==(const Point3&, const Point3&) = default;
};

struct LandmarkFrame {
  double t = 0.0;  // seconds
  std::array<Point3, kNumLandmarks> points{};

  friend bool operator==(const LandmarkFrame&, const LandmarkFrame&) = default;
};

struct Recording {
  MovementKind movement = MovementKind::FingerTapping;
  Side side = Side::Right;
  double fps = 30.0;
  std::vector<LandmarkFrame> frames;
  std::string subject_id;
  std::optional<int> score;   // expert (or generator) label, 0..3
  std::optional<int> arrest;  // arrest sub-label, 0..3 (format extension)

  friend bool operator==(const Recording&, const Recording&) = default;
};

struct Violation {
  std::optional<std::size_t> frame;
  std::string rule;

  friend bool operator==(const Violation&, const Violation&) = default;
};

enum class InputFormat { Jsonl, Csv };

// Parses a recording. For CSV, `csv_meta` must hold the sidecar .meta.json
// contents (a JSON object with the same fields as the JSONL "meta" header).
// Throws MalformedInput, LandmarkCountError, TimestampError, MissingMetadata.
Recording parse_recording(std::istream& in, InputFormat format,
                          std::optional<std::string_view> csv_meta = {});
Recording parse_recording_jsonl(std::string_view text);

// Reads a recording from disk; `.csv` files pick up `<stem>.meta.json`.
Recording load_recording(const std::string& path);

void write_jsonl(std::ostream& out, const Recording& r);
std::string to_jsonl(const Recording& r);
void write_csv(std::ostream& out, const Recording& r);
std::string meta_json(const Recording& r);

// Never throws. Empty iff every Recording invariant holds.
std::vector<Violation> validate_recording(const Recording& r);

}  // namespace brady
