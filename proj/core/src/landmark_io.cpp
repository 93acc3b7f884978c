#include "brady/landmark_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "brady/errors.hpp"
#include "text_util.hpp"

namespace brady {

using nlohmann::json;

std::string_view to_string(MovementKind m) {
  switch (m) {
    case MovementKind::FingerTapping: return "finger_tapping";
    case MovementKind::HandMovement: return "hand_movement";
    case MovementKind::RapidAM: return "rapid_am";
  }
  return "unknown";
}

std::string_view to_string(Side s) {
  return s == Side::Left ? "left" : "right";
}

MovementKind parse_movement(std::string_view s) {
  if (s == "finger_tapping") return MovementKind::FingerTapping;
  if (s == "hand_movement") return MovementKind::HandMovement;
  if (s == "rapid_am") return MovementKind::RapidAM;
  throw MalformedInput("unknown movement '" + std::string(s) + "'");
}

Side parse_side(std::string_view s) {
  if (s == "left") return Side::Left;
  if (s == "right") return Side::Right;
  throw MalformedInput("unknown side '" + std::string(s) + "'");
}

namespace {

struct Meta {
  MovementKind movement{};
  Side side{};
  double fps = 0.0;
  std::string subject_id;
  std::optional<int> score;
  std::optional<int> arrest;
  std::optional<double> image_width;
  std::optional<double> image_height;
};

Meta parse_meta(const json& m) {
  if (!m.is_object()) throw MalformedInput("meta must be a JSON object");
  for (const char* key : {"movement", "side", "fps"}) {
    if (!m.contains(key) || m.at(key).is_null()) {
      throw MissingMetadata(std::string("meta.") + key + " is required");
    }
  }
  Meta meta;
  try {
    meta.movement = parse_movement(m.at("movement").get<std::string>());
    meta.side = parse_side(m.at("side").get<std::string>());
    meta.fps = m.at("fps").get<double>();
    if (m.contains("subject_id")) meta.subject_id = m.at("subject_id").get<std::string>();
    if (m.contains("score") && !m.at("score").is_null()) meta.score = m.at("score").get<int>();
    if (m.contains("arrest") && !m.at("arrest").is_null()) meta.arrest = m.at("arrest").get<int>();
    if (m.contains("image_width") && !m.at("image_width").is_null())
      meta.image_width = m.at("image_width").get<double>();
    if (m.contains("image_height") && !m.at("image_height").is_null())
      meta.image_height = m.at("image_height").get<double>();
  } catch (const json::exception& e) {
    throw MalformedInput(std::string("bad meta field: ") + e.what());
  }
  if (meta.image_width.has_value() != meta.image_height.has_value()) {
    throw MissingMetadata("image_width and image_height must be given together");
  }
  return meta;
}

Recording finish(Meta meta, std::vector<LandmarkFrame> frames,
                 const std::vector<bool>& has_t) {
  if (!(meta.fps > 0.0) || !std::isfinite(meta.fps)) {
    throw MalformedInput("fps must be positive and finite");
  }
  if (frames.empty()) throw MalformedInput("recording has no frames");
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (!has_t[i]) frames[i].t = static_cast<double>(i) / meta.fps;
  }
  if (meta.image_width) {
    const double w = *meta.image_width;
    const double h = *meta.image_height;
    for (auto& f : frames) {
      for (auto& p : f.points) {
        p.x *= w;
        p.y *= h;
        p.z *= w;
      }
    }
  }
  Recording r;
  r.movement = meta.movement;
  r.side = meta.side;
  r.fps = meta.fps;
  r.frames = std::move(frames);
  r.subject_id = std::move(meta.subject_id);
  r.score = meta.score;
  r.arrest = meta.arrest;

  // Surface the first invariant violation as the matching typed error.
  for (const auto& v : validate_recording(r)) {
    const std::string where =
        v.frame ? "frame " + std::to_string(*v.frame) + ": " : std::string();
    if (v.rule == "increasing_time" || v.rule == "frame_interval" ||
        v.rule == "nonnegative_time") {
      throw TimestampError(where + v.rule);
    }
    throw MalformedInput(where + v.rule);
  }
  return r;
}

LandmarkFrame parse_frame_object(const json& obj, std::size_t index, bool& has_t) {
  if (!obj.is_object() || !obj.contains("landmarks")) {
    throw MalformedInput("frame " + std::to_string(index) + ": missing 'landmarks'");
  }
  const json& lm = obj.at("landmarks");
  if (!lm.is_array()) {
    throw MalformedInput("frame " + std::to_string(index) + ": 'landmarks' is not an array");
  }
  if (lm.size() != kNumLandmarks) throw LandmarkCountError(index, lm.size());
  LandmarkFrame f;
  has_t = obj.contains("t") && !obj.at("t").is_null();
  try {
    if (has_t) f.t = obj.at("t").get<double>();
    for (std::size_t k = 0; k < kNumLandmarks; ++k) {
      const json& p = lm.at(k);
      if (!p.is_array() || p.size() != 3) {
        throw MalformedInput("frame " + std::to_string(index) + ": landmark " +
                             std::to_string(k) + " is not an [x,y,z] triple");
      }
      f.points[k] = {p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>()};
    }
  } catch (const json::exception& e) {
    throw MalformedInput("frame " + std::to_string(index) + ": " + e.what());
  }
  return f;
}

Recording parse_jsonl_stream(std::istream& in) {
  std::string line;
  std::optional<Meta> meta;
  std::vector<LandmarkFrame> frames;
  std::vector<bool> has_t;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw MalformedInput("line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!meta) {
      if (!obj.is_object() || !obj.contains("meta")) {
        throw MissingMetadata("first JSONL object must be the {\"meta\": ...} header");
      }
      meta = parse_meta(obj.at("meta"));
      continue;
    }
    bool t_present = false;
    frames.push_back(parse_frame_object(obj, frames.size(), t_present));
    has_t.push_back(t_present);
  }
  if (!meta) throw MissingMetadata("no meta header found");
  return finish(std::move(*meta), std::move(frames), has_t);
}

Recording parse_csv_stream(std::istream& in, std::string_view meta_text) {
  json meta_obj;
  try {
    meta_obj = json::parse(meta_text);
  } catch (const json::parse_error& e) {
    throw MalformedInput(std::string("sidecar meta: ") + e.what());
  }
  if (meta_obj.is_object() && meta_obj.contains("meta")) meta_obj = meta_obj.at("meta");
  Meta meta = parse_meta(meta_obj);

  std::string line;
  if (!std::getline(in, line)) throw MalformedInput("empty CSV");
  const auto header = detail::split(detail::trim(line), ',');
  const std::size_t expected_cols = 2 + 3 * kNumLandmarks;
  if (header.size() < 2 || header[0] != "frame" || header[1] != "t") {
    throw MalformedInput("CSV header must start with 'frame,t'");
  }
  if (header.size() != expected_cols) {
    if ((header.size() - 2) % 3 == 0) {
      throw LandmarkCountError(0, (header.size() - 2) / 3);
    }
    throw MalformedInput("CSV header has " + std::to_string(header.size()) + " columns");
  }

  std::vector<LandmarkFrame> frames;
  std::vector<bool> has_t;
  while (std::getline(in, line)) {
    const auto trimmed = detail::trim(line);
    if (trimmed.empty()) continue;
    const auto cells = detail::split(trimmed, ',');
    const std::size_t index = frames.size();
    if (cells.size() != expected_cols) {
      if (cells.size() >= 2 && (cells.size() - 2) % 3 == 0) {
        throw LandmarkCountError(index, (cells.size() - 2) / 3);
      }
      throw MalformedInput("frame " + std::to_string(index) + ": wrong column count");
    }
    LandmarkFrame f;
    const bool t_present = !detail::trim(cells[1]).empty();
    try {
      if (t_present) f.t = detail::parse_double(cells[1]);
      for (std::size_t k = 0; k < kNumLandmarks; ++k) {
        f.points[k] = {detail::parse_double(cells[2 + 3 * k]),
                       detail::parse_double(cells[3 + 3 * k]),
                       detail::parse_double(cells[4 + 3 * k])};
      }
    } catch (const std::invalid_argument& e) {
      throw MalformedInput("frame " + std::to_string(index) + ": " + e.what());
    }
    frames.push_back(f);
    has_t.push_back(t_present);
  }
  return finish(std::move(meta), std::move(frames), has_t);
}

json meta_object(const Recording& r) {
  json m = {{"movement", to_string(r.movement)},
            {"side", to_string(r.side)},
            {"fps", r.fps},
            {"subject_id", r.subject_id}};
  if (r.score) m["score"] = *r.score;
  if (r.arrest) m["arrest"] = *r.arrest;
  return m;
}

}  // namespace

Recording parse_recording(std::istream& in, InputFormat format,
                          std::optional<std::string_view> csv_meta) {
  if (format == InputFormat::Jsonl) return parse_jsonl_stream(in);
  if (!csv_meta) throw MissingMetadata("CSV input requires a .meta.json sidecar");
  return parse_csv_stream(in, *csv_meta);
}

Recording parse_recording_jsonl(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_jsonl_stream(in);
}

Recording load_recording(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MissingArtifact("cannot open " + path);
  const bool is_csv = path.size() >= 4 && path.compare(path.size() - 4, 4, ".csv") == 0;
  if (!is_csv) return parse_jsonl_stream(in);
  const std::string meta_path = path.substr(0, path.size() - 4) + ".meta.json";
  std::ifstream meta_in(meta_path);
  if (!meta_in) throw MissingMetadata("missing sidecar " + meta_path);
  std::stringstream meta_text;
  meta_text << meta_in.rdbuf();
  return parse_csv_stream(in, meta_text.str());
}

void write_jsonl(std::ostream& out, const Recording& r) {
  out << json{{"meta", meta_object(r)}}.dump() << '\n';
  for (std::size_t i = 0; i < r.frames.size(); ++i) {
    const auto& f = r.frames[i];
    json lm = json::array();
    for (const auto& p : f.points) lm.push_back({p.x, p.y, p.z});
    out << json{{"frame", i}, {"t", f.t}, {"landmarks", std::move(lm)}}.dump() << '\n';
  }
}

std::string to_jsonl(const Recording& r) {
  std::ostringstream out;
  write_jsonl(out, r);
  return out.str();
}

std::string meta_json(const Recording& r) {
  return json{{"meta", meta_object(r)}}.dump(2) + "\n";
}

void write_csv(std::ostream& out, const Recording& r) {
  out << "frame,t";
  for (std::size_t k = 0; k < kNumLandmarks; ++k) {
    out << ",p" << k << "_x,p" << k << "_y,p" << k << "_z";
  }
  out << '\n';
  for (std::size_t i = 0; i < r.frames.size(); ++i) {
    const auto& f = r.frames[i];
    out << i << ',' << detail::format_double(f.t);
    for (const auto& p : f.points) {
      out << ',' << detail::format_double(p.x) << ',' << detail::format_double(p.y)
          << ',' << detail::format_double(p.z);
    }
    out << '\n';
  }
}

std::vector<Violation> validate_recording(const Recording& r) {
  std::vector<Violation> out;
  if (!(r.fps > 0.0) || !std::isfinite(r.fps)) out.push_back({std::nullopt, "positive_fps"});
  if (r.frames.empty()) out.push_back({std::nullopt, "nonempty_frames"});
  if (r.score && (*r.score < 0 || *r.score > 3)) out.push_back({std::nullopt, "score_range"});
  if (r.arrest && (*r.arrest < 0 || *r.arrest > 3)) out.push_back({std::nullopt, "arrest_range"});

  const bool fps_ok = r.fps > 0.0 && std::isfinite(r.fps);
  for (std::size_t i = 0; i < r.frames.size(); ++i) {
    const auto& f = r.frames[i];
    bool finite = std::isfinite(f.t);
    for (const auto& p : f.points) {
      finite = finite && std::isfinite(p.x) && std::isfinite(p.y) && std::isfinite(p.z);
    }
    if (!finite) out.push_back({i, "finite_coords"});
    if (f.t < 0.0) out.push_back({i, "nonnegative_time"});
    if (i == 0) continue;
    const double dt = f.t - r.frames[i - 1].t;
    if (!(dt > 0.0)) {
      out.push_back({i, "increasing_time"});
    } else if (fps_ok && std::abs(dt - 1.0 / r.fps) > 0.5 / r.fps) {
      out.push_back({i, "frame_interval"});
    }
  }
  return out;
}

}  // namespace brady
