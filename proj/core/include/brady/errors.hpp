#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace brady {

// Base class for every error raised by the library. `kind()` is a stable
// machine-readable name used by the CLI's --json error output.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

#define BRADY_DEFINE_ERROR(Name)                                   \
  class Name : public Error {                                      \
   public:                                                         \
    explicit Name(const std::string& what) : Error(#Name, what) {} \
  }

// landmark_io
BRADY_DEFINE_ERROR(MalformedInput);
BRADY_DEFINE_ERROR(TimestampError);
BRADY_DEFINE_ERROR(MissingMetadata);

class LandmarkCountError : public Error {
 public:
  LandmarkCountError(std::size_t frame, std::size_t count);
  std::size_t frame() const noexcept { return frame_; }

 private:
  std::size_t frame_;
};

// signal
class DegenerateFrame : public Error {
 public:
  explicit DegenerateFrame(std::optional<std::size_t> frame);
  std::optional<std::size_t> frame() const noexcept { return frame_; }

 private:
  std::optional<std::size_t> frame_;
};
BRADY_DEFINE_ERROR(InvalidFilterConfig);
BRADY_DEFINE_ERROR(NoCyclesDetected);

// features
BRADY_DEFINE_ERROR(InsufficientCycles);

// arrest_net / ordinal_boost
BRADY_DEFINE_ERROR(InvalidConfig);
BRADY_DEFINE_ERROR(ShapeMismatch);
BRADY_DEFINE_ERROR(DegenerateDataset);
BRADY_DEFINE_ERROR(ClassTooSmall);
BRADY_DEFINE_ERROR(ModelFormatError);

// statmodels
BRADY_DEFINE_ERROR(NonConvergence);
BRADY_DEFINE_ERROR(LengthMismatch);
BRADY_DEFINE_ERROR(SingleClass);
BRADY_DEFINE_ERROR(DegenerateGroups);

// synth
BRADY_DEFINE_ERROR(InvalidProfile);

// cli
BRADY_DEFINE_ERROR(MissingArtifact);
BRADY_DEFINE_ERROR(ConfigError);

#undef BRADY_DEFINE_ERROR

}  // namespace brady
