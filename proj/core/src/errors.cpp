#include "brady/errors.hpp"

namespace brady {

LandmarkCountError::LandmarkCountError(std::size_t frame, std::size_t count)
    : Error("LandmarkCountError",
            "frame " + std::to_string(frame) + ": expected 21 landmarks, got " +
                std::to_string(count)),
      frame_(frame) {}

DegenerateFrame::DegenerateFrame(std::optional<std::size_t> frame)
    : Error("DegenerateFrame",
            frame ? "frame " + std::to_string(*frame) +
                        ": palm length is zero (thumb_cmc == middle_mcp)"
                  : std::string("palm length is zero (thumb_cmc == middle_mcp)")),
      frame_(frame) {}

}  // namespace brady
