#pragma once

#include <string>

#include "vamark/media/types.hpp"

namespace vamark {

// Loads a video from a directory of lexicographically ordered PNG frames, or
// ingests a container file by shelling out to an external decoder (ffmpeg).
// Frame directories are the canonical lossless interchange format.
VideoSequence load_video(const std::string& path, double frame_rate = 8.0);

// Writes frames as zero-padded 8-bit PNGs (frame_000000.png, ...).
void save_video(const std::string& dir, const VideoSequence& video);

}  // namespace vamark
