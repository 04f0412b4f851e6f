#pragma once

#include <string>
#include <vector>

#include "vamark/core/tensor.hpp"

namespace vamark {

inline constexpr int kWindowLength = 3;

// Frames as [T, C, H, W] floats in [0,1], C = 3 (RGB).
struct VideoSequence {
  Tensor frames;
  double frame_rate = 8.0;

  int T() const { return frames.ndim() == 4 ? frames.dim(0) : 0; }
  int C() const { return frames.dim(1); }
  int H() const { return frames.dim(2); }
  int W() const { return frames.dim(3); }

  Tensor frame(int t) const;
  void validate() const;
};

// A sliding window of exactly 3 frames around a reference (center) frame.
struct VideoGroup {
  Tensor frames;  // [3, C, H, W]
  int center_index = 0;
};

struct AudioSignal {
  std::vector<float> samples;  // mono, [-1, 1]
  int sample_rate = 16000;

  std::int64_t length() const { return static_cast<std::int64_t>(samples.size()); }
  void validate() const;
};

// Replication-padded sliding windows: group k holds frames (k-1, k, k+1) with
// out-of-range indices clamped to the boundary frame.
std::vector<VideoGroup> make_groups(const VideoSequence& video);

// Stacks a single frame [C,H,W] into a [1,C,H,W] batch or group slot.
Tensor replicate_frame(const Tensor& frame, int copies);

// Constant-color watermark sequence matching the geometry of `video`.
VideoSequence make_localization_watermark(int T, int H, int W, float r, float g, float b);

}  // namespace vamark
