#include "vamark/media/types.hpp"

#include <stdexcept>

namespace vamark {

Tensor VideoSequence::frame(int t) const {
  if (t < 0 || t >= T()) throw std::out_of_range("frame index out of range");
  const std::int64_t sz = static_cast<std::int64_t>(C()) * H() * W();
  Tensor out({C(), H(), W()});
  std::copy(frames.data() + t * sz, frames.data() + (t + 1) * sz, out.data());
  return out;
}

void VideoSequence::validate() const {
  if (frames.ndim() != 4) throw std::invalid_argument("video frames must be [T,C,H,W]");
  if (T() < 1) throw std::invalid_argument("video must contain at least one frame");
  if (C() != 3) throw std::invalid_argument("video must have 3 channels");
  for (std::int64_t i = 0; i < frames.numel(); ++i)
    if (frames[i] < 0.0f || frames[i] > 1.0f) throw std::invalid_argument("frame values must lie in [0,1]");
}

void AudioSignal::validate() const {
  if (samples.empty()) throw std::invalid_argument("audio must contain at least one sample");
  if (sample_rate <= 0) throw std::invalid_argument("sample rate must be positive");
  for (float s : samples)
    if (s < -1.0f || s > 1.0f) throw std::invalid_argument("audio samples must lie in [-1,1]");
}

std::vector<VideoGroup> make_groups(const VideoSequence& video) {
  const int T = video.T();
  if (T < 1) throw std::invalid_argument("make_groups: empty video");
  const std::int64_t sz = static_cast<std::int64_t>(video.C()) * video.H() * video.W();
  std::vector<VideoGroup> groups;
  groups.reserve(static_cast<size_t>(T));
  for (int k = 0; k < T; ++k) {
    VideoGroup g;
    g.center_index = k;
    g.frames = Tensor({kWindowLength, video.C(), video.H(), video.W()});
    for (int j = 0; j < kWindowLength; ++j) {
      int src = k + j - 1;
      src = std::max(0, std::min(src, T - 1));
      std::copy(video.frames.data() + src * sz, video.frames.data() + (src + 1) * sz, g.frames.data() + j * sz);
    }
    groups.push_back(std::move(g));
  }
  return groups;
}

Tensor replicate_frame(const Tensor& frame, int copies) {
  if (frame.ndim() != 3) throw std::invalid_argument("replicate_frame: expects [C,H,W]");
  Tensor out({copies, frame.dim(0), frame.dim(1), frame.dim(2)});
  for (int i = 0; i < copies; ++i) std::copy(frame.data(), frame.data() + frame.numel(), out.data() + i * frame.numel());
  return out;
}

VideoSequence make_localization_watermark(int T, int H, int W, float r, float g, float b) {
  VideoSequence wm;
  wm.frames = Tensor({T, 3, H, W});
  const std::int64_t hw = static_cast<std::int64_t>(H) * W;
  for (int t = 0; t < T; ++t) {
    float* base = wm.frames.data() + static_cast<std::int64_t>(t) * 3 * hw;
    std::fill(base, base + hw, r);
    std::fill(base + hw, base + 2 * hw, g);
    std::fill(base + 2 * hw, base + 3 * hw, b);
  }
  return wm;
}

}  // namespace vamark
