#pragma once

#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "vamark/core/tensor.hpp"
#include "vamark/media/types.hpp"

namespace vamark {

struct Rect {
  int x = 0, y = 0, w = 0, h = 0;
};

// ---------------------------------------------------------------------------
// tamper generators: return tampered media plus the ground-truth mask
// ---------------------------------------------------------------------------

struct VideoTamperResult {
  VideoSequence video;
  Tensor mask;  // [T,H,W] binary; exact set of modified pixels
};

struct AudioTamperResult {
  AudioSignal audio;
  std::vector<float> mask;  // per-sample; contiguous run of ones for insertion
};

// Pastes the given rectangle from `source` (frame src_t + t - t0, clamped,
// region at (src_x, src_y)) over frames [t0, t1) of `video`.
VideoTamperResult slicing_tamper(const VideoSequence& video, Rect rect, int t0, int t1, const VideoSequence& source,
                                 int src_t, int src_x, int src_y);

// Fills the rectangle with a constant value over frames [t0, t1).
VideoTamperResult erase_tamper(const VideoSequence& video, Rect rect, int t0, int t1, float fill);

// Overwrites duration_samples starting at `start` with content from `source`
// (cycled if shorter). The mask is exactly ones on [start, start+duration).
AudioTamperResult insert_audio_tamper(const AudioSignal& audio, const AudioSignal& source, std::int64_t start,
                                      std::int64_t duration_samples);

// ---------------------------------------------------------------------------
// degradations
// ---------------------------------------------------------------------------

// sigma is expressed on the 0..255 scale and divided by 255 internally.
Tensor gaussian_noise(const Tensor& x, double sigma255, std::mt19937_64& rng, float lo = 0.0f, float hi = 1.0f);

// Photon-count model: scale to peak counts, sample Poisson, rescale.
Tensor poisson_noise(const Tensor& x, std::mt19937_64& rng, double peak = 255.0);

// Block-transform compression proxy: 8x8 DCT, uniform quantization with the
// given step (in [0,1] units), inverse DCT. Deterministic.
Tensor dct_quantize(const Tensor& x, double step);

// Real H.264 round trip through an external encoder (evaluation only).
// Throws "external encoder missing" when the encoder is not available.
// The command template may reference {in} {out} {qp} {fps} and defaults to
// an ffmpeg/libx264 invocation; override via VAMARK_H264_CMD.
VideoSequence h264_roundtrip(const VideoSequence& video, int qp);
bool h264_available();

// Polyphase rational resampling: down to ratio*rate and back (default 90%).
// Output length equals input length.
AudioSignal resample_audio(const AudioSignal& a, int up = 9, int down = 10);

// 8th-order Butterworth low-pass applied forward-backward (zero phase).
AudioSignal lowpass_audio(const AudioSignal& a, double cutoff_hz = 1000.0);

// Generic rational resampler (windowed-sinc polyphase), length ceil(n*L/M).
std::vector<float> rational_resample(const std::vector<float>& x, int L, int M);

// ---------------------------------------------------------------------------
// degradation schedule entries
// ---------------------------------------------------------------------------

struct DegradeSpec {
  enum class Kind { kIdentity, kGaussian, kPoisson, kDctQuant, kH264, kResample, kLowpass };
  Kind kind = Kind::kIdentity;
  double param = 0.0;  // sigma / step / qp / cutoff depending on kind

  static DegradeSpec parse(const std::string& name);
  std::string name() const;
  bool trainable() const { return kind != Kind::kH264; }
};

// Applies a degradation to a whole frame sequence ([T,C,H,W] or [N,C,H,W]).
Tensor apply_video_degradation(const Tensor& frames, const DegradeSpec& spec, std::mt19937_64& rng);
AudioSignal apply_audio_degradation(const AudioSignal& a, const DegradeSpec& spec);

// ---------------------------------------------------------------------------
// Eq. 1 / Eq. 2 channel composition
// ---------------------------------------------------------------------------

using VideoTamperFn = std::function<Tensor(const Tensor&)>;   // frames -> tampered frames
using VideoDegradeFn = std::function<Tensor(const Tensor&)>;  // frames -> degraded frames
using AudioTamperFn = std::function<std::vector<float>(const std::vector<float>&)>;
using AudioDegradeFn = std::function<std::vector<float>(const std::vector<float>&)>;

// V_rec = D(V_con (1-M) + T(V_con) M), clipped to [0,1]. mask is [T,H,W].
VideoSequence transmit_video(const VideoSequence& container, const Tensor& mask, const VideoTamperFn& tamper,
                             const VideoDegradeFn& degrade);

// A_rec = D(A_con (1-m) + T(A_con) m), clipped to [-1,1].
AudioSignal transmit_audio(const AudioSignal& container, const std::vector<float>& mask, const AudioTamperFn& tamper,
                           const AudioDegradeFn& degrade);

}  // namespace vamark
