#pragma once

// End-to-end orchestration: model bundle construction, whole-sequence embed
// and decode, and the forensic composition used by the CLI, the evaluation
// harness, and the acceptance suite. Inference instantiates the models in
// double precision (training runs in float32; checkpoints are shared).

#include <optional>
#include <string>
#include <vector>

#include "vamark/audio/audio_codec.hpp"
#include "vamark/bits/bit_codec.hpp"
#include "vamark/forensics/forensics.hpp"
#include "vamark/inn/video_codec.hpp"
#include "vamark/media/config.hpp"
#include "vamark/media/types.hpp"

namespace vamark {

VideoCodecOptions video_options(const RunConfig& cfg);
BitCodecOptions bit_options(const RunConfig& cfg);
AudioCodecOptions audio_options(const RunConfig& cfg);

template <typename T>
struct Models {
  VideoCodec<T> video;
  BitHider<T> bhm;
  BitRecoverer<T> brm;
  AudioCodec<T> audio;

  Models(const RunConfig& cfg, std::uint64_t seed)
      : video(video_options(cfg), mix_seed(seed, 101)),
        bhm(bit_options(cfg), mix_seed(seed, 102)),
        brm(bit_options(cfg), mix_seed(seed, 103)),
        audio(audio_options(cfg), mix_seed(seed, 104)) {}
};

using ModelsD = Models<double>;
using ModelsF = Models<float>;

// Stage checkpoint names inside a runs directory.
std::string stage1_path(const std::string& runs_dir);
std::string stage2_path(const std::string& runs_dir);
std::string audio_path(const std::string& runs_dir);

// Loads whichever stages exist; throws when a required stage is missing.
void load_stage1(ModelsD& models, const std::string& runs_dir);
void load_stage2(ModelsD& models, const std::string& runs_dir);
void load_audio_stage(ModelsD& models, const std::string& runs_dir);

struct EmbedResult {
  VideoSequence container;     // real-valued; quantize at file boundaries
  VideoSequence intermediate;  // I_med sequence (diagnostics)
};

// Hides the localization watermark group-by-group and embeds the same
// copyright payload into every frame.
EmbedResult embed_video(ModelsD& models, const VideoSequence& video, const VideoSequence& watermark,
                        const BitString& payload, int group_batch = 4);

struct VideoDecodeResult {
  VideoSequence recovered;        // center-frame reconstructions
  VideoSequence revealed_wm;      // decoded localization watermark
  std::vector<BitString> frame_bits;
  Tensor soft_scores;             // [T, k] per-frame bit scores
  BitString voted_bits;           // bitwise vote across frames
};

VideoDecodeResult decode_video(ModelsD& models, const VideoSequence& received, int group_batch = 4);

struct AudioEmbedResult {
  AudioSignal container;
  std::vector<float> delta;  // container - original (exact where unclipped)
};

AudioEmbedResult embed_audio(ModelsD& models, const AudioSignal& audio, const BitString& payload);

struct AudioDetectResult {
  std::vector<float> presence;  // per-sample watermark probability
  std::vector<float> tamper_mask;  // 1 where presence < 0.5
  BitString bits;
  Tensor bit_scores;  // [1, n]
};

AudioDetectResult detect_audio(ModelsD& models, const AudioSignal& received);

struct ForensicDecode {
  VideoDecodeResult video;
  AudioDetectResult audio;
  Tensor visual_mask;      // [T,H,W] via the tau rule
  Tensor visual_scores;    // pre-threshold channel-max difference map
  BitString fused_bits;    // cross-modal payload
  ForensicVerdict verdict;
};

// Full decode-side forensics against a known payload and watermark.
ForensicDecode forensic_decode(ModelsD& models, const VideoSequence& received_video,
                               const AudioSignal& received_audio, const VideoSequence& watermark,
                               const BitString& expected_payload, const RunConfig& cfg);

// Builds the (prev, ref, next) group tensor stack for frames [t0, t1).
template <typename T>
TensorT<T> groups_tensor(const VideoSequence& video, int t0, int t1) {
  const int C = video.C(), H = video.H(), W = video.W(), Tn = video.T();
  TensorT<T> out({t1 - t0, 3 * C, H, W});
  const std::int64_t sz = static_cast<std::int64_t>(C) * H * W;
  for (int t = t0; t < t1; ++t)
    for (int j = 0; j < 3; ++j) {
      const int src = std::clamp(t + j - 1, 0, Tn - 1);
      for (std::int64_t i = 0; i < sz; ++i)
        out[((static_cast<std::int64_t>(t - t0) * 3 + j) * sz) + i] = static_cast<T>(video.frames[src * sz + i]);
    }
  return out;
}

}  // namespace vamark
