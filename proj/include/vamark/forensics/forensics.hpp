#pragma once

#include <string>
#include <vector>

#include "vamark/core/tensor.hpp"
#include "vamark/media/bits.hpp"
#include "vamark/media/types.hpp"

namespace vamark {

enum class Scenario { kUnverifiedSource, kTampered, kAuthentic };

std::string scenario_name(Scenario s);

struct ForensicVerdict {
  Scenario scenario = Scenario::kUnverifiedSource;
  double matched_bit_fraction = 0.0;
  double visual_tamper_ratio = 0.0;
  double audio_tamper_ratio = 0.0;
};

struct VerdictThresholds {
  double theta_bit = 0.9375;
  double theta_visual = 0.001;
  double theta_audio = 0.001;
};

// Per-pixel binary mask from the revealed watermark: 1 where the channel-wise
// max absolute deviation from the reference watermark reaches tau.
// Both sequences are [T,C,H,W]; the result is [T,H,W].
Tensor extract_mask(const VideoSequence& reference_wm, const VideoSequence& revealed_wm, double tau = 0.2);

// Continuous pre-threshold statistic (channel-max absolute difference),
// used as the score map for ROC evaluation.
Tensor mask_score_map(const VideoSequence& reference_wm, const VideoSequence& revealed_wm);

// Majority vote across per-frame decoded payloads; ties resolve to 0.
BitString vote_bits(const std::vector<BitString>& per_frame_bits);

// Cross-modal payload: first n bits from audio, remaining k-n from video.
BitString fuse_copyright(const BitString& audio_bits, const BitString& video_bits);

ForensicVerdict make_verdict(const BitString& extracted, const BitString& expected, const Tensor& visual_mask,
                             const std::vector<float>& audio_mask, const VerdictThresholds& thresholds = {});

std::string verdict_report(const ForensicVerdict& v, const VerdictThresholds& t);

}  // namespace vamark
