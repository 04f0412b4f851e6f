#include "vamark/forensics/forensics.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace vamark {

std::string scenario_name(Scenario s) {
  switch (s) {
    case Scenario::kUnverifiedSource:
      return "UNVERIFIED_SOURCE";
    case Scenario::kTampered:
      return "TAMPERED";
    case Scenario::kAuthentic:
      return "AUTHENTIC";
  }
  return "UNKNOWN";
}

Tensor mask_score_map(const VideoSequence& reference_wm, const VideoSequence& revealed_wm) {
  check_same_shape(reference_wm.frames, revealed_wm.frames, "mask_score_map");
  const int T = reference_wm.T(), C = reference_wm.C(), H = reference_wm.H(), W = reference_wm.W();
  Tensor score({T, H, W});
  const std::int64_t hw = static_cast<std::int64_t>(H) * W;
  for (int t = 0; t < T; ++t)
    for (std::int64_t p = 0; p < hw; ++p) {
      float mx = 0.0f;
      for (int c = 0; c < C; ++c) {
        const std::int64_t i = (static_cast<std::int64_t>(t) * C + c) * hw + p;
        mx = std::max(mx, std::abs(revealed_wm.frames[i] - reference_wm.frames[i]));
      }
      score[static_cast<std::int64_t>(t) * hw + p] = mx;
    }
  return score;
}

Tensor extract_mask(const VideoSequence& reference_wm, const VideoSequence& revealed_wm, double tau) {
  if (!(tau > 0.0 && tau < 1.0)) throw std::invalid_argument("extract_mask: tau must lie in (0,1)");
  Tensor score = mask_score_map(reference_wm, revealed_wm);
  Tensor mask(score.shape());
  for (std::int64_t i = 0; i < score.numel(); ++i) mask[i] = score[i] >= static_cast<float>(tau) ? 1.0f : 0.0f;
  return mask;
}

BitString vote_bits(const std::vector<BitString>& per_frame_bits) {
  if (per_frame_bits.empty()) throw std::invalid_argument("vote_bits: empty sequence");
  const int k = per_frame_bits.front().length();
  for (const auto& b : per_frame_bits)
    if (b.length() != k) throw std::invalid_argument("vote_bits: bit length mismatch");
  BitString out = BitString::zeros(k);
  for (int i = 0; i < k; ++i) {
    int ones = 0;
    for (const auto& b : per_frame_bits) ones += b.bit(i);
    // ties resolve to 0
    out.set(i, 2 * ones > static_cast<int>(per_frame_bits.size()) ? 1 : 0);
  }
  return out;
}

BitString fuse_copyright(const BitString& audio_bits, const BitString& video_bits) {
  const int n = audio_bits.length(), k = video_bits.length();
  if (n > k) throw std::invalid_argument("fuse_copyright: audio payload longer than video payload");
  std::vector<int> fused(static_cast<size_t>(k));
  for (int i = 0; i < n; ++i) fused[static_cast<size_t>(i)] = audio_bits.bit(i);
  for (int i = n; i < k; ++i) fused[static_cast<size_t>(i)] = video_bits.bit(i);
  return BitString(std::move(fused));
}

ForensicVerdict make_verdict(const BitString& extracted, const BitString& expected, const Tensor& visual_mask,
                             const std::vector<float>& audio_mask, const VerdictThresholds& thresholds) {
  ForensicVerdict v;
  v.matched_bit_fraction = BitString::matched_fraction(extracted, expected);
  if (visual_mask.numel() > 0) {
    double acc = 0.0;
    for (std::int64_t i = 0; i < visual_mask.numel(); ++i) acc += visual_mask[i] >= 0.5f ? 1.0 : 0.0;
    v.visual_tamper_ratio = acc / static_cast<double>(visual_mask.numel());
  }
  if (!audio_mask.empty()) {
    double acc = 0.0;
    for (float m : audio_mask) acc += m >= 0.5f ? 1.0 : 0.0;
    v.audio_tamper_ratio = acc / static_cast<double>(audio_mask.size());
  }
  if (v.matched_bit_fraction < thresholds.theta_bit)
    v.scenario = Scenario::kUnverifiedSource;
  else if (v.visual_tamper_ratio >= thresholds.theta_visual || v.audio_tamper_ratio >= thresholds.theta_audio)
    v.scenario = Scenario::kTampered;
  else
    v.scenario = Scenario::kAuthentic;
  return v;
}

std::string verdict_report(const ForensicVerdict& v, const VerdictThresholds& t) {
  std::ostringstream os;
  os << "verdict: " << scenario_name(v.scenario) << "\n";
  os << "matched_bit_fraction: " << v.matched_bit_fraction << " (threshold " << t.theta_bit << ")\n";
  os << "visual_tamper_ratio: " << v.visual_tamper_ratio << " (threshold " << t.theta_visual << ")\n";
  os << "audio_tamper_ratio: " << v.audio_tamper_ratio << " (threshold " << t.theta_audio << ")\n";
  switch (v.scenario) {
    case Scenario::kUnverifiedSource:
      os << "note: payload mismatch; media did not pass through this watermarking pipeline, "
            "authenticity cannot be ascertained\n";
      break;
    case Scenario::kTampered:
      os << "note: payload verified but tampering detected; not valid as evidence\n";
      break;
    case Scenario::kAuthentic:
      os << "note: payload verified and no tampering detected\n";
      break;
  }
  return os.str();
}

}  // namespace vamark
