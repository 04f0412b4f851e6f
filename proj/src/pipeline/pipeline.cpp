#include "vamark/pipeline/pipeline.hpp"

#include <filesystem>

namespace vamark {

VideoCodecOptions video_options(const RunConfig& cfg) {
  VideoCodecOptions o;
  o.inn_hidden = cfg.inn_hidden;
  o.inn_blocks = cfg.inn_blocks;
  o.rpm_hidden = cfg.rpm_hidden;
  o.prompt_video = cfg.prompt_video;
  o.use_tafm = cfg.use_tafm;
  o.use_dpl = cfg.use_dpl;
  return o;
}

BitCodecOptions bit_options(const RunConfig& cfg) {
  BitCodecOptions o;
  o.payload_bits = cfg.bits_k;
  o.base_channels = cfg.bhm_base_channels;
  o.brm_channels = cfg.brm_channels;
  o.prompt_bits = cfg.prompt_bits;
  o.use_dpl = cfg.use_dpl;
  return o;
}

AudioCodecOptions audio_options(const RunConfig& cfg) {
  AudioCodecOptions o;
  o.payload_bits = cfg.bits_n;
  o.channels = cfg.audio_channels;
  o.budget = cfg.audio_budget;
  return o;
}

std::string stage1_path(const std::string& runs_dir) { return runs_dir + "/stage1.ckpt"; }
std::string stage2_path(const std::string& runs_dir) { return runs_dir + "/stage2.ckpt"; }
std::string audio_path(const std::string& runs_dir) { return runs_dir + "/audio.ckpt"; }

namespace {

CheckpointReader open_stage(const std::string& path, const char* stage) {
  if (!std::filesystem::exists(path))
    throw std::runtime_error(std::string("missing ") + stage + " checkpoint: " + path +
                             " (train it first with the corresponding train subcommand)");
  return CheckpointReader(path);
}

}  // namespace

void load_stage1(ModelsD& models, const std::string& runs_dir) {
  CheckpointReader r = open_stage(stage1_path(runs_dir), "stage-1 (bits)");
  models.bhm.load(r, "bhm.");
  models.brm.load(r, "brm.");
}

void load_stage2(ModelsD& models, const std::string& runs_dir) {
  CheckpointReader r = open_stage(stage2_path(runs_dir), "stage-2 (video)");
  models.video.load(r, "video.");
}

void load_audio_stage(ModelsD& models, const std::string& runs_dir) {
  CheckpointReader r = open_stage(audio_path(runs_dir), "audio");
  models.audio.load(r, "audio.");
}

EmbedResult embed_video(ModelsD& models, const VideoSequence& video, const VideoSequence& watermark,
                        const BitString& payload, int group_batch) {
  video.validate();
  check_same_shape(video.frames, watermark.frames, "embed_video watermark");
  const int T = video.T(), H = video.H(), W = video.W();
  EmbedResult out;
  out.container.frames = Tensor({T, 3, H, W});
  out.container.frame_rate = video.frame_rate;
  out.intermediate = out.container;

  const TensorD bits = bits_to_tensor<double>(std::vector<BitString>(1, payload));
  for (int t0 = 0; t0 < T; t0 += group_batch) {
    const int t1 = std::min(T, t0 + group_batch);
    const int n = t1 - t0;
    GraphD g;
    Binding<double> bind(g);
    Var cover = g.constant(groups_tensor<double>(video, t0, t1));
    Var wm = g.constant(groups_tensor<double>(watermark, t0, t1));
    auto hidden = models.video.hide(g, bind, cover, wm);
    TensorD batch_bits({n, payload.length()});
    for (int i = 0; i < n; ++i)
      std::copy(bits.data(), bits.data() + payload.length(), batch_bits.data() + i * payload.length());
    Var container = models.bhm.embed(g, bind, hidden.i_med, g.constant(batch_bits));
    const std::int64_t sz = static_cast<std::int64_t>(3) * H * W;
    for (int i = 0; i < n; ++i)
      for (std::int64_t j = 0; j < sz; ++j) {
        out.intermediate.frames[(t0 + i) * sz + j] = static_cast<float>(g.val(hidden.i_med)[i * sz + j]);
        out.container.frames[(t0 + i) * sz + j] = static_cast<float>(g.val(container)[i * sz + j]);
      }
  }
  return out;
}

VideoDecodeResult decode_video(ModelsD& models, const VideoSequence& received, int group_batch) {
  const int T = received.T(), H = received.H(), W = received.W();
  const int k = models.brm.options().payload_bits;
  VideoDecodeResult out;
  out.recovered.frames = Tensor({T, 3, H, W});
  out.recovered.frame_rate = received.frame_rate;
  out.revealed_wm = out.recovered;
  out.soft_scores = Tensor({T, k});

  for (int t0 = 0; t0 < T; t0 += group_batch) {
    const int t1 = std::min(T, t0 + group_batch);
    const int n = t1 - t0;
    GraphD g;
    Binding<double> bind(g);
    const std::int64_t sz = static_cast<std::int64_t>(3) * H * W;
    TensorD frames({n, 3, H, W});
    for (int i = 0; i < n; ++i)
      for (std::int64_t j = 0; j < sz; ++j) frames[i * sz + j] = received.frames[(t0 + i) * sz + j];
    Var i_rec = g.constant(frames);
    Var triple = g.concat_channels({i_rec, i_rec, i_rec});
    Var z_hat = models.video.predict_residual(g, bind, triple);
    auto revealed = models.video.reveal(g, bind, i_rec, z_hat);
    Var scores = models.brm.extract(g, bind, i_rec);
    for (int i = 0; i < n; ++i) {
      for (std::int64_t j = 0; j < sz; ++j) {
        out.recovered.frames[(t0 + i) * sz + j] = static_cast<float>(g.val(revealed.i_ori)[i * sz + j]);
        out.revealed_wm.frames[(t0 + i) * sz + j] = static_cast<float>(g.val(revealed.i_loc)[i * sz + j]);
      }
      for (int b = 0; b < k; ++b) out.soft_scores.at2(t0 + i, b) = static_cast<float>(g.val(scores).at2(i, b));
    }
  }
  out.frame_bits = harden_bits(out.soft_scores);
  out.voted_bits = vote_bits(out.frame_bits);
  return out;
}

AudioEmbedResult embed_audio(ModelsD& models, const AudioSignal& audio, const BitString& payload) {
  audio.validate();
  if (payload.length() != models.audio.options().payload_bits)
    throw std::invalid_argument("embed_audio: payload must have " +
                                std::to_string(models.audio.options().payload_bits) + " bits");
  GraphD g;
  Binding<double> bind(g);
  TensorD host = audio_to_tensor<double>(audio.samples);
  Var a = g.constant(host);
  Var bits = g.constant(bits_to_tensor<double>({payload}));
  Var delta_raw = models.audio.generate_delta(g, bind, a, bits);
  TensorD factors = models.audio.budget_factors(host, g.val(delta_raw));
  Var delta = g.mul(delta_raw, g.constant(factors));
  Var container = g.clip(g.add(a, delta), -1.0, 1.0);

  AudioEmbedResult out;
  out.container.sample_rate = audio.sample_rate;
  out.container.samples = tensor_to_audio(g.val(container), audio.length());
  out.delta.resize(audio.samples.size());
  for (size_t i = 0; i < out.delta.size(); ++i) out.delta[i] = out.container.samples[i] - audio.samples[i];
  return out;
}

AudioDetectResult detect_audio(ModelsD& models, const AudioSignal& received) {
  GraphD g;
  Binding<double> bind(g);
  TensorD wave = audio_to_tensor<double>(received.samples);
  auto det = models.audio.detect(g, bind, g.constant(wave));
  AudioDetectResult out;
  out.presence = tensor_to_audio(g.val(det.presence), received.length());
  out.tamper_mask.resize(out.presence.size());
  for (size_t i = 0; i < out.presence.size(); ++i) out.tamper_mask[i] = out.presence[i] < 0.5f ? 1.0f : 0.0f;
  out.bit_scores = g.val(det.bit_scores).cast<float>();
  out.bits = harden_bits(out.bit_scores).front();
  return out;
}

ForensicDecode forensic_decode(ModelsD& models, const VideoSequence& received_video,
                               const AudioSignal& received_audio, const VideoSequence& watermark,
                               const BitString& expected_payload, const RunConfig& cfg) {
  ForensicDecode out;
  out.video = decode_video(models, received_video);
  out.audio = detect_audio(models, received_audio);
  out.visual_scores = mask_score_map(watermark, out.video.revealed_wm);
  out.visual_mask = extract_mask(watermark, out.video.revealed_wm, cfg.tau);
  out.fused_bits = fuse_copyright(out.audio.bits, out.video.voted_bits);
  VerdictThresholds th{cfg.theta_bit, cfg.theta_visual, cfg.theta_audio};
  out.verdict = make_verdict(out.fused_bits, expected_payload, out.visual_mask, out.audio.tamper_mask, th);
  return out;
}

}  // namespace vamark
