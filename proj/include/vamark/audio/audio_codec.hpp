#pragma once

// Audio versatile watermarking: a strided 1-D convolutional generator that
// predicts an additive watermark waveform, a message layer that injects the
// payload into the generator latent, and a detector with a per-sample
// presence head plus a pooled payload head. Waveforms travel as [N,1,1,L]
// tensors so the 2-D kernels apply directly.

#include <vector>

#include "vamark/bits/bit_codec.hpp"
#include "vamark/core/checkpoint.hpp"
#include "vamark/core/params.hpp"
#include "vamark/core/rng.hpp"
#include "vamark/media/types.hpp"

namespace vamark {

struct AudioCodecOptions {
  int payload_bits = 16;
  int channels = 16;       // encoder width; latent is twice this
  double budget = 0.08;    // RMS(delta)/RMS(host) cap
};

template <typename T>
class AudioCodec {
 public:
  AudioCodec(AudioCodecOptions opts, std::uint64_t seed) : opts_(opts) {
    std::mt19937_64 rng = make_rng(seed);
    const int c = opts.channels;
    auto conv = [&](ParamSet<T>& set, const std::string& name, int co, int ci, int k) {
      set.add(name + "_w", kaiming_conv<T>({co, ci, 1, k}, rng));
      set.add(name + "_b", TensorT<T>({co}, T(0)));
    };
    // generator
    conv(gen_, "e1", c, 1, 9);
    conv(gen_, "e2", 2 * c, c, 9);
    conv(gen_, "e3", 2 * c, 2 * c, 9);
    gen_.add("msg_w", randn_tensor<T>({2 * c, opts.payload_bits}, rng, 0.1));
    gen_.add("msg_b", TensorT<T>({2 * c}, T(0)));
    conv(gen_, "d1", c, 2 * c, 9);
    conv(gen_, "d2", c, c, 9);
    conv(gen_, "out", 1, c, 9);
    // detector
    conv(det_, "e1", c, 1, 9);
    conv(det_, "e2", 2 * c, c, 9);
    conv(det_, "e3", 2 * c, 2 * c, 9);
    conv(det_, "p1", c, 2 * c, 9);
    conv(det_, "p2", c, c, 9);
    conv(det_, "pout", 1, c, 9);
    det_.add("h1_w", kaiming_dense<T>({2 * c, 2 * c}, rng));
    det_.add("h1_b", TensorT<T>({2 * c}, T(0)));
    det_.add("h2_w", kaiming_dense<T>({opts.payload_bits, 2 * c}, rng));
    det_.add("h2_b", TensorT<T>({opts.payload_bits}, T(0)));
  }

  // Raw additive watermark waveform before the loudness budget: [N,1,1,L].
  // bits: [N,n] of +-1. L must be a multiple of 4.
  Var generate_delta(Graph<T>& g, Binding<T>& bind, Var audio, Var bits) {
    const Shape s = g.val(audio).shape();
    if (s.size() != 4 || s[1] != 1 || s[2] != 1 || s[3] % 4 != 0)
      throw std::invalid_argument("generate_delta: audio must be [N,1,1,L], L divisible by 4");
    Var h = g.relu(conv1d(g, bind, gen_, audio, "e1", 2));
    h = g.relu(conv1d(g, bind, gen_, h, "e2", 2));
    Var latent = g.relu(conv1d(g, bind, gen_, h, "e3", 1));
    // message layer: the n-bit payload maps to a latent-channel vector that
    // is added at every time step (equivalent to summing per-bit embeddings
    // selected by bit value)
    Var msg = g.dense(bits, bind.bind(gen_.at("msg_w")), bind.bind(gen_.at("msg_b")));
    latent = g.broadcast_add_nc(latent, msg);
    Var d = g.relu(conv1d(g, bind, gen_, g.upsample_nearest(latent, 1, 2), "d1", 1));
    d = g.relu(conv1d(g, bind, gen_, g.upsample_nearest(d, 1, 2), "d2", 1));
    return g.tanh_(conv1d(g, bind, gen_, d, "out", 1));
  }

  struct Detection {
    Var presence;    // [N,1,1,L] probabilities
    Var bit_scores;  // [N,n] probabilities
  };

  Detection detect(Graph<T>& g, Binding<T>& bind, Var audio) {
    const Shape s = g.val(audio).shape();
    if (s.size() != 4 || s[1] != 1 || s[2] != 1 || s[3] % 4 != 0)
      throw std::invalid_argument("detect: audio must be [N,1,1,L], L divisible by 4");
    Var h = g.relu(conv1d(g, bind, det_, audio, "e1", 2));
    h = g.relu(conv1d(g, bind, det_, h, "e2", 2));
    Var feat = g.relu(conv1d(g, bind, det_, h, "e3", 1));
    Var p = g.relu(conv1d(g, bind, det_, g.upsample_nearest(feat, 1, 2), "p1", 1));
    p = g.relu(conv1d(g, bind, det_, g.upsample_nearest(p, 1, 2), "p2", 1));
    Detection out;
    out.presence = g.sigmoid(conv1d(g, bind, det_, p, "pout", 1));
    Var pooled = g.gap(feat);
    Var hh = g.relu(g.dense(pooled, bind.bind(det_.at("h1_w")), bind.bind(det_.at("h1_b"))));
    out.bit_scores = g.sigmoid(g.dense(hh, bind.bind(det_.at("h2_w")), bind.bind(det_.at("h2_b"))));
    return out;
  }

  // Per-sample budget factors so RMS(delta) <= budget * RMS(host); the factor
  // itself is treated as a constant (no gradient through the rescale).
  TensorT<T> budget_factors(const TensorT<T>& host, const TensorT<T>& delta) const {
    const int N = host.shape()[0];
    const std::int64_t L = host.numel() / N;
    TensorT<T> f(host.shape());
    for (int n = 0; n < N; ++n) {
      double ra = 0.0, rd = 0.0;
      for (std::int64_t i = 0; i < L; ++i) {
        ra += static_cast<double>(host[n * L + i]) * host[n * L + i];
        rd += static_cast<double>(delta[n * L + i]) * delta[n * L + i];
      }
      ra = std::sqrt(ra / static_cast<double>(L));
      rd = std::sqrt(rd / static_cast<double>(L));
      const double s = rd > 0.0 ? std::min(1.0, opts_.budget * ra / rd) : 0.0;
      for (std::int64_t i = 0; i < L; ++i) f[n * L + i] = static_cast<T>(s);
    }
    return f;
  }

  ParamSet<T>& generator_params() { return gen_; }
  ParamSet<T>& detector_params() { return det_; }
  const AudioCodecOptions& options() const { return opts_; }

  void save(CheckpointWriter& w, const std::string& prefix) {
    w.put_params(gen_, prefix + "gen.");
    w.put_params(det_, prefix + "det.");
  }
  void load(const CheckpointReader& r, const std::string& prefix) {
    r.load_params(gen_, prefix + "gen.");
    r.load_params(det_, prefix + "det.");
  }

 private:
  AudioCodecOptions opts_;
  ParamSet<T> gen_, det_;

  // kernels are [Co,Ci,1,k]: stride and padding act on the time axis only
  Var conv1d(Graph<T>& g, Binding<T>& bind, ParamSet<T>& set, Var x, const std::string& name, int stride) {
    const int k = set.at(name + "_w").value.shape()[3];
    return g.conv2d_hw(x, bind.bind(set.at(name + "_w")), bind.bind(set.at(name + "_b")), 1, stride, 0, k / 2);
  }
};

// Converts waveforms to/from [N,1,1,L] tensors (padding to a multiple of 4).
template <typename T>
TensorT<T> audio_to_tensor(const std::vector<float>& samples) {
  const std::int64_t L = static_cast<std::int64_t>(samples.size());
  const std::int64_t Lp = (L + 3) / 4 * 4;
  TensorT<T> t({1, 1, 1, static_cast<int>(Lp)});
  for (std::int64_t i = 0; i < L; ++i) t[i] = static_cast<T>(samples[static_cast<size_t>(i)]);
  return t;
}

template <typename T>
std::vector<float> tensor_to_audio(const TensorT<T>& t, std::int64_t true_length) {
  std::vector<float> out(static_cast<size_t>(true_length));
  for (std::int64_t i = 0; i < true_length; ++i) out[static_cast<size_t>(i)] = static_cast<float>(t[i]);
  return out;
}

}  // namespace vamark
