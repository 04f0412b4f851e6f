#pragma once

// Bit hiding and recovery. The hider is a 3-scale encoder-decoder with skip
// connections; the payload enters as a linear expansion to a single-channel
// map concatenated at the bottleneck, and the output is a residual added to
// the input frame (zero at initialization). The recoverer is a 3-scale
// downsampling encoder whose final features pass through the bit prompt pool
// before global average pooling and a two-layer head with sigmoid outputs.

#include <vector>

#include "vamark/bits/prompt.hpp"
#include "vamark/core/checkpoint.hpp"
#include "vamark/core/params.hpp"
#include "vamark/core/rng.hpp"
#include "vamark/media/bits.hpp"

namespace vamark {

struct BitCodecOptions {
  int payload_bits = 32;
  int base_channels = 16;
  int brm_channels = 64;
  PromptShape prompt_bits{16, 16, 16, 6};
  bool use_dpl = true;
};

// Payload bits as a [N, k] tensor of +-1 values.
template <typename T>
TensorT<T> bits_to_tensor(const std::vector<BitString>& payloads) {
  if (payloads.empty()) throw std::invalid_argument("bits_to_tensor: empty batch");
  const int k = payloads.front().length();
  TensorT<T> out({static_cast<int>(payloads.size()), k});
  for (size_t n = 0; n < payloads.size(); ++n) {
    if (payloads[n].length() != k) throw std::invalid_argument("bits_to_tensor: length mismatch");
    for (int i = 0; i < k; ++i) out[static_cast<std::int64_t>(n) * k + i] = payloads[n].bit(i) ? T(1) : T(-1);
  }
  return out;
}

template <typename T>
class BitHider {
 public:
  BitHider(BitCodecOptions opts, std::uint64_t seed) : opts_(opts) {
    std::mt19937_64 rng = make_rng(seed);
    const int c = opts.base_channels;
    auto conv = [&](const std::string& name, int co, int ci, int k) {
      params_.add(name + "_w", kaiming_conv<T>({co, ci, k, k}, rng));
      params_.add(name + "_b", TensorT<T>({co}, T(0)));
    };
    conv("e1a", c, 3, 3);
    conv("e1b", c, c, 3);
    conv("e2a", 2 * c, c, 3);
    conv("e2b", 2 * c, 2 * c, 3);
    conv("e3", 3 * c, 2 * c, 3);
    params_.add("bits_w", kaiming_dense<T>({kBitGrid * kBitGrid, opts.payload_bits}, rng));
    params_.add("bits_b", TensorT<T>({kBitGrid * kBitGrid}, T(0)));
    conv("m1", 3 * c, 3 * c + 1, 3);
    conv("u2a", 2 * c, 3 * c, 3);
    conv("u2b", 2 * c, 4 * c, 3);
    conv("u1a", c, 2 * c, 3);
    conv("u1b", c, 2 * c, 3);
    params_.add("out_w", TensorT<T>({3, c, 3, 3}, T(0)));  // zero residual at init
    params_.add("out_b", TensorT<T>({3}, T(0)));
  }

  // i_med: [N,3,H,W] (H, W divisible by 4); bits: [N,k] of +-1.
  Var embed(Graph<T>& g, Binding<T>& bind, Var i_med, Var bits) {
    const Shape s = g.val(i_med).shape();  // copy: the graph may reallocate while ops are added
    if (s.size() != 4 || s[2] % 4 != 0 || s[3] % 4 != 0) throw std::invalid_argument("embed: H,W must be multiples of 4");
    if (g.val(bits).shape() != Shape{s[0], opts_.payload_bits})
      throw std::invalid_argument("embed: payload must be [N," + std::to_string(opts_.payload_bits) + "]");
    auto conv = [&](Var x, const std::string& name, int pad = 1) {
      return g.conv2d(x, bind.bind(params_.at(name + "_w")), bind.bind(params_.at(name + "_b")), 1, pad);
    };
    Var e1 = g.relu(conv(g.relu(conv(i_med, "e1a")), "e1b"));
    Var e2 = g.relu(conv(g.relu(conv(g.avgpool2(e1), "e2a")), "e2b"));
    Var e3 = g.relu(conv(g.avgpool2(e2), "e3"));
    // payload enters as a single-channel map at the bottleneck grid
    Var bmap = g.dense(bits, bind.bind(params_.at("bits_w")), bind.bind(params_.at("bits_b")));
    bmap = g.reshape(bmap, {s[0], 1, kBitGrid, kBitGrid});
    bmap = g.resize_bilinear(bmap, s[2] / 4, s[3] / 4);
    Var m = g.relu(conv(g.concat_channels({e3, bmap}), "m1"));
    Var u2 = g.relu(conv(g.upsample_nearest(m, 2, 2), "u2a"));
    u2 = g.relu(conv(g.concat_channels({u2, e2}), "u2b"));
    Var u1 = g.relu(conv(g.upsample_nearest(u2, 2, 2), "u1a"));
    u1 = g.relu(conv(g.concat_channels({u1, e1}), "u1b"));
    Var residual = conv(u1, "out");
    return g.add(i_med, residual);
  }

  ParamSet<T>& params() { return params_; }
  void save(CheckpointWriter& w, const std::string& prefix) { w.put_params(params_, prefix); }
  void load(const CheckpointReader& r, const std::string& prefix) { r.load_params(params_, prefix); }
  const BitCodecOptions& options() const { return opts_; }

 private:
  static constexpr int kBitGrid = 16;
  BitCodecOptions opts_;
  ParamSet<T> params_;
};

template <typename T>
class BitRecoverer {
 public:
  BitRecoverer(BitCodecOptions opts, std::uint64_t seed)
      : opts_(opts), prompt_(opts.prompt_bits, opts.brm_channels, mix_seed(seed, 1)) {
    std::mt19937_64 rng = make_rng(seed);
    const int c = opts.brm_channels;
    params_.add("c1_w", kaiming_conv<T>({c / 2, 3, 3, 3}, rng));
    params_.add("c1_b", TensorT<T>({c / 2}, T(0)));
    params_.add("c2_w", kaiming_conv<T>({c, c / 2, 3, 3}, rng));
    params_.add("c2_b", TensorT<T>({c}, T(0)));
    params_.add("c3_w", kaiming_conv<T>({c, c, 3, 3}, rng));
    params_.add("c3_b", TensorT<T>({c}, T(0)));
    params_.add("h1_w", kaiming_dense<T>({2 * c, c}, rng));
    params_.add("h1_b", TensorT<T>({2 * c}, T(0)));
    params_.add("h2_w", kaiming_dense<T>({opts.payload_bits, 2 * c}, rng));
    params_.add("h2_b", TensorT<T>({opts.payload_bits}, T(0)));
  }

  // Returns per-bit scores in (0,1): [N, k].
  Var extract(Graph<T>& g, Binding<T>& bind, Var i_rec) {
    Var x = g.relu(conv(g, bind, i_rec, "c1", 2));
    x = g.relu(conv(g, bind, x, "c2", 2));
    Var f = g.relu(conv(g, bind, x, "c3", 1));
    if (opts_.use_dpl) f = prompt_.fuse(g, bind, f).out;
    Var pooled = g.gap(f);
    Var h = g.relu(g.dense(pooled, bind.bind(params_.at("h1_w")), bind.bind(params_.at("h1_b"))));
    return g.sigmoid(g.dense(h, bind.bind(params_.at("h2_w")), bind.bind(params_.at("h2_b"))));
  }

  ParamSet<T>& params() { return params_; }
  PromptPool<T>& bit_prompt() { return prompt_; }

  void save(CheckpointWriter& w, const std::string& prefix) {
    w.put_params(params_, prefix);
    w.put_params(prompt_.params(), prefix + "prompt_b.");
  }
  void load(const CheckpointReader& r, const std::string& prefix) {
    r.load_params(params_, prefix);
    if (opts_.use_dpl) r.load_params(prompt_.params(), prefix + "prompt_b.");
  }
  const BitCodecOptions& options() const { return opts_; }

 private:
  BitCodecOptions opts_;
  PromptPool<T> prompt_;
  ParamSet<T> params_;

  Var conv(Graph<T>& g, Binding<T>& bind, Var x, const std::string& name, int stride) {
    return g.conv2d(x, bind.bind(params_.at(name + "_w")), bind.bind(params_.at(name + "_b")), stride, 1);
  }
};

// Hard decision: score >= 0.5 maps to 1 (ties round to 1).
template <typename T>
std::vector<BitString> harden_bits(const TensorT<T>& scores) {
  if (scores.ndim() != 2) throw std::invalid_argument("harden_bits: expects [N,k]");
  std::vector<BitString> out;
  for (int n = 0; n < scores.dim(0); ++n) {
    BitString b = BitString::zeros(scores.dim(1));
    for (int i = 0; i < scores.dim(1); ++i) b.set(i, scores.at2(n, i) >= T(0.5) ? 1 : 0);
    out.push_back(std::move(b));
  }
  return out;
}

}  // namespace vamark
