#pragma once

// Visual hiding and revealing. Hiding aligns the cover group, couples it with
// the watermark group through the invertible stack, and emits the center
// frame of the cover branch as the intermediate container. The remaining 15
// channels form the hiding by-product, which is never transmitted: at decode
// a residual prediction module estimates it from the received frame
// replicated threefold, with an alignment stage of its own and a degradation
// prompt pool enhancing its output.

#include <optional>

#include "vamark/align/tafm.hpp"
#include "vamark/bits/prompt.hpp"
#include "vamark/core/checkpoint.hpp"
#include "vamark/inn/coupling.hpp"
#include "vamark/media/config.hpp"

namespace vamark {

struct VideoCodecOptions {
  int frame_channels = 3;
  int inn_hidden = 16;
  int inn_blocks = 16;
  int rpm_hidden = 32;
  PromptShape prompt_video{16, 16, 72, 2};
  bool use_tafm = true;
  bool use_dpl = true;
};

template <typename T>
class VideoCodec {
 public:
  VideoCodec(VideoCodecOptions opts, std::uint64_t seed)
      : opts_(opts),
        group_c_(3 * opts.frame_channels),
        residual_c_(opts.frame_channels * 5),
        tafm_hide_(opts.frame_channels, mix_seed(seed, 1)),
        tafm_reveal_(opts.frame_channels, mix_seed(seed, 2)),
        stack_(group_c_, opts.inn_hidden, opts.inn_blocks, mix_seed(seed, 3)),
        prompt_(opts.prompt_video, residual_c_, mix_seed(seed, 4)) {
    std::mt19937_64 rng = make_rng(seed, 5);
    rpm_.add("w1", kaiming_conv<T>({opts.rpm_hidden, group_c_, 3, 3}, rng));
    rpm_.add("b1", TensorT<T>({opts.rpm_hidden}, T(0)));
    rpm_.add("w2", kaiming_conv<T>({opts.rpm_hidden, opts.rpm_hidden, 3, 3}, rng));
    rpm_.add("b2", TensorT<T>({opts.rpm_hidden}, T(0)));
    rpm_.add("w3", kaiming_conv<T>({residual_c_, opts.rpm_hidden, 3, 3}, rng));
    rpm_.add("b3", TensorT<T>({residual_c_}, T(0)));
  }

  struct HideOut {
    Var i_med;  // [N,3,H,W]
    Var z_v;    // [N,15,H,W] hiding by-product
  };

  // cover_group / wm_group: [N, 9, H, W] ordered (prev, ref, next).
  HideOut hide(Graph<T>& g, Binding<T>& bind, Var cover_group, Var wm_group) {
    check_same_shape(g.val(cover_group), g.val(wm_group), "hide");
    Var aligned = opts_.use_tafm ? tafm_hide_.align_group(g, bind, cover_group) : cover_group;
    auto [a_out, b_out] = stack_.forward(g, bind, aligned, wm_group);
    const int fc = opts_.frame_channels;
    Var i_med = g.slice_channels(a_out, fc, 2 * fc);
    Var z_v = g.concat_channels({g.slice_channels(a_out, 0, fc), g.slice_channels(a_out, 2 * fc, 3 * fc), b_out});
    return {i_med, z_v};
  }

  // Estimates the by-product from the received frame replicated threefold.
  Var predict_residual(Graph<T>& g, Binding<T>& bind, Var triple) {
    const Shape s = g.val(triple).shape();
    if (s.size() != 4 || s[1] != group_c_) throw std::invalid_argument("predict_residual: expects the replicated triple");
    Var x = opts_.use_tafm ? tafm_reveal_.align_group(g, bind, triple) : triple;
    Var h1 = g.relu(g.conv2d(x, bind.bind(rpm_.at("w1")), bind.bind(rpm_.at("b1")), 1, 1));
    Var h2 = g.relu(g.conv2d(h1, bind.bind(rpm_.at("w2")), bind.bind(rpm_.at("b2")), 1, 1));
    Var z = g.conv2d(h2, bind.bind(rpm_.at("w3")), bind.bind(rpm_.at("b3")), 1, 1);
    if (opts_.use_dpl) z = prompt_.fuse(g, bind, z).out;
    return z;
  }

  struct RevealOut {
    Var ori_group;  // [N,9,H,W] reconstructed cover-branch group
    Var loc_group;  // [N,9,H,W] reconstructed watermark group
    Var i_ori;      // [N,3,H,W] center frame, clipped
    Var i_loc;      // [N,3,H,W] center frame, clipped
  };

  // Reassembles the stack output from the received frame and the estimated
  // by-product, then runs the inverse stack and selects center frames.
  RevealOut reveal(Graph<T>& g, Binding<T>& bind, Var i_rec, Var z_hat) {
    const int fc = opts_.frame_channels;
    const Shape sz = g.val(z_hat).shape();
    if (sz.size() != 4 || sz[1] != residual_c_) throw std::invalid_argument("reveal: by-product must have 15 channels");
    Var a_out = g.concat_channels({g.slice_channels(z_hat, 0, fc), i_rec, g.slice_channels(z_hat, fc, 2 * fc)});
    Var b_out = g.slice_channels(z_hat, 2 * fc, 5 * fc);
    auto [a_in, b_in] = stack_.inverse(g, bind, a_out, b_out);
    RevealOut out;
    out.ori_group = a_in;
    out.loc_group = b_in;
    out.i_ori = g.clip(g.slice_channels(a_in, fc, 2 * fc), T(0), T(1));
    out.i_loc = g.clip(g.slice_channels(b_in, fc, 2 * fc), T(0), T(1));
    return out;
  }

  CouplingStack<T>& stack() { return stack_; }
  Tafm<T>& tafm_hide() { return tafm_hide_; }
  Tafm<T>& tafm_reveal() { return tafm_reveal_; }
  PromptPool<T>& video_prompt() { return prompt_; }
  ParamSet<T>& rpm_params() { return rpm_; }
  const VideoCodecOptions& options() const { return opts_; }
  int residual_channels() const { return residual_c_; }

  void save(CheckpointWriter& w, const std::string& prefix) {
    w.put_params(tafm_hide_.params(), prefix + "tafm_hide.");
    w.put_params(tafm_reveal_.params(), prefix + "tafm_reveal.");
    w.put_params(stack_.params(), prefix + "stack.");
    w.put_params(prompt_.params(), prefix + "prompt_v.");
    w.put_params(rpm_, prefix + "rpm.");
  }

  void load(const CheckpointReader& r, const std::string& prefix) {
    if (opts_.use_tafm) {
      r.load_params(tafm_hide_.params(), prefix + "tafm_hide.");
      r.load_params(tafm_reveal_.params(), prefix + "tafm_reveal.");
    }
    r.load_params(stack_.params(), prefix + "stack.");
    if (opts_.use_dpl) r.load_params(prompt_.params(), prefix + "prompt_v.");
    r.load_params(rpm_, prefix + "rpm.");
  }

 private:
  VideoCodecOptions opts_;
  int group_c_, residual_c_;
  Tafm<T> tafm_hide_, tafm_reveal_;
  CouplingStack<T> stack_;
  PromptPool<T> prompt_;
  ParamSet<T> rpm_;
};

}  // namespace vamark
