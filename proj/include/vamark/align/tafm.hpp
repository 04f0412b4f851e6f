#pragma once

// Temporal alignment and fusion: bidirectional cross-attention between the
// reference frame and each supporting frame, gated by learnable scalars that
// start at zero so the module is an exact identity-concat at initialization.

#include <cstdint>

#include "vamark/core/params.hpp"
#include "vamark/core/rng.hpp"

namespace vamark {

// Spatial positions are flattened into (H*W) tokens; queries/keys/values are
// per-position channel vectors (D = feature channels, frames enter directly
// with D = 3).
template <typename T>
Var scaled_attention(Graph<T>& g, Var q, Var k, Var v) {
  return g.attention_nchw(q, k, v);
}

template <typename T>
class Tafm {
 public:
  // d: feature channels per frame; the group is [N, 3d, H, W] ordered
  // (previous, reference, next).
  Tafm(int d, std::uint64_t seed) : d_(d) {
    std::mt19937_64 rng = make_rng(seed);
    auto mat = [&](const std::string& name) -> Param<T>& {
      return params_.add(name, randn_tensor<T>({d, d, 1, 1}, rng, 1.0 / std::sqrt(static_cast<double>(d))));
    };
    mat("w1_r");
    mat("w1_s");
    mat("w2_r");
    mat("w2_s");
    params_.add("ln_r_gamma", TensorT<T>({d}, T(1)));
    params_.add("ln_r_beta", TensorT<T>({d}, T(0)));
    params_.add("ln_s_gamma", TensorT<T>({d}, T(1)));
    params_.add("ln_s_beta", TensorT<T>({d}, T(0)));
    params_.add("gamma1", TensorT<T>({1}, T(0)));
    params_.add("gamma2", TensorT<T>({1}, T(0)));
    // merge: 4d fused channels -> 3d group channels, initialized as the
    // (prev, ref, next) selection so the whole module starts as identity
    // over the group.
    TensorT<T> merge({3 * d, 4 * d, 1, 1});
    for (int c = 0; c < d; ++c) {
      merge[(c) * 4 * d + (d + c)] = T(1);                  // out prev   <- fuse_prev supporter half
      merge[(d + c) * 4 * d + (c)] = T(0.5);                // out ref    <- mean of the two reference halves
      merge[(d + c) * 4 * d + (2 * d + c)] = T(0.5);
      merge[(2 * d + c) * 4 * d + (3 * d + c)] = T(1);      // out next   <- fuse_next supporter half
    }
    params_.add("merge_w", std::move(merge));
    params_.add("merge_b", TensorT<T>({3 * d}, T(0)));
  }

  // Eqs 3-6. f_r, f_s: [N, d, H, W]; output [N, 2d, H, W].
  Var cross_fuse(Graph<T>& g, Binding<T>& bind, Var f_r, Var f_s) {
    Var fbar_r = g.layernorm_channels(f_r, bind.bind(params_.at("ln_r_gamma")), bind.bind(params_.at("ln_r_beta")));
    Var fbar_s = g.layernorm_channels(f_s, bind.bind(params_.at("ln_s_gamma")), bind.bind(params_.at("ln_s_beta")));
    Var zero_d = g.constant(TensorT<T>({d_}, T(0)));
    Var q_r = g.conv2d(fbar_r, bind.bind(params_.at("w1_r")), zero_d, 1, 0);
    Var k_s = g.conv2d(fbar_s, bind.bind(params_.at("w1_s")), zero_d, 1, 0);
    Var v_s = g.conv2d(f_s, bind.bind(params_.at("w2_s")), zero_d, 1, 0);
    Var f_r2s = scaled_attention(g, q_r, k_s, v_s);

    Var q_s = g.conv2d(fbar_s, bind.bind(params_.at("w1_s")), zero_d, 1, 0);
    Var k_r = g.conv2d(fbar_r, bind.bind(params_.at("w1_r")), zero_d, 1, 0);
    Var v_r = g.conv2d(f_r, bind.bind(params_.at("w2_r")), zero_d, 1, 0);
    Var f_s2r = scaled_attention(g, q_s, k_r, v_r);

    Var left = g.scale_add(bind.bind(params_.at("gamma1")), f_s2r, f_r);
    Var right = g.scale_add(bind.bind(params_.at("gamma2")), f_r2s, f_s);
    return g.concat_channels({left, right});
  }

  // Aligns both supporting frames to the reference and merges back to the
  // group width: [N, 3d, H, W] -> [N, 3d, H, W].
  Var align_group(Graph<T>& g, Binding<T>& bind, Var group) {
    const Shape s = g.val(group).shape();
    if (s.size() != 4 || s[1] != 3 * d_) throw std::invalid_argument("tafm: group must have 3*d channels");
    Var prev = g.slice_channels(group, 0, d_);
    Var ref = g.slice_channels(group, d_, 2 * d_);
    Var next = g.slice_channels(group, 2 * d_, 3 * d_);
    Var fuse_prev = cross_fuse(g, bind, ref, prev);
    Var fuse_next = cross_fuse(g, bind, ref, next);
    Var cat = g.concat_channels({fuse_prev, fuse_next});
    return g.conv2d(cat, bind.bind(params_.at("merge_w")), bind.bind(params_.at("merge_b")), 1, 0);
  }

  ParamSet<T>& params() { return params_; }
  int feature_channels() const { return d_; }

 private:
  int d_;
  ParamSet<T> params_;
};

}  // namespace vamark
