#pragma once

// Degradation prompt learning: a pool of learnable prompt embeddings fused
// into decoder features through channel-attention weights
// (GAP -> 1x1 projection -> softmax -> weighted prompt -> concat + conv).

#include "vamark/core/params.hpp"
#include "vamark/core/rng.hpp"
#include "vamark/media/config.hpp"

namespace vamark {

template <typename T>
class PromptPool {
 public:
  PromptPool(PromptShape shape, int feature_channels, std::uint64_t seed) : shape_(shape), feat_c_(feature_channels) {
    std::mt19937_64 rng = make_rng(seed);
    params_.add("pool", randn_tensor<T>({shape.e, shape.c, shape.h, shape.w}, rng, 0.02));
    params_.add("attn_w", kaiming_dense<T>({shape.e, feature_channels}, rng));
    params_.add("attn_b", TensorT<T>({shape.e}, T(0)));
    params_.add("fuse_w", kaiming_conv<T>({feature_channels, feature_channels + shape.c, 3, 3}, rng));
    params_.add("fuse_b", TensorT<T>({feature_channels}, T(0)));
  }

  struct Fused {
    Var out;      // enhanced features, same channel count as the input
    Var weights;  // [N, e] softmax weights
    Var prompt;   // [N, c, h, w] mixed prompt before spatial resize
  };

  Fused fuse(Graph<T>& g, Binding<T>& bind, Var f) {
    const Shape s = g.val(f).shape();  // copy: the graph may reallocate while ops are added
    if (s.size() != 4 || s[1] != feat_c_) throw std::invalid_argument("prompt_fuse: feature channel mismatch");
    Var logits = g.dense(g.gap(f), bind.bind(params_.at("attn_w")), bind.bind(params_.at("attn_b")));
    Var weights = g.softmax_rows(logits);
    Var prompt = g.mix_pool(weights, bind.bind(params_.at("pool")));
    Var resized = g.resize_bilinear(prompt, s[2], s[3]);
    Var cat = g.concat_channels({f, resized});
    Var out = g.conv2d(cat, bind.bind(params_.at("fuse_w")), bind.bind(params_.at("fuse_b")), 1, 1);
    return {out, weights, prompt};
  }

  ParamSet<T>& params() { return params_; }
  const PromptShape& shape() const { return shape_; }

 private:
  PromptShape shape_;
  int feat_c_;
  ParamSet<T> params_;
};

}  // namespace vamark
