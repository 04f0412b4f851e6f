#pragma once

// Invertible coupling stack. Blocks alternate which branch they update; the
// updated branch gets an affine transform whose scale/shift come from a small
// convolutional subnet of the other branch. The scale is exp of a sigmoid
// bounded by the clamp factor, and the subnet's last conv starts at zero, so
// every block is the identity at initialization.

#include <utility>

#include "vamark/core/params.hpp"
#include "vamark/core/rng.hpp"

namespace vamark {

template <typename T>
class CouplingStack {
 public:
  static constexpr double kClamp = 2.0;

  CouplingStack(int branch_channels, int hidden, int blocks, std::uint64_t seed)
      : channels_(branch_channels), hidden_(hidden), blocks_(blocks) {
    std::mt19937_64 rng = make_rng(seed);
    for (int i = 0; i < blocks; ++i) {
      const std::string p = "block" + std::to_string(i) + ".";
      params_.add(p + "w1", kaiming_conv<T>({hidden, branch_channels, 3, 3}, rng));
      params_.add(p + "b1", TensorT<T>({hidden}, T(0)));
      params_.add(p + "w2", TensorT<T>({2 * branch_channels, hidden, 3, 3}, T(0)));  // zero init: identity block
      params_.add(p + "b2", TensorT<T>({2 * branch_channels}, T(0)));
    }
  }

  int blocks() const { return blocks_; }
  int branch_channels() const { return channels_; }
  ParamSet<T>& params() { return params_; }

  // Applies block i forward: even blocks update the second branch from the
  // first, odd blocks update the first from the second.
  std::pair<Var, Var> forward_block(Graph<T>& g, Binding<T>& bind, int i, Var a, Var b) {
    auto [scale, shift] = subnet(g, bind, i, i % 2 == 0 ? a : b);
    if (i % 2 == 0) return {a, g.add(g.mul(b, scale), shift)};
    return {g.add(g.mul(a, scale), shift), b};
  }

  std::pair<Var, Var> inverse_block(Graph<T>& g, Binding<T>& bind, int i, Var a, Var b) {
    if (i % 2 == 0) {
      auto [inv_scale, shift] = subnet_inv(g, bind, i, a);
      return {a, g.mul(g.sub(b, shift), inv_scale)};
    }
    auto [inv_scale, shift] = subnet_inv(g, bind, i, b);
    return {g.mul(g.sub(a, shift), inv_scale), b};
  }

  std::pair<Var, Var> forward(Graph<T>& g, Binding<T>& bind, Var a, Var b) {
    check_branches(g, a, b);
    for (int i = 0; i < blocks_; ++i) std::tie(a, b) = forward_block(g, bind, i, a, b);
    return {a, b};
  }

  std::pair<Var, Var> inverse(Graph<T>& g, Binding<T>& bind, Var a, Var b) {
    check_branches(g, a, b);
    for (int i = blocks_ - 1; i >= 0; --i) std::tie(a, b) = inverse_block(g, bind, i, a, b);
    return {a, b};
  }

 private:
  int channels_, hidden_, blocks_;
  ParamSet<T> params_;

  void check_branches(Graph<T>& g, Var a, Var b) {
    const Shape& sa = g.val(a).shape();
    const Shape& sb = g.val(b).shape();
    if (sa.size() != 4 || sa != sb || sa[1] != channels_)
      throw std::invalid_argument("coupling stack: branch shapes must be [N," + std::to_string(channels_) +
                                  ",H,W] and equal, got " + shape_str(sa) + " vs " + shape_str(sb));
  }

  Var raw_subnet(Graph<T>& g, Binding<T>& bind, int i, Var x) {
    const std::string p = "block" + std::to_string(i) + ".";
    Var h = g.relu(g.conv2d(x, bind.bind(params_.at(p + "w1")), bind.bind(params_.at(p + "b1")), 1, 1));
    return g.conv2d(h, bind.bind(params_.at(p + "w2")), bind.bind(params_.at(p + "b2")), 1, 1);
  }

  // scale = exp(clamp * (2 sigmoid(s) - 1)), shift = t
  std::pair<Var, Var> subnet(Graph<T>& g, Binding<T>& bind, int i, Var x) {
    Var st = raw_subnet(g, bind, i, x);
    Var s = g.slice_channels(st, 0, channels_);
    Var t = g.slice_channels(st, channels_, 2 * channels_);
    Var log_scale = g.affine(g.sigmoid(s), T(2 * kClamp), T(-kClamp));
    return {g.exp_(log_scale), t};
  }

  std::pair<Var, Var> subnet_inv(Graph<T>& g, Binding<T>& bind, int i, Var x) {
    Var st = raw_subnet(g, bind, i, x);
    Var s = g.slice_channels(st, 0, channels_);
    Var t = g.slice_channels(st, channels_, 2 * channels_);
    Var neg_log_scale = g.affine(g.sigmoid(s), T(-2 * kClamp), T(kClamp));
    return {g.exp_(neg_log_scale), t};
  }
};

}  // namespace vamark
