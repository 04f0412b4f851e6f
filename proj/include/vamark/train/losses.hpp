#pragma once

// Training objectives. All norms are per-element means so the loss weights
// are scale-free across resolutions and batch sizes.

#include "vamark/core/graph.hpp"

namespace vamark {

// Bit hiding/recovery objective: container fidelity against the intermediate
// frame plus the weighted payload error on the soft scores.
template <typename T>
Var loss_cop(Graph<T>& g, Var i_con, Var i_med, Var bit_scores, Var bit_targets, T lambda) {
  Var image_term = g.mse(i_con, i_med);
  Var bit_term = g.mse(bit_scores, bit_targets);
  return g.weighted_sum({image_term, bit_term}, {T(1), lambda});
}

// Hiding/revealing objective: center-frame recovery, container fidelity
// against the original frame, and watermark reveal fidelity.
template <typename T>
Var loss_loc(Graph<T>& g, Var i_ori_hat, Var i_ori, Var i_con, Var i_loc_hat, Var i_loc, T alpha, T beta) {
  Var recovery = g.l1(i_ori_hat, i_ori);
  Var container = g.mse(i_con, i_ori);
  Var reveal = g.l1(i_loc_hat, i_loc);
  return g.weighted_sum({recovery, container, reveal}, {T(1), alpha, beta});
}

}  // namespace vamark
