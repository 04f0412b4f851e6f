#pragma once

// Training-time degradations inside the autodiff graph. Each draw reuses the
// channel simulator and enters the graph as x + const(degraded - x): the
// forward value is exactly the simulated degradation while the gradient
// treats the perturbation as a constant (straight-through for the
// quantization proxy). H.264 is evaluation-only and rejected here.

#include <random>

#include "vamark/channel/channel.hpp"
#include "vamark/core/graph.hpp"

namespace vamark {

template <typename T>
Var degrade_in_graph(Graph<T>& g, Var frames, const DegradeSpec& spec, std::mt19937_64& rng) {
  if (!spec.trainable())
    throw std::invalid_argument("degradation " + spec.name() + " is evaluation-only and cannot join a training graph");
  if (spec.kind == DegradeSpec::Kind::kIdentity) return g.clip(frames, T(0), T(1));
  Tensor current = g.val(frames).template cast<float>();
  for (std::int64_t i = 0; i < current.numel(); ++i) current[i] = std::clamp(current[i], 0.0f, 1.0f);
  Tensor degraded = apply_video_degradation(current, spec, rng);
  TensorT<T> delta(g.val(frames).shape());
  for (std::int64_t i = 0; i < delta.numel(); ++i)
    delta[i] = static_cast<T>(degraded[i]) - g.val(frames)[i];
  return g.add(frames, g.constant(std::move(delta)));
}

// Uniformly samples one trainable degradation from the schedule.
inline DegradeSpec sample_degradation(const std::vector<std::string>& names, std::mt19937_64& rng) {
  if (names.empty()) return DegradeSpec{};
  for (int attempt = 0; attempt < 64; ++attempt) {
    const DegradeSpec spec = DegradeSpec::parse(names[rng() % names.size()]);
    if (spec.trainable()) return spec;
  }
  throw std::invalid_argument("degradation schedule contains no trainable entries");
}

}  // namespace vamark
