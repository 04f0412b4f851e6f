#pragma once

// Shared test helpers: tensor fills and a central-difference gradient checker.

#include <functional>
#include <random>

#include "vamark/core/graph.hpp"
#include "vamark/core/tensor.hpp"

namespace vamark::testing {

template <typename T>
TensorT<T> random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  TensorT<T> t(std::move(shape));
  std::uniform_real_distribution<double> dist(lo, hi);
  for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<T>(dist(rng));
  return t;
}

// Checks the analytic gradient of a scalar-valued graph function against
// central finite differences. `fn` must rebuild the graph from the given
// leaf values each call. Returns the worst relative error, where relative
// error is |analytic - numeric| / max over all entries of the two gradients.
struct GradCheckResult {
  double max_rel_err = 0.0;
  double grad_scale = 0.0;
};

inline GradCheckResult grad_check(const std::function<double(const std::vector<TensorD>&, std::vector<TensorD>*)>& fn,
                                  std::vector<TensorD> inputs, double step = 1e-4) {
  std::vector<TensorD> analytic;
  fn(inputs, &analytic);

  double scale = 0.0;
  std::vector<TensorD> numeric;
  numeric.reserve(inputs.size());
  for (size_t a = 0; a < inputs.size(); ++a) {
    TensorD num(inputs[a].shape());
    for (std::int64_t i = 0; i < inputs[a].numel(); ++i) {
      const double orig = inputs[a][i];
      inputs[a][i] = orig + step;
      const double fp = fn(inputs, nullptr);
      inputs[a][i] = orig - step;
      const double fm = fn(inputs, nullptr);
      inputs[a][i] = orig;
      num[i] = (fp - fm) / (2.0 * step);
      scale = std::max({scale, std::abs(num[i]), std::abs(analytic[a][i])});
    }
    numeric.push_back(std::move(num));
  }

  GradCheckResult res;
  res.grad_scale = scale;
  const double denom = std::max(scale, 1e-8);
  for (size_t a = 0; a < inputs.size(); ++a)
    for (std::int64_t i = 0; i < inputs[a].numel(); ++i)
      res.max_rel_err = std::max(res.max_rel_err, std::abs(analytic[a][i] - numeric[a][i]) / denom);
  return res;
}

}  // namespace vamark::testing
