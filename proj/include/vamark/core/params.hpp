#pragma once

#include <cmath>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "vamark/core/graph.hpp"
#include "vamark/core/tensor.hpp"

namespace vamark {

// A named learnable tensor with Adam moments.
template <typename T>
struct Param {
  std::string name;
  TensorT<T> value;
  TensorT<T> m, v;  // Adam state, allocated on first step
  bool trainable = true;

  Param() = default;
  Param(std::string n, TensorT<T> val) : name(std::move(n)), value(std::move(val)) {}
};

template <typename T>
class ParamSet {
 public:
  Param<T>& add(std::string name, TensorT<T> value) {
    if (index_.count(name)) throw std::invalid_argument("duplicate parameter: " + name);
    params_.push_back(std::make_unique<Param<T>>(name, std::move(value)));
    index_[params_.back()->name] = params_.size() - 1;
    return *params_.back();
  }

  Param<T>& at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("no parameter named " + name);
    return *params_[it->second];
  }
  const Param<T>& at(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("no parameter named " + name);
    return *params_[it->second];
  }
  bool has(const std::string& name) const { return index_.count(name) != 0; }

  std::vector<Param<T>*> all() {
    std::vector<Param<T>*> out;
    for (auto& p : params_) out.push_back(p.get());
    return out;
  }
  std::vector<const Param<T>*> all() const {
    std::vector<const Param<T>*> out;
    for (auto& p : params_) out.push_back(p.get());
    return out;
  }

  std::int64_t total_elements() const {
    std::int64_t n = 0;
    for (auto& p : params_) n += p->value.numel();
    return n;
  }

 private:
  std::vector<std::unique_ptr<Param<T>>> params_;
  std::map<std::string, size_t> index_;
};

// Binds parameters into a per-step graph and applies optimizer updates from
// the node gradients after backward(). A parameter used several times in one
// graph (weight sharing, inverse passes) binds to a single node, so its
// gradient accumulates correctly.
template <typename T>
class Binding {
 public:
  explicit Binding(Graph<T>& g) : g_(g) {}

  Var bind(Param<T>& p) {
    auto it = cache_.find(&p);
    if (it != cache_.end()) return it->second;
    Var v = p.trainable ? g_.leaf(p.value) : g_.constant(p.value);
    if (p.trainable) bound_.push_back({&p, v});
    cache_.emplace(&p, v);
    return v;
  }

  const std::vector<std::pair<Param<T>*, Var>>& bound() const { return bound_; }

  Graph<T>& graph() { return g_; }

 private:
  Graph<T>& g_;
  std::vector<std::pair<Param<T>*, Var>> bound_;
  std::map<Param<T>*, Var> cache_;
};

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.5;  // paper setting; conventional 0.999 available via config
  double eps = 1e-8;
};

template <typename T>
class Adam {
 public:
  explicit Adam(AdamConfig cfg) : cfg_(cfg) {}

  void step(Binding<T>& binding, double lr_now) {
    ++t_;
    const T b1 = static_cast<T>(cfg_.beta1), b2 = static_cast<T>(cfg_.beta2);
    const T bc1 = T(1) - static_cast<T>(std::pow(cfg_.beta1, t_));
    const T bc2 = T(1) - static_cast<T>(std::pow(cfg_.beta2, t_));
    for (auto& [p, var] : binding.bound()) {
      TensorT<T>& grad = binding.graph().grad(var);
      if (p->m.numel() == 0) {
        p->m = TensorT<T>(p->value.shape());
        p->v = TensorT<T>(p->value.shape());
      }
      for (std::int64_t i = 0; i < p->value.numel(); ++i) {
        const T gi = grad[i];
        p->m[i] = b1 * p->m[i] + (T(1) - b1) * gi;
        p->v[i] = b2 * p->v[i] + (T(1) - b2) * gi * gi;
        const T mhat = p->m[i] / bc1;
        const T vhat = p->v[i] / bc2;
        p->value[i] -= static_cast<T>(lr_now) * mhat / (std::sqrt(vhat) + static_cast<T>(cfg_.eps));
      }
    }
  }

  std::int64_t steps() const { return t_; }
  void set_steps(std::int64_t t) { t_ = t; }
  const AdamConfig& config() const { return cfg_; }

 private:
  AdamConfig cfg_;
  std::int64_t t_ = 0;
};

// Learning rate halving schedule: lr(step) = lr0 / 2^(step / interval).
inline double scheduled_lr(double lr0, std::int64_t step, std::int64_t halving_interval) {
  if (halving_interval <= 0) return lr0;
  return lr0 * std::pow(0.5, static_cast<double>(step / halving_interval));
}

// ---------------------------------------------------------------------------
// initializers
// ---------------------------------------------------------------------------

template <typename T>
TensorT<T> randn_tensor(Shape shape, std::mt19937_64& rng, double stddev) {
  TensorT<T> t(std::move(shape));
  std::normal_distribution<double> dist(0.0, stddev);
  for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<T>(dist(rng));
  return t;
}

template <typename T>
TensorT<T> kaiming_conv(Shape shape, std::mt19937_64& rng) {
  // shape: [Cout, Cin, kh, kw]
  const double fan_in = static_cast<double>(shape[1]) * shape[2] * shape[3];
  return randn_tensor<T>(std::move(shape), rng, std::sqrt(2.0 / fan_in));
}

template <typename T>
TensorT<T> kaiming_dense(Shape shape, std::mt19937_64& rng) {
  // shape: [out, in]
  const double fan_in = static_cast<double>(shape[1]);
  return randn_tensor<T>(std::move(shape), rng, std::sqrt(2.0 / fan_in));
}

}  // namespace vamark
