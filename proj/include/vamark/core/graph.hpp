#pragma once

// Reverse-mode autodiff over a flat tape. A Graph is built per forward pass;
// backward() walks the tape in reverse. Node handles (Var) are indices, so
// they stay valid across tape growth.

#include <cmath>
#include <functional>
#include <memory>
#include <vector>

#include "vamark/core/kernels.hpp"
#include "vamark/core/tensor.hpp"

namespace vamark {

struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

template <typename T>
class Graph {
 public:
  struct Node {
    TensorT<T> value;
    TensorT<T> grad;
    bool requires_grad = false;
    std::function<void(Graph&)> back;
  };

  Var constant(TensorT<T> v) { return push(std::move(v), false, nullptr); }
  Var leaf(TensorT<T> v) { return push(std::move(v), true, nullptr); }

  const TensorT<T>& val(Var x) const { return nodes_[static_cast<size_t>(x.id)].value; }
  TensorT<T>& val_mut(Var x) { return nodes_[static_cast<size_t>(x.id)].value; }
  TensorT<T>& grad(Var x) {
    Node& n = nodes_[static_cast<size_t>(x.id)];
    if (n.grad.numel() == 0) n.grad = TensorT<T>(n.value.shape());
    return n.grad;
  }
  bool needs_grad(Var x) const { return nodes_[static_cast<size_t>(x.id)].requires_grad; }
  size_t size() const { return nodes_.size(); }

  void backward(Var loss) {
    if (val(loss).numel() != 1) throw std::invalid_argument("backward: loss must be scalar");
    grad(loss).fill(T(1));
    for (int i = loss.id; i >= 0; --i) {
      Node& n = nodes_[static_cast<size_t>(i)];
      if (n.back && n.grad.numel() != 0) n.back(*this);
    }
  }

  // -------------------------------------------------------------------------
  // elementwise
  // -------------------------------------------------------------------------

  Var add(Var a, Var b) {
    check_same_shape(val(a), val(b), "add");
    TensorT<T> out(val(a).shape());
    const std::int64_t n = out.numel();
    const T* pa = val(a).data();
    const T* pb = val(b).data();
    T* po = out.data();
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) po[i] = pa[i] + pb[i];
    Var o = push(std::move(out), needs_grad(a) || needs_grad(b), nullptr);
    set_back(o, [a, b, o](Graph& g) {
      const TensorT<T>& go = g.grad(o);
      if (g.needs_grad(a)) axpy(go, g.grad(a));
      if (g.needs_grad(b)) axpy(go, g.grad(b));
    });
    return o;
  }

  Var sub(Var a, Var b) {
    check_same_shape(val(a), val(b), "sub");
    TensorT<T> out(val(a).shape());
    const std::int64_t n = out.numel();
    for (std::int64_t i = 0; i < n; ++i) out[i] = val(a)[i] - val(b)[i];
    Var o = push(std::move(out), needs_grad(a) || needs_grad(b), nullptr);
    set_back(o, [a, b, o](Graph& g) {
      const TensorT<T>& go = g.grad(o);
      if (g.needs_grad(a)) axpy(go, g.grad(a));
      if (g.needs_grad(b)) {
        TensorT<T>& gb = g.grad(b);
        for (std::int64_t i = 0; i < go.numel(); ++i) gb[i] -= go[i];
      }
    });
    return o;
  }

  Var mul(Var a, Var b) {
    check_same_shape(val(a), val(b), "mul");
    TensorT<T> out(val(a).shape());
    const std::int64_t n = out.numel();
    const T* pa = val(a).data();
    const T* pb = val(b).data();
    T* po = out.data();
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) po[i] = pa[i] * pb[i];
    Var o = push(std::move(out), needs_grad(a) || needs_grad(b), nullptr);
    set_back(o, [a, b, o](Graph& g) {
      const TensorT<T>& go = g.grad(o);
      if (g.needs_grad(a)) {
        TensorT<T>& ga = g.grad(a);
        const TensorT<T>& vb = g.val(b);
        for (std::int64_t i = 0; i < go.numel(); ++i) ga[i] += go[i] * vb[i];
      }
      if (g.needs_grad(b)) {
        TensorT<T>& gb = g.grad(b);
        const TensorT<T>& va = g.val(a);
        for (std::int64_t i = 0; i < go.numel(); ++i) gb[i] += go[i] * va[i];
      }
    });
    return o;
  }

  // out = c * x  (compile-time constant factor)
  Var scale(Var x, T c) {
    TensorT<T> out(val(x).shape());
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = c * val(x)[i];
    Var o = push(std::move(out), needs_grad(x), nullptr);
    set_back(o, [x, o, c](Graph& g) {
      if (!g.needs_grad(x)) return;
      const TensorT<T>& go = g.grad(o);
      TensorT<T>& gx = g.grad(x);
      for (std::int64_t i = 0; i < go.numel(); ++i) gx[i] += c * go[i];
    });
    return o;
  }

  Var affine(Var x, T a, T b) {  // a*x + b elementwise
    TensorT<T> out(val(x).shape());
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = a * val(x)[i] + b;
    Var o = push(std::move(out), needs_grad(x), nullptr);
    set_back(o, [x, o, a](Graph& g) {
      if (!g.needs_grad(x)) return;
      const TensorT<T>& go = g.grad(o);
      TensorT<T>& gx = g.grad(x);
      for (std::int64_t i = 0; i < go.numel(); ++i) gx[i] += a * go[i];
    });
    return o;
  }

  // out = gamma * x + y where gamma is a 1-element tensor (learnable scalar).
  Var scale_add(Var gamma, Var x, Var y) {
    if (val(gamma).numel() != 1) throw std::invalid_argument("scale_add: gamma must be scalar");
    check_same_shape(val(x), val(y), "scale_add");
    const T gv = val(gamma)[0];
    TensorT<T> out(val(x).shape());
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = gv * val(x)[i] + val(y)[i];
    Var o = push(std::move(out), needs_grad(gamma) || needs_grad(x) || needs_grad(y), nullptr);
    set_back(o, [gamma, x, y, o, gv](Graph& g) {
      const TensorT<T>& go = g.grad(o);
      if (g.needs_grad(gamma)) {
        T acc = T(0);
        const TensorT<T>& vx = g.val(x);
        for (std::int64_t i = 0; i < go.numel(); ++i) acc += go[i] * vx[i];
        g.grad(gamma)[0] += acc;
      }
      if (g.needs_grad(x)) {
        TensorT<T>& gx = g.grad(x);
        for (std::int64_t i = 0; i < go.numel(); ++i) gx[i] += gv * go[i];
      }
      if (g.needs_grad(y)) axpy(go, g.grad(y));
    });
    return o;
  }

  Var relu(Var x) {
    TensorT<T> out(val(x).shape());
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = val(x)[i] > T(0) ? val(x)[i] : T(0);
    Var o = push(std::move(out), needs_grad(x), nullptr);
    set_back(o, [x, o](Graph& g) {
      if (!g.needs_grad(x)) return;
      const TensorT<T>& go = g.grad(o);
      const TensorT<T>& vx = g.val(x);
      TensorT<T>& gx = g.grad(x);
      for (std::int64_t i = 0; i < go.numel(); ++i)
        if (vx[i] > T(0)) gx[i] += go[i];
    });
    return o;
  }

  Var leaky_relu(Var x, T slope) {
    TensorT<T> out(val(x).shape());
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = val(x)[i] > T(0) ? val(x)[i] : slope * val(x)[i];
    Var o = push(std::move(out), needs_grad(x), nullptr);
    set_back(o, [x, o, slope](Graph& g) {
      if (!g.needs_grad(x)) return;
      const TensorT<T>& go = g.grad(o);
      const TensorT<T>& vx = g.val(x);
      TensorT<T>& gx = g.grad(x);
      for (std::int64_t i = 0; i < go.numel(); ++i) gx[i] += (vx[i] > T(0) ? T(1) : slope) * go[i];
    });
    return o;
  }

  Var sigmoid(Var x) {
    TensorT<T> out(val(x).shape());
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = T(1) / (T(1) + std::exp(-val(x)[i]));
    Var o = push(std::move(out), needs_grad(x), nullptr);
    set_back(o, [x, o](Graph& g) {
      if (!g.needs_grad(x)) return;
      const TensorT<T>& go = g.grad(o);
      const TensorT<T>& vo = g.val(o);
      TensorT<T>& gx = g.grad(x);
      for (std::int64_t i = 0; i < go.numel(); ++i) gx[i] += go[i] * vo[i] * (T(1) - vo[i]);
    });
    return o;
  }

  Var tanh_(Var x) {
    TensorT<T> out(val(x).shape());
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = std::tanh(val(x)[i]);
    Var o = push(std::move(out), needs_grad(x), nullptr);
    set_back(o, [x, o](Graph& g) {
      if (!g.needs_grad(x)) return;
      const TensorT<T>& go = g.grad(o);
      const TensorT<T>& vo = g.val(o);
      TensorT<T>& gx = g.grad(x);
      for (std::int64_t i = 0; i < go.numel(); ++i) gx[i] += go[i] * (T(1) - vo[i] * vo[i]);
    });
    return o;
  }

  Var exp_(Var x) {
    TensorT<T> out(val(x).shape());
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = std::exp(val(x)[i]);
    Var o = push(std::move(out), needs_grad(x), nullptr);
    set_back(o, [x, o](Graph& g) {
      if (!g.needs_grad(x)) return;
      const TensorT<T>& go = g.grad(o);
      const TensorT<T>& vo = g.val(o);
      TensorT<T>& gx = g.grad(x);
      for (std::int64_t i = 0; i < go.numel(); ++i) gx[i] += go[i] * vo[i];
    });
    return o;
  }

  // Clamp with zero gradient outside the range.
  Var clip(Var x, T lo, T hi) {
    TensorT<T> out(val(x).shape());
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = std::min(hi, std::max(lo, val(x)[i]));
    Var o = push(std::move(out), needs_grad(x), nullptr);
    set_back(o, [x, o, lo, hi](Graph& g) {
      if (!g.needs_grad(x)) return;
      const TensorT<T>& go = g.grad(o);
      const TensorT<T>& vx = g.val(x);
      TensorT<T>& gx = g.grad(x);
      for (std::int64_t i = 0; i < go.numel(); ++i)
        if (vx[i] >= lo && vx[i] <= hi) gx[i] += go[i];
    });
    return o;
  }

  Var stop_gradient(Var x) { return constant(val(x)); }

  // Straight-through quantizer: round(x/step)*step forward, identity backward.
  Var quantize_st(Var x, T step) {
    TensorT<T> out(val(x).shape());
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = std::round(val(x)[i] / step) * step;
    Var o = push(std::move(out), needs_grad(x), nullptr);
    set_back(o, [x, o](Graph& g) {
      if (g.needs_grad(x)) axpy(g.grad(o), g.grad(x));
    });
    return o;
  }

  Var reshape(Var x, Shape s) {
    TensorT<T> out = val(x).reshaped(std::move(s));
    Var o = push(std::move(out), needs_grad(x), nullptr);
    set_back(o, [x, o](Graph& g) {
      if (g.needs_grad(x)) axpy(g.grad(o), g.grad(x));
    });
    return o;
  }

  // -------------------------------------------------------------------------
  // channel concat / slice, NCHW
  // -------------------------------------------------------------------------

  Var concat_channels(const std::vector<Var>& xs) {
    if (xs.empty()) throw std::invalid_argument("concat_channels: empty input");
    const Shape& s0 = val(xs[0]).shape();
    if (s0.size() != 4) throw std::invalid_argument("concat_channels: expects NCHW");
    int ctotal = 0;
    bool rg = false;
    for (Var x : xs) {
      const Shape& s = val(x).shape();
      if (s[0] != s0[0] || s[2] != s0[2] || s[3] != s0[3])
        throw std::invalid_argument("concat_channels: shape mismatch");
      ctotal += s[1];
      rg = rg || needs_grad(x);
    }
    TensorT<T> out({s0[0], ctotal, s0[2], s0[3]});
    const std::int64_t hw = static_cast<std::int64_t>(s0[2]) * s0[3];
    for (int n = 0; n < s0[0]; ++n) {
      int coff = 0;
      for (Var x : xs) {
        const TensorT<T>& vx = val(x);
        const int c = vx.shape()[1];
        std::copy(vx.data() + n * c * hw, vx.data() + (n + 1) * c * hw, out.data() + (static_cast<std::int64_t>(n) * ctotal + coff) * hw);
        coff += c;
      }
    }
    Var o = push(std::move(out), rg, nullptr);
    auto xs_copy = xs;
    set_back(o, [xs_copy, o, ctotal, hw](Graph& g) {
      const TensorT<T>& go = g.grad(o);
      const int N = go.shape()[0];
      for (int n = 0; n < N; ++n) {
        int coff = 0;
        for (Var x : xs_copy) {
          const int c = g.val(x).shape()[1];
          if (g.needs_grad(x)) {
            TensorT<T>& gx = g.grad(x);
            const T* src = go.data() + (static_cast<std::int64_t>(n) * ctotal + coff) * hw;
            T* dst = gx.data() + static_cast<std::int64_t>(n) * c * hw;
            for (std::int64_t i = 0; i < c * hw; ++i) dst[i] += src[i];
          }
          coff += c;
        }
      }
    });
    return o;
  }

  Var slice_channels(Var x, int c0, int c1) {
    const Shape& s = val(x).shape();
    if (s.size() != 4) throw std::invalid_argument("slice_channels: expects NCHW");
    if (c0 < 0 || c1 > s[1] || c0 >= c1) throw std::invalid_argument("slice_channels: bad range");
    const std::int64_t hw = static_cast<std::int64_t>(s[2]) * s[3];
    TensorT<T> out({s[0], c1 - c0, s[2], s[3]});
    for (int n = 0; n < s[0]; ++n)
      std::copy(val(x).data() + (static_cast<std::int64_t>(n) * s[1] + c0) * hw,
                val(x).data() + (static_cast<std::int64_t>(n) * s[1] + c1) * hw,
                out.data() + static_cast<std::int64_t>(n) * (c1 - c0) * hw);
    Var o = push(std::move(out), needs_grad(x), nullptr);
    set_back(o, [x, o, c0, c1, hw](Graph& g) {
      if (!g.needs_grad(x)) return;
      const TensorT<T>& go = g.grad(o);
      TensorT<T>& gx = g.grad(x);
      const int N = go.shape()[0];
      const int C = gx.shape()[1];
      for (int n = 0; n < N; ++n) {
        const T* src = go.data() + static_cast<std::int64_t>(n) * (c1 - c0) * hw;
        T* dst = gx.data() + (static_cast<std::int64_t>(n) * C + c0) * hw;
        for (std::int64_t i = 0; i < (c1 - c0) * hw; ++i) dst[i] += src[i];
      }
    });
    return o;
  }

  // -------------------------------------------------------------------------
  // linear algebra layers
  // -------------------------------------------------------------------------

  // x: [N, in], w: [out, in], b: [out] -> [N, out]
  Var dense(Var x, Var w, Var b) {
    const Shape& sx = val(x).shape();
    const Shape& sw = val(w).shape();
    if (sx.size() != 2 || sw.size() != 2 || sx[1] != sw[1]) throw std::invalid_argument("dense: shape mismatch");
    const int N = sx[0], in = sx[1], out_c = sw[0];
    if (val(b).numel() != out_c) throw std::invalid_argument("dense: bias mismatch");
    TensorT<T> out({N, out_c});
    kernels::gemm_nt(val(x).data(), val(w).data(), out.data(), N, out_c, in);
    for (int n = 0; n < N; ++n)
      for (int j = 0; j < out_c; ++j) out.at2(n, j) += val(b)[j];
    Var o = push(std::move(out), needs_grad(x) || needs_grad(w) || needs_grad(b), nullptr);
    set_back(o, [x, w, b, o, N, in, out_c](Graph& g) {
      const TensorT<T>& go = g.grad(o);
      if (g.needs_grad(x)) kernels::gemm_nn(go.data(), g.val(w).data(), g.grad(x).data(), N, in, out_c, true);
      if (g.needs_grad(w)) kernels::gemm_tn(go.data(), g.val(x).data(), g.grad(w).data(), out_c, in, N, true);
      if (g.needs_grad(b)) {
        TensorT<T>& gb = g.grad(b);
        for (int n = 0; n < N; ++n)
          for (int j = 0; j < out_c; ++j) gb[j] += go.at2(n, j);
      }
    });
    return o;
  }

  // x: [N,C,H,W], w: [Cout, Cin, kh, kw], b: [Cout]
  Var conv2d(Var x, Var w, Var b, int stride = 1, int pad = -1) {
    const int kh = val(w).shape()[2];
    if (pad < 0) pad = kh / 2;
    return conv2d_hw(x, w, b, stride, stride, pad, pad);
  }

  Var conv2d_hw(Var x, Var w, Var b, int stride_h, int stride_w, int pad_h, int pad_w) {
    const Shape& sx = val(x).shape();
    const Shape& sw = val(w).shape();
    if (sx.size() != 4 || sw.size() != 4) throw std::invalid_argument("conv2d: expects NCHW");
    if (sx[1] != sw[1]) throw std::invalid_argument("conv2d: channel mismatch");
    const int kh = sw[2], kw = sw[3];
    kernels::ConvGeom geom{sx[1], sx[2], sx[3], kh, kw, stride_h, stride_w, pad_h, pad_w};
    const int N = sx[0], Cout = sw[0], Ho = geom.Ho(), Wo = geom.Wo();
    if (Ho <= 0 || Wo <= 0) throw std::invalid_argument("conv2d: output is empty");
    if (val(b).numel() != Cout) throw std::invalid_argument("conv2d: bias mismatch");

    auto cols = std::make_shared<TensorT<T>>(Shape{N, Ho * Wo, geom.cols()});
    TensorT<T> out({N, Cout, Ho, Wo});
    TensorT<T> tmp({Ho * Wo, Cout});
    for (int n = 0; n < N; ++n) {
      T* col = cols->data() + static_cast<std::int64_t>(n) * Ho * Wo * geom.cols();
      kernels::im2col(val(x).data() + static_cast<std::int64_t>(n) * geom.C * geom.H * geom.W, geom, col);
      kernels::gemm_nt(col, val(w).data(), tmp.data(), Ho * Wo, Cout, geom.cols());
      // transpose (HoWo, Cout) -> (Cout, HoWo) with bias
      T* dst = out.data() + static_cast<std::int64_t>(n) * Cout * Ho * Wo;
#pragma omp parallel for schedule(static)
      for (int c = 0; c < Cout; ++c) {
        const T bias = val(b)[c];
        for (std::int64_t p = 0; p < static_cast<std::int64_t>(Ho) * Wo; ++p)
          dst[static_cast<std::int64_t>(c) * Ho * Wo + p] = tmp[p * Cout + c] + bias;
      }
    }
    Var o = push(std::move(out), needs_grad(x) || needs_grad(w) || needs_grad(b), nullptr);
    set_back(o, [x, w, b, o, geom, N, Cout, Ho, Wo, cols](Graph& g) {
      const TensorT<T>& go = g.grad(o);
      const std::int64_t hw = static_cast<std::int64_t>(Ho) * Wo;
      TensorT<T> goT({Ho * Wo, Cout});  // per-sample transpose back
      TensorT<T> dcol({Ho * Wo, geom.cols()});
      for (int n = 0; n < N; ++n) {
        const T* gsrc = go.data() + static_cast<std::int64_t>(n) * Cout * hw;
#pragma omp parallel for schedule(static)
        for (int c = 0; c < Cout; ++c)
          for (std::int64_t p = 0; p < hw; ++p) goT[p * Cout + c] = gsrc[static_cast<std::int64_t>(c) * hw + p];
        const T* col = cols->data() + static_cast<std::int64_t>(n) * hw * geom.cols();
        if (g.needs_grad(w))
          kernels::gemm_tn(goT.data(), col, g.grad(w).data(), Cout, geom.cols(), Ho * Wo, true);
        if (g.needs_grad(b)) {
          TensorT<T>& gb = g.grad(b);
          for (int c = 0; c < Cout; ++c) {
            T acc = T(0);
            for (std::int64_t p = 0; p < hw; ++p) acc += gsrc[static_cast<std::int64_t>(c) * hw + p];
            gb[c] += acc;
          }
        }
        if (g.needs_grad(x)) {
          kernels::gemm_nn(goT.data(), g.val(w).data(), dcol.data(), Ho * Wo, geom.cols(), Cout);
          kernels::col2im(dcol.data(), geom, g.grad(x).data() + static_cast<std::int64_t>(n) * geom.C * geom.H * geom.W, true);
        }
      }
    });
    return o;
  }

  // Fused scaled-dot-product attention per sample over NCHW token grids:
  // q,k,v: [N,D,H,W]; tokens are the H*W positions. Softmax over key tokens.
  Var attention_nchw(Var q, Var k, Var v) {
    const Shape& sq = val(q).shape();
    const Shape& sk = val(k).shape();
    const Shape& sv = val(v).shape();
    if (sq.size() != 4 || sk.size() != 4 || sv.size() != 4) throw std::invalid_argument("attention: expects NCHW");
    if (sq[0] != sk[0] || sq[0] != sv[0] || sq[1] != sk[1]) throw std::invalid_argument("attention: dims mismatch");
    if (sk[2] != sv[2] || sk[3] != sv[3]) throw std::invalid_argument("attention: key/value grid mismatch");
    const int N = sq[0], D = sq[1], Dv = sv[1];
    const int P = sq[2] * sq[3], Pk = sk[2] * sk[3];
    TensorT<T> out({N, Dv, sq[2], sq[3]});
    TensorT<T> qt({P, D}), kt({Pk, D}), vt({Pk, Dv}), ot({P, Dv});
    for (int n = 0; n < N; ++n) {
      to_tokens(val(q), n, qt);
      to_tokens(val(k), n, kt);
      to_tokens(val(v), n, vt);
      kernels::attention_forward(qt.data(), kt.data(), vt.data(), ot.data(), P, Pk, D, Dv);
      from_tokens(ot, n, out);
    }
    Var o = push(std::move(out), needs_grad(q) || needs_grad(k) || needs_grad(v), nullptr);
    set_back(o, [q, k, v, o, N, D, Dv, P, Pk](Graph& g) {
      TensorT<T> qt({P, D}), kt({Pk, D}), vt({Pk, Dv}), dot({P, Dv});
      TensorT<T> dq({P, D}), dk({Pk, D}), dv({Pk, Dv});
      for (int n = 0; n < N; ++n) {
        to_tokens(g.val(q), n, qt);
        to_tokens(g.val(k), n, kt);
        to_tokens(g.val(v), n, vt);
        to_tokens(g.grad(o), n, dot);
        dq.fill(T(0));
        dk.fill(T(0));
        dv.fill(T(0));
        kernels::attention_backward(qt.data(), kt.data(), vt.data(), dot.data(), dq.data(), dk.data(), dv.data(), P, Pk, D, Dv);
        if (g.needs_grad(q)) add_tokens(dq, n, g.grad(q));
        if (g.needs_grad(k)) add_tokens(dk, n, g.grad(k));
        if (g.needs_grad(v)) add_tokens(dv, n, g.grad(v));
      }
    });
    return o;
  }

  // Layer normalization across the channel dimension, per (n, h, w) position.
  Var layernorm_channels(Var x, Var gamma, Var beta, T eps = T(1e-5)) {
    const Shape& s = val(x).shape();
    if (s.size() != 4) throw std::invalid_argument("layernorm: expects NCHW");
    const int N = s[0], C = s[1];
    const std::int64_t HW = static_cast<std::int64_t>(s[2]) * s[3];
    if (val(gamma).numel() != C || val(beta).numel() != C) throw std::invalid_argument("layernorm: param mismatch");
    TensorT<T> out(s);
    auto rstd = std::make_shared<TensorT<T>>(Shape{N, 1, s[2], s[3]});
    auto xhat = std::make_shared<TensorT<T>>(s);
    const T* px = val(x).data();
#pragma omp parallel for schedule(static)
    for (std::int64_t np = 0; np < N * HW; ++np) {
      const std::int64_t n = np / HW, p = np % HW;
      const std::int64_t base = n * C * HW + p;
      T mean = T(0);
      for (int c = 0; c < C; ++c) mean += px[base + c * HW];
      mean /= C;
      T var = T(0);
      for (int c = 0; c < C; ++c) {
        const T d = px[base + c * HW] - mean;
        var += d * d;
      }
      var /= C;
      const T rs = T(1) / std::sqrt(var + eps);
      (*rstd)[np] = rs;
      for (int c = 0; c < C; ++c) {
        const T xh = (px[base + c * HW] - mean) * rs;
        (*xhat)[base + c * HW] = xh;
        out[base + c * HW] = xh * val(gamma)[c] + val(beta)[c];
      }
    }
    Var o = push(std::move(out), needs_grad(x) || needs_grad(gamma) || needs_grad(beta), nullptr);
    set_back(o, [x, gamma, beta, o, N, C, HW, rstd, xhat](Graph& g) {
      const TensorT<T>& go = g.grad(o);
      if (g.needs_grad(gamma) || g.needs_grad(beta)) {
        for (int c = 0; c < C; ++c) {
          T gg = T(0), gb = T(0);
          for (std::int64_t n = 0; n < N; ++n)
            for (std::int64_t p = 0; p < HW; ++p) {
              const std::int64_t i = (n * C + c) * HW + p;
              gg += go[i] * (*xhat)[i];
              gb += go[i];
            }
          if (g.needs_grad(gamma)) g.grad(gamma)[c] += gg;
          if (g.needs_grad(beta)) g.grad(beta)[c] += gb;
        }
      }
      if (g.needs_grad(x)) {
        TensorT<T>& gx = g.grad(x);
        const TensorT<T>& vg = g.val(gamma);
#pragma omp parallel for schedule(static)
        for (std::int64_t np = 0; np < N * HW; ++np) {
          const std::int64_t n = np / HW, p = np % HW;
          const std::int64_t base = n * C * HW + p;
          T sum_dy = T(0), sum_dy_xhat = T(0);
          for (int c = 0; c < C; ++c) {
            const T dy = go[base + c * HW] * vg[c];
            sum_dy += dy;
            sum_dy_xhat += dy * (*xhat)[base + c * HW];
          }
          const T rs = (*rstd)[np];
          for (int c = 0; c < C; ++c) {
            const T dy = go[base + c * HW] * vg[c];
            gx[base + c * HW] += rs * (dy - sum_dy / C - (*xhat)[base + c * HW] * sum_dy_xhat / C);
          }
        }
      }
    });
    return o;
  }

  // -------------------------------------------------------------------------
  // resampling / pooling
  // -------------------------------------------------------------------------

  Var avgpool2(Var x) {
    const Shape& s = val(x).shape();
    if (s.size() != 4 || s[2] % 2 != 0 || s[3] % 2 != 0) throw std::invalid_argument("avgpool2: needs even NCHW");
    const int N = s[0], C = s[1], Ho = s[2] / 2, Wo = s[3] / 2;
    TensorT<T> out({N, C, Ho, Wo});
    for (int n = 0; n < N; ++n)
      for (int c = 0; c < C; ++c)
        for (int y = 0; y < Ho; ++y)
          for (int xk = 0; xk < Wo; ++xk)
            out.at4(n, c, y, xk) = (val(x).at4(n, c, 2 * y, 2 * xk) + val(x).at4(n, c, 2 * y, 2 * xk + 1) +
                                    val(x).at4(n, c, 2 * y + 1, 2 * xk) + val(x).at4(n, c, 2 * y + 1, 2 * xk + 1)) /
                                   T(4);
    Var o = push(std::move(out), needs_grad(x), nullptr);
    set_back(o, [x, o, N, C, Ho, Wo](Graph& g) {
      if (!g.needs_grad(x)) return;
      const TensorT<T>& go = g.grad(o);
      TensorT<T>& gx = g.grad(x);
      for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c)
          for (int y = 0; y < Ho; ++y)
            for (int xk = 0; xk < Wo; ++xk) {
              const T v = go.at4(n, c, y, xk) / T(4);
              gx.at4(n, c, 2 * y, 2 * xk) += v;
              gx.at4(n, c, 2 * y, 2 * xk + 1) += v;
              gx.at4(n, c, 2 * y + 1, 2 * xk) += v;
              gx.at4(n, c, 2 * y + 1, 2 * xk + 1) += v;
            }
    });
    return o;
  }

  Var upsample_nearest(Var x, int sy, int sx) {
    const Shape& s = val(x).shape();
    if (s.size() != 4) throw std::invalid_argument("upsample: expects NCHW");
    const int N = s[0], C = s[1], H = s[2], W = s[3];
    TensorT<T> out({N, C, H * sy, W * sx});
    for (int n = 0; n < N; ++n)
      for (int c = 0; c < C; ++c)
        for (int y = 0; y < H * sy; ++y)
          for (int xk = 0; xk < W * sx; ++xk) out.at4(n, c, y, xk) = val(x).at4(n, c, y / sy, xk / sx);
    Var o = push(std::move(out), needs_grad(x), nullptr);
    set_back(o, [x, o, N, C, H, W, sy, sx](Graph& g) {
      if (!g.needs_grad(x)) return;
      const TensorT<T>& go = g.grad(o);
      TensorT<T>& gx = g.grad(x);
      for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c)
          for (int y = 0; y < H * sy; ++y)
            for (int xk = 0; xk < W * sx; ++xk) gx.at4(n, c, y / sy, xk / sx) += go.at4(n, c, y, xk);
    });
    return o;
  }

  // Bilinear resize to (Ho, Wo) with align_corners=false semantics.
  Var resize_bilinear(Var x, int Ho, int Wo) {
    const Shape& s = val(x).shape();
    if (s.size() != 4) throw std::invalid_argument("resize: expects NCHW");
    const int N = s[0], C = s[1], H = s[2], W = s[3];
    auto coords = [](int o, int I, int O) {
      double c = (o + 0.5) * I / static_cast<double>(O) - 0.5;
      c = std::max(0.0, std::min(c, I - 1.0));
      return c;
    };
    TensorT<T> out({N, C, Ho, Wo});
    for (int y = 0; y < Ho; ++y) {
      const double fy = coords(y, H, Ho);
      const int y0 = static_cast<int>(fy), y1 = std::min(y0 + 1, H - 1);
      const T wy = static_cast<T>(fy - y0);
      for (int xk = 0; xk < Wo; ++xk) {
        const double fx = coords(xk, W, Wo);
        const int x0 = static_cast<int>(fx), x1 = std::min(x0 + 1, W - 1);
        const T wx = static_cast<T>(fx - x0);
        for (int n = 0; n < N; ++n)
          for (int c = 0; c < C; ++c)
            out.at4(n, c, y, xk) = (T(1) - wy) * ((T(1) - wx) * val(x).at4(n, c, y0, x0) + wx * val(x).at4(n, c, y0, x1)) +
                                   wy * ((T(1) - wx) * val(x).at4(n, c, y1, x0) + wx * val(x).at4(n, c, y1, x1));
      }
    }
    Var o = push(std::move(out), needs_grad(x), nullptr);
    set_back(o, [x, o, N, C, H, W, Ho, Wo, coords](Graph& g) {
      if (!g.needs_grad(x)) return;
      const TensorT<T>& go = g.grad(o);
      TensorT<T>& gx = g.grad(x);
      for (int y = 0; y < Ho; ++y) {
        const double fy = coords(y, H, Ho);
        const int y0 = static_cast<int>(fy), y1 = std::min(y0 + 1, H - 1);
        const T wy = static_cast<T>(fy - y0);
        for (int xk = 0; xk < Wo; ++xk) {
          const double fx = coords(xk, W, Wo);
          const int x0 = static_cast<int>(fx), x1 = std::min(x0 + 1, W - 1);
          const T wx = static_cast<T>(fx - x0);
          for (int n = 0; n < N; ++n)
            for (int c = 0; c < C; ++c) {
              const T gv = go.at4(n, c, y, xk);
              gx.at4(n, c, y0, x0) += (T(1) - wy) * (T(1) - wx) * gv;
              gx.at4(n, c, y0, x1) += (T(1) - wy) * wx * gv;
              gx.at4(n, c, y1, x0) += wy * (T(1) - wx) * gv;
              gx.at4(n, c, y1, x1) += wy * wx * gv;
            }
        }
      }
    });
    return o;
  }

  // x: [N,C,H,W] plus a per-sample channel vector v: [N,C].
  Var broadcast_add_nc(Var x, Var v) {
    const Shape& sx = val(x).shape();
    const Shape& sv = val(v).shape();
    if (sx.size() != 4 || sv.size() != 2 || sv[0] != sx[0] || sv[1] != sx[1])
      throw std::invalid_argument("broadcast_add_nc: shape mismatch");
    const int N = sx[0], C = sx[1];
    const std::int64_t HW = static_cast<std::int64_t>(sx[2]) * sx[3];
    TensorT<T> out = val(x);
    for (int n = 0; n < N; ++n)
      for (int c = 0; c < C; ++c) {
        const T add = val(v).at2(n, c);
        T* p = out.data() + (static_cast<std::int64_t>(n) * C + c) * HW;
        for (std::int64_t i = 0; i < HW; ++i) p[i] += add;
      }
    Var o = push(std::move(out), needs_grad(x) || needs_grad(v), nullptr);
    set_back(o, [x, v, o, N, C, HW](Graph& g) {
      const TensorT<T>& go = g.grad(o);
      if (g.needs_grad(x)) axpy(go, g.grad(x));
      if (g.needs_grad(v)) {
        TensorT<T>& gv = g.grad(v);
        for (int n = 0; n < N; ++n)
          for (int c = 0; c < C; ++c) {
            T acc = T(0);
            const T* p = go.data() + (static_cast<std::int64_t>(n) * C + c) * HW;
            for (std::int64_t i = 0; i < HW; ++i) acc += p[i];
            gv.at2(n, c) += acc;
          }
      }
    });
    return o;
  }

  // Global average pooling: [N,C,H,W] -> [N,C]
  Var gap(Var x) {
    const Shape& s = val(x).shape();
    if (s.size() != 4) throw std::invalid_argument("gap: expects NCHW");
    const int N = s[0], C = s[1];
    const std::int64_t HW = static_cast<std::int64_t>(s[2]) * s[3];
    TensorT<T> out({N, C});
    for (int n = 0; n < N; ++n)
      for (int c = 0; c < C; ++c) {
        T acc = T(0);
        const T* p = val(x).data() + (static_cast<std::int64_t>(n) * C + c) * HW;
        for (std::int64_t i = 0; i < HW; ++i) acc += p[i];
        out.at2(n, c) = acc / static_cast<T>(HW);
      }
    Var o = push(std::move(out), needs_grad(x), nullptr);
    set_back(o, [x, o, N, C, HW](Graph& g) {
      if (!g.needs_grad(x)) return;
      const TensorT<T>& go = g.grad(o);
      TensorT<T>& gx = g.grad(x);
      for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) {
          const T v = go.at2(n, c) / static_cast<T>(HW);
          T* p = gx.data() + (static_cast<std::int64_t>(n) * C + c) * HW;
          for (std::int64_t i = 0; i < HW; ++i) p[i] += v;
        }
    });
    return o;
  }

  // Row-wise softmax over the last dim of a 2-D tensor.
  Var softmax_rows(Var x) {
    const Shape& s = val(x).shape();
    if (s.size() != 2) throw std::invalid_argument("softmax_rows: expects 2-D");
    TensorT<T> out = val(x);
    kernels::softmax_rows_inplace(out.data(), s[0], s[1]);
    Var o = push(std::move(out), needs_grad(x), nullptr);
    set_back(o, [x, o](Graph& g) {
      if (!g.needs_grad(x)) return;
      const TensorT<T>& go = g.grad(o);
      const TensorT<T>& vo = g.val(o);
      TensorT<T>& gx = g.grad(x);
      const int R = vo.shape()[0], C = vo.shape()[1];
      for (int r = 0; r < R; ++r) {
        T dot = T(0);
        for (int c = 0; c < C; ++c) dot += go.at2(r, c) * vo.at2(r, c);
        for (int c = 0; c < C; ++c) gx.at2(r, c) += vo.at2(r, c) * (go.at2(r, c) - dot);
      }
    });
    return o;
  }

  // Mix a pool [E,C,h,w] with per-sample weights [N,E] -> [N,C,h,w].
  Var mix_pool(Var weights, Var pool) {
    const Shape& sw = val(weights).shape();
    const Shape& sp = val(pool).shape();
    if (sw.size() != 2 || sp.size() != 4 || sw[1] != sp[0]) throw std::invalid_argument("mix_pool: shape mismatch");
    const int N = sw[0], E = sp[0];
    const std::int64_t chw = static_cast<std::int64_t>(sp[1]) * sp[2] * sp[3];
    TensorT<T> out({N, sp[1], sp[2], sp[3]});
    for (int n = 0; n < N; ++n) {
      T* dst = out.data() + n * chw;
      for (int e = 0; e < E; ++e) {
        const T wv = val(weights).at2(n, e);
        const T* src = val(pool).data() + e * chw;
        for (std::int64_t i = 0; i < chw; ++i) dst[i] += wv * src[i];
      }
    }
    Var o = push(std::move(out), needs_grad(weights) || needs_grad(pool), nullptr);
    set_back(o, [weights, pool, o, N, E, chw](Graph& g) {
      const TensorT<T>& go = g.grad(o);
      for (int n = 0; n < N; ++n) {
        const T* gdst = go.data() + n * chw;
        for (int e = 0; e < E; ++e) {
          if (g.needs_grad(weights)) {
            T acc = T(0);
            const T* src = g.val(pool).data() + e * chw;
            for (std::int64_t i = 0; i < chw; ++i) acc += gdst[i] * src[i];
            g.grad(weights).at2(n, e) += acc;
          }
          if (g.needs_grad(pool)) {
            const T wv = g.val(weights).at2(n, e);
            T* gp = g.grad(pool).data() + e * chw;
            for (std::int64_t i = 0; i < chw; ++i) gp[i] += wv * gdst[i];
          }
        }
      }
    });
    return o;
  }

  // -------------------------------------------------------------------------
  // reductions / losses (scalar outputs, mean reduction)
  // -------------------------------------------------------------------------

  Var mean_all(Var x) {
    T acc = T(0);
    for (std::int64_t i = 0; i < val(x).numel(); ++i) acc += val(x)[i];
    const T inv = T(1) / static_cast<T>(val(x).numel());
    TensorT<T> out({1});
    out[0] = acc * inv;
    Var o = push(std::move(out), needs_grad(x), nullptr);
    set_back(o, [x, o, inv](Graph& g) {
      if (!g.needs_grad(x)) return;
      const T gv = g.grad(o)[0] * inv;
      TensorT<T>& gx = g.grad(x);
      for (std::int64_t i = 0; i < gx.numel(); ++i) gx[i] += gv;
    });
    return o;
  }

  Var mse(Var a, Var b) {
    check_same_shape(val(a), val(b), "mse");
    const std::int64_t n = val(a).numel();
    T acc = T(0);
    for (std::int64_t i = 0; i < n; ++i) {
      const T d = val(a)[i] - val(b)[i];
      acc += d * d;
    }
    TensorT<T> out({1});
    out[0] = acc / static_cast<T>(n);
    Var o = push(std::move(out), needs_grad(a) || needs_grad(b), nullptr);
    set_back(o, [a, b, o, n](Graph& g) {
      const T gv = g.grad(o)[0] * T(2) / static_cast<T>(n);
      const TensorT<T>& va = g.val(a);
      const TensorT<T>& vb = g.val(b);
      if (g.needs_grad(a)) {
        TensorT<T>& ga = g.grad(a);
        for (std::int64_t i = 0; i < n; ++i) ga[i] += gv * (va[i] - vb[i]);
      }
      if (g.needs_grad(b)) {
        TensorT<T>& gb = g.grad(b);
        for (std::int64_t i = 0; i < n; ++i) gb[i] -= gv * (va[i] - vb[i]);
      }
    });
    return o;
  }

  Var l1(Var a, Var b) {
    check_same_shape(val(a), val(b), "l1");
    const std::int64_t n = val(a).numel();
    T acc = T(0);
    for (std::int64_t i = 0; i < n; ++i) acc += std::abs(val(a)[i] - val(b)[i]);
    TensorT<T> out({1});
    out[0] = acc / static_cast<T>(n);
    Var o = push(std::move(out), needs_grad(a) || needs_grad(b), nullptr);
    set_back(o, [a, b, o, n](Graph& g) {
      const T gv = g.grad(o)[0] / static_cast<T>(n);
      const TensorT<T>& va = g.val(a);
      const TensorT<T>& vb = g.val(b);
      auto sgn = [](T d) { return d > T(0) ? T(1) : (d < T(0) ? T(-1) : T(0)); };
      if (g.needs_grad(a)) {
        TensorT<T>& ga = g.grad(a);
        for (std::int64_t i = 0; i < n; ++i) ga[i] += gv * sgn(va[i] - vb[i]);
      }
      if (g.needs_grad(b)) {
        TensorT<T>& gb = g.grad(b);
        for (std::int64_t i = 0; i < n; ++i) gb[i] -= gv * sgn(va[i] - vb[i]);
      }
    });
    return o;
  }

  // Binary cross entropy on probabilities (mean over elements).
  Var bce(Var pred, Var target, T eps = T(1e-6)) {
    check_same_shape(val(pred), val(target), "bce");
    const std::int64_t n = val(pred).numel();
    T acc = T(0);
    for (std::int64_t i = 0; i < n; ++i) {
      const T p = std::min(T(1) - eps, std::max(eps, val(pred)[i]));
      const T t = val(target)[i];
      acc += -(t * std::log(p) + (T(1) - t) * std::log(T(1) - p));
    }
    TensorT<T> out({1});
    out[0] = acc / static_cast<T>(n);
    Var o = push(std::move(out), needs_grad(pred) || needs_grad(target), nullptr);
    set_back(o, [pred, target, o, n, eps](Graph& g) {
      if (!g.needs_grad(pred)) return;
      const T gv = g.grad(o)[0] / static_cast<T>(n);
      const TensorT<T>& vp = g.val(pred);
      const TensorT<T>& vt = g.val(target);
      TensorT<T>& gp = g.grad(pred);
      for (std::int64_t i = 0; i < n; ++i) {
        const T p = std::min(T(1) - eps, std::max(eps, vp[i]));
        gp[i] += gv * (p - vt[i]) / (p * (T(1) - p));
      }
    });
    return o;
  }

  // Sum of scalar losses with constant coefficients.
  Var weighted_sum(const std::vector<Var>& xs, const std::vector<T>& coeffs) {
    if (xs.size() != coeffs.size() || xs.empty()) throw std::invalid_argument("weighted_sum: size mismatch");
    TensorT<T> out({1});
    bool rg = false;
    for (size_t i = 0; i < xs.size(); ++i) {
      if (val(xs[i]).numel() != 1) throw std::invalid_argument("weighted_sum: non-scalar term");
      out[0] += coeffs[i] * val(xs[i])[0];
      rg = rg || needs_grad(xs[i]);
    }
    Var o = push(std::move(out), rg, nullptr);
    auto xs_copy = xs;
    auto cf = coeffs;
    set_back(o, [xs_copy, cf, o](Graph& g) {
      for (size_t i = 0; i < xs_copy.size(); ++i)
        if (g.needs_grad(xs_copy[i])) g.grad(xs_copy[i])[0] += cf[i] * g.grad(o)[0];
    });
    return o;
  }

 private:
  std::vector<Node> nodes_;

  Var push(TensorT<T> v, bool rg, std::function<void(Graph&)> back) {
    Node n;
    n.value = std::move(v);
    n.requires_grad = rg;
    n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
  }

  void set_back(Var v, std::function<void(Graph&)> fn) {
    Node& n = nodes_[static_cast<size_t>(v.id)];
    if (n.requires_grad) n.back = std::move(fn);
  }

  static void axpy(const TensorT<T>& src, TensorT<T>& dst) {
    for (std::int64_t i = 0; i < src.numel(); ++i) dst[i] += src[i];
  }

  // NCHW sample n -> token matrix (H*W, C)
  static void to_tokens(const TensorT<T>& x, int n, TensorT<T>& tok) {
    const int C = x.shape()[1];
    const std::int64_t HW = static_cast<std::int64_t>(x.shape()[2]) * x.shape()[3];
    const T* src = x.data() + static_cast<std::int64_t>(n) * C * HW;
#pragma omp parallel for schedule(static)
    for (std::int64_t p = 0; p < HW; ++p)
      for (int c = 0; c < C; ++c) tok[p * C + c] = src[static_cast<std::int64_t>(c) * HW + p];
  }

  static void from_tokens(const TensorT<T>& tok, int n, TensorT<T>& x) {
    const int C = x.shape()[1];
    const std::int64_t HW = static_cast<std::int64_t>(x.shape()[2]) * x.shape()[3];
    T* dst = x.data() + static_cast<std::int64_t>(n) * C * HW;
#pragma omp parallel for schedule(static)
    for (std::int64_t p = 0; p < HW; ++p)
      for (int c = 0; c < C; ++c) dst[static_cast<std::int64_t>(c) * HW + p] = tok[p * C + c];
  }

  static void add_tokens(const TensorT<T>& tok, int n, TensorT<T>& x) {
    const int C = x.shape()[1];
    const std::int64_t HW = static_cast<std::int64_t>(x.shape()[2]) * x.shape()[3];
    T* dst = x.data() + static_cast<std::int64_t>(n) * C * HW;
    for (std::int64_t p = 0; p < HW; ++p)
      for (int c = 0; c < C; ++c) dst[static_cast<std::int64_t>(c) * HW + p] += tok[p * C + c];
  }
};

using GraphF = Graph<float>;
using GraphD = Graph<double>;

}  // namespace vamark
