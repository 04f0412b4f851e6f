#pragma once

// Data-parallel compute kernels. Every kernel has a plain serial reference
// (kernels::ref) and an OpenMP variant (kernels::par); the dispatching
// wrappers pick the parallel path unless single-threaded mode is forced.
// Parallel loops are owner-computes over independent output rows, so results
// are bit-identical for any thread count.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "vamark/core/tensor.hpp"

namespace vamark::kernels {

inline int& thread_override() {
  static int n = 0;  // 0 = use OpenMP default
  return n;
}

inline void set_threads(int n) {
  thread_override() = n;
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#endif
}

inline int num_threads() {
#ifdef _OPENMP
  return thread_override() > 0 ? thread_override() : omp_get_max_threads();
#else
  return 1;
#endif
}

// ---------------------------------------------------------------------------
// GEMM: C = A * B in three transpose layouts. M,N,K are the logical
// dimensions of the product; lda/ldb are the row strides of the stored
// matrices. `accumulate` adds into C instead of overwriting.
// ---------------------------------------------------------------------------

namespace ref {

template <typename T>
void gemm_nn(const T* A, const T* B, T* C, int M, int N, int K, bool accumulate = false) {
  for (int i = 0; i < M; ++i) {
    for (int j = 0; j < N; ++j) {
      T acc = accumulate ? C[static_cast<std::int64_t>(i) * N + j] : T(0);
      for (int k = 0; k < K; ++k) acc += A[static_cast<std::int64_t>(i) * K + k] * B[static_cast<std::int64_t>(k) * N + j];
      C[static_cast<std::int64_t>(i) * N + j] = acc;
    }
  }
}

template <typename T>
void gemm_nt(const T* A, const T* B, T* C, int M, int N, int K, bool accumulate = false) {
  // B stored as N x K; C[i,j] = sum_k A[i,k] * B[j,k]
  for (int i = 0; i < M; ++i) {
    for (int j = 0; j < N; ++j) {
      T acc = accumulate ? C[static_cast<std::int64_t>(i) * N + j] : T(0);
      for (int k = 0; k < K; ++k) acc += A[static_cast<std::int64_t>(i) * K + k] * B[static_cast<std::int64_t>(j) * K + k];
      C[static_cast<std::int64_t>(i) * N + j] = acc;
    }
  }
}

template <typename T>
void gemm_tn(const T* A, const T* B, T* C, int M, int N, int K, bool accumulate = false) {
  // A stored as K x M; C[i,j] = sum_k A[k,i] * B[k,j]
  for (int i = 0; i < M; ++i) {
    for (int j = 0; j < N; ++j) {
      T acc = accumulate ? C[static_cast<std::int64_t>(i) * N + j] : T(0);
      for (int k = 0; k < K; ++k) acc += A[static_cast<std::int64_t>(k) * M + i] * B[static_cast<std::int64_t>(k) * N + j];
      C[static_cast<std::int64_t>(i) * N + j] = acc;
    }
  }
}

}  // namespace ref

namespace par {

template <typename T>
void gemm_nn(const T* A, const T* B, T* C, int M, int N, int K, bool accumulate = false) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < M; ++i) {
    T* crow = C + static_cast<std::int64_t>(i) * N;
    if (!accumulate)
      for (int j = 0; j < N; ++j) crow[j] = T(0);
    const T* arow = A + static_cast<std::int64_t>(i) * K;
    for (int k = 0; k < K; ++k) {
      const T a = arow[k];
      const T* brow = B + static_cast<std::int64_t>(k) * N;
#pragma omp simd
      for (int j = 0; j < N; ++j) crow[j] += a * brow[j];
    }
  }
}

template <typename T>
void gemm_nt(const T* A, const T* B, T* C, int M, int N, int K, bool accumulate = false) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < M; ++i) {
    const T* arow = A + static_cast<std::int64_t>(i) * K;
    T* crow = C + static_cast<std::int64_t>(i) * N;
    for (int j = 0; j < N; ++j) {
      const T* brow = B + static_cast<std::int64_t>(j) * K;
      T acc = T(0);
#pragma omp simd reduction(+ : acc)
      for (int k = 0; k < K; ++k) acc += arow[k] * brow[k];
      crow[j] = accumulate ? crow[j] + acc : acc;
    }
  }
}

template <typename T>
void gemm_tn(const T* A, const T* B, T* C, int M, int N, int K, bool accumulate = false) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < M; ++i) {
    T* crow = C + static_cast<std::int64_t>(i) * N;
    if (!accumulate)
      for (int j = 0; j < N; ++j) crow[j] = T(0);
    for (int k = 0; k < K; ++k) {
      const T a = A[static_cast<std::int64_t>(k) * M + i];
      const T* brow = B + static_cast<std::int64_t>(k) * N;
#pragma omp simd
      for (int j = 0; j < N; ++j) crow[j] += a * brow[j];
    }
  }
}

}  // namespace par

template <typename T>
void gemm_nn(const T* A, const T* B, T* C, int M, int N, int K, bool accumulate = false) {
  if (num_threads() == 1 && static_cast<std::int64_t>(M) * N * K < (1 << 14))
    ref::gemm_nn(A, B, C, M, N, K, accumulate);
  else
    par::gemm_nn(A, B, C, M, N, K, accumulate);
}
template <typename T>
void gemm_nt(const T* A, const T* B, T* C, int M, int N, int K, bool accumulate = false) {
  if (num_threads() == 1 && static_cast<std::int64_t>(M) * N * K < (1 << 14))
    ref::gemm_nt(A, B, C, M, N, K, accumulate);
  else
    par::gemm_nt(A, B, C, M, N, K, accumulate);
}
template <typename T>
void gemm_tn(const T* A, const T* B, T* C, int M, int N, int K, bool accumulate = false) {
  if (num_threads() == 1 && static_cast<std::int64_t>(M) * N * K < (1 << 14))
    ref::gemm_tn(A, B, C, M, N, K, accumulate);
  else
    par::gemm_tn(A, B, C, M, N, K, accumulate);
}

// ---------------------------------------------------------------------------
// im2col / col2im for 2-D convolution, NCHW. col is (Ho*Wo) x (C*kh*kw).
// ---------------------------------------------------------------------------

struct ConvGeom {
  int C, H, W, kh, kw;
  int sh = 1, sw = 1, ph = 0, pw = 0;
  int Ho() const { return (H + 2 * ph - kh) / sh + 1; }
  int Wo() const { return (W + 2 * pw - kw) / sw + 1; }
  int cols() const { return C * kh * kw; }
};

template <typename T>
void im2col(const T* x, const ConvGeom& g, T* col) {
  const int Ho = g.Ho(), Wo = g.Wo(), cols = g.cols();
#pragma omp parallel for schedule(static)
  for (int oy = 0; oy < Ho; ++oy) {
    for (int ox = 0; ox < Wo; ++ox) {
      T* row = col + (static_cast<std::int64_t>(oy) * Wo + ox) * cols;
      int idx = 0;
      for (int c = 0; c < g.C; ++c) {
        const T* xc = x + static_cast<std::int64_t>(c) * g.H * g.W;
        for (int ky = 0; ky < g.kh; ++ky) {
          const int iy = oy * g.sh - g.ph + ky;
          for (int kx = 0; kx < g.kw; ++kx) {
            const int ix = ox * g.sw - g.pw + kx;
            row[idx++] = (iy >= 0 && iy < g.H && ix >= 0 && ix < g.W) ? xc[static_cast<std::int64_t>(iy) * g.W + ix] : T(0);
          }
        }
      }
    }
  }
}

// Gather form of col2im: each input element sums the col entries that map to
// it, so the parallel loop has no write conflicts.
template <typename T>
void col2im(const T* col, const ConvGeom& g, T* x, bool accumulate) {
  const int Ho = g.Ho(), Wo = g.Wo(), cols = g.cols();
#pragma omp parallel for schedule(static)
  for (int c = 0; c < g.C; ++c) {
    for (int iy = 0; iy < g.H; ++iy) {
      for (int ix = 0; ix < g.W; ++ix) {
        T acc = T(0);
        for (int ky = 0; ky < g.kh; ++ky) {
          const int ty = iy + g.ph - ky;
          if (ty % g.sh != 0) continue;
          const int oy = ty / g.sh;
          if (oy < 0 || oy >= Ho) continue;
          for (int kx = 0; kx < g.kw; ++kx) {
            const int tx = ix + g.pw - kx;
            if (tx % g.sw != 0) continue;
            const int ox = tx / g.sw;
            if (ox < 0 || ox >= Wo) continue;
            acc += col[(static_cast<std::int64_t>(oy) * Wo + ox) * cols + (static_cast<std::int64_t>(c) * g.kh + ky) * g.kw + kx];
          }
        }
        T* dst = x + (static_cast<std::int64_t>(c) * g.H + iy) * g.W + ix;
        *dst = accumulate ? *dst + acc : acc;
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Scaled-dot-product attention, row-chunked so the P x P' score matrix is
// never fully materialized. Backward recomputes scores from Q,K.
// Q: P x D, K/V: P' x D, O: P x D.
// ---------------------------------------------------------------------------

namespace ref {

template <typename T>
void attention_forward(const T* Q, const T* K, const T* V, T* O, int P, int Pk, int D, int Dv) {
  const T inv = T(1) / std::sqrt(static_cast<T>(D));
  std::vector<T> s(static_cast<size_t>(Pk));
  for (int i = 0; i < P; ++i) {
    T mx = -std::numeric_limits<T>::infinity();
    for (int j = 0; j < Pk; ++j) {
      T dot = T(0);
      for (int d = 0; d < D; ++d) dot += Q[static_cast<std::int64_t>(i) * D + d] * K[static_cast<std::int64_t>(j) * D + d];
      s[static_cast<size_t>(j)] = dot * inv;
      mx = std::max(mx, s[static_cast<size_t>(j)]);
    }
    T z = T(0);
    for (int j = 0; j < Pk; ++j) {
      s[static_cast<size_t>(j)] = std::exp(s[static_cast<size_t>(j)] - mx);
      z += s[static_cast<size_t>(j)];
    }
    for (int d = 0; d < Dv; ++d) {
      T acc = T(0);
      for (int j = 0; j < Pk; ++j) acc += s[static_cast<size_t>(j)] * V[static_cast<std::int64_t>(j) * Dv + d];
      O[static_cast<std::int64_t>(i) * Dv + d] = acc / z;
    }
  }
}

}  // namespace ref

template <typename T>
void softmax_rows_inplace(T* s, int rows, int cols) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < rows; ++i) {
    T* row = s + static_cast<std::int64_t>(i) * cols;
    T mx = row[0];
    for (int j = 1; j < cols; ++j) mx = std::max(mx, row[j]);
    T z = T(0);
    for (int j = 0; j < cols; ++j) {
      row[j] = std::exp(row[j] - mx);
      z += row[j];
    }
    const T rz = T(1) / z;
    for (int j = 0; j < cols; ++j) row[j] *= rz;
  }
}

inline constexpr int kAttnChunk = 256;

template <typename T>
void attention_forward(const T* Q, const T* K, const T* V, T* O, int P, int Pk, int D, int Dv) {
  const T inv = T(1) / std::sqrt(static_cast<T>(D));
  std::vector<T> sbuf(static_cast<size_t>(std::min(P, kAttnChunk)) * static_cast<size_t>(Pk));
  for (int i0 = 0; i0 < P; i0 += kAttnChunk) {
    const int m = std::min(kAttnChunk, P - i0);
    T* S = sbuf.data();
    gemm_nt(Q + static_cast<std::int64_t>(i0) * D, K, S, m, Pk, D);
    const std::int64_t total = static_cast<std::int64_t>(m) * Pk;
    for (std::int64_t t = 0; t < total; ++t) S[t] *= inv;
    softmax_rows_inplace(S, m, Pk);
    gemm_nn(S, V, O + static_cast<std::int64_t>(i0) * Dv, m, Dv, Pk);
  }
}

// Backward pass; dQ/dK/dV are accumulated into (caller zeroes or chains).
template <typename T>
void attention_backward(const T* Q, const T* K, const T* V, const T* dO, T* dQ, T* dK, T* dV, int P, int Pk, int D,
                        int Dv) {
  const T inv = T(1) / std::sqrt(static_cast<T>(D));
  std::vector<T> sbuf(static_cast<size_t>(std::min(P, kAttnChunk)) * static_cast<size_t>(Pk));
  std::vector<T> dsbuf(sbuf.size());
  for (int i0 = 0; i0 < P; i0 += kAttnChunk) {
    const int m = std::min(kAttnChunk, P - i0);
    T* S = sbuf.data();
    T* dS = dsbuf.data();
    gemm_nt(Q + static_cast<std::int64_t>(i0) * D, K, S, m, Pk, D);
    const std::int64_t total = static_cast<std::int64_t>(m) * Pk;
    for (std::int64_t t = 0; t < total; ++t) S[t] *= inv;
    softmax_rows_inplace(S, m, Pk);
    // dV += S^T dO
    gemm_tn(S, dO + static_cast<std::int64_t>(i0) * Dv, dV, Pk, Dv, m, /*accumulate=*/true);
    // dS = dO V^T, then softmax backward row-wise
    gemm_nt(dO + static_cast<std::int64_t>(i0) * Dv, V, dS, m, Pk, Dv);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i) {
      T* srow = S + static_cast<std::int64_t>(i) * Pk;
      T* dsrow = dS + static_cast<std::int64_t>(i) * Pk;
      T dot = T(0);
      for (int j = 0; j < Pk; ++j) dot += srow[j] * dsrow[j];
      for (int j = 0; j < Pk; ++j) dsrow[j] = srow[j] * (dsrow[j] - dot) * inv;
    }
    // dQ_chunk += dS K ; dK += dS^T Q_chunk
    gemm_nn(dS, K, dQ + static_cast<std::int64_t>(i0) * D, m, D, Pk, /*accumulate=*/true);
    gemm_tn(dS, Q + static_cast<std::int64_t>(i0) * D, dK, Pk, D, m, /*accumulate=*/true);
  }
}

}  // namespace vamark::kernels
