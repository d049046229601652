#pragma once

#include <Eigen/Dense>
#include <algorithm>

#include "mosaic/core/graph.hpp"
#include "mosaic/core/parallel.hpp"

namespace mosaic::nn {

namespace detail {

// Gathers one frame's im2col rows. Layout: x [H, W, Cin] channels-last, col
// rows indexed by (oy, ox), columns by (ky, kx, cin). Out-of-range taps are
// zero (zero padding).
template <class T>
void im2col_frame(const T* x, int64_t H, int64_t W, int64_t Cin, int64_t KH, int64_t KW,
                  int64_t stride, int64_t pad, int64_t Ho, int64_t Wo, T* col) {
  for (int64_t oy = 0; oy < Ho; ++oy) {
    for (int64_t ox = 0; ox < Wo; ++ox) {
      T* row = col + (oy * Wo + ox) * (KH * KW * Cin);
      for (int64_t ky = 0; ky < KH; ++ky) {
        int64_t iy = oy * stride + ky - pad;
        for (int64_t kx = 0; kx < KW; ++kx) {
          int64_t ix = ox * stride + kx - pad;
          T* dst = row + (ky * KW + kx) * Cin;
          if (iy < 0 || iy >= H || ix < 0 || ix >= W) {
            std::fill(dst, dst + Cin, T(0));
          } else {
            std::memcpy(dst, x + (iy * W + ix) * Cin, sizeof(T) * Cin);
          }
        }
      }
    }
  }
}

// Scatter-add of one frame's column gradient back to the input gradient.
template <class T>
void col2im_frame(const T* col, int64_t H, int64_t W, int64_t Cin, int64_t KH, int64_t KW,
                  int64_t stride, int64_t pad, int64_t Ho, int64_t Wo, T* dx) {
  for (int64_t oy = 0; oy < Ho; ++oy) {
    for (int64_t ox = 0; ox < Wo; ++ox) {
      const T* row = col + (oy * Wo + ox) * (KH * KW * Cin);
      for (int64_t ky = 0; ky < KH; ++ky) {
        int64_t iy = oy * stride + ky - pad;
        if (iy < 0 || iy >= H) continue;
        for (int64_t kx = 0; kx < KW; ++kx) {
          int64_t ix = ox * stride + kx - pad;
          if (ix < 0 || ix >= W) continue;
          const T* src = row + (ky * KW + kx) * Cin;
          T* dst = dx + (iy * W + ix) * Cin;
          for (int64_t c = 0; c < Cin; ++c) dst[c] += src[c];
        }
      }
    }
  }
}

}  // namespace detail

// x: [N, H, W, Cin] channels-last. w: [KH, KW, Cin, Cout]. b: [Cout].
// Frames are processed in chunks to bound im2col scratch; the chunk loop is
// serial so gradient accumulation into w is deterministic.
template <class T>
Var conv2d(Graph<T>& g, Var x, Var w, Var b, int64_t stride, int64_t pad) {
  const auto& xv = g.value(x);
  const auto& wv = g.value(w);
  check(xv.rank() == 4 && wv.rank() == 4, "conv2d expects x rank-4, w rank-4");
  int64_t N = xv.shape()[0], H = xv.shape()[1], W = xv.shape()[2], Cin = xv.shape()[3];
  int64_t KH = wv.shape()[0], KW = wv.shape()[1], Cout = wv.shape()[3];
  check(wv.shape()[2] == Cin, "conv2d channel mismatch");
  int64_t Ho = (H + 2 * pad - KH) / stride + 1;
  int64_t Wo = (W + 2 * pad - KW) / stride + 1;
  int64_t K = KH * KW * Cin;
  int64_t rows_per_frame = Ho * Wo;

  const int64_t kScratchFloats = 6 * 1000 * 1000;
  int64_t chunk = std::max<int64_t>(1, std::min(N, kScratchFloats / std::max<int64_t>(1, rows_per_frame * K)));

  Tensor<T> out(Shape{N, Ho, Wo, Cout});
  {
    Tensor<T> col(Shape{chunk * rows_per_frame, K});
    auto Wm = wv.mat(K, Cout);
    for (int64_t n0 = 0; n0 < N; n0 += chunk) {
      int64_t nf = std::min(chunk, N - n0);
      T* colp = col.data();
      const T* xp = xv.data();
      parallel_for(nf, [&](int64_t i) {
        detail::im2col_frame(xp + (n0 + i) * H * W * Cin, H, W, Cin, KH, KW, stride, pad, Ho, Wo,
                             colp + i * rows_per_frame * K);
      });
      typename Tensor<T>::ConstMatMap Cm(colp, nf * rows_per_frame, K);
      typename Tensor<T>::MatMap Om(out.data() + n0 * rows_per_frame * Cout, nf * rows_per_frame, Cout);
      Om.noalias() = Cm * Wm;
    }
  }
  if (b >= 0) {
    const auto& bv = g.value(b);
    check(bv.numel() == Cout, "conv2d bias width");
    out.mat(N * rows_per_frame, Cout).rowwise() += bv.vec().transpose();
  }

  Var v = g.emit(std::move(out), b >= 0 ? std::initializer_list<Var>{x, w, b}
                                        : std::initializer_list<Var>{x, w});
  g.set_backward(v, [v, x, w, b, N, H, W, Cin, KH, KW, Cout, Ho, Wo, K, rows_per_frame, stride,
                     pad, chunk](Graph<T>& gr) {
    const T* dy = gr.grad(v).data();
    if (b >= 0 && gr.needs_grad(b)) {
      typename Tensor<T>::ConstMatMap dY(dy, N * rows_per_frame, Cout);
      gr.grad(b).vec() += dY.colwise().sum().transpose();
    }
    bool need_w = gr.needs_grad(w);
    bool need_x = gr.needs_grad(x);
    if (!need_w && !need_x) return;
    Tensor<T> col(Shape{chunk * rows_per_frame, K});
    Tensor<T> dcol;
    if (need_x) dcol = Tensor<T>(Shape{chunk * rows_per_frame, K});
    const T* xp = gr.value(x).data();
    auto Wm = gr.value(w).mat(K, Cout);
    for (int64_t n0 = 0; n0 < N; n0 += chunk) {
      int64_t nf = std::min(chunk, N - n0);
      T* colp = col.data();
      if (need_w) {
        parallel_for(nf, [&](int64_t i) {
          detail::im2col_frame(xp + (n0 + i) * H * W * Cin, H, W, Cin, KH, KW, stride, pad, Ho,
                               Wo, colp + i * rows_per_frame * K);
        });
        typename Tensor<T>::ConstMatMap Cm(colp, nf * rows_per_frame, K);
        typename Tensor<T>::ConstMatMap dY(dy + n0 * rows_per_frame * Cout, nf * rows_per_frame, Cout);
        gr.grad(w).mat(K, Cout).noalias() += Cm.transpose() * dY;
      }
      if (need_x) {
        typename Tensor<T>::ConstMatMap dY(dy + n0 * rows_per_frame * Cout, nf * rows_per_frame, Cout);
        typename Tensor<T>::MatMap dCm(dcol.data(), nf * rows_per_frame, K);
        dCm.noalias() = dY * Wm.transpose();
        T* dxp = gr.grad(x).data();
        const T* dcolp = dcol.data();
        parallel_for(nf, [&](int64_t i) {
          detail::col2im_frame(dcolp + i * rows_per_frame * K, H, W, Cin, KH, KW, stride, pad, Ho,
                               Wo, dxp + (n0 + i) * H * W * Cin);
        });
      }
    }
  });
  return v;
}

// Group normalization over [N, S, C]: statistics per (sample, group) across
// S * (C/groups) elements. gamma/beta are per channel.
template <class T>
Var groupnorm(Graph<T>& g, Var x, Var gamma, Var beta, int64_t groups, T eps = T(1e-5)) {
  const auto& xv = g.value(x);
  check(xv.rank() == 3, "groupnorm expects [N, S, C]");
  int64_t N = xv.shape()[0], S = xv.shape()[1], C = xv.shape()[2];
  check(C % groups == 0, "groupnorm channels not divisible by groups");
  int64_t Cg = C / groups;
  Tensor<T> out(xv.shape());
  Tensor<T> mean(Shape{N, groups});
  Tensor<T> invstd(Shape{N, groups});
  const T* xp = xv.data();
  const T* gp = g.value(gamma).data();
  const T* bp = g.value(beta).data();
  T* op = out.data();
  T* mp = mean.data();
  T* ip = invstd.data();
  T inv_cnt = T(1) / static_cast<T>(S * Cg);
  parallel_for(N, [&](int64_t n) {
    for (int64_t gi = 0; gi < groups; ++gi) {
      T sum = T(0), sq = T(0);
      for (int64_t s = 0; s < S; ++s) {
        const T* row = xp + (n * S + s) * C + gi * Cg;
        for (int64_t c = 0; c < Cg; ++c) {
          sum += row[c];
          sq += row[c] * row[c];
        }
      }
      T mu = sum * inv_cnt;
      T var = sq * inv_cnt - mu * mu;
      T is = T(1) / std::sqrt(var + eps);
      mp[n * groups + gi] = mu;
      ip[n * groups + gi] = is;
      for (int64_t s = 0; s < S; ++s) {
        const T* row = xp + (n * S + s) * C + gi * Cg;
        T* orow = op + (n * S + s) * C + gi * Cg;
        for (int64_t c = 0; c < Cg; ++c) {
          int64_t ch = gi * Cg + c;
          orow[c] = gp[ch] * (row[c] - mu) * is + bp[ch];
        }
      }
    }
  });
  Var v = g.emit(std::move(out), {x, gamma, beta});
  g.set_backward(v, [v, x, gamma, beta, N, S, C, groups, Cg, mean, invstd, inv_cnt](Graph<T>& gr) {
    const T* xp2 = gr.value(x).data();
    const T* gp2 = gr.value(gamma).data();
    const T* dy = gr.grad(v).data();
    const T* mp2 = mean.data();
    const T* ip2 = invstd.data();
    bool need_x = gr.needs_grad(x);
    bool need_g = gr.needs_grad(gamma);
    bool need_b = gr.needs_grad(beta);
    Tensor<T> pg, pb;
    if (need_g) pg = Tensor<T>(Shape{N, C});
    if (need_b) pb = Tensor<T>(Shape{N, C});
    T* dxp = need_x ? gr.grad(x).data() : nullptr;
    parallel_for(N, [&](int64_t n) {
      for (int64_t gi = 0; gi < groups; ++gi) {
        T mu = mp2[n * groups + gi];
        T is = ip2[n * groups + gi];
        T m1 = T(0), m2 = T(0);
        for (int64_t s = 0; s < S; ++s) {
          const T* xr = xp2 + (n * S + s) * C + gi * Cg;
          const T* dr = dy + (n * S + s) * C + gi * Cg;
          for (int64_t c = 0; c < Cg; ++c) {
            int64_t ch = gi * Cg + c;
            T xhat = (xr[c] - mu) * is;
            T dxhat = dr[c] * gp2[ch];
            m1 += dxhat;
            m2 += dxhat * xhat;
            if (need_g) pg.at(n * C + ch) += dr[c] * xhat;
            if (need_b) pb.at(n * C + ch) += dr[c];
          }
        }
        if (need_x) {
          m1 *= inv_cnt;
          m2 *= inv_cnt;
          for (int64_t s = 0; s < S; ++s) {
            const T* xr = xp2 + (n * S + s) * C + gi * Cg;
            const T* dr = dy + (n * S + s) * C + gi * Cg;
            T* dxr = dxp + (n * S + s) * C + gi * Cg;
            for (int64_t c = 0; c < Cg; ++c) {
              int64_t ch = gi * Cg + c;
              T xhat = (xr[c] - mu) * is;
              T dxhat = dr[c] * gp2[ch];
              dxr[c] += is * (dxhat - m1 - xhat * m2);
            }
          }
        }
      }
    });
    // Serial reduction over samples keeps parameter grads deterministic.
    if (need_g) {
      T* dgp = gr.grad(gamma).data();
      for (int64_t n = 0; n < N; ++n)
        for (int64_t c = 0; c < C; ++c) dgp[c] += pg.at(n * C + c);
    }
    if (need_b) {
      T* dbp = gr.grad(beta).data();
      for (int64_t n = 0; n < N; ++n)
        for (int64_t c = 0; c < C; ++c) dbp[c] += pb.at(n * C + c);
    }
  });
  return v;
}

}  // namespace mosaic::nn
