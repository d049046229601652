#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "mosaic/core/graph.hpp"
#include "mosaic/core/parallel.hpp"

namespace mosaic::nn {

// ---------------------------------------------------------------- elementwise

template <class T>
Var add(Graph<T>& g, Var a, Var b) {
  const auto& av = g.value(a);
  const auto& bv = g.value(b);
  check(av.shape() == bv.shape(), "add shape mismatch " + av.shape().str() + " vs " + bv.shape().str());
  Tensor<T> out(av.shape());
  out.vec() = av.vec() + bv.vec();
  Var v = g.emit(std::move(out), {a, b});
  g.set_backward(v, [v, a, b](Graph<T>& gr) {
    gr.add_grad(a, gr.grad(v));
    gr.add_grad(b, gr.grad(v));
  });
  return v;
}

template <class T>
Var sub(Graph<T>& g, Var a, Var b) {
  const auto& av = g.value(a);
  const auto& bv = g.value(b);
  check(av.shape() == bv.shape(), "sub shape mismatch");
  Tensor<T> out(av.shape());
  out.vec() = av.vec() - bv.vec();
  Var v = g.emit(std::move(out), {a, b});
  g.set_backward(v, [v, a, b](Graph<T>& gr) {
    gr.add_grad(a, gr.grad(v));
    if (gr.needs_grad(b)) {
      Tensor<T> nb(gr.grad(v).shape());
      nb.vec() = -gr.grad(v).vec();
      gr.add_grad(b, nb);
    }
  });
  return v;
}

template <class T>
Var mul(Graph<T>& g, Var a, Var b) {
  const auto& av = g.value(a);
  const auto& bv = g.value(b);
  check(av.shape() == bv.shape(), "mul shape mismatch");
  Tensor<T> out(av.shape());
  out.vec() = av.vec().cwiseProduct(bv.vec());
  Var v = g.emit(std::move(out), {a, b});
  g.set_backward(v, [v, a, b](Graph<T>& gr) {
    if (gr.needs_grad(a)) {
      Tensor<T> da(gr.grad(v).shape());
      da.vec() = gr.grad(v).vec().cwiseProduct(gr.value(b).vec());
      gr.add_grad(a, da);
    }
    if (gr.needs_grad(b)) {
      Tensor<T> db(gr.grad(v).shape());
      db.vec() = gr.grad(v).vec().cwiseProduct(gr.value(a).vec());
      gr.add_grad(b, db);
    }
  });
  return v;
}

template <class T>
Var scale(Graph<T>& g, Var a, T c) {
  Tensor<T> out(g.value(a).shape());
  out.vec() = g.value(a).vec() * c;
  Var v = g.emit(std::move(out), {a});
  g.set_backward(v, [v, a, c](Graph<T>& gr) {
    Tensor<T> da(gr.grad(v).shape());
    da.vec() = gr.grad(v).vec() * c;
    gr.add_grad(a, da);
  });
  return v;
}

template <class T>
Var relu(Graph<T>& g, Var a) {
  Tensor<T> out(g.value(a).shape());
  out.vec() = g.value(a).vec().cwiseMax(T(0));
  Var v = g.emit(std::move(out), {a});
  g.set_backward(v, [v, a](Graph<T>& gr) {
    const Tensor<T>& x = gr.value(a);
    const Tensor<T>& dy = gr.grad(v);
    Tensor<T> da(x.shape());
    const T* xp = x.data();
    const T* dp = dy.data();
    T* op = da.data();
    for (int64_t i = 0; i < x.numel(); ++i) op[i] = xp[i] > T(0) ? dp[i] : T(0);
    gr.add_grad(a, da);
  });
  return v;
}

template <class T>
Var tanh_op(Graph<T>& g, Var a) {
  Tensor<T> out(g.value(a).shape());
  out.vec() = g.value(a).vec().array().tanh().matrix();
  Var v = g.emit(std::move(out), {a});
  g.set_backward(v, [v, a](Graph<T>& gr) {
    Tensor<T> da(gr.grad(v).shape());
    da.vec() = gr.grad(v).vec().array() * (T(1) - gr.value(v).vec().array().square());
    gr.add_grad(a, da);
  });
  return v;
}

template <class T>
Var sigmoid_op(Graph<T>& g, Var a) {
  Tensor<T> out(g.value(a).shape());
  out.vec() = (T(1) / (T(1) + (-g.value(a).vec().array()).exp())).matrix();
  Var v = g.emit(std::move(out), {a});
  g.set_backward(v, [v, a](Graph<T>& gr) {
    Tensor<T> da(gr.grad(v).shape());
    auto y = gr.value(v).vec().array();
    da.vec() = gr.grad(v).vec().array() * y * (T(1) - y);
    gr.add_grad(a, da);
  });
  return v;
}

// y[r, :] = a[r, :] + b  (bias broadcast over rows of the 2-D view)
template <class T>
Var add_rowvec(Graph<T>& g, Var a, Var b) {
  const auto& av = g.value(a);
  const auto& bv = g.value(b);
  int64_t cols = av.shape()[av.rank() - 1];
  check(bv.numel() == cols, "add_rowvec width mismatch");
  Tensor<T> out(av.shape());
  int64_t rows = av.numel() / cols;
  out.mat(rows, cols) = av.mat(rows, cols).rowwise() + bv.vec().transpose();
  Var v = g.emit(std::move(out), {a, b});
  g.set_backward(v, [v, a, b, rows, cols](Graph<T>& gr) {
    gr.add_grad(a, gr.grad(v));
    if (gr.needs_grad(b)) {
      Tensor<T> db(gr.value(b).shape());
      db.vec() = gr.grad(v).mat(rows, cols).colwise().sum().transpose();
      gr.add_grad(b, db);
    }
  });
  return v;
}

// ------------------------------------------------------------------- shape

template <class T>
Var reshape(Graph<T>& g, Var a, Shape s) {
  Tensor<T> out = g.value(a).reshaped(s);
  Var v = g.emit(std::move(out), {a});
  g.set_backward(v, [v, a](Graph<T>& gr) {
    gr.add_grad(a, gr.grad(v).reshaped(gr.value(a).shape()));
  });
  return v;
}

namespace detail {
inline void axis_split(const Shape& s, int axis, int64_t& outer, int64_t& span, int64_t& inner) {
  outer = 1;
  inner = 1;
  for (int i = 0; i < axis; ++i) outer *= s[i];
  span = s[axis];
  for (int i = axis + 1; i < s.rank(); ++i) inner *= s[i];
}
}  // namespace detail

template <class T>
Var slice_axis(Graph<T>& g, Var a, int axis, int64_t from, int64_t to) {
  const auto& av = g.value(a);
  check(axis >= 0 && axis < av.rank() && from >= 0 && to <= av.shape()[axis] && from < to,
        "slice_axis bounds");
  int64_t outer, span, inner;
  detail::axis_split(av.shape(), axis, outer, span, inner);
  Shape os = av.shape();
  os[axis] = to - from;
  Tensor<T> out(os);
  const T* src = av.data();
  T* dst = out.data();
  int64_t blk = (to - from) * inner;
  for (int64_t o = 0; o < outer; ++o)
    std::memcpy(dst + o * blk, src + (o * span + from) * inner, sizeof(T) * blk);
  Var v = g.emit(std::move(out), {a});
  g.set_backward(v, [v, a, axis, from, to](Graph<T>& gr) {
    const auto& as = gr.value(a).shape();
    int64_t outer2, span2, inner2;
    detail::axis_split(as, axis, outer2, span2, inner2);
    Tensor<T>& da = gr.grad(a);
    if (!gr.needs_grad(a)) return;
    const Tensor<T>& dy = gr.grad(v);
    int64_t blk2 = (to - from) * inner2;
    const T* sp = dy.data();
    T* dp = da.data();
    for (int64_t o = 0; o < outer2; ++o) {
      T* base = dp + (o * span2 + from) * inner2;
      const T* src2 = sp + o * blk2;
      for (int64_t i = 0; i < blk2; ++i) base[i] += src2[i];
    }
  });
  return v;
}

template <class T>
Var concat_axis(Graph<T>& g, Var a, Var b, int axis) {
  const auto& av = g.value(a);
  const auto& bv = g.value(b);
  check(av.rank() == bv.rank(), "concat rank mismatch");
  for (int i = 0; i < av.rank(); ++i)
    if (i != axis) check(av.shape()[i] == bv.shape()[i], "concat shape mismatch");
  int64_t outer, span_a, inner;
  detail::axis_split(av.shape(), axis, outer, span_a, inner);
  int64_t span_b = bv.shape()[axis];
  Shape os = av.shape();
  os[axis] = span_a + span_b;
  Tensor<T> out(os);
  T* dst = out.data();
  const T* pa = av.data();
  const T* pb = bv.data();
  int64_t blk_a = span_a * inner, blk_b = span_b * inner, blk_o = blk_a + blk_b;
  for (int64_t o = 0; o < outer; ++o) {
    std::memcpy(dst + o * blk_o, pa + o * blk_a, sizeof(T) * blk_a);
    std::memcpy(dst + o * blk_o + blk_a, pb + o * blk_b, sizeof(T) * blk_b);
  }
  Var v = g.emit(std::move(out), {a, b});
  g.set_backward(v, [v, a, b, axis](Graph<T>& gr) {
    int64_t outer2, span_a2, inner2;
    detail::axis_split(gr.value(a).shape(), axis, outer2, span_a2, inner2);
    int64_t span_b2 = gr.value(b).shape()[axis];
    int64_t blk_a2 = span_a2 * inner2, blk_b2 = span_b2 * inner2, blk_o2 = blk_a2 + blk_b2;
    const T* dy = gr.grad(v).data();
    if (gr.needs_grad(a)) {
      T* da = gr.grad(a).data();
      for (int64_t o = 0; o < outer2; ++o)
        for (int64_t i = 0; i < blk_a2; ++i) da[o * blk_a2 + i] += dy[o * blk_o2 + i];
    }
    if (gr.needs_grad(b)) {
      T* db = gr.grad(b).data();
      for (int64_t o = 0; o < outer2; ++o)
        for (int64_t i = 0; i < blk_b2; ++i) db[o * blk_b2 + i] += dy[o * blk_o2 + blk_a2 + i];
    }
  });
  return v;
}

// [B, Tt, P, J*dk] -> [B*J*Tt, P, dk], groups ordered (b, j, t) so that a
// per-(b, j) tensor aligns with group index / Tt.
template <class T>
Var regroup_heads(Graph<T>& g, Var x, int64_t B, int64_t Tt, int64_t P, int64_t J) {
  const auto& xv = g.value(x);
  int64_t C = xv.numel() / (B * Tt * P);
  check(C % J == 0, "regroup_heads: channels not divisible by heads");
  int64_t dk = C / J;
  Tensor<T> out(Shape{B * J * Tt, P, dk});
  const T* src = xv.data();
  T* dst = out.data();
  parallel_for(B * Tt, [&](int64_t bt) {
    int64_t b = bt / Tt, t = bt % Tt;
    for (int64_t p = 0; p < P; ++p) {
      const T* row = src + ((b * Tt + t) * P + p) * C;
      for (int64_t j = 0; j < J; ++j) {
        T* orow = dst + (((b * J + j) * Tt + t) * P + p) * dk;
        std::memcpy(orow, row + j * dk, sizeof(T) * dk);
      }
    }
  });
  Var v = g.emit(std::move(out), {x});
  g.set_backward(v, [v, x, B, Tt, P, J, dk](Graph<T>& gr) {
    if (!gr.needs_grad(x)) return;
    int64_t C2 = J * dk;
    const T* dy = gr.grad(v).data();
    T* dx = gr.grad(x).data();
    parallel_for(B * Tt, [&](int64_t bt) {
      int64_t b = bt / Tt, t = bt % Tt;
      for (int64_t p = 0; p < P; ++p) {
        T* row = dx + ((b * Tt + t) * P + p) * C2;
        for (int64_t j = 0; j < J; ++j) {
          const T* orow = dy + (((b * J + j) * Tt + t) * P + p) * dk;
          for (int64_t c = 0; c < dk; ++c) row[j * dk + c] += orow[c];
        }
      }
    });
  });
  return v;
}

// Inverse of regroup_heads: [B*J*Tt, P, dk] -> [B, Tt, P, J*dk].
template <class T>
Var merge_heads(Graph<T>& g, Var x, int64_t B, int64_t Tt, int64_t P, int64_t J) {
  const auto& xv = g.value(x);
  int64_t dk = xv.shape()[2];
  check(xv.shape()[0] == B * J * Tt && xv.shape()[1] == P, "merge_heads shape");
  int64_t C = J * dk;
  Tensor<T> out(Shape{B, Tt, P, C});
  const T* src = xv.data();
  T* dst = out.data();
  parallel_for(B * Tt, [&](int64_t bt) {
    int64_t b = bt / Tt, t = bt % Tt;
    for (int64_t p = 0; p < P; ++p) {
      T* row = dst + ((b * Tt + t) * P + p) * C;
      for (int64_t j = 0; j < J; ++j) {
        const T* irow = src + (((b * J + j) * Tt + t) * P + p) * dk;
        std::memcpy(row + j * dk, irow, sizeof(T) * dk);
      }
    }
  });
  Var v = g.emit(std::move(out), {x});
  g.set_backward(v, [v, x, B, Tt, P, J, dk](Graph<T>& gr) {
    if (!gr.needs_grad(x)) return;
    int64_t C2 = J * dk;
    const T* dy = gr.grad(v).data();
    T* dx = gr.grad(x).data();
    parallel_for(B * Tt, [&](int64_t bt) {
      int64_t b = bt / Tt, t = bt % Tt;
      for (int64_t p = 0; p < P; ++p) {
        const T* row = dy + ((b * Tt + t) * P + p) * C2;
        for (int64_t j = 0; j < J; ++j) {
          T* irow = dx + (((b * J + j) * Tt + t) * P + p) * dk;
          for (int64_t c = 0; c < dk; ++c) irow[c] += row[j * dk + c];
        }
      }
    });
  });
  return v;
}

// ------------------------------------------------------------------- matmul

// 2-D views: a [M, K] (or [K, M] if ta), b [K, N] (or [N, K] if tb).
template <class T>
Var matmul(Graph<T>& g, Var a, Var b, bool ta = false, bool tb = false) {
  const auto& av = g.value(a);
  const auto& bv = g.value(b);
  int64_t a_cols = av.shape()[av.rank() - 1];
  int64_t a_rows = av.numel() / a_cols;
  int64_t b_cols = bv.shape()[bv.rank() - 1];
  int64_t b_rows = bv.numel() / b_cols;
  int64_t M = ta ? a_cols : a_rows;
  int64_t K = ta ? a_rows : a_cols;
  int64_t Kb = tb ? b_cols : b_rows;
  int64_t N = tb ? b_rows : b_cols;
  check(K == Kb, "matmul inner dim mismatch");
  Tensor<T> out(Shape{M, N});
  auto A = av.mat(a_rows, a_cols);
  auto B = bv.mat(b_rows, b_cols);
  auto C = out.mat(M, N);
  if (!ta && !tb) C.noalias() = A * B;
  else if (ta && !tb) C.noalias() = A.transpose() * B;
  else if (!ta && tb) C.noalias() = A * B.transpose();
  else C.noalias() = A.transpose() * B.transpose();
  Var v = g.emit(std::move(out), {a, b});
  g.set_backward(v, [v, a, b, ta, tb, a_rows, a_cols, b_rows, b_cols, M, N](Graph<T>& gr) {
    auto dY = gr.grad(v).mat(M, N);
    auto A2 = gr.value(a).mat(a_rows, a_cols);
    auto B2 = gr.value(b).mat(b_rows, b_cols);
    if (gr.needs_grad(a)) {
      auto dA = gr.grad(a).mat(a_rows, a_cols);
      if (!ta && !tb) dA.noalias() += dY * B2.transpose();
      else if (!ta && tb) dA.noalias() += dY * B2;
      else if (ta && !tb) dA.noalias() += B2 * dY.transpose();
      else dA.noalias() += B2.transpose() * dY.transpose();
    }
    if (gr.needs_grad(b)) {
      auto dB = gr.grad(b).mat(b_rows, b_cols);
      if (!ta && !tb) dB.noalias() += A2.transpose() * dY;
      else if (ta && !tb) dB.noalias() += A2 * dY;
      else if (!ta && tb) dB.noalias() += dY.transpose() * A2;
      else dB.noalias() += dY.transpose() * A2.transpose();
    }
  });
  return v;
}

// Batched matmul. a: [Ga, P, K], b: [Gb, K, N] with Ga == Gb * group_div;
// group i of a multiplies group i / group_div of b. Transpose flags apply
// per group. Gradients into shared b groups accumulate serially over the
// group_div inner index, so results are thread-count independent.
template <class T>
Var bmm(Graph<T>& g, Var a, Var b, bool ta = false, bool tb = false, int64_t group_div = 1) {
  const auto& av = g.value(a);
  const auto& bv = g.value(b);
  check(av.rank() == 3 && bv.rank() == 3, "bmm expects rank-3");
  int64_t Ga = av.shape()[0], Gb = bv.shape()[0];
  check(Ga == Gb * group_div, "bmm group mismatch");
  int64_t ar = av.shape()[1], ac = av.shape()[2];
  int64_t br = bv.shape()[1], bc = bv.shape()[2];
  int64_t M = ta ? ac : ar, K = ta ? ar : ac;
  int64_t Kb = tb ? bc : br, N = tb ? br : bc;
  check(K == Kb, "bmm inner dim mismatch");
  Tensor<T> out(Shape{Ga, M, N});
  const T* pa = av.data();
  const T* pb = bv.data();
  T* pc = out.data();
  parallel_for(Ga, [&](int64_t i) {
    typename Tensor<T>::ConstMatMap A(pa + i * ar * ac, ar, ac);
    typename Tensor<T>::ConstMatMap B(pb + (i / group_div) * br * bc, br, bc);
    typename Tensor<T>::MatMap C(pc + i * M * N, M, N);
    if (!ta && !tb) C.noalias() = A * B;
    else if (ta && !tb) C.noalias() = A.transpose() * B;
    else if (!ta && tb) C.noalias() = A * B.transpose();
    else C.noalias() = A.transpose() * B.transpose();
  });
  Var v = g.emit(std::move(out), {a, b});
  g.set_backward(v, [v, a, b, ta, tb, group_div, Ga, Gb, ar, ac, br, bc, M, N](Graph<T>& gr) {
    const T* pa2 = gr.value(a).data();
    const T* pb2 = gr.value(b).data();
    const T* pdy = gr.grad(v).data();
    if (gr.needs_grad(a)) {
      T* pda = gr.grad(a).data();
      parallel_for(Ga, [&](int64_t i) {
        typename Tensor<T>::ConstMatMap B(pb2 + (i / group_div) * br * bc, br, bc);
        typename Tensor<T>::ConstMatMap dY(pdy + i * M * N, M, N);
        typename Tensor<T>::MatMap dA(pda + i * ar * ac, ar, ac);
        if (!ta && !tb) dA.noalias() += dY * B.transpose();
        else if (!ta && tb) dA.noalias() += dY * B;
        else if (ta && !tb) dA.noalias() += B * dY.transpose();
        else dA.noalias() += B.transpose() * dY.transpose();
      });
    }
    if (gr.needs_grad(b)) {
      T* pdb = gr.grad(b).data();
      parallel_for(Gb, [&](int64_t j) {
        typename Tensor<T>::MatMap dB(pdb + j * br * bc, br, bc);
        for (int64_t t = 0; t < group_div; ++t) {
          int64_t i = j * group_div + t;
          typename Tensor<T>::ConstMatMap A(pa2 + i * ar * ac, ar, ac);
          typename Tensor<T>::ConstMatMap dY(pdy + i * M * N, M, N);
          if (!ta && !tb) dB.noalias() += A.transpose() * dY;
          else if (ta && !tb) dB.noalias() += A * dY;
          else if (!ta && tb) dB.noalias() += dY.transpose() * A;
          else dB.noalias() += dY.transpose() * A.transpose();
        }
      });
    }
  });
  return v;
}

// --------------------------------------------------------------- reductions

// [G, P, C] -> [G, C], mean over P.
template <class T>
Var pool_mean_rows(Graph<T>& g, Var a) {
  const auto& av = g.value(a);
  check(av.rank() == 3, "pool_mean_rows expects rank-3");
  int64_t G = av.shape()[0], P = av.shape()[1], C = av.shape()[2];
  Tensor<T> out(Shape{G, C});
  const T* src = av.data();
  T* dst = out.data();
  T inv = T(1) / static_cast<T>(P);
  parallel_for(G, [&](int64_t i) {
    typename Tensor<T>::ConstMatMap X(src + i * P * C, P, C);
    typename Tensor<T>::VecMap(dst + i * C, C) = X.colwise().sum().transpose() * inv;
  });
  Var v = g.emit(std::move(out), {a});
  g.set_backward(v, [v, a, G, P, C, inv](Graph<T>& gr) {
    if (!gr.needs_grad(a)) return;
    const T* dy = gr.grad(v).data();
    T* da = gr.grad(a).data();
    parallel_for(G, [&](int64_t i) {
      for (int64_t p = 0; p < P; ++p)
        for (int64_t c = 0; c < C; ++c) da[(i * P + p) * C + c] += dy[i * C + c] * inv;
    });
  });
  return v;
}

// Scalar <- sum_i x[i] * w[i], w is a plain (non-node) constant.
template <class T>
Var weighted_sum(Graph<T>& g, Var a, Tensor<T> w) {
  const auto& av = g.value(a);
  check(av.numel() == w.numel(), "weighted_sum size mismatch");
  Tensor<T> out(Shape{1});
  out.at(0) = av.vec().dot(w.vec());
  Var v = g.emit(std::move(out), {a});
  g.set_backward(v, [v, a, w](Graph<T>& gr) {
    if (!gr.needs_grad(a)) return;
    T s = gr.grad(v).at(0);
    Tensor<T> da(gr.value(a).shape());
    da.vec() = w.vec() * s;
    gr.add_grad(a, da);
  });
  return v;
}

template <class T>
Var mean_all(Graph<T>& g, Var a) {
  Tensor<T> w = Tensor<T>::full(Shape{g.value(a).numel()}, T(1) / static_cast<T>(g.value(a).numel()));
  return weighted_sum(g, a, std::move(w));
}

// -------------------------------------------------------------- softmax

// softmax(x * inv_temp) along the last axis.
template <class T>
Var softmax_lastdim(Graph<T>& g, Var a, T inv_temp = T(1)) {
  const auto& av = g.value(a);
  int64_t K = av.shape()[av.rank() - 1];
  int64_t R = av.numel() / K;
  Tensor<T> out(av.shape());
  const T* src = av.data();
  T* dst = out.data();
  parallel_for(R, [&](int64_t r) {
    const T* x = src + r * K;
    T* y = dst + r * K;
    T mx = x[0];
    for (int64_t k = 1; k < K; ++k) mx = std::max(mx, x[k]);
    T sum = T(0);
    for (int64_t k = 0; k < K; ++k) {
      y[k] = std::exp((x[k] - mx) * inv_temp);
      sum += y[k];
    }
    T inv = T(1) / sum;
    for (int64_t k = 0; k < K; ++k) y[k] *= inv;
  });
  Var v = g.emit(std::move(out), {a});
  g.set_backward(v, [v, a, R, K, inv_temp](Graph<T>& gr) {
    if (!gr.needs_grad(a)) return;
    const T* y = gr.value(v).data();
    const T* dy = gr.grad(v).data();
    T* dx = gr.grad(a).data();
    parallel_for(R, [&](int64_t r) {
      const T* yr = y + r * K;
      const T* dyr = dy + r * K;
      T* dxr = dx + r * K;
      T dot = T(0);
      for (int64_t k = 0; k < K; ++k) dot += yr[k] * dyr[k];
      for (int64_t k = 0; k < K; ++k) dxr[k] += inv_temp * yr[k] * (dyr[k] - dot);
    });
  });
  return v;
}

}  // namespace mosaic::nn
