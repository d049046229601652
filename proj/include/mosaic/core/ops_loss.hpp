#pragma once

#include <cmath>
#include <vector>

#include "mosaic/core/graph.hpp"
#include "mosaic/core/parallel.hpp"

namespace mosaic::nn {

// ----------------------------------------------------------- stable scalars

template <class T>
T stable_softplus(T x) {
  if (x > T(30)) return x;
  if (x < T(-30)) return std::exp(x);
  return std::log1p(std::exp(x));
}

template <class T>
T log_sigmoid(T x) {
  return -stable_softplus(-x);
}

template <class T>
T sigmoid(T x) {
  if (x >= T(0)) {
    T e = std::exp(-x);
    return T(1) / (T(1) + e);
  }
  T e = std::exp(x);
  return e / (T(1) + e);
}

// log(1 - exp(-d)) for d > 0.
template <class T>
T log1mexp(T d) {
  if (d < T(0.6931471805599453)) return std::log(-std::expm1(-d));
  return std::log1p(-std::exp(-d));
}

// ------------------------------------------------------------ cross entropy

// Per-row negative log softmax probability of the target column.
// logits: [N, K]; targets: N indices. Returns [N].
template <class T>
Var ce_rows(Graph<T>& g, Var logits, std::vector<int> targets) {
  const auto& lv = g.value(logits);
  int64_t K = lv.shape()[lv.rank() - 1];
  int64_t N = lv.numel() / K;
  check(static_cast<int64_t>(targets.size()) == N, "ce_rows target count");
  Tensor<T> probs(Shape{N, K});
  Tensor<T> out(Shape{N});
  const T* xp = lv.data();
  T* pp = probs.data();
  T* op = out.data();
  parallel_for(N, [&](int64_t r) {
    const T* x = xp + r * K;
    T* p = pp + r * K;
    T mx = x[0];
    for (int64_t k = 1; k < K; ++k) mx = std::max(mx, x[k]);
    T sum = T(0);
    for (int64_t k = 0; k < K; ++k) {
      p[k] = std::exp(x[k] - mx);
      sum += p[k];
    }
    T inv = T(1) / sum;
    for (int64_t k = 0; k < K; ++k) p[k] *= inv;
    op[r] = std::log(sum) + mx - x[targets[r]];
  });
  Var v = g.emit(std::move(out), {logits});
  g.set_backward(v, [v, logits, probs, targets, N, K](Graph<T>& gr) {
    if (!gr.needs_grad(logits)) return;
    const T* dy = gr.grad(v).data();
    const T* pp2 = probs.data();
    T* dx = gr.grad(logits).data();
    parallel_for(N, [&](int64_t r) {
      T s = dy[r];
      const T* p = pp2 + r * K;
      T* d = dx + r * K;
      for (int64_t k = 0; k < K; ++k) d[k] += s * p[k];
      d[targets[r]] -= s;
    });
  });
  return v;
}

// ------------------------------------------------- discretized logistic mix

// Continuous action component in [-1, 1] -> bin index in {0..255},
// rounding half away from zero.
inline int action_to_bin(double a, int bins = 256) {
  double c = std::min(1.0, std::max(-1.0, a));
  double x = (c + 1.0) / 2.0 * (bins - 1);
  double r = x >= 0 ? std::floor(x + 0.5) : std::ceil(x - 0.5);
  int bi = static_cast<int>(r);
  return std::min(bins - 1, std::max(0, bi));
}

inline double bin_to_action(int bin, int bins = 256) {
  return 2.0 * static_cast<double>(bin) / (bins - 1) - 1.0;
}

// log P(bin | mu, s) of the discretized logistic: CDF difference over the
// unit bin with edge bins absorbing the tails.
template <class T>
T discretized_logistic_logp(int bin, T mu, T s, int bins = 256) {
  T hi = (static_cast<T>(bin) + T(0.5) - mu) / s;
  T lo = (static_cast<T>(bin) - T(0.5) - mu) / s;
  if (bin == 0) return log_sigmoid(hi);
  if (bin == bins - 1) return log_sigmoid(-lo);
  return log_sigmoid(hi) + log_sigmoid(-lo) + log1mexp(T(1) / s);
}

struct MixtureLayout {
  int dims;        // action dimensions
  int components;  // m
  // Per dim d the parameter row carries [alpha logits (m) | mu (m) | raw s (m)]
  // at offset d * 3m.
  int64_t width() const { return static_cast<int64_t>(dims) * 3 * components; }
};

// Negative log likelihood of the discretized logistic mixture, summed over
// action dimensions. params: [N, dims*3m]; bins: N*dims target bins.
// Scales are softplus(raw) + s_floor.
template <class T>
Var mixture_nll(Graph<T>& g, Var params, std::vector<int> bins, MixtureLayout lay,
                T s_floor = T(1e-2), int n_bins = 256) {
  const auto& pv = g.value(params);
  int64_t Wd = lay.width();
  check(pv.shape()[pv.rank() - 1] == Wd, "mixture_nll param width");
  int64_t N = pv.numel() / Wd;
  check(static_cast<int64_t>(bins.size()) == N * lay.dims, "mixture_nll target count");
  for (int b : bins) check(b >= 0 && b < n_bins, "mixture_nll: bin outside range");
  int m = lay.components;
  Tensor<T> out(Shape{N});
  const T* pp = pv.data();
  T* op = out.data();
  parallel_for(N, [&](int64_t n) {
    T total = T(0);
    for (int d = 0; d < lay.dims; ++d) {
      const T* row = pp + n * Wd + static_cast<int64_t>(d) * 3 * m;
      const T* al = row;
      const T* mus = row + m;
      const T* raw = row + 2 * m;
      int bin = bins[n * lay.dims + d];
      T amax = al[0];
      for (int i = 1; i < m; ++i) amax = std::max(amax, al[i]);
      T asum = T(0);
      for (int i = 0; i < m; ++i) asum += std::exp(al[i] - amax);
      T log_norm = std::log(asum) + amax;
      T lse = -std::numeric_limits<T>::infinity();
      for (int i = 0; i < m; ++i) {
        T s = stable_softplus(raw[i]) + s_floor;
        T li = (al[i] - log_norm) + discretized_logistic_logp(bin, mus[i], s, n_bins);
        lse = lse > li ? lse + std::log1p(std::exp(li - lse))
                       : li + std::log1p(std::exp(lse - li));
      }
      total -= lse;
    }
    op[n] = total;
  });
  Var v = g.emit(std::move(out), {params});
  g.set_backward(v, [v, params, bins, lay, s_floor, n_bins, N, Wd, m](Graph<T>& gr) {
    if (!gr.needs_grad(params)) return;
    const T* pp2 = gr.value(params).data();
    const T* dy = gr.grad(v).data();
    T* dp = gr.grad(params).data();
    parallel_for(N, [&](int64_t n) {
      T go = dy[n];
      for (int d = 0; d < lay.dims; ++d) {
        const T* row = pp2 + n * Wd + static_cast<int64_t>(d) * 3 * m;
        T* drow = dp + n * Wd + static_cast<int64_t>(d) * 3 * m;
        const T* al = row;
        const T* mus = row + m;
        const T* raw = row + 2 * m;
        int bin = bins[n * lay.dims + d];
        // Recompute the per-component joint log terms and their softmax.
        T amax = al[0];
        for (int i = 1; i < m; ++i) amax = std::max(amax, al[i]);
        T asum = T(0);
        for (int i = 0; i < m; ++i) asum += std::exp(al[i] - amax);
        T log_norm = std::log(asum) + amax;
        std::vector<T> ell(m), alpha(m), svals(m);
        T lmax = -std::numeric_limits<T>::infinity();
        for (int i = 0; i < m; ++i) {
          alpha[i] = std::exp(al[i] - log_norm);
          svals[i] = stable_softplus(raw[i]) + s_floor;
          ell[i] = (al[i] - log_norm) + discretized_logistic_logp(bin, mus[i], svals[i], n_bins);
          lmax = std::max(lmax, ell[i]);
        }
        T esum = T(0);
        for (int i = 0; i < m; ++i) esum += std::exp(ell[i] - lmax);
        for (int i = 0; i < m; ++i) {
          T w = std::exp(ell[i] - lmax) / esum;  // responsibility
          // d(-LSE)/d alpha_logit_j = alpha_j - w_j
          drow[i] += go * (alpha[i] - w);
          T s = svals[i];
          T hi = (static_cast<T>(bin) + T(0.5) - mus[i]) / s;
          T lo = (static_cast<T>(bin) - T(0.5) - mus[i]) / s;
          T dlogp_dmu, dlogp_ds;
          if (bin == 0) {
            dlogp_dmu = -sigmoid(-hi) / s;
            dlogp_ds = -sigmoid(-hi) * hi / s;
          } else if (bin == n_bins - 1) {
            dlogp_dmu = sigmoid(lo) / s;
            dlogp_ds = sigmoid(lo) * lo / s;
          } else {
            dlogp_dmu = (sigmoid(lo) - sigmoid(-hi)) / s;
            T dinv = T(1) / s;  // d = hi - lo
            T tail = std::exp(-dinv) / (T(1) - std::exp(-dinv));
            dlogp_ds = -hi * sigmoid(-hi) / s + lo * sigmoid(lo) / s - tail * (dinv / s);
          }
          drow[m + i] += go * (-w) * dlogp_dmu;
          drow[2 * m + i] += go * (-w) * dlogp_ds * sigmoid(raw[i]);
        }
      }
    });
  });
  return v;
}

// ------------------------------------------------------------- l2 normalize

// Row-wise x / (||x|| + eps).
template <class T>
Var l2_normalize_rows(Graph<T>& g, Var x, T eps = T(1e-8)) {
  const auto& xv = g.value(x);
  int64_t D = xv.shape()[xv.rank() - 1];
  int64_t N = xv.numel() / D;
  Tensor<T> out(xv.shape());
  Tensor<T> norms(Shape{N});
  const T* xp = xv.data();
  T* op = out.data();
  T* np = norms.data();
  parallel_for(N, [&](int64_t r) {
    const T* row = xp + r * D;
    T s = T(0);
    for (int64_t i = 0; i < D; ++i) s += row[i] * row[i];
    T n0 = std::sqrt(s);
    np[r] = n0;
    T inv = T(1) / (n0 + eps);
    T* o = op + r * D;
    for (int64_t i = 0; i < D; ++i) o[i] = row[i] * inv;
  });
  Var v = g.emit(std::move(out), {x});
  g.set_backward(v, [v, x, norms, eps, N, D](Graph<T>& gr) {
    if (!gr.needs_grad(x)) return;
    const T* xp2 = gr.value(x).data();
    const T* dy = gr.grad(v).data();
    const T* np2 = norms.data();
    T* dx = gr.grad(x).data();
    parallel_for(N, [&](int64_t r) {
      const T* row = xp2 + r * D;
      const T* d = dy + r * D;
      T* o = dx + r * D;
      T n0 = std::max(np2[r], T(1e-30));
      T n = np2[r] + eps;
      T dot = T(0);
      for (int64_t i = 0; i < D; ++i) dot += d[i] * row[i];
      T coef = dot / (n * n * n0);
      T inv = T(1) / n;
      for (int64_t i = 0; i < D; ++i) o[i] += d[i] * inv - row[i] * coef;
    });
  });
  return v;
}

}  // namespace mosaic::nn
