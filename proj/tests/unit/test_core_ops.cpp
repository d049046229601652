#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "mosaic/core/ops.hpp"
#include "test_support.hpp"

using namespace mosaic;
using namespace mosaic::nn;
using mosaic::testing::fd_check;

namespace {

// Straight six-loop convolution, kept independent of the im2col path.
Tensor<double> conv2d_naive(const Tensor<double>& x, const Tensor<double>& w,
                            const Tensor<double>& b, int64_t stride, int64_t pad) {
  int64_t N = x.shape()[0], H = x.shape()[1], W = x.shape()[2], Cin = x.shape()[3];
  int64_t KH = w.shape()[0], KW = w.shape()[1], Cout = w.shape()[3];
  int64_t Ho = (H + 2 * pad - KH) / stride + 1;
  int64_t Wo = (W + 2 * pad - KW) / stride + 1;
  Tensor<double> out(Shape{N, Ho, Wo, Cout});
  for (int64_t n = 0; n < N; ++n)
    for (int64_t oy = 0; oy < Ho; ++oy)
      for (int64_t ox = 0; ox < Wo; ++ox)
        for (int64_t co = 0; co < Cout; ++co) {
          double acc = b.defined() ? b.at(co) : 0.0;
          for (int64_t ky = 0; ky < KH; ++ky)
            for (int64_t kx = 0; kx < KW; ++kx) {
              int64_t iy = oy * stride + ky - pad;
              int64_t ix = ox * stride + kx - pad;
              if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
              for (int64_t ci = 0; ci < Cin; ++ci)
                acc += x.at(((n * H + iy) * W + ix) * Cin + ci) *
                       w.at(((ky * KW + kx) * Cin + ci) * Cout + co);
            }
          out.at(((n * Ho + oy) * Wo + ox) * Cout + co) = acc;
        }
  return out;
}

}  // namespace

TEST_CASE("elementwise ops: values and gradients", "[ops]") {
  Rng rng(7);
  std::vector<Tensor<double>> leaves = {Tensor<double>::randn(Shape{3, 4}, rng),
                                        Tensor<double>::randn(Shape{3, 4}, rng)};
  fd_check(leaves, [](Graph<double>& g, const std::vector<Var>& v) {
    Var s = add(g, v[0], v[1]);
    s = mul(g, s, sub(g, v[0], v[1]));
    s = scale(g, s, 0.7);
    s = tanh_op(g, s);
    s = sigmoid_op(g, s);
    return mean_all(g, s);
  });
}

TEST_CASE("relu gradient masks negatives", "[ops]") {
  Rng rng(9);
  std::vector<Tensor<double>> leaves = {Tensor<double>::randn(Shape{5, 3}, rng)};
  // keep probes away from the kink
  for (int64_t i = 0; i < leaves[0].numel(); ++i)
    if (std::abs(leaves[0].at(i)) < 1e-3) leaves[0].at(i) = 0.5;
  fd_check(leaves, [](Graph<double>& g, const std::vector<Var>& v) {
    return mean_all(g, relu(g, v[0]));
  });
}

TEST_CASE("add_rowvec broadcasts bias", "[ops]") {
  Rng rng(11);
  std::vector<Tensor<double>> leaves = {Tensor<double>::randn(Shape{4, 3}, rng),
                                        Tensor<double>::randn(Shape{3}, rng)};
  fd_check(leaves, [](Graph<double>& g, const std::vector<Var>& v) {
    return mean_all(g, add_rowvec(g, v[0], v[1]));
  });
}

TEST_CASE("reshape, slice, concat round values and grads", "[ops]") {
  Rng rng(13);
  std::vector<Tensor<double>> leaves = {Tensor<double>::randn(Shape{2, 3, 4}, rng),
                                        Tensor<double>::randn(Shape{2, 2, 4}, rng)};
  fd_check(leaves, [](Graph<double>& g, const std::vector<Var>& v) {
    Var c = concat_axis(g, v[0], v[1], 1);            // [2,5,4]
    Var s = slice_axis(g, c, 1, 1, 4);                // [2,3,4]
    Var r = reshape(g, s, Shape{6, 4});
    Var c2 = concat_axis(g, r, r, 1);                 // [6,8]
    return mean_all(g, c2);
  });

  Graph<double> g;
  Var a = g.leaf(Tensor<double>::from_vector(Shape{1, 2, 2}, {1, 2, 3, 4}));
  Var b = g.leaf(Tensor<double>::from_vector(Shape{1, 1, 2}, {5, 6}));
  Var c = concat_axis(g, a, b, 1);
  REQUIRE(g.value(c).shape() == Shape{1, 3, 2});
  REQUIRE(g.value(c).at(4) == 5);
  Var s = slice_axis(g, c, 2, 1, 2);
  REQUIRE(g.value(s).at(0) == 2);
  REQUIRE(g.value(s).at(2) == 6);
}

TEST_CASE("head regrouping is a permutation and inverts", "[ops]") {
  Rng rng(17);
  int64_t B = 2, T = 3, P = 2, J = 2, dk = 2;
  Tensor<double> x = Tensor<double>::randn(Shape{B, T, P, J * dk}, rng);
  Graph<double> g;
  Var xv = g.leaf(x);
  Var grp = regroup_heads(g, xv, B, T, P, J);
  REQUIRE(g.value(grp).shape() == Shape{B * J * T, P, dk});
  // (b, t, p, j*dk + c) -> group (b*J + j)*T + t
  for (int64_t b = 0; b < B; ++b)
    for (int64_t t = 0; t < T; ++t)
      for (int64_t p = 0; p < P; ++p)
        for (int64_t j = 0; j < J; ++j)
          for (int64_t c = 0; c < dk; ++c) {
            double src = x.at(((b * T + t) * P + p) * (J * dk) + j * dk + c);
            double dst = g.value(grp).at((((b * J + j) * T + t) * P + p) * dk + c);
            REQUIRE(src == dst);
          }
  Var back = merge_heads(g, grp, B, T, P, J);
  REQUIRE(g.value(back).shape() == Shape{B, T, P, J * dk});
  for (int64_t i = 0; i < x.numel(); ++i) REQUIRE(g.value(back).at(i) == x.at(i));

  std::vector<Tensor<double>> leaves = {x};
  fd_check(leaves, [=](Graph<double>& gr, const std::vector<Var>& v) {
    Var h = regroup_heads(gr, v[0], B, T, P, J);
    Var sq = mul(gr, h, h);
    Var mh = merge_heads(gr, sq, B, T, P, J);
    return mean_all(gr, mh);
  });
}

TEST_CASE("matmul all transpose combinations", "[ops]") {
  Rng rng(19);
  for (bool ta : {false, true})
    for (bool tb : {false, true}) {
      Shape sa = ta ? Shape{4, 3} : Shape{3, 4};
      Shape sb = tb ? Shape{2, 4} : Shape{4, 2};
      std::vector<Tensor<double>> leaves = {Tensor<double>::randn(sa, rng),
                                            Tensor<double>::randn(sb, rng)};
      fd_check(leaves, [ta, tb](Graph<double>& g, const std::vector<Var>& v) {
        return mean_all(g, matmul(g, v[0], v[1], ta, tb));
      });
    }
}

TEST_CASE("bmm with shared rhs groups", "[ops]") {
  Rng rng(23);
  int64_t Gb = 2, div = 3;
  std::vector<Tensor<double>> leaves = {Tensor<double>::randn(Shape{Gb * div, 2, 3}, rng),
                                        Tensor<double>::randn(Shape{Gb, 3, 2}, rng)};
  fd_check(leaves, [div](Graph<double>& g, const std::vector<Var>& v) {
    return mean_all(g, bmm(g, v[0], v[1], false, false, div));
  });
  // transposed flavors
  std::vector<Tensor<double>> l2 = {Tensor<double>::randn(Shape{4, 3, 2}, rng),
                                    Tensor<double>::randn(Shape{4, 5, 3}, rng)};
  fd_check(l2, [](Graph<double>& g, const std::vector<Var>& v) {
    return mean_all(g, bmm(g, v[0], v[1], true, true));
  });
}

TEST_CASE("pool_mean_rows and weighted_sum", "[ops]") {
  Rng rng(29);
  std::vector<Tensor<double>> leaves = {Tensor<double>::randn(Shape{3, 4, 2}, rng)};
  fd_check(leaves, [](Graph<double>& g, const std::vector<Var>& v) {
    Var p = pool_mean_rows(g, v[0]);
    Tensor<double> w = Tensor<double>::from_vector(Shape{6}, {0.1, 0.2, 0.3, 0.1, 0.2, 0.1});
    return weighted_sum(g, p, w);
  });
}

TEST_CASE("softmax rows: temperature, values, grad", "[ops]") {
  Graph<double> g;
  Var x = g.leaf(Tensor<double>::from_vector(Shape{1, 2}, {16.0, 0.0}));
  Var y = softmax_lastdim(g, x, 1.0 / 16.0);
  double e = std::exp(1.0);
  REQUIRE(g.value(y).at(0) == Catch::Approx(e / (1 + e)).epsilon(1e-12));
  REQUIRE(g.value(y).at(1) == Catch::Approx(1 / (1 + e)).epsilon(1e-12));

  // rows sum to one, nonnegative
  Rng rng(31);
  Tensor<double> z = Tensor<double>::randn(Shape{5, 7}, rng, 3.0);
  Var zv = g.leaf(z);
  Var sy = softmax_lastdim(g, zv, 0.5);
  for (int64_t r = 0; r < 5; ++r) {
    double s = 0;
    for (int64_t k = 0; k < 7; ++k) {
      double p = g.value(sy).at(r * 7 + k);
      REQUIRE(p >= 0);
      s += p;
    }
    REQUIRE(s == Catch::Approx(1.0).epsilon(1e-9));
  }

  std::vector<Tensor<double>> leaves = {Tensor<double>::randn(Shape{3, 4}, rng)};
  fd_check(leaves, [](Graph<double>& gg, const std::vector<Var>& v) {
    Var sm = softmax_lastdim(gg, v[0], 2.0);
    Tensor<double> w(Shape{12});
    for (int i = 0; i < 12; ++i) w.at(i) = 0.05 * (i + 1);
    return weighted_sum(gg, sm, w);
  });
}

TEST_CASE("conv2d matches naive convolution and finite differences", "[ops][conv]") {
  Rng rng(37);
  for (auto [stride, pad, kh] : std::vector<std::tuple<int64_t, int64_t, int64_t>>{
           {1, 1, 3}, {2, 1, 3}, {2, 0, 1}}) {
    Tensor<double> x = Tensor<double>::randn(Shape{2, 6, 8, 3}, rng);
    Tensor<double> w = Tensor<double>::randn(Shape{kh, kh, 3, 4}, rng, 0.5);
    Tensor<double> b = Tensor<double>::randn(Shape{4}, rng, 0.2);
    Graph<double> g;
    Var out = conv2d(g, g.leaf(x), g.leaf(w), g.leaf(b), stride, pad);
    Tensor<double> ref = conv2d_naive(x, w, b, stride, pad);
    REQUIRE(g.value(out).shape() == ref.shape());
    for (int64_t i = 0; i < ref.numel(); ++i)
      REQUIRE(g.value(out).at(i) == Catch::Approx(ref.at(i)).margin(1e-10));

    std::vector<Tensor<double>> leaves = {x, w, b};
    fd_check(leaves, [stride, pad](Graph<double>& gg, const std::vector<Var>& v) {
      return mean_all(gg, conv2d(gg, v[0], v[1], v[2], stride, pad));
    }, 1e-5, 1e-5);
  }
}

TEST_CASE("groupnorm statistics and gradients", "[ops]") {
  Rng rng(41);
  Tensor<double> x = Tensor<double>::randn(Shape{2, 5, 8}, rng, 2.0);
  Tensor<double> gamma = Tensor<double>::full(Shape{8}, 1.0);
  Tensor<double> beta = Tensor<double>::zeros(Shape{8});
  Graph<double> g;
  Var y = groupnorm(g, g.leaf(x), g.leaf(gamma), g.leaf(beta), 4);
  // each (sample, group) slab is standardized
  for (int64_t n = 0; n < 2; ++n)
    for (int64_t gi = 0; gi < 4; ++gi) {
      double mu = 0, var = 0;
      for (int64_t s = 0; s < 5; ++s)
        for (int64_t c = 0; c < 2; ++c) mu += g.value(y).at((n * 5 + s) * 8 + gi * 2 + c);
      mu /= 10;
      for (int64_t s = 0; s < 5; ++s)
        for (int64_t c = 0; c < 2; ++c) {
          double d = g.value(y).at((n * 5 + s) * 8 + gi * 2 + c) - mu;
          var += d * d;
        }
      var /= 10;
      REQUIRE(mu == Catch::Approx(0.0).margin(1e-10));
      REQUIRE(var == Catch::Approx(1.0).epsilon(1e-3));
    }

  std::vector<Tensor<double>> leaves = {x, Tensor<double>::randn(Shape{8}, rng, 0.5),
                                        Tensor<double>::randn(Shape{8}, rng, 0.5)};
  fd_check(leaves, [](Graph<double>& gg, const std::vector<Var>& v) {
    Var yy = groupnorm(gg, v[0], v[1], v[2], 4);
    Tensor<double> w(Shape{80});
    for (int i = 0; i < 80; ++i) w.at(i) = std::sin(0.3 * i) * 0.1;
    return weighted_sum(gg, yy, w);
  }, 1e-5, 1e-4);
}

TEST_CASE("ce_rows equals manual cross entropy", "[ops]") {
  Graph<double> g;
  Var x = g.leaf(Tensor<double>::from_vector(Shape{2, 3}, {1.0, 2.0, 3.0, 0.0, 0.0, 0.0}));
  Var l = ce_rows(g, x, {2, 1});
  double lse0 = std::log(std::exp(1.0) + std::exp(2.0) + std::exp(3.0));
  REQUIRE(g.value(l).at(0) == Catch::Approx(lse0 - 3.0).epsilon(1e-12));
  REQUIRE(g.value(l).at(1) == Catch::Approx(std::log(3.0)).epsilon(1e-12));

  Rng rng(43);
  std::vector<Tensor<double>> leaves = {Tensor<double>::randn(Shape{4, 5}, rng, 2.0)};
  fd_check(leaves, [](Graph<double>& gg, const std::vector<Var>& v) {
    Var ls = ce_rows(gg, v[0], {0, 3, 1, 4});
    return mean_all(gg, ls);
  });
}

TEST_CASE("l2_normalize_rows: unit rows and gradient", "[ops]") {
  Rng rng(47);
  Tensor<double> x = Tensor<double>::randn(Shape{3, 4}, rng, 2.0);
  Graph<double> g;
  Var y = l2_normalize_rows(g, g.leaf(x));
  for (int64_t r = 0; r < 3; ++r) {
    double s = 0;
    for (int64_t c = 0; c < 4; ++c) s += g.value(y).at(r * 4 + c) * g.value(y).at(r * 4 + c);
    REQUIRE(std::sqrt(s) == Catch::Approx(1.0).epsilon(1e-6));
  }
  std::vector<Tensor<double>> leaves = {x};
  fd_check(leaves, [](Graph<double>& gg, const std::vector<Var>& v) {
    Var yy = l2_normalize_rows(gg, v[0]);
    Tensor<double> w(Shape{12});
    for (int i = 0; i < 12; ++i) w.at(i) = 0.1 * (i % 3) + 0.05;
    return weighted_sum(gg, yy, w);
  });
}

TEST_CASE("discretized logistic: frozen scalar values", "[ops][mixture]") {
  // m=1, mu=128, s=1, a=128: P = sigmoid(0.5) - sigmoid(-0.5)
  double p = std::exp(discretized_logistic_logp<double>(128, 128.0, 1.0));
  double expect = 1.0 / (1.0 + std::exp(-0.5)) - 1.0 / (1.0 + std::exp(0.5));
  REQUIRE(p == Catch::Approx(expect).epsilon(1e-12));
  REQUIRE(p == Catch::Approx(0.24491866240370913).epsilon(1e-10));
  REQUIRE(-std::log(p) == Catch::Approx(1.406829113747295).epsilon(1e-10));
  REQUIRE(-std::log(p) == Catch::Approx(1.4069).margin(1e-4));

  // lower edge absorbs the tail: a=0, mu=0, s=1 -> P = sigmoid(0.5)
  double p0 = std::exp(discretized_logistic_logp<double>(0, 0.0, 1.0));
  REQUIRE(p0 == Catch::Approx(0.6224593312018546).epsilon(1e-12));

  // upper edge
  double p255 = std::exp(discretized_logistic_logp<double>(255, 255.0, 1.0));
  REQUIRE(p255 == Catch::Approx(1.0 - 1.0 / (1.0 + std::exp(0.5))).epsilon(1e-12));
}

TEST_CASE("discretized logistic: mass conservation across bins", "[ops][mixture]") {
  Rng rng(53);
  for (int trial = 0; trial < 200; ++trial) {
    double mu = rng.uniform(-50.0, 305.0);
    double s = rng.uniform(0.01, 50.0);
    double sum = 0;
    for (int b = 0; b < 256; ++b) sum += std::exp(discretized_logistic_logp<double>(b, mu, s));
    REQUIRE(std::abs(sum - 1.0) < 1e-9);
  }
}

TEST_CASE("mixture_nll matches manual mixture and finite differences", "[ops][mixture]") {
  // Hand-evaluated two-component mixture on one dim.
  Graph<double> g;
  MixtureLayout lay{1, 2};
  // alpha logits, mus, raw scales
  Tensor<double> params = Tensor<double>::from_vector(Shape{1, 6}, {0.3, -0.2, 100.0, 140.0, 1.0, 0.5});
  Var l = mixture_nll(g, g.leaf(params), {120}, lay);
  double a0 = std::exp(0.3) / (std::exp(0.3) + std::exp(-0.2));
  double a1 = 1 - a0;
  double s0 = std::log1p(std::exp(1.0)) + 0.01;
  double s1 = std::log1p(std::exp(0.5)) + 0.01;
  auto P = [](int bin, double mu, double s) {
    auto sg = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
    return sg((bin + 0.5 - mu) / s) - sg((bin - 0.5 - mu) / s);
  };
  double expect = -std::log(a0 * P(120, 100.0, s0) + a1 * P(120, 140.0, s1));
  REQUIRE(g.value(l).at(0) == Catch::Approx(expect).epsilon(1e-9));

  // concentration limit: with mu on the bin and shrinking s the loss drops
  double prev = 1e9;
  for (double raw : {3.0, 1.0, -1.0, -3.0}) {
    Graph<double> g2;
    Tensor<double> p2 = Tensor<double>::from_vector(Shape{1, 3}, {0.0, 77.0, raw});
    Var l2 = mixture_nll(g2, g2.leaf(p2), {77}, MixtureLayout{1, 1});
    double v = g2.value(l2).at(0);
    REQUIRE(v > 0);
    REQUIRE(v < prev);
    prev = v;
  }

  Rng rng(59);
  MixtureLayout lay3{3, 2};
  std::vector<Tensor<double>> leaves = {Tensor<double>::randn(Shape{2, lay3.width()}, rng, 1.0)};
  // push mus into plausible bin range so probabilities are not degenerate
  for (int64_t n = 0; n < 2; ++n)
    for (int d = 0; d < 3; ++d)
      for (int i = 0; i < 2; ++i) {
        auto& t = leaves[0];
        t.at(n * lay3.width() + d * 6 + 2 + i) = 120 + 30 * t.at(n * lay3.width() + d * 6 + 2 + i);
        t.at(n * lay3.width() + d * 6 + 4 + i) = 1.5 + 0.3 * t.at(n * lay3.width() + d * 6 + 4 + i);
      }
  std::vector<int> bins = {100, 128, 255, 0, 130, 77};
  fd_check(leaves, [lay3, bins](Graph<double>& gg, const std::vector<Var>& v) {
    return mean_all(gg, mixture_nll(gg, v[0], bins, lay3));
  }, 1e-5, 1e-4, 1e-6);
}

TEST_CASE("action/bin mapping: round half away from zero", "[ops][mixture]") {
  REQUIRE(action_to_bin(-1.0) == 0);
  REQUIRE(action_to_bin(1.0) == 255);
  REQUIRE(action_to_bin(0.0) == 128);  // 127.5 rounds away from zero
  REQUIRE(action_to_bin(-1.5) == 0);   // clipped before mapping
  REQUIRE(action_to_bin(1.5) == 255);
  REQUIRE(bin_to_action(255) == Catch::Approx(1.0));
  REQUIRE(bin_to_action(0) == Catch::Approx(-1.0));
  // round-trip within half a bin
  for (double a : {-0.77, -0.1, 0.33, 0.92}) {
    double back = bin_to_action(action_to_bin(a));
    REQUIRE(std::abs(back - a) <= 1.0 / 255 + 1e-12);
  }
}

TEST_CASE("graph: no-recording pass attaches no gradient state", "[graph]") {
  Graph<double> g(false);
  Var a = g.leaf(Tensor<double>::full(Shape{2, 2}, 1.5), true);
  Var b = mul(g, a, a);
  REQUIRE_FALSE(g.needs_grad(a));
  REQUIRE_FALSE(g.needs_grad(b));
  REQUIRE(g.value(b).at(0) == Catch::Approx(2.25));
}
