#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "oracles.hpp"
#include "xraydet/attention.hpp"

using namespace xraydet;

namespace {

double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

Tensor grid(std::size_t h, std::size_t w, std::size_t d, std::uint64_t seed) {
  return UniformSource(seed).tensor({h, w, d}, -1, 1);
}

}  // namespace

// ---- CBAM ---------------------------------------------------------------

TEST(GlobalPool, Reductions) {
  const Tensor f({1, 2, 2}, std::vector<double>{1, 2, 3, 4});
  EXPECT_EQ(global_pool(f, PoolKind::kAvg)[0], 2.5);
  EXPECT_EQ(global_pool(f, PoolKind::kMax)[0], 4.0);
  const Tensor c({3, 2, 2}, 7.0);
  for (double v : global_pool(c, PoolKind::kAvg)) EXPECT_EQ(v, 7.0);
  for (double v : global_pool(c, PoolKind::kMax)) EXPECT_EQ(v, 7.0);
  const Tensor one({2, 1, 1}, std::vector<double>{-3, 5});
  EXPECT_EQ(global_pool(one, PoolKind::kAvg), global_pool(one, PoolKind::kMax));
}

TEST(ChannelAttention, ZeroWeightsGiveHalf) {
  const auto w = CbamWeights::zeros(4, 2);
  for (double v : channel_attention(grid(4, 3, 3, 1).reshaped({4, 3, 3}), w)) EXPECT_EQ(v, 0.5);
}

TEST(ChannelAttention, HandEvaluatedFixture) {
  auto w = CbamWeights::zeros(2, 2);
  w.w0 = Tensor({1, 2}, std::vector<double>{1, -1});
  w.w1 = Tensor({2, 1}, std::vector<double>{1, 0.5});
  Tensor f({2, 2, 2});
  for (std::size_t i = 0; i < 4; ++i) {
    f[i] = 2.0;
    f[4 + i] = 1.0;
  }
  const auto mc = channel_attention(f, w);
  EXPECT_NEAR(mc[0], sigmoid(2.0), 1e-15);
  EXPECT_NEAR(mc[1], sigmoid(1.0), 1e-15);
  EXPECT_NEAR(mc[0], 0.880797, 1e-6);
  EXPECT_NEAR(mc[1], 0.731059, 1e-6);

  // Composed with a zero spatial kernel the spatial gate is 0.5.
  const Tensor out = cbam_forward(f, w);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_NEAR(out[i], 2.0 * mc[0] * 0.5, 1e-15);
    EXPECT_NEAR(out[4 + i], 1.0 * mc[1] * 0.5, 1e-15);
  }
}

TEST(SpatialAttention, ZeroKernelAndCenterTap) {
  const Tensor f = UniformSource(2).tensor({3, 4, 5}, -1, 1);
  const Tensor ms = spatial_attention(f, CbamWeights::zeros(3, 1));
  for (double v : ms.data()) EXPECT_EQ(v, 0.5);

  auto w = CbamWeights::zeros(2, 1);
  w.spatial_kernel.at(0, 3, 3) = 0.7;  // average plane
  w.spatial_kernel.at(1, 3, 3) = -0.2;  // max plane
  const Tensor c({2, 1, 1}, 1.5);
  EXPECT_NEAR(spatial_attention(c, w)[0], sigmoid(0.7 * 1.5 - 0.2 * 1.5), 1e-15);
}

TEST(Cbam, GatesStayInsideOpenUnitInterval) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto w = CbamWeights::random(4, 2, seed);
    const Tensor f = UniformSource(seed + 100).tensor({4, 5, 3}, -3, 3);
    for (double v : channel_attention(f, w)) {
      EXPECT_GT(v, 0.0);
      EXPECT_LT(v, 1.0);
    }
    const Tensor ms = spatial_attention(f, w);
    for (double v : ms.data()) {
      EXPECT_GT(v, 0.0);
      EXPECT_LT(v, 1.0);
    }
  }
}

TEST(Cbam, ZeroInputGivesZeroOutput) {
  const Tensor out = cbam_forward(Tensor({4, 3, 3}), CbamWeights::random(4, 2, 1));
  for (double v : out.data()) EXPECT_EQ(v, 0.0);
}

TEST(Cbam, UnitGatesAreIdentity) {
  const Tensor f = UniformSource(3).tensor({2, 3, 3}, -1, 1);
  const std::vector<double> ones(2, 1.0);
  EXPECT_EQ(apply_spatial_gate(apply_channel_gate(f, ones), Tensor({3, 3}, 1.0)), f);
}

TEST(Cbam, ShapeErrors) {
  EXPECT_THROW(CbamWeights::random(4, 3, 0), std::invalid_argument);
  const auto w = CbamWeights::random(4, 2, 0);
  EXPECT_THROW(cbam_forward(Tensor({3, 2, 2}), w), std::invalid_argument);
  EXPECT_THROW(cbam_backward(Tensor({4, 2, 2}), w, Tensor({4, 2, 3})), std::invalid_argument);
}

// ---- windows and shifts --------------------------------------------------

TEST(Windows, PartitionCountsAndOrder) {
  const Tensor x = grid(4, 4, 3, 5);
  const Tensor win = window_partition(x, 2);
  EXPECT_EQ(win.shape(), (std::vector<std::size_t>{4, 4, 3}));
  // Window 1 is the top-right block; its third token is (row 1, col 2).
  for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(win.at(1, 2, c), x.at(1, 2, c));
  const Tensor small = grid(2, 2, 1, 6);
  const Tensor one = window_partition(small, 2);
  for (std::size_t t = 0; t < 4; ++t) EXPECT_EQ(one[t], small[t]);
  EXPECT_THROW(window_partition(x, 3), std::invalid_argument);
}

TEST(Windows, MergeInvertsPartition) {
  const Tensor x = grid(6, 4, 2, 8);
  EXPECT_EQ(window_merge(window_partition(x, 2), 6, 4, 2), x);
}

TEST(Shift, IndexEnumerationAndInverse) {
  const Tensor x({2, 2, 1}, std::vector<double>{1, 2, 3, 4});  // [a b; c d]
  EXPECT_EQ(cyclic_shift(x, 1), Tensor({2, 2, 1}, std::vector<double>{4, 3, 2, 1}));
  EXPECT_EQ(cyclic_shift(x, 0), x);
  const Tensor y = grid(8, 6, 3, 9);
  for (std::size_t s = 0; s < 6; ++s) EXPECT_EQ(inverse_shift(cyclic_shift(y, s), s), y);
  EXPECT_THROW(cyclic_shift(y, 6), std::invalid_argument);
}

TEST(ShiftMask, ZeroOrNegativeInfinity) {
  const Tensor m = shifted_window_mask(4, 4, 2, 1);
  EXPECT_EQ(m.shape(), (std::vector<std::size_t>{4, 4, 4}));
  for (double v : m.data()) EXPECT_TRUE(v == 0.0 || v == -std::numeric_limits<double>::infinity());
  // Top-left window never straddles the wrap seam.
  for (std::size_t i = 0; i < 16; ++i) EXPECT_EQ(m[i], 0.0);
  const Tensor unshifted = shifted_window_mask(4, 4, 2, 0);
  for (double v : unshifted.data()) EXPECT_EQ(v, 0.0);
}

// ---- attention -----------------------------------------------------------

TEST(Softmax, SingleTokenReturnsValue) {
  const Tensor q({1, 3}, std::vector<double>{0.3, -1, 2});
  const Tensor v({1, 3}, std::vector<double>{5, 6, 7});
  EXPECT_EQ(scaled_softmax_attention(q, q, v).output, v);
}

TEST(Softmax, IdenticalKeysGiveUniformWeights) {
  const Tensor q = UniformSource(1).tensor({4, 2}, -1, 1);
  const Tensor k({4, 2}, 0.25);
  const Tensor v = UniformSource(2).tensor({4, 2}, -1, 1);
  const auto r = scaled_softmax_attention(q, k, v);
  for (double w : r.weights.data()) EXPECT_NEAR(w, 0.25, 1e-15);
}

TEST(Softmax, MaskedPairsGetExactlyZero) {
  const double ninf = -std::numeric_limits<double>::infinity();
  const Tensor q = UniformSource(3).tensor({3, 2}, -1, 1);
  Tensor mask({3, 3});
  mask.at(0, 2) = ninf;
  mask.at(2, 0) = ninf;
  const auto r = scaled_softmax_attention(q, q, q, mask);
  EXPECT_EQ(r.weights.at(0, 2), 0.0);
  EXPECT_EQ(r.weights.at(2, 0), 0.0);
  for (std::size_t i = 0; i < 3; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < 3; ++j) sum += r.weights.at(i, j);
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
  Tensor all({3, 3}, ninf);
  EXPECT_THROW(scaled_softmax_attention(q, q, q, all), std::invalid_argument);
}

// ---- swin block ----------------------------------------------------------

TEST(SwinBlock, ZeroProjectionsAreResidualIdentity) {
  auto w = WindowAttnWeights::zeros(4, 2, 1, 1);
  w.wq = UniformSource(1).tensor({4, 4}, -0.5, 0.5);
  w.mlp_in = UniformSource(2).tensor({16, 4}, -0.5, 0.5);
  const Tensor x = grid(4, 4, 4, 3);
  EXPECT_EQ(swin_block_forward(x, w), x);
}

TEST(SwinBlock, ShiftIsInvisibleOnConstantInput) {
  const Tensor x({4, 4, 4}, 0.3);
  auto w0 = WindowAttnWeights::random(4, 2, 0, 2, 7);
  auto w1 = w0;
  w1.shift = 1;
  EXPECT_LT(max_abs_diff(swin_block_forward(x, w0), swin_block_forward(x, w1)), 1e-14);
}

TEST(SwinBlock, MatchesDenseReferenceOnSmallFixture) {
  const Tensor x = UniformSource(12).tensor({4, 4, 2}, -0.5, 0.5);
  for (std::size_t shift : {0u, 1u}) {
    const auto w = WindowAttnWeights::random(2, 2, shift, 1, 13);
    EXPECT_LT(max_abs_diff(swin_block_forward(x, w), oracle::dense_swin_block(x, w)), 1e-10);
  }
}

TEST(SwinBlock, MatchesDenseReferenceWithHeadsAndWideWindows) {
  std::uint64_t seed = 100;
  for (std::size_t m : {2u, 4u}) {
    for (std::size_t heads : {1u, 2u, 4u}) {
      const Tensor x = UniformSource(seed++).tensor({8, 8, 4}, -1, 1);
      const auto w = WindowAttnWeights::random(4, m, m / 2, heads, seed++);
      EXPECT_LT(max_abs_diff(swin_block_forward(x, w), oracle::dense_swin_block(x, w)), 1e-10);
    }
  }
}

TEST(ShiftMask, CrossRegionWeightsAreExactlyZero) {
  const std::size_t H = 4, W = 6, M = 2, s = 1, d = 3;
  const Tensor x = UniformSource(5).tensor({H, W, d}, -1, 1);
  const Tensor windows = window_partition(cyclic_shift(x, s), M);
  const Tensor mask = shifted_window_mask(H, W, M, s);
  const std::size_t n = M * M, per_row = W / M;
  for (std::size_t wi = 0; wi < windows.dim(0); ++wi) {
    Tensor tok({n, d}), m({n, n});
    for (std::size_t t = 0; t < n * d; ++t) tok[t] = windows[wi * n * d + t];
    for (std::size_t t = 0; t < n * n; ++t) m[t] = mask[wi * n * n + t];
    const auto r = scaled_softmax_attention(tok, tok, tok, m);
    // Original coordinates of token t of this window.
    auto origin = [&](std::size_t t) {
      const std::size_t si = (wi / per_row) * M + t / M, sj = (wi % per_row) * M + t % M;
      return std::pair{(si + s) % H, (sj + s) % W};
    };
    for (std::size_t a = 0; a < n; ++a) {
      double sum = 0.0;
      for (std::size_t b = 0; b < n; ++b) {
        const auto [ai, aj] = origin(a);
        const auto [bi, bj] = origin(b);
        const bool same = (ai < s) == (bi < s) && (aj < s) == (bj < s);
        if (same) {
          EXPECT_GT(r.weights.at(a, b), 0.0);
        } else {
          EXPECT_EQ(r.weights.at(a, b), 0.0);
        }
        sum += r.weights.at(a, b);
      }
      EXPECT_NEAR(sum, 1.0, 1e-12);
    }
  }
}

TEST(SwinBlock, ValidationErrors) {
  EXPECT_THROW(WindowAttnWeights::random(4, 2, 0, 3, 0), std::invalid_argument);
  auto w = WindowAttnWeights::random(4, 2, 0, 1, 0);
  EXPECT_THROW(swin_block_forward(Tensor({3, 4, 4}), w), std::invalid_argument);
  EXPECT_THROW(swin_block_forward(Tensor({4, 4, 3}), w), std::invalid_argument);
  w.shift = 2;
  EXPECT_THROW(swin_block_forward(Tensor({4, 4, 4}), w), std::invalid_argument);
}

TEST(LayerNorm, NormalizesEachToken) {
  const Tensor x = UniformSource(3).tensor({5, 6}, -2, 2);
  const Tensor y = layer_norm(x, Tensor({6}, 1.0), Tensor({6}));
  for (std::size_t t = 0; t < 5; ++t) {
    double mean = 0.0, sq = 0.0;
    for (std::size_t c = 0; c < 6; ++c) mean += y.at(t, c);
    mean /= 6;
    for (std::size_t c = 0; c < 6; ++c) sq += (y.at(t, c) - mean) * (y.at(t, c) - mean);
    EXPECT_NEAR(mean, 0.0, 1e-14);
    EXPECT_NEAR(sq / 6, 1.0, 1e-4);
  }
}
