#include <gtest/gtest.h>

#include "xraydet/gradcheck.hpp"

using namespace xraydet;

namespace {

DifferentiableMap linear_map() {
  const Tensor a = UniformSource(1).tensor({3, 4}, -1, 1);
  return {"linear",
          [a](const Tensor& x) { return matmul(a, x); },
          [a](const Tensor&, const Tensor& ct) { return transposed_matmul(a, ct); }};
}

}  // namespace

TEST(RelativeError, Definition) {
  EXPECT_EQ(relative_error(1.0, 1.0), 0.0);
  EXPECT_NEAR(relative_error(1.0, 2.0), 0.5, 1e-15);
  EXPECT_NEAR(relative_error(0.0, 1e-9), 1e-9 / 1e-8, 1e-15);
}

TEST(FiniteDifference, LinearMapIsExactToRounding) {
  const Tensor x = UniformSource(2).tensor({4, 2}, -1, 1);
  const auto r = finite_difference_check("linear", {linear_map()}, x, 1e-3, 1e-9, 0);
  EXPECT_TRUE(r.pass);
  EXPECT_LT(r.max_rel_error, 1e-9);
}

TEST(FiniteDifference, ZeroToleranceFailsWithoutThrowing) {
  const GradCheckReport r = [] {
    AttnCheckOptions o;
    o.tolerance = 0.0;
    return run_attention_check(AttnModule::kCbam, 0, o);
  }();
  EXPECT_FALSE(r.pass);
  EXPECT_GT(r.max_rel_error, 0.0);
}

TEST(FiniteDifference, PassIffWithinTolerance) {
  for (AttnModule m : {AttnModule::kCbam, AttnModule::kSwinBlock}) {
    const auto r = run_attention_check(m, 3);
    EXPECT_EQ(r.pass, r.max_rel_error <= r.tolerance);
    double worst = 0.0;
    for (const OpCheck& op : r.per_op) worst = std::max(worst, op.max_rel_error);
    EXPECT_EQ(worst, r.max_rel_error);
  }
}

TEST(AttentionGradients, FiveSeedsPerModulePass) {
  for (AttnModule m : {AttnModule::kCbam, AttnModule::kSwinBlock}) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto r = run_attention_check(m, seed);
      EXPECT_TRUE(r.pass) << to_string(m) << " seed " << seed << " err " << r.max_rel_error;
      EXPECT_LE(r.max_rel_error, 1e-4);
    }
  }
}

TEST(GradInput, ZeroCotangentGivesZeroGradient) {
  const Tensor x = UniformSource(4).tensor({4, 3, 3}, -1, 1);
  const auto g = grad_input(AttnModule::kCbam, x, CbamWeights::random(4, 2, 5), Tensor({4, 3, 3}));
  for (double v : g.data()) EXPECT_EQ(v, 0.0);
}

TEST(GradInput, ZeroSwinWeightsPassCotangentThrough) {
  const Tensor x = UniformSource(4).tensor({4, 4, 4}, -1, 1);
  const Tensor ct = UniformSource(5).tensor({4, 4, 4}, -1, 1);
  const auto w = WindowAttnWeights::zeros(4, 2, 1, 1);
  EXPECT_LT(max_abs_diff(grad_input(AttnModule::kSwinBlock, x, w, ct), ct), 1e-15);
}

TEST(GradInput, ZeroCbamWeightsAgreeWithFiniteDifferences) {
  const auto w = CbamWeights::zeros(4, 2);
  const Tensor x = UniformSource(6).tensor({4, 3, 3}, -1, 1);
  EXPECT_LT(max_gradient_error(cbam_map(w), x, 1e-5, 1), 1e-8);
}

TEST(GradInput, ShapeMismatchThrows) {
  const Tensor x({4, 3, 3}, 0.1);
  EXPECT_THROW(grad_input(AttnModule::kCbam, x, CbamWeights::random(4, 2, 0), Tensor({4, 3, 2})),
               std::invalid_argument);
}

TEST(AttnModule, Names) {
  EXPECT_EQ(parse_attn_module("cbam"), AttnModule::kCbam);
  EXPECT_EQ(parse_attn_module("swin_block"), AttnModule::kSwinBlock);
  EXPECT_EQ(parse_attn_module("swin"), AttnModule::kSwinBlock);
  EXPECT_THROW(parse_attn_module("resnet"), std::invalid_argument);
}
