#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "xraydet/attention.hpp"
#include "xraydet/tensor.hpp"

namespace xraydet {

/// A map R^n -> R^m with its vector-Jacobian product.
struct DifferentiableMap {
  std::string name;
  std::function<Tensor(const Tensor&)> forward;
  /// (input, cotangent on output) -> gradient on input
  std::function<Tensor(const Tensor&, const Tensor&)> backward;
};

struct OpCheck {
  std::string op;
  double max_rel_error = 0.0;
};

struct GradCheckReport {
  std::string module;
  std::uint64_t seed = 0;
  double step = 0.0;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  std::vector<OpCheck> per_op;
};

/// |a - b| / max(|a|, |b|, 1e-8).
double relative_error(double a, double b);

/// Largest relative error between map.backward(x, c) and central differences
/// of <c, map.forward(x)> with step h, where c is a fixed uniform [-1, 1]
/// cotangent drawn from UniformSource(cotangent_seed).
double max_gradient_error(const DifferentiableMap& map, const Tensor& x, double h,
                          std::uint64_t cotangent_seed);

/// Checks every map in `ops` at x; the report's error is the maximum over
/// them and pass holds iff it is <= tol. Never throws for a failed check.
GradCheckReport finite_difference_check(std::string module,
                                        const std::vector<DifferentiableMap>& ops,
                                        const Tensor& x, double h, double tol,
                                        std::uint64_t seed);

enum class AttnModule { kCbam, kSwinBlock };

std::string_view to_string(AttnModule m);
/// Accepts "cbam" and "swin" / "swin_block".
AttnModule parse_attn_module(std::string_view name);

DifferentiableMap cbam_map(const CbamWeights& w);
DifferentiableMap swin_block_map(const WindowAttnWeights& w);

/// Input gradient of a module's forward map contracted with `cotangent`.
Tensor grad_input(AttnModule module, const Tensor& x, const CbamWeights& cbam,
                  const Tensor& cotangent);
Tensor grad_input(AttnModule module, const Tensor& x, const WindowAttnWeights& swin,
                  const Tensor& cotangent);

struct AttnCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  // cbam fixture: C x H x W with reduction r
  std::size_t cbam_channels = 4;
  std::size_t cbam_reduction = 2;
  std::size_t cbam_height = 3;
  std::size_t cbam_width = 3;
  // swin fixture: H x W x d, window M, heads; the shifted variant uses M/2
  std::size_t swin_height = 4;
  std::size_t swin_width = 4;
  std::size_t swin_dim = 4;
  std::size_t swin_window = 2;
  std::size_t swin_heads = 1;
};

/// Seeded fixture (input and weights in [-0.5, 0.5]) plus the full check.
/// cbam checks channel gate, spatial gate and the composed module; swin
/// checks layer norm, W-MSA, SW-MSA, the MLP and the block with shift M/2.
GradCheckReport run_attention_check(AttnModule module, std::uint64_t seed,
                                    const AttnCheckOptions& options = {});

}  // namespace xraydet
