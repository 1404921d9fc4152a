#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "xraydet/tensor.hpp"

namespace xraydet {

// ---------------------------------------------------------------------------
// CBAM: channel gate followed by spatial gate, on a C x H x W feature map.
// ---------------------------------------------------------------------------

inline constexpr std::size_t kSpatialKernel = 7;
inline constexpr std::size_t kSpatialPad = kSpatialKernel / 2;

struct CbamWeights {
  Tensor w0;              // (C/r) x C, applied first, followed by ReLU
  Tensor w1;              // C x (C/r)
  Tensor spatial_kernel;  // 2 x 7 x 7; plane 0 sees the channel mean, plane 1 the max
  std::size_t reduction = 16;

  std::size_t channels() const { return w1.dim(0); }

  /// Uniform [-0.5, 0.5] weights from UniformSource(seed): w0, w1, kernel.
  static CbamWeights random(std::size_t channels, std::size_t reduction,
                            std::uint64_t seed);
  static CbamWeights zeros(std::size_t channels, std::size_t reduction);

  /// Throws std::invalid_argument if the shapes do not fit `channels`.
  void validate(std::size_t channels) const;
};

enum class PoolKind { kAvg, kMax };

/// Per-channel reduction over H x W of a C x H x W tensor.
std::vector<double> global_pool(const Tensor& f, PoolKind kind);

/// sigmoid(W1 relu(W0 avg) + W1 relu(W0 max)); one weight per channel.
std::vector<double> channel_attention(const Tensor& f, const CbamWeights& w);

/// sigmoid(conv7x7([mean_c F; max_c F])) with zero padding 3; H x W.
Tensor spatial_attention(const Tensor& f, const CbamWeights& w);

/// f * gate[c], broadcast over H and W.
Tensor apply_channel_gate(const Tensor& f, std::span<const double> gate);
/// f * gate[h, w], broadcast over C.
Tensor apply_spatial_gate(const Tensor& f, const Tensor& gate);

/// F' = F * M_c(F); output = F' * M_s(F').
Tensor cbam_forward(const Tensor& f, const CbamWeights& w);

/// Input gradients (vector-Jacobian products) of the maps above.
Tensor channel_gate_backward(const Tensor& f, const CbamWeights& w, const Tensor& cotangent);
Tensor spatial_gate_backward(const Tensor& f, const CbamWeights& w, const Tensor& cotangent);
Tensor cbam_backward(const Tensor& f, const CbamWeights& w, const Tensor& cotangent);

// ---------------------------------------------------------------------------
// Swin-style transformer block on an H x W x d token grid.
// ---------------------------------------------------------------------------

inline constexpr double kLayerNormEps = 1e-5;

struct WindowAttnWeights {
  Tensor wq, wk, wv, wo;              // d x d
  Tensor ln1_scale, ln1_shift;        // d
  Tensor ln2_scale, ln2_shift;        // d
  Tensor mlp_in;                      // (ratio * d) x d
  Tensor mlp_out;                     // d x (ratio * d)
  std::size_t window = 4;             // M
  std::size_t shift = 0;              // 0 for W-MSA, M/2 for SW-MSA
  std::size_t heads = 1;

  std::size_t dim() const { return wq.dim(0); }

  /// Every tensor uniform in [-0.5, 0.5] from UniformSource(seed), drawn in
  /// declaration order.
  static WindowAttnWeights random(std::size_t dim, std::size_t window, std::size_t shift,
                                  std::size_t heads, std::uint64_t seed,
                                  std::size_t mlp_ratio = 4);
  /// Zero projections and MLP, layer norm scale 1 and shift 0.
  static WindowAttnWeights zeros(std::size_t dim, std::size_t window, std::size_t shift,
                                 std::size_t heads, std::size_t mlp_ratio = 4);

  /// Throws std::invalid_argument on inconsistent shapes, heads not dividing
  /// d, or shift >= window.
  void validate() const;
};

/// H x W x d -> (H/M * W/M) x M^2 x d, windows and tokens in row-major order.
/// Throws std::invalid_argument unless M divides H and W.
Tensor window_partition(const Tensor& x, std::size_t window);
/// Inverse of window_partition.
Tensor window_merge(const Tensor& windows, std::size_t height, std::size_t width,
                    std::size_t window);

/// out[i][j] = x[(i + s) mod H][(j + s) mod W]; content moves up and left.
Tensor cyclic_shift(const Tensor& x, std::size_t shift);
/// Undoes cyclic_shift.
Tensor inverse_shift(const Tensor& x, std::size_t shift);

/// Additive mask (nW x M^2 x M^2) for attention on the shifted grid: 0 for
/// token pairs from the same pre-shift region, -inf otherwise. All zeros
/// when shift == 0.
Tensor shifted_window_mask(std::size_t height, std::size_t width, std::size_t window,
                           std::size_t shift);

struct AttentionResult {
  Tensor output;   // n x dv
  Tensor weights;  // n x n softmax rows
};

/// softmax(q k^T / sqrt(d_k) + mask) v for q, k (n x d_k), v (n x d_v).
/// Mask entries are 0 or -inf. Throws std::invalid_argument on shape errors or
/// a fully masked row.
AttentionResult scaled_softmax_attention(const Tensor& q, const Tensor& k, const Tensor& v);
AttentionResult scaled_softmax_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                                         const Tensor& mask);

/// Layer norm over the last axis.
Tensor layer_norm(const Tensor& x, const Tensor& scale, const Tensor& shift);
Tensor layer_norm_backward(const Tensor& x, const Tensor& scale, const Tensor& cotangent);

/// (S)W-MSA on an H x W x d grid: cyclic shift, window partition, masked
/// multi-head attention with output projection, merge, inverse shift.
Tensor window_attention(const Tensor& x, const WindowAttnWeights& w);
Tensor window_attention_backward(const Tensor& x, const WindowAttnWeights& w,
                                 const Tensor& cotangent);

/// Per-token W_out gelu(W_in t) over the last axis.
Tensor token_mlp(const Tensor& x, const WindowAttnWeights& w);
Tensor token_mlp_backward(const Tensor& x, const WindowAttnWeights& w,
                          const Tensor& cotangent);

/// y = x + Attn(LN1(x)); out = y + MLP(LN2(y)).
Tensor swin_block_forward(const Tensor& x, const WindowAttnWeights& w);
Tensor swin_block_backward(const Tensor& x, const WindowAttnWeights& w,
                           const Tensor& cotangent);

}  // namespace xraydet
