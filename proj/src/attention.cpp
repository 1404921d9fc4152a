#include "xraydet/attention.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace xraydet {
namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void require_feature_map(const Tensor& f, const char* what) {
  if (f.rank() != 3) {
    throw std::invalid_argument(std::string(what) + ": expected a C x H x W tensor, got " +
                                shape_string(f.shape()));
  }
}

struct PooledStats {
  std::vector<double> avg;
  std::vector<double> max;
  std::vector<std::size_t> argmax;  // flat spatial index of the first maximum
};

PooledStats pool_channels(const Tensor& f) {
  const std::size_t c = f.dim(0), hw = f.dim(1) * f.dim(2);
  PooledStats s{std::vector<double>(c), std::vector<double>(c), std::vector<std::size_t>(c)};
  const auto data = f.data();
  for (std::size_t ch = 0; ch < c; ++ch) {
    const double* p = data.data() + ch * hw;
    double sum = 0.0;
    std::size_t best = 0;
    for (std::size_t i = 0; i < hw; ++i) {
      sum += p[i];
      if (p[i] > p[best]) best = i;
    }
    s.avg[ch] = sum / static_cast<double>(hw);
    s.max[ch] = p[best];
    s.argmax[ch] = best;
  }
  return s;
}

// Shared bottleneck MLP, keeping pre-activations for the backward pass.
struct MlpTrace {
  std::vector<double> hidden_pre;  // W0 v
  std::vector<double> out;         // W1 relu(W0 v)
};

MlpTrace shared_mlp(const CbamWeights& w, std::span<const double> v) {
  const std::size_t hidden = w.w0.dim(0), c = w.w0.dim(1);
  MlpTrace t{std::vector<double>(hidden), std::vector<double>(c)};
  for (std::size_t i = 0; i < hidden; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) s += w.w0.at(i, j) * v[j];
    t.hidden_pre[i] = s;
  }
  for (std::size_t i = 0; i < c; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < hidden; ++j) {
      s += w.w1.at(i, j) * std::max(0.0, t.hidden_pre[j]);
    }
    t.out[i] = s;
  }
  return t;
}

// d(MLP output) -> d(MLP input).
std::vector<double> shared_mlp_backward(const CbamWeights& w, const MlpTrace& t,
                                        std::span<const double> grad_out) {
  const std::size_t hidden = w.w0.dim(0), c = w.w0.dim(1);
  std::vector<double> grad_hidden(hidden, 0.0);
  for (std::size_t j = 0; j < hidden; ++j) {
    if (t.hidden_pre[j] <= 0.0) continue;
    double s = 0.0;
    for (std::size_t i = 0; i < c; ++i) s += w.w1.at(i, j) * grad_out[i];
    grad_hidden[j] = s;
  }
  std::vector<double> grad_in(c, 0.0);
  for (std::size_t j = 0; j < c; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < hidden; ++i) s += w.w0.at(i, j) * grad_hidden[i];
    grad_in[j] = s;
  }
  return grad_in;
}

struct SpatialStack {
  Tensor stack;                        // 2 x H x W: channel mean, channel max
  std::vector<std::size_t> argmax_c;   // per pixel, first maximal channel
};

SpatialStack channel_reduce(const Tensor& f) {
  const std::size_t c = f.dim(0), h = f.dim(1), wd = f.dim(2);
  SpatialStack s{Tensor({2, h, wd}), std::vector<std::size_t>(h * wd)};
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < wd; ++x) {
      double sum = 0.0;
      std::size_t best = 0;
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double v = f.at(ch, y, x);
        sum += v;
        if (v > f.at(best, y, x)) best = ch;
      }
      s.stack.at(0, y, x) = sum / static_cast<double>(c);
      s.stack.at(1, y, x) = f.at(best, y, x);
      s.argmax_c[y * wd + x] = best;
    }
  }
  return s;
}

// 2-in, 1-out 7x7 cross-correlation with zero padding; returns H x W logits.
Tensor conv7x7(const Tensor& stack, const Tensor& kernel) {
  const std::size_t h = stack.dim(1), wd = stack.dim(2);
  const auto pad = static_cast<long>(kSpatialPad);
  Tensor out({h, wd});
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < wd; ++x) {
      double s = 0.0;
      for (std::size_t p = 0; p < 2; ++p) {
        for (std::size_t ky = 0; ky < kSpatialKernel; ++ky) {
          const long sy = static_cast<long>(y) + static_cast<long>(ky) - pad;
          if (sy < 0 || sy >= static_cast<long>(h)) continue;
          for (std::size_t kx = 0; kx < kSpatialKernel; ++kx) {
            const long sx = static_cast<long>(x) + static_cast<long>(kx) - pad;
            if (sx < 0 || sx >= static_cast<long>(wd)) continue;
            s += kernel.at(p, ky, kx) *
                 stack.at(p, static_cast<std::size_t>(sy), static_cast<std::size_t>(sx));
          }
        }
      }
      out.at(y, x) = s;
    }
  }
  return out;
}

// d(logits) -> d(stack) for conv7x7.
Tensor conv7x7_backward(const Tensor& grad_out, const Tensor& kernel) {
  const std::size_t h = grad_out.dim(0), wd = grad_out.dim(1);
  const auto pad = static_cast<long>(kSpatialPad);
  Tensor grad({2, h, wd});
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < wd; ++x) {
      const double g = grad_out.at(y, x);
      if (g == 0.0) continue;
      for (std::size_t p = 0; p < 2; ++p) {
        for (std::size_t ky = 0; ky < kSpatialKernel; ++ky) {
          const long sy = static_cast<long>(y) + static_cast<long>(ky) - pad;
          if (sy < 0 || sy >= static_cast<long>(h)) continue;
          for (std::size_t kx = 0; kx < kSpatialKernel; ++kx) {
            const long sx = static_cast<long>(x) + static_cast<long>(kx) - pad;
            if (sx < 0 || sx >= static_cast<long>(wd)) continue;
            grad.at(p, static_cast<std::size_t>(sy), static_cast<std::size_t>(sx)) +=
                kernel.at(p, ky, kx) * g;
          }
        }
      }
    }
  }
  return grad;
}

}  // namespace

CbamWeights CbamWeights::random(std::size_t channels, std::size_t reduction,
                                std::uint64_t seed) {
  if (reduction == 0 || channels % reduction != 0) {
    throw std::invalid_argument("CBAM reduction must divide the channel count");
  }
  UniformSource rng(seed);
  CbamWeights w;
  w.reduction = reduction;
  w.w0 = rng.tensor({channels / reduction, channels}, -0.5, 0.5);
  w.w1 = rng.tensor({channels, channels / reduction}, -0.5, 0.5);
  w.spatial_kernel = rng.tensor({2, kSpatialKernel, kSpatialKernel}, -0.5, 0.5);
  return w;
}

CbamWeights CbamWeights::zeros(std::size_t channels, std::size_t reduction) {
  if (reduction == 0 || channels % reduction != 0) {
    throw std::invalid_argument("CBAM reduction must divide the channel count");
  }
  CbamWeights w;
  w.reduction = reduction;
  w.w0 = Tensor({channels / reduction, channels});
  w.w1 = Tensor({channels, channels / reduction});
  w.spatial_kernel = Tensor({2, kSpatialKernel, kSpatialKernel});
  return w;
}

void CbamWeights::validate(std::size_t channels) const {
  if (reduction == 0 || channels % reduction != 0) {
    throw std::invalid_argument("CBAM reduction " + std::to_string(reduction) +
                                " does not divide " + std::to_string(channels) + " channels");
  }
  const std::size_t hidden = channels / reduction;
  require_shape(w0, {hidden, channels}, "CBAM W0");
  require_shape(w1, {channels, hidden}, "CBAM W1");
  require_shape(spatial_kernel, {2, kSpatialKernel, kSpatialKernel}, "CBAM spatial kernel");
}

std::vector<double> global_pool(const Tensor& f, PoolKind kind) {
  require_feature_map(f, "global_pool");
  auto stats = pool_channels(f);
  return kind == PoolKind::kAvg ? std::move(stats.avg) : std::move(stats.max);
}

std::vector<double> channel_attention(const Tensor& f, const CbamWeights& w) {
  require_feature_map(f, "channel_attention");
  w.validate(f.dim(0));
  const PooledStats stats = pool_channels(f);
  const MlpTrace a = shared_mlp(w, stats.avg);
  const MlpTrace m = shared_mlp(w, stats.max);
  std::vector<double> gate(f.dim(0));
  for (std::size_t c = 0; c < gate.size(); ++c) gate[c] = sigmoid(a.out[c] + m.out[c]);
  return gate;
}

Tensor spatial_attention(const Tensor& f, const CbamWeights& w) {
  require_feature_map(f, "spatial_attention");
  w.validate(f.dim(0));
  Tensor logits = conv7x7(channel_reduce(f).stack, w.spatial_kernel);
  for (double& v : logits.data()) v = sigmoid(v);
  return logits;
}

Tensor apply_channel_gate(const Tensor& f, std::span<const double> gate) {
  require_feature_map(f, "apply_channel_gate");
  if (gate.size() != f.dim(0)) throw std::invalid_argument("channel gate length mismatch");
  Tensor out = f;
  const std::size_t hw = f.dim(1) * f.dim(2);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= gate[i / hw];
  return out;
}

Tensor apply_spatial_gate(const Tensor& f, const Tensor& gate) {
  require_feature_map(f, "apply_spatial_gate");
  require_shape(gate, {f.dim(1), f.dim(2)}, "spatial gate");
  Tensor out = f;
  const std::size_t hw = f.dim(1) * f.dim(2);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= gate[i % hw];
  return out;
}

Tensor cbam_forward(const Tensor& f, const CbamWeights& w) {
  const Tensor gated = apply_channel_gate(f, channel_attention(f, w));
  return apply_spatial_gate(gated, spatial_attention(gated, w));
}

Tensor channel_gate_backward(const Tensor& f, const CbamWeights& w, const Tensor& cotangent) {
  require_feature_map(f, "channel_gate_backward");
  w.validate(f.dim(0));
  require_shape(cotangent, f.shape(), "channel gate cotangent");
  const std::size_t c = f.dim(0), hw = f.dim(1) * f.dim(2);

  const PooledStats stats = pool_channels(f);
  const MlpTrace a = shared_mlp(w, stats.avg);
  const MlpTrace m = shared_mlp(w, stats.max);
  std::vector<double> gate(c);
  for (std::size_t ch = 0; ch < c; ++ch) gate[ch] = sigmoid(a.out[ch] + m.out[ch]);

  // out = f * gate: direct path plus the path through the gate.
  Tensor grad = apply_channel_gate(cotangent, gate);
  std::vector<double> grad_logit(c);
  for (std::size_t ch = 0; ch < c; ++ch) {
    double s = 0.0;
    for (std::size_t i = 0; i < hw; ++i) s += cotangent[ch * hw + i] * f[ch * hw + i];
    grad_logit[ch] = s * gate[ch] * (1.0 - gate[ch]);
  }
  const auto grad_avg = shared_mlp_backward(w, a, grad_logit);
  const auto grad_max = shared_mlp_backward(w, m, grad_logit);
  for (std::size_t ch = 0; ch < c; ++ch) {
    const double share = grad_avg[ch] / static_cast<double>(hw);
    for (std::size_t i = 0; i < hw; ++i) grad[ch * hw + i] += share;
    grad[ch * hw + stats.argmax[ch]] += grad_max[ch];
  }
  return grad;
}

Tensor spatial_gate_backward(const Tensor& f, const CbamWeights& w, const Tensor& cotangent) {
  require_feature_map(f, "spatial_gate_backward");
  w.validate(f.dim(0));
  require_shape(cotangent, f.shape(), "spatial gate cotangent");
  const std::size_t c = f.dim(0), h = f.dim(1), wd = f.dim(2), hw = h * wd;

  const SpatialStack reduced = channel_reduce(f);
  Tensor gate = conv7x7(reduced.stack, w.spatial_kernel);
  for (double& v : gate.data()) v = sigmoid(v);

  Tensor grad = apply_spatial_gate(cotangent, gate);
  Tensor grad_logit({h, wd});
  for (std::size_t i = 0; i < hw; ++i) {
    double s = 0.0;
    for (std::size_t ch = 0; ch < c; ++ch) s += cotangent[ch * hw + i] * f[ch * hw + i];
    grad_logit[i] = s * gate[i] * (1.0 - gate[i]);
  }
  const Tensor grad_stack = conv7x7_backward(grad_logit, w.spatial_kernel);
  for (std::size_t i = 0; i < hw; ++i) {
    const double share = grad_stack[i] / static_cast<double>(c);
    for (std::size_t ch = 0; ch < c; ++ch) grad[ch * hw + i] += share;
    grad[reduced.argmax_c[i] * hw + i] += grad_stack[hw + i];
  }
  return grad;
}

Tensor cbam_backward(const Tensor& f, const CbamWeights& w, const Tensor& cotangent) {
  const Tensor gated = apply_channel_gate(f, channel_attention(f, w));
  return channel_gate_backward(f, w, spatial_gate_backward(gated, w, cotangent));
}

}  // namespace xraydet
