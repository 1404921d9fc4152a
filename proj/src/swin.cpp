#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "xraydet/attention.hpp"

namespace xraydet {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void require_grid(const Tensor& x, const char* what) {
  if (x.rank() != 3) {
    throw std::invalid_argument(std::string(what) + ": expected an H x W x d tensor, got " +
                                shape_string(x.shape()));
  }
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }

double gelu_derivative(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
  const double pdf = std::exp(-0.5 * x * x) * std::numbers::inv_sqrtpi / std::numbers::sqrt2;
  return cdf + x * pdf;
}

// View of the last axis as rows: (prod of leading dims) x d.
Tensor as_rows(const Tensor& x) {
  const std::size_t d = x.shape().back();
  return x.reshaped({x.size() / d, d});
}

Tensor columns(const Tensor& a, std::size_t begin, std::size_t count) {
  Tensor out({a.dim(0), count});
  for (std::size_t i = 0; i < a.dim(0); ++i) {
    for (std::size_t j = 0; j < count; ++j) out.at(i, j) = a.at(i, begin + j);
  }
  return out;
}

void put_columns(Tensor& dst, const Tensor& src, std::size_t begin) {
  for (std::size_t i = 0; i < src.dim(0); ++i) {
    for (std::size_t j = 0; j < src.dim(1); ++j) dst.at(i, begin + j) = src.at(i, j);
  }
}

Tensor window_slice(const Tensor& windows, std::size_t index) {
  const std::size_t n = windows.dim(1), d = windows.dim(2);
  std::vector<double> data(windows.data().begin() + static_cast<std::ptrdiff_t>(index * n * d),
                           windows.data().begin() + static_cast<std::ptrdiff_t>((index + 1) * n * d));
  return Tensor({n, d}, std::move(data));
}

void put_window(Tensor& windows, const Tensor& src, std::size_t index) {
  const std::size_t n = windows.dim(1), d = windows.dim(2);
  std::copy(src.data().begin(), src.data().end(),
            windows.data().begin() + static_cast<std::ptrdiff_t>(index * n * d));
}

// d(output) -> d(q), d(k), d(v) for scaled softmax attention.
struct AttentionGrads {
  Tensor q, k, v;
};

AttentionGrads attention_backward(const Tensor& q, const Tensor& k, const Tensor& v,
                                  const Tensor& weights, const Tensor& grad_out) {
  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(q.dim(1)));
  AttentionGrads g;
  g.v = transposed_matmul(weights, grad_out);
  Tensor grad_weights = matmul_transposed(grad_out, v);
  Tensor grad_logits({weights.dim(0), weights.dim(1)});
  for (std::size_t i = 0; i < weights.dim(0); ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < weights.dim(1); ++j) {
      row += grad_weights.at(i, j) * weights.at(i, j);
    }
    for (std::size_t j = 0; j < weights.dim(1); ++j) {
      grad_logits.at(i, j) = weights.at(i, j) * (grad_weights.at(i, j) - row) * inv_scale;
    }
  }
  g.q = matmul(grad_logits, k);
  g.k = transposed_matmul(grad_logits, q);
  return g;
}

AttentionResult attend(const Tensor& q, const Tensor& k, const Tensor& v, const Tensor* mask) {
  if (q.rank() != 2 || k.rank() != 2 || v.rank() != 2 || q.dim(1) != k.dim(1) ||
      k.dim(0) != v.dim(0)) {
    throw std::invalid_argument("scaled_softmax_attention: inconsistent q/k/v shapes");
  }
  const std::size_t n = q.dim(0), m = k.dim(0);
  if (mask) require_shape(*mask, {n, m}, "attention mask");

  Tensor weights = matmul_transposed(q, k);
  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(q.dim(1)));
  for (std::size_t i = 0; i < n; ++i) {
    double peak = kNegInf;
    for (std::size_t j = 0; j < m; ++j) {
      double& l = weights.at(i, j);
      l *= inv_scale;
      if (mask) l += mask->at(i, j);
      peak = std::max(peak, l);
    }
    if (peak == kNegInf) {
      throw std::invalid_argument("attention row " + std::to_string(i) + " is fully masked");
    }
    double sum = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      double& l = weights.at(i, j);
      l = std::exp(l - peak);
      sum += l;
    }
    for (std::size_t j = 0; j < m; ++j) weights.at(i, j) /= sum;
  }
  Tensor output = matmul(weights, v);
  return {std::move(output), std::move(weights)};
}

Tensor mask_slice(const Tensor& mask, std::size_t index) {
  const std::size_t n = mask.dim(1);
  std::vector<double> data(mask.data().begin() + static_cast<std::ptrdiff_t>(index * n * n),
                           mask.data().begin() + static_cast<std::ptrdiff_t>((index + 1) * n * n));
  return Tensor({n, n}, std::move(data));
}

// Forward state of multi-head attention inside one window.
struct WindowTrace {
  Tensor q, k, v;                       // n x d
  std::vector<AttentionResult> heads;   // per head
  Tensor concat;                        // n x d, before Wo
};

WindowTrace window_forward(const Tensor& tokens, const WindowAttnWeights& w,
                           const Tensor* mask) {
  WindowTrace t;
  t.q = matmul_transposed(tokens, w.wq);
  t.k = matmul_transposed(tokens, w.wk);
  t.v = matmul_transposed(tokens, w.wv);
  const std::size_t dh = w.dim() / w.heads;
  t.concat = Tensor({tokens.dim(0), w.dim()});
  for (std::size_t h = 0; h < w.heads; ++h) {
    auto r = attend(columns(t.q, h * dh, dh), columns(t.k, h * dh, dh),
                    columns(t.v, h * dh, dh), mask);
    put_columns(t.concat, r.output, h * dh);
    t.heads.push_back(std::move(r));
  }
  return t;
}

}  // namespace

WindowAttnWeights WindowAttnWeights::random(std::size_t dim, std::size_t window,
                                            std::size_t shift, std::size_t heads,
                                            std::uint64_t seed, std::size_t mlp_ratio) {
  UniformSource rng(seed);
  WindowAttnWeights w;
  w.wq = rng.tensor({dim, dim}, -0.5, 0.5);
  w.wk = rng.tensor({dim, dim}, -0.5, 0.5);
  w.wv = rng.tensor({dim, dim}, -0.5, 0.5);
  w.wo = rng.tensor({dim, dim}, -0.5, 0.5);
  w.ln1_scale = rng.tensor({dim}, -0.5, 0.5);
  w.ln1_shift = rng.tensor({dim}, -0.5, 0.5);
  w.ln2_scale = rng.tensor({dim}, -0.5, 0.5);
  w.ln2_shift = rng.tensor({dim}, -0.5, 0.5);
  w.mlp_in = rng.tensor({mlp_ratio * dim, dim}, -0.5, 0.5);
  w.mlp_out = rng.tensor({dim, mlp_ratio * dim}, -0.5, 0.5);
  w.window = window;
  w.shift = shift;
  w.heads = heads;
  w.validate();
  return w;
}

WindowAttnWeights WindowAttnWeights::zeros(std::size_t dim, std::size_t window,
                                           std::size_t shift, std::size_t heads,
                                           std::size_t mlp_ratio) {
  WindowAttnWeights w;
  w.wq = Tensor({dim, dim});
  w.wk = Tensor({dim, dim});
  w.wv = Tensor({dim, dim});
  w.wo = Tensor({dim, dim});
  w.ln1_scale = Tensor({dim}, 1.0);
  w.ln1_shift = Tensor({dim});
  w.ln2_scale = Tensor({dim}, 1.0);
  w.ln2_shift = Tensor({dim});
  w.mlp_in = Tensor({mlp_ratio * dim, dim});
  w.mlp_out = Tensor({dim, mlp_ratio * dim});
  w.window = window;
  w.shift = shift;
  w.heads = heads;
  w.validate();
  return w;
}

void WindowAttnWeights::validate() const {
  if (wq.rank() != 2) throw std::invalid_argument("window attention: Wq must be d x d");
  const std::size_t d = wq.dim(0);
  require_shape(wq, {d, d}, "Wq");
  require_shape(wk, {d, d}, "Wk");
  require_shape(wv, {d, d}, "Wv");
  require_shape(wo, {d, d}, "Wo");
  require_shape(ln1_scale, {d}, "LN1 scale");
  require_shape(ln1_shift, {d}, "LN1 shift");
  require_shape(ln2_scale, {d}, "LN2 scale");
  require_shape(ln2_shift, {d}, "LN2 shift");
  if (mlp_in.rank() != 2 || mlp_in.dim(1) != d) {
    throw std::invalid_argument("MLP input weights must be hidden x d");
  }
  require_shape(mlp_out, {d, mlp_in.dim(0)}, "MLP output weights");
  if (window == 0) throw std::invalid_argument("window size must be positive");
  if (shift >= window) throw std::invalid_argument("shift must be smaller than the window");
  if (heads == 0 || d % heads != 0) {
    throw std::invalid_argument("head count must divide the embedding dimension");
  }
}

Tensor window_partition(const Tensor& x, std::size_t window) {
  require_grid(x, "window_partition");
  const std::size_t h = x.dim(0), wd = x.dim(1), d = x.dim(2);
  if (window == 0 || h % window != 0 || wd % window != 0) {
    throw std::invalid_argument("window size " + std::to_string(window) +
                                " does not divide grid " + shape_string(x.shape()));
  }
  const std::size_t per_row = wd / window;
  Tensor out({(h / window) * per_row, window * window, d});
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x0 = 0; x0 < wd; ++x0) {
      const std::size_t win = (y / window) * per_row + x0 / window;
      const std::size_t tok = (y % window) * window + x0 % window;
      for (std::size_t c = 0; c < d; ++c) out.at(win, tok, c) = x.at(y, x0, c);
    }
  }
  return out;
}

Tensor window_merge(const Tensor& windows, std::size_t height, std::size_t width,
                    std::size_t window) {
  if (window == 0 || height % window != 0 || width % window != 0) {
    throw std::invalid_argument("window size does not divide the target grid");
  }
  const std::size_t per_row = width / window;
  if (windows.rank() != 3 || windows.dim(0) != (height / window) * per_row ||
      windows.dim(1) != window * window) {
    throw std::invalid_argument("window_merge: windows " + shape_string(windows.shape()) +
                                " do not tile the target grid");
  }
  const std::size_t d = windows.dim(2);
  Tensor out({height, width, d});
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x0 = 0; x0 < width; ++x0) {
      const std::size_t win = (y / window) * per_row + x0 / window;
      const std::size_t tok = (y % window) * window + x0 % window;
      for (std::size_t c = 0; c < d; ++c) out.at(y, x0, c) = windows.at(win, tok, c);
    }
  }
  return out;
}

namespace {

Tensor roll(const Tensor& x, std::size_t shift, bool forward) {
  require_grid(x, "cyclic_shift");
  const std::size_t h = x.dim(0), wd = x.dim(1), d = x.dim(2);
  if (shift >= std::min(h, wd)) {
    throw std::invalid_argument("shift must be smaller than both grid extents");
  }
  if (shift == 0) return x;
  Tensor out({h, wd, d});
  for (std::size_t y = 0; y < h; ++y) {
    const std::size_t sy = forward ? (y + shift) % h : (y + h - shift) % h;
    for (std::size_t x0 = 0; x0 < wd; ++x0) {
      const std::size_t sx = forward ? (x0 + shift) % wd : (x0 + wd - shift) % wd;
      for (std::size_t c = 0; c < d; ++c) out.at(y, x0, c) = x.at(sy, sx, c);
    }
  }
  return out;
}

}  // namespace

Tensor cyclic_shift(const Tensor& x, std::size_t shift) { return roll(x, shift, true); }

Tensor inverse_shift(const Tensor& x, std::size_t shift) { return roll(x, shift, false); }

Tensor shifted_window_mask(std::size_t height, std::size_t width, std::size_t window,
                           std::size_t shift) {
  if (window == 0 || height % window != 0 || width % window != 0) {
    throw std::invalid_argument("window size does not divide the grid");
  }
  const std::size_t n_windows = (height / window) * (width / window);
  const std::size_t n = window * window;
  Tensor mask({n_windows, n, n});
  if (shift == 0) return mask;

  // Region label on the shifted grid: the last `shift` rows/columns wrapped
  // around from the opposite edge.
  auto band = [&](std::size_t i, std::size_t extent) -> std::size_t {
    if (i < extent - window) return 0;
    if (i < extent - shift) return 1;
    return 2;
  };
  Tensor labels({height, width, 1});
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      labels.at(y, x, 0) = static_cast<double>(3 * band(y, height) + band(x, width));
    }
  }
  const Tensor windows = window_partition(labels, window);
  for (std::size_t w = 0; w < n_windows; ++w) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (windows.at(w, i, 0) != windows.at(w, j, 0)) mask.at(w, i, j) = kNegInf;
      }
    }
  }
  return mask;
}

AttentionResult scaled_softmax_attention(const Tensor& q, const Tensor& k, const Tensor& v) {
  return attend(q, k, v, nullptr);
}

AttentionResult scaled_softmax_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                                         const Tensor& mask) {
  return attend(q, k, v, &mask);
}

Tensor layer_norm(const Tensor& x, const Tensor& scale, const Tensor& shift) {
  const std::size_t d = x.shape().back();
  require_shape(scale, {d}, "layer norm scale");
  require_shape(shift, {d}, "layer norm shift");
  Tensor out = x;
  for (std::size_t base = 0; base < x.size(); base += d) {
    double mean = 0.0;
    for (std::size_t c = 0; c < d; ++c) mean += x[base + c];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t c = 0; c < d; ++c) var += (x[base + c] - mean) * (x[base + c] - mean);
    var /= static_cast<double>(d);
    const double rstd = 1.0 / std::sqrt(var + kLayerNormEps);
    for (std::size_t c = 0; c < d; ++c) {
      out[base + c] = (x[base + c] - mean) * rstd * scale[c] + shift[c];
    }
  }
  return out;
}

Tensor layer_norm_backward(const Tensor& x, const Tensor& scale, const Tensor& cotangent) {
  const std::size_t d = x.shape().back();
  require_shape(scale, {d}, "layer norm scale");
  require_shape(cotangent, x.shape(), "layer norm cotangent");
  Tensor grad(x.shape());
  std::vector<double> xhat(d), gxhat(d);
  for (std::size_t base = 0; base < x.size(); base += d) {
    double mean = 0.0;
    for (std::size_t c = 0; c < d; ++c) mean += x[base + c];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t c = 0; c < d; ++c) var += (x[base + c] - mean) * (x[base + c] - mean);
    var /= static_cast<double>(d);
    const double rstd = 1.0 / std::sqrt(var + kLayerNormEps);
    double mean_g = 0.0, mean_gx = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      xhat[c] = (x[base + c] - mean) * rstd;
      gxhat[c] = cotangent[base + c] * scale[c];
      mean_g += gxhat[c];
      mean_gx += gxhat[c] * xhat[c];
    }
    mean_g /= static_cast<double>(d);
    mean_gx /= static_cast<double>(d);
    for (std::size_t c = 0; c < d; ++c) {
      grad[base + c] = rstd * (gxhat[c] - mean_g - xhat[c] * mean_gx);
    }
  }
  return grad;
}

Tensor window_attention(const Tensor& x, const WindowAttnWeights& w) {
  require_grid(x, "window_attention");
  w.validate();
  require_shape(x, {x.dim(0), x.dim(1), w.dim()}, "window attention input");
  const std::size_t h = x.dim(0), wd = x.dim(1);

  const Tensor windows = window_partition(cyclic_shift(x, w.shift), w.window);
  const Tensor mask = shifted_window_mask(h, wd, w.window, w.shift);
  Tensor out_windows(windows.shape());
  for (std::size_t i = 0; i < windows.dim(0); ++i) {
    const Tensor m = mask_slice(mask, i);
    const WindowTrace t = window_forward(window_slice(windows, i), w, w.shift ? &m : nullptr);
    put_window(out_windows, matmul_transposed(t.concat, w.wo), i);
  }
  return inverse_shift(window_merge(out_windows, h, wd, w.window), w.shift);
}

Tensor window_attention_backward(const Tensor& x, const WindowAttnWeights& w,
                                 const Tensor& cotangent) {
  require_grid(x, "window_attention_backward");
  w.validate();
  require_shape(x, {x.dim(0), x.dim(1), w.dim()}, "window attention input");
  require_shape(cotangent, x.shape(), "window attention cotangent");
  const std::size_t h = x.dim(0), wd = x.dim(1);
  const std::size_t dh = w.dim() / w.heads;

  // The adjoint of inverse_shift is cyclic_shift, and of merge is partition.
  const Tensor windows = window_partition(cyclic_shift(x, w.shift), w.window);
  const Tensor grad_windows_out = window_partition(cyclic_shift(cotangent, w.shift), w.window);
  const Tensor mask = shifted_window_mask(h, wd, w.window, w.shift);
  Tensor grad_windows(windows.shape());
  for (std::size_t i = 0; i < windows.dim(0); ++i) {
    const Tensor tokens = window_slice(windows, i);
    const Tensor m = mask_slice(mask, i);
    const WindowTrace t = window_forward(tokens, w, w.shift ? &m : nullptr);

    const Tensor grad_concat = matmul(window_slice(grad_windows_out, i), w.wo);
    Tensor grad_q(t.q.shape()), grad_k(t.k.shape()), grad_v(t.v.shape());
    for (std::size_t hd = 0; hd < w.heads; ++hd) {
      const AttentionGrads g = attention_backward(
          columns(t.q, hd * dh, dh), columns(t.k, hd * dh, dh), columns(t.v, hd * dh, dh),
          t.heads[hd].weights, columns(grad_concat, hd * dh, dh));
      put_columns(grad_q, g.q, hd * dh);
      put_columns(grad_k, g.k, hd * dh);
      put_columns(grad_v, g.v, hd * dh);
    }
    Tensor grad_tokens = matmul(grad_q, w.wq);
    grad_tokens = add(grad_tokens, matmul(grad_k, w.wk));
    grad_tokens = add(grad_tokens, matmul(grad_v, w.wv));
    put_window(grad_windows, grad_tokens, i);
  }
  return inverse_shift(window_merge(grad_windows, h, wd, w.window), w.shift);
}

Tensor token_mlp(const Tensor& x, const WindowAttnWeights& w) {
  Tensor hidden = matmul_transposed(as_rows(x), w.mlp_in);
  for (double& v : hidden.data()) v = gelu(v);
  return matmul_transposed(hidden, w.mlp_out).reshaped(x.shape());
}

Tensor token_mlp_backward(const Tensor& x, const WindowAttnWeights& w,
                          const Tensor& cotangent) {
  require_shape(cotangent, x.shape(), "MLP cotangent");
  const Tensor pre = matmul_transposed(as_rows(x), w.mlp_in);
  Tensor grad_hidden = matmul(as_rows(cotangent), w.mlp_out);
  for (std::size_t i = 0; i < grad_hidden.size(); ++i) {
    grad_hidden[i] *= gelu_derivative(pre[i]);
  }
  return matmul(grad_hidden, w.mlp_in).reshaped(x.shape());
}

Tensor swin_block_forward(const Tensor& x, const WindowAttnWeights& w) {
  const Tensor mid =
      add(x, window_attention(layer_norm(x, w.ln1_scale, w.ln1_shift), w));
  return add(mid, token_mlp(layer_norm(mid, w.ln2_scale, w.ln2_shift), w));
}

Tensor swin_block_backward(const Tensor& x, const WindowAttnWeights& w,
                           const Tensor& cotangent) {
  require_shape(cotangent, x.shape(), "swin block cotangent");
  const Tensor norm1 = layer_norm(x, w.ln1_scale, w.ln1_shift);
  const Tensor mid = add(x, window_attention(norm1, w));
  const Tensor norm2 = layer_norm(mid, w.ln2_scale, w.ln2_shift);

  const Tensor grad_mid = add(
      cotangent,
      layer_norm_backward(mid, w.ln2_scale, token_mlp_backward(norm2, w, cotangent)));
  return add(grad_mid, layer_norm_backward(x, w.ln1_scale,
                                           window_attention_backward(norm1, w, grad_mid)));
}

}  // namespace xraydet
