#include "xraydet/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace xraydet {

double relative_error(double a, double b) {
  const double denom = std::max({std::abs(a), std::abs(b), 1e-8});
  return std::abs(a - b) / denom;
}

double max_gradient_error(const DifferentiableMap& map, const Tensor& x, double h,
                          std::uint64_t cotangent_seed) {
  if (!(h > 0.0)) throw std::invalid_argument("finite difference step must be positive");
  const Tensor y = map.forward(x);
  UniformSource rng(cotangent_seed);
  const Tensor cotangent = rng.tensor(y.shape(), -1.0, 1.0);
  const Tensor analytic = map.backward(x, cotangent);
  require_shape(analytic, x.shape(), "gradient");

  double worst = 0.0;
  Tensor probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + h;
    const double up = dot(cotangent, map.forward(probe));
    probe[i] = orig - h;
    const double down = dot(cotangent, map.forward(probe));
    probe[i] = orig;
    worst = std::max(worst, relative_error(analytic[i], (up - down) / (2.0 * h)));
  }
  return worst;
}

GradCheckReport finite_difference_check(std::string module,
                                        const std::vector<DifferentiableMap>& ops,
                                        const Tensor& x, double h, double tol,
                                        std::uint64_t seed) {
  GradCheckReport report;
  report.module = std::move(module);
  report.seed = seed;
  report.step = h;
  report.tolerance = tol;
  for (std::size_t i = 0; i < ops.size(); ++i) {
    const double err = max_gradient_error(ops[i], x, h, seed * 1000003u + i + 1);
    report.per_op.push_back({ops[i].name, err});
    report.max_rel_error = std::max(report.max_rel_error, err);
  }
  report.pass = report.max_rel_error <= tol;
  return report;
}

std::string_view to_string(AttnModule m) {
  return m == AttnModule::kCbam ? "cbam" : "swin_block";
}

AttnModule parse_attn_module(std::string_view name) {
  if (name == "cbam") return AttnModule::kCbam;
  if (name == "swin" || name == "swin_block") return AttnModule::kSwinBlock;
  throw std::invalid_argument("unknown attention module '" + std::string(name) + "'");
}

DifferentiableMap cbam_map(const CbamWeights& w) {
  return {"cbam", [w](const Tensor& x) { return cbam_forward(x, w); },
          [w](const Tensor& x, const Tensor& c) { return cbam_backward(x, w, c); }};
}

DifferentiableMap swin_block_map(const WindowAttnWeights& w) {
  return {w.shift ? "swin_block(sw-msa)" : "swin_block(w-msa)",
          [w](const Tensor& x) { return swin_block_forward(x, w); },
          [w](const Tensor& x, const Tensor& c) { return swin_block_backward(x, w, c); }};
}

Tensor grad_input(AttnModule module, const Tensor& x, const CbamWeights& cbam,
                  const Tensor& cotangent) {
  if (module != AttnModule::kCbam) {
    throw std::invalid_argument("grad_input: CBAM weights given for a non-CBAM module");
  }
  require_shape(cotangent, x.shape(), "cotangent");
  return cbam_backward(x, cbam, cotangent);
}

Tensor grad_input(AttnModule module, const Tensor& x, const WindowAttnWeights& swin,
                  const Tensor& cotangent) {
  if (module != AttnModule::kSwinBlock) {
    throw std::invalid_argument("grad_input: window weights given for a non-swin module");
  }
  require_shape(cotangent, x.shape(), "cotangent");
  return swin_block_backward(x, swin, cotangent);
}

GradCheckReport run_attention_check(AttnModule module, std::uint64_t seed,
                                    const AttnCheckOptions& o) {
  UniformSource rng(seed);
  if (module == AttnModule::kCbam) {
    const Tensor x = rng.tensor({o.cbam_channels, o.cbam_height, o.cbam_width}, -0.5, 0.5);
    const CbamWeights w = CbamWeights::random(o.cbam_channels, o.cbam_reduction, seed + 1);
    std::vector<DifferentiableMap> ops{
        {"channel_gate",
         [w](const Tensor& f) { return apply_channel_gate(f, channel_attention(f, w)); },
         [w](const Tensor& f, const Tensor& c) { return channel_gate_backward(f, w, c); }},
        {"spatial_gate",
         [w](const Tensor& f) { return apply_spatial_gate(f, spatial_attention(f, w)); },
         [w](const Tensor& f, const Tensor& c) { return spatial_gate_backward(f, w, c); }},
        cbam_map(w)};
    return finite_difference_check("cbam", ops, x, o.step, o.tolerance, seed);
  }

  const Tensor x = rng.tensor({o.swin_height, o.swin_width, o.swin_dim}, -0.5, 0.5);
  const WindowAttnWeights plain =
      WindowAttnWeights::random(o.swin_dim, o.swin_window, 0, o.swin_heads, seed + 1);
  WindowAttnWeights shifted = plain;
  shifted.shift = o.swin_window / 2;
  std::vector<DifferentiableMap> ops{
      {"layer_norm",
       [plain](const Tensor& t) { return layer_norm(t, plain.ln1_scale, plain.ln1_shift); },
       [plain](const Tensor& t, const Tensor& c) {
         return layer_norm_backward(t, plain.ln1_scale, c);
       }},
      {"w-msa", [plain](const Tensor& t) { return window_attention(t, plain); },
       [plain](const Tensor& t, const Tensor& c) {
         return window_attention_backward(t, plain, c);
       }},
      {"sw-msa", [shifted](const Tensor& t) { return window_attention(t, shifted); },
       [shifted](const Tensor& t, const Tensor& c) {
         return window_attention_backward(t, shifted, c);
       }},
      {"mlp", [plain](const Tensor& t) { return token_mlp(t, plain); },
       [plain](const Tensor& t, const Tensor& c) { return token_mlp_backward(t, plain, c); }},
      swin_block_map(plain),
      swin_block_map(shifted)};
  return finite_difference_check("swin_block", ops, x, o.step, o.tolerance, seed);
}

}  // namespace xraydet
