#include <algorithm>
#include <cmath>

#include "ara/kernels.hpp"
#include "ara/ops.hpp"

namespace ara::ops {

using detail::make_result;

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2) {
    throw ShapeError("matmul: expects 2-D operands, got " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw ShapeError("matmul: inner dimension mismatch (dim 1 of lhs = " + std::to_string(k) +
                     ", dim 0 of rhs = " + std::to_string(b.dim(0)) + ")");
  }
  std::vector<float> out(m * n);
  kernels::parallel::matmul(m, k, n, a.data(), b.data(), out);
  auto ai = a.impl(), bi = b.impl();
  return make_result("matmul", {m, n}, std::move(out), {a, b},
                     [ai, bi, m, k, n](const TensorImpl& o) {
                       std::span<float> ga, gb;
                       if (ai->requires_grad) ga = {ai->grad_buffer(), m * k};
                       if (bi->requires_grad) gb = {bi->grad_buffer(), k * n};
                       kernels::parallel::matmul_backward(m, k, n, ai->data, bi->data, o.grad, ga,
                                                          gb);
                     });
}

Tensor softmax(const Tensor& a, std::size_t axis) {
  const auto& s = a.shape();
  if (axis >= s.size()) {
    throw ShapeError("softmax: axis " + std::to_string(axis) + " out of range for " + shape_str(s));
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  const std::size_t len = s[axis];
  auto x = a.data();
  std::vector<float> y(x.size());
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * len * inner + in;
      float mx = x[base];
      for (std::size_t j = 1; j < len; ++j) mx = std::max(mx, x[base + j * inner]);
      double z = 0.0;
      for (std::size_t j = 0; j < len; ++j) z += std::exp(double(x[base + j * inner]) - mx);
      for (std::size_t j = 0; j < len; ++j) {
        y[base + j * inner] = static_cast<float>(std::exp(double(x[base + j * inner]) - mx) / z);
      }
    }
  }
  auto ai = a.impl();
  return make_result("softmax", s, std::move(y), {a},
                     [ai, outer, inner, len](const TensorImpl& out) {
                       if (!ai->requires_grad) return;
                       float* g = ai->grad_buffer();
                       // dx_j = y_j * (dy_j - sum_i dy_i y_i)
                       for (std::size_t o = 0; o < outer; ++o) {
                         for (std::size_t in = 0; in < inner; ++in) {
                           const std::size_t base = o * len * inner + in;
                           double dot = 0.0;
                           for (std::size_t j = 0; j < len; ++j) {
                             dot += double(out.grad[base + j * inner]) * out.data[base + j * inner];
                           }
                           for (std::size_t j = 0; j < len; ++j) {
                             const std::size_t idx = base + j * inner;
                             g[idx] += static_cast<float>(out.data[idx] * (out.grad[idx] - dot));
                           }
                         }
                       }
                     });
}

Tensor layer_normalize_per_channel(const Tensor& a, std::size_t channel_axis, float eps) {
  const auto& s = a.shape();
  if (channel_axis >= s.size()) {
    throw ShapeError("layer_normalize_per_channel: axis " + std::to_string(channel_axis) +
                     " out of range for " + shape_str(s));
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < channel_axis; ++i) outer *= s[i];
  for (std::size_t i = channel_axis + 1; i < s.size(); ++i) inner *= s[i];
  const std::size_t channels = s[channel_axis];
  const double count = double(outer * inner);
  auto x = a.data();
  auto index = [=](std::size_t o, std::size_t c, std::size_t in) {
    return (o * channels + c) * inner + in;
  };

  std::vector<float> y(x.size());
  std::vector<double> inv_std(channels, 0.0);
  for (std::size_t c = 0; c < channels; ++c) {
    double mu = 0.0;
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t in = 0; in < inner; ++in) mu += x[index(o, c, in)];
    mu /= count;
    double var = 0.0;
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t in = 0; in < inner; ++in) {
        double d = x[index(o, c, in)] - mu;
        var += d * d;
      }
    var /= count;
    // Exactly constant channel: output zeros and pass no gradient.
    inv_std[c] = var > 0.0 ? 1.0 / std::sqrt(var + double(eps)) : 0.0;
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t in = 0; in < inner; ++in) {
        auto idx = index(o, c, in);
        y[idx] = static_cast<float>((x[idx] - mu) * inv_std[c]);
      }
  }

  auto ai = a.impl();
  return make_result(
      "layer_normalize_per_channel", s, std::move(y), {a},
      [ai, inv_std, outer, inner, channels, count](const TensorImpl& out) {
        if (!ai->requires_grad) return;
        float* g = ai->grad_buffer();
        auto index = [=](std::size_t o, std::size_t c, std::size_t in) {
          return (o * channels + c) * inner + in;
        };
        // dx = inv_std * (dy - mean(dy) - yhat * mean(dy * yhat))
        for (std::size_t c = 0; c < channels; ++c) {
          if (inv_std[c] == 0.0) continue;
          double m_dy = 0.0, m_dyy = 0.0;
          for (std::size_t o = 0; o < outer; ++o)
            for (std::size_t in = 0; in < inner; ++in) {
              auto idx = index(o, c, in);
              m_dy += out.grad[idx];
              m_dyy += double(out.grad[idx]) * out.data[idx];
            }
          m_dy /= count;
          m_dyy /= count;
          for (std::size_t o = 0; o < outer; ++o)
            for (std::size_t in = 0; in < inner; ++in) {
              auto idx = index(o, c, in);
              g[idx] += static_cast<float>(inv_std[c] *
                                           (out.grad[idx] - m_dy - out.data[idx] * m_dyy));
            }
        }
      });
}

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, std::size_t stride,
              std::size_t padding) {
  if (input.rank() != 4) throw ShapeError("conv2d: input must be [N,C,H,W], got " + shape_str(input.shape()));
  if (weight.rank() != 4) throw ShapeError("conv2d: weight must be [O,C,k,k], got " + shape_str(weight.shape()));
  if (stride == 0) throw ShapeError("conv2d: stride must be >= 1");
  kernels::ConvGeometry g{};
  g.batch = input.dim(0);
  g.in_channels = input.dim(1);
  g.in_h = input.dim(2);
  g.in_w = input.dim(3);
  g.out_channels = weight.dim(0);
  g.kernel = weight.dim(2);
  g.stride = stride;
  g.padding = padding;
  if (weight.dim(1) != g.in_channels) {
    throw ShapeError("conv2d: weight dim 1 (in channels) = " + std::to_string(weight.dim(1)) +
                     " but input dim 1 = " + std::to_string(g.in_channels));
  }
  if (weight.dim(3) != g.kernel) {
    throw ShapeError("conv2d: weight dims 2 and 3 must match (square kernel), got " +
                     shape_str(weight.shape()));
  }
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != g.out_channels)) {
    throw ShapeError("conv2d: bias must be [" + std::to_string(g.out_channels) + "], got " +
                     shape_str(bias.shape()));
  }
  const std::size_t ph = g.in_h + 2 * padding, pw = g.in_w + 2 * padding;
  if (g.kernel > ph) throw ShapeError("conv2d: kernel exceeds padded input height (dim 2)");
  if (g.kernel > pw) throw ShapeError("conv2d: kernel exceeds padded input width (dim 3)");
  if ((ph - g.kernel) % stride != 0) {
    throw ShapeError("conv2d: non-integer output height (dim 2): (" + std::to_string(g.in_h) +
                     " + 2*" + std::to_string(padding) + " - " + std::to_string(g.kernel) +
                     ") / " + std::to_string(stride));
  }
  if ((pw - g.kernel) % stride != 0) {
    throw ShapeError("conv2d: non-integer output width (dim 3): (" + std::to_string(g.in_w) +
                     " + 2*" + std::to_string(padding) + " - " + std::to_string(g.kernel) +
                     ") / " + std::to_string(stride));
  }
  g.out_h = (ph - g.kernel) / stride + 1;
  g.out_w = (pw - g.kernel) / stride + 1;

  std::vector<float> out(g.batch * g.out_channels * g.out_h * g.out_w);
  std::span<const float> bias_data;
  if (bias.defined()) bias_data = bias.data();
  kernels::parallel::conv2d_forward(g, input.data(), weight.data(), bias_data, out);

  auto ii = input.impl(), wi = weight.impl();
  auto bi = bias.defined() ? bias.impl() : nullptr;
  std::vector<Tensor> parents{input, weight};
  if (bias.defined()) parents.push_back(bias);
  return make_result("conv2d", {g.batch, g.out_channels, g.out_h, g.out_w}, std::move(out),
                     std::move(parents), [ii, wi, bi, g](const TensorImpl& o) {
                       std::span<float> gi, gw, gb;
                       if (ii->requires_grad) gi = {ii->grad_buffer(), ii->data.size()};
                       if (wi->requires_grad) gw = {wi->grad_buffer(), wi->data.size()};
                       if (bi && bi->requires_grad) gb = {bi->grad_buffer(), bi->data.size()};
                       kernels::parallel::conv2d_backward(g, ii->data, wi->data, o.grad, gi, gw, gb);
                     });
}

Tensor avg_pool2d(const Tensor& input, std::size_t k) {
  if (input.rank() != 4) throw ShapeError("avg_pool2d: input must be [N,C,H,W], got " + shape_str(input.shape()));
  if (k == 0) throw ShapeError("avg_pool2d: window must be >= 1");
  const std::size_t n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  const std::size_t oh = (h + k - 1) / k, ow = (w + k - 1) / k;
  auto x = input.data();
  std::vector<float> y(n * c * oh * ow);
  for (std::size_t p = 0; p < n * c; ++p) {
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        double acc = 0.0;
        std::size_t cnt = 0;
        for (std::size_t y0 = oy * k; y0 < std::min(h, oy * k + k); ++y0)
          for (std::size_t x0 = ox * k; x0 < std::min(w, ox * k + k); ++x0) {
            acc += x[(p * h + y0) * w + x0];
            ++cnt;
          }
        y[(p * oh + oy) * ow + ox] = static_cast<float>(acc / double(cnt));
      }
    }
  }
  auto ii = input.impl();
  return make_result("avg_pool2d", {n, c, oh, ow}, std::move(y), {input},
                     [ii, n, c, h, w, oh, ow, k](const TensorImpl& out) {
                       if (!ii->requires_grad) return;
                       float* g = ii->grad_buffer();
                       for (std::size_t p = 0; p < n * c; ++p)
                         for (std::size_t y0 = 0; y0 < h; ++y0)
                           for (std::size_t x0 = 0; x0 < w; ++x0) {
                             std::size_t oy = y0 / k, ox = x0 / k;
                             std::size_t cnt = (std::min(h, oy * k + k) - oy * k) *
                                               (std::min(w, ox * k + k) - ox * k);
                             g[(p * h + y0) * w + x0] +=
                                 out.grad[(p * oh + oy) * ow + ox] / static_cast<float>(cnt);
                           }
                     });
}

namespace {

struct Tap {
  std::size_t i0, i1;
  float w0, w1;
};

// Half-pixel source coordinate, clamped at the borders.
std::vector<Tap> bilinear_taps(std::size_t in, std::size_t out) {
  std::vector<Tap> taps(out);
  const double scale = double(in) / double(out);
  for (std::size_t o = 0; o < out; ++o) {
    double src = (double(o) + 0.5) * scale - 0.5;
    if (src < 0.0) src = 0.0;
    std::size_t i0 = std::min(static_cast<std::size_t>(src), in - 1);
    std::size_t i1 = std::min(i0 + 1, in - 1);
    float frac = static_cast<float>(src - double(i0));
    taps[o] = {i0, i1, 1.0f - frac, frac};
  }
  return taps;
}

}  // namespace

Tensor bilinear_upsample(const Tensor& input, std::size_t out_h, std::size_t out_w) {
  if (input.rank() != 4) {
    throw ShapeError("bilinear_upsample: input must be [N,C,H,W], got " + shape_str(input.shape()));
  }
  const std::size_t n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  if (out_h < h || out_w < w) {
    throw ShapeError("bilinear_upsample: downsampling " + shape_str(input.shape()) + " to " +
                     std::to_string(out_h) + "x" + std::to_string(out_w) + " is not supported");
  }
  auto ty = bilinear_taps(h, out_h), tx = bilinear_taps(w, out_w);
  auto x = input.data();
  std::vector<float> y(n * c * out_h * out_w);
  for (std::size_t p = 0; p < n * c; ++p) {
    const float* src = x.data() + p * h * w;
    for (std::size_t oy = 0; oy < out_h; ++oy) {
      const auto& a = ty[oy];
      for (std::size_t ox = 0; ox < out_w; ++ox) {
        const auto& b = tx[ox];
        double v = double(a.w0) * (double(b.w0) * src[a.i0 * w + b.i0] + double(b.w1) * src[a.i0 * w + b.i1]) +
                   double(a.w1) * (double(b.w0) * src[a.i1 * w + b.i0] + double(b.w1) * src[a.i1 * w + b.i1]);
        y[(p * out_h + oy) * out_w + ox] = static_cast<float>(v);
      }
    }
  }
  auto ii = input.impl();
  return make_result("bilinear_upsample", {n, c, out_h, out_w}, std::move(y), {input},
                     [ii, ty, tx, n, c, h, w, out_h, out_w](const TensorImpl& out) {
                       if (!ii->requires_grad) return;
                       float* g = ii->grad_buffer();
                       for (std::size_t p = 0; p < n * c; ++p) {
                         float* dst = g + p * h * w;
                         for (std::size_t oy = 0; oy < out_h; ++oy) {
                           const auto& a = ty[oy];
                           for (std::size_t ox = 0; ox < out_w; ++ox) {
                             const auto& b = tx[ox];
                             float go = out.grad[(p * out_h + oy) * out_w + ox];
                             dst[a.i0 * w + b.i0] += go * a.w0 * b.w0;
                             dst[a.i0 * w + b.i1] += go * a.w0 * b.w1;
                             dst[a.i1 * w + b.i0] += go * a.w1 * b.w0;
                             dst[a.i1 * w + b.i1] += go * a.w1 * b.w1;
                           }
                         }
                       }
                     });
}

}  // namespace ara::ops
