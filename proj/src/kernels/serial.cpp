#include "ara/kernels.hpp"

#include <vector>

namespace ara::kernels::serial {

// Straight textbook loops: one output element at a time.
void conv2d_forward(const ConvGeometry& g, std::span<const float> input,
                    std::span<const float> weight, std::span<const float> bias,
                    std::span<float> output) {
  const long pad = static_cast<long>(g.padding);
  for (std::size_t n = 0; n < g.batch; ++n) {
    for (std::size_t o = 0; o < g.out_channels; ++o) {
      for (std::size_t oy = 0; oy < g.out_h; ++oy) {
        for (std::size_t ox = 0; ox < g.out_w; ++ox) {
          double acc = bias.empty() ? 0.0 : bias[o];
          for (std::size_t c = 0; c < g.in_channels; ++c) {
            for (std::size_t ky = 0; ky < g.kernel; ++ky) {
              for (std::size_t kx = 0; kx < g.kernel; ++kx) {
                long iy = static_cast<long>(oy * g.stride + ky) - pad;
                long ix = static_cast<long>(ox * g.stride + kx) - pad;
                if (iy < 0 || ix < 0 || iy >= static_cast<long>(g.in_h) ||
                    ix >= static_cast<long>(g.in_w)) {
                  continue;
                }
                double v = input[((n * g.in_channels + c) * g.in_h + iy) * g.in_w + ix];
                double w = weight[((o * g.in_channels + c) * g.kernel + ky) * g.kernel + kx];
                acc += v * w;
              }
            }
          }
          output[((n * g.out_channels + o) * g.out_h + oy) * g.out_w + ox] =
              static_cast<float>(acc);
        }
      }
    }
  }
}

void conv2d_backward(const ConvGeometry& g, std::span<const float> input,
                     std::span<const float> weight, std::span<const float> grad_output,
                     std::span<float> grad_input, std::span<float> grad_weight,
                     std::span<float> grad_bias) {
  const long pad = static_cast<long>(g.padding);
  std::vector<double> gin(grad_input.empty() ? 0 : grad_input.size(), 0.0);
  std::vector<double> gw(grad_weight.empty() ? 0 : grad_weight.size(), 0.0);
  std::vector<double> gb(grad_bias.empty() ? 0 : grad_bias.size(), 0.0);
  for (std::size_t n = 0; n < g.batch; ++n) {
    for (std::size_t o = 0; o < g.out_channels; ++o) {
      for (std::size_t oy = 0; oy < g.out_h; ++oy) {
        for (std::size_t ox = 0; ox < g.out_w; ++ox) {
          double go = grad_output[((n * g.out_channels + o) * g.out_h + oy) * g.out_w + ox];
          if (!gb.empty()) gb[o] += go;
          for (std::size_t c = 0; c < g.in_channels; ++c) {
            for (std::size_t ky = 0; ky < g.kernel; ++ky) {
              for (std::size_t kx = 0; kx < g.kernel; ++kx) {
                long iy = static_cast<long>(oy * g.stride + ky) - pad;
                long ix = static_cast<long>(ox * g.stride + kx) - pad;
                if (iy < 0 || ix < 0 || iy >= static_cast<long>(g.in_h) ||
                    ix >= static_cast<long>(g.in_w)) {
                  continue;
                }
                std::size_t ii = ((n * g.in_channels + c) * g.in_h + iy) * g.in_w + ix;
                std::size_t wi = ((o * g.in_channels + c) * g.kernel + ky) * g.kernel + kx;
                if (!gin.empty()) gin[ii] += go * weight[wi];
                if (!gw.empty()) gw[wi] += go * input[ii];
              }
            }
          }
        }
      }
    }
  }
  for (std::size_t i = 0; i < gin.size(); ++i) grad_input[i] += static_cast<float>(gin[i]);
  for (std::size_t i = 0; i < gw.size(); ++i) grad_weight[i] += static_cast<float>(gw[i]);
  for (std::size_t i = 0; i < gb.size(); ++i) grad_bias[i] += static_cast<float>(gb[i]);
}

void matmul(std::size_t m, std::size_t k, std::size_t n, std::span<const float> a,
            std::span<const float> b, std::span<float> out) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += double(a[i * k + p]) * b[p * n + j];
      out[i * n + j] = static_cast<float>(acc);
    }
  }
}

void matmul_backward(std::size_t m, std::size_t k, std::size_t n, std::span<const float> a,
                     std::span<const float> b, std::span<const float> grad_out,
                     std::span<float> grad_a, std::span<float> grad_b) {
  if (!grad_a.empty()) {
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t p = 0; p < k; ++p) {
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) acc += double(grad_out[i * n + j]) * b[p * n + j];
        grad_a[i * k + p] += static_cast<float>(acc);
      }
    }
  }
  if (!grad_b.empty()) {
    for (std::size_t p = 0; p < k; ++p) {
      for (std::size_t j = 0; j < n; ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < m; ++i) acc += double(a[i * k + p]) * grad_out[i * n + j];
        grad_b[p * n + j] += static_cast<float>(acc);
      }
    }
  }
}

}  // namespace ara::kernels::serial
