#include "ara/kernels.hpp"

#include <algorithm>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace ara::kernels {

namespace {
int g_thread_cap = 0;  // 0: OpenMP default
}

int max_threads() {
#ifdef _OPENMP
  return g_thread_cap > 0 ? g_thread_cap : omp_get_max_threads();
#else
  return 1;
#endif
}

void set_threads(int n) { g_thread_cap = n > 0 ? n : 0; }

namespace parallel {

namespace {

// Range of output columns ox for which ix = ox*stride + kx - pad lies in [0, in_w).
inline void valid_range(std::size_t k_off, std::size_t pad, std::size_t stride, std::size_t in_len,
                        std::size_t out_len, std::size_t& lo, std::size_t& hi) {
  // ix >= 0  <=>  ox*stride >= pad - k_off
  lo = 0;
  hi = 0;
  if (k_off >= in_len + pad) return;
  if (pad > k_off) lo = (pad - k_off + stride - 1) / stride;
  // ix < in_len  <=>  ox*stride < in_len + pad - k_off
  std::size_t limit = in_len + pad - k_off;  // k_off <= kernel-1 < in_len + pad
  hi = std::min(out_len, (limit + stride - 1) / stride);
  if (hi < lo) hi = lo;
}

// Workers only at the outermost level; callers already running inside a
// parallel region (e.g. one video per thread) get the serial path.
inline bool fan_out(long jobs) {
#ifdef _OPENMP
  return jobs > 1 && max_threads() > 1 && !omp_in_parallel();
#else
  (void)jobs;
  return false;
#endif
}

}  // namespace

void conv2d_forward(const ConvGeometry& g, std::span<const float> input,
                    std::span<const float> weight, std::span<const float> bias,
                    std::span<float> output) {
  const long jobs = static_cast<long>(g.batch * g.out_channels);
  const std::size_t plane = g.out_h * g.out_w;
#pragma omp parallel for schedule(static) num_threads(max_threads()) if (fan_out(jobs))
  for (long job = 0; job < jobs; ++job) {
    const std::size_t n = static_cast<std::size_t>(job) / g.out_channels;
    const std::size_t o = static_cast<std::size_t>(job) % g.out_channels;
    std::vector<double> acc(plane, bias.empty() ? 0.0 : double(bias[o]));
    for (std::size_t c = 0; c < g.in_channels; ++c) {
      const float* in = input.data() + (n * g.in_channels + c) * g.in_h * g.in_w;
      for (std::size_t ky = 0; ky < g.kernel; ++ky) {
        std::size_t y_lo, y_hi;
        valid_range(ky, g.padding, g.stride, g.in_h, g.out_h, y_lo, y_hi);
        for (std::size_t kx = 0; kx < g.kernel; ++kx) {
          std::size_t x_lo, x_hi;
          valid_range(kx, g.padding, g.stride, g.in_w, g.out_w, x_lo, x_hi);
          const double w = weight[((o * g.in_channels + c) * g.kernel + ky) * g.kernel + kx];
          for (std::size_t oy = y_lo; oy < y_hi; ++oy) {
            const float* row = in + (oy * g.stride + ky - g.padding) * g.in_w;
            double* out_row = acc.data() + oy * g.out_w;
            for (std::size_t ox = x_lo; ox < x_hi; ++ox) {
              out_row[ox] += w * row[ox * g.stride + kx - g.padding];
            }
          }
        }
      }
    }
    float* out = output.data() + (n * g.out_channels + o) * plane;
    for (std::size_t i = 0; i < plane; ++i) out[i] = static_cast<float>(acc[i]);
  }
}

void conv2d_backward(const ConvGeometry& g, std::span<const float> input,
                     std::span<const float> weight, std::span<const float> grad_output,
                     std::span<float> grad_input, std::span<float> grad_weight,
                     std::span<float> grad_bias) {
  const std::size_t out_plane = g.out_h * g.out_w;
  const std::size_t in_plane = g.in_h * g.in_w;

  if (!grad_input.empty()) {
    const long jobs = static_cast<long>(g.batch * g.in_channels);
#pragma omp parallel for schedule(static) num_threads(max_threads()) if (fan_out(jobs))
    for (long job = 0; job < jobs; ++job) {
      const std::size_t n = static_cast<std::size_t>(job) / g.in_channels;
      const std::size_t c = static_cast<std::size_t>(job) % g.in_channels;
      std::vector<double> acc(in_plane, 0.0);
      for (std::size_t o = 0; o < g.out_channels; ++o) {
        const float* go = grad_output.data() + (n * g.out_channels + o) * out_plane;
        for (std::size_t ky = 0; ky < g.kernel; ++ky) {
          std::size_t y_lo, y_hi;
          valid_range(ky, g.padding, g.stride, g.in_h, g.out_h, y_lo, y_hi);
          for (std::size_t kx = 0; kx < g.kernel; ++kx) {
            std::size_t x_lo, x_hi;
            valid_range(kx, g.padding, g.stride, g.in_w, g.out_w, x_lo, x_hi);
            const double w = weight[((o * g.in_channels + c) * g.kernel + ky) * g.kernel + kx];
            for (std::size_t oy = y_lo; oy < y_hi; ++oy) {
              double* row = acc.data() + (oy * g.stride + ky - g.padding) * g.in_w;
              const float* go_row = go + oy * g.out_w;
              for (std::size_t ox = x_lo; ox < x_hi; ++ox) {
                row[ox * g.stride + kx - g.padding] += w * go_row[ox];
              }
            }
          }
        }
      }
      float* gi = grad_input.data() + (n * g.in_channels + c) * in_plane;
      for (std::size_t i = 0; i < in_plane; ++i) gi[i] += static_cast<float>(acc[i]);
    }
  }

  if (!grad_weight.empty() || !grad_bias.empty()) {
    const long jobs = static_cast<long>(g.out_channels);
#pragma omp parallel for schedule(static) num_threads(max_threads()) if (fan_out(jobs))
    for (long oj = 0; oj < jobs; ++oj) {
      const std::size_t o = static_cast<std::size_t>(oj);
      if (!grad_bias.empty()) {
        double b = 0.0;
        for (std::size_t n = 0; n < g.batch; ++n) {
          const float* go = grad_output.data() + (n * g.out_channels + o) * out_plane;
          for (std::size_t i = 0; i < out_plane; ++i) b += go[i];
        }
        grad_bias[o] += static_cast<float>(b);
      }
      if (grad_weight.empty()) continue;
      for (std::size_t c = 0; c < g.in_channels; ++c) {
        for (std::size_t ky = 0; ky < g.kernel; ++ky) {
          std::size_t y_lo, y_hi;
          valid_range(ky, g.padding, g.stride, g.in_h, g.out_h, y_lo, y_hi);
          for (std::size_t kx = 0; kx < g.kernel; ++kx) {
            std::size_t x_lo, x_hi;
            valid_range(kx, g.padding, g.stride, g.in_w, g.out_w, x_lo, x_hi);
            double acc = 0.0;
            for (std::size_t n = 0; n < g.batch; ++n) {
              const float* go = grad_output.data() + (n * g.out_channels + o) * out_plane;
              const float* in = input.data() + (n * g.in_channels + c) * in_plane;
              for (std::size_t oy = y_lo; oy < y_hi; ++oy) {
                const float* row = in + (oy * g.stride + ky - g.padding) * g.in_w;
                const float* go_row = go + oy * g.out_w;
                for (std::size_t ox = x_lo; ox < x_hi; ++ox) {
                  acc += double(go_row[ox]) * row[ox * g.stride + kx - g.padding];
                }
              }
            }
            grad_weight[((o * g.in_channels + c) * g.kernel + ky) * g.kernel + kx] +=
                static_cast<float>(acc);
          }
        }
      }
    }
  }
}

void matmul(std::size_t m, std::size_t k, std::size_t n, std::span<const float> a,
            std::span<const float> b, std::span<float> out) {
  const long rows = static_cast<long>(m);
#pragma omp parallel for schedule(static) num_threads(max_threads()) if (fan_out(rows))
  for (long il = 0; il < rows; ++il) {
    const std::size_t i = static_cast<std::size_t>(il);
    std::vector<double> acc(n, 0.0);
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      const float* brow = b.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) acc[j] += av * brow[j];
    }
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = static_cast<float>(acc[j]);
  }
}

void matmul_backward(std::size_t m, std::size_t k, std::size_t n, std::span<const float> a,
                     std::span<const float> b, std::span<const float> grad_out,
                     std::span<float> grad_a, std::span<float> grad_b) {
  if (!grad_a.empty()) {
    const long rows = static_cast<long>(m);
#pragma omp parallel for schedule(static) num_threads(max_threads()) if (fan_out(rows))
    for (long il = 0; il < rows; ++il) {
      const std::size_t i = static_cast<std::size_t>(il);
      const float* go = grad_out.data() + i * n;
      for (std::size_t p = 0; p < k; ++p) {
        const float* brow = b.data() + p * n;
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) acc += double(go[j]) * brow[j];
        grad_a[i * k + p] += static_cast<float>(acc);
      }
    }
  }
  if (!grad_b.empty()) {
    const long rows = static_cast<long>(k);
#pragma omp parallel for schedule(static) num_threads(max_threads()) if (fan_out(rows))
    for (long pl = 0; pl < rows; ++pl) {
      const std::size_t p = static_cast<std::size_t>(pl);
      std::vector<double> acc(n, 0.0);
      for (std::size_t i = 0; i < m; ++i) {
        const double av = a[i * k + p];
        const float* go = grad_out.data() + i * n;
        for (std::size_t j = 0; j < n; ++j) acc[j] += av * go[j];
      }
      for (std::size_t j = 0; j < n; ++j) grad_b[p * n + j] += static_cast<float>(acc[j]);
    }
  }
}

}  // namespace parallel
}  // namespace ara::kernels
