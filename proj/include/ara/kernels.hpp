#pragma once

// Hot inner loops of the engine, in two builds with identical signatures:
// `serial` is the plain reference kept for testing, `parallel` is the
// OpenMP version used by the ops. Every output element is produced by one
// thread with a fixed summation order, so `parallel` results do not depend
// on the thread count.

#include <cstddef>
#include <span>

namespace ara::kernels {

struct ConvGeometry {
  std::size_t batch, in_channels, in_h, in_w;
  std::size_t out_channels, kernel, stride, padding;
  std::size_t out_h, out_w;
};

#define ARA_KERNEL_DECLS                                                                    \
  void conv2d_forward(const ConvGeometry& g, std::span<const float> input,                 \
                      std::span<const float> weight, std::span<const float> bias,          \
                      std::span<float> output);                                            \
  /* Accumulates (+=) into grad_input / grad_weight / grad_bias; empty spans are skipped */ \
  void conv2d_backward(const ConvGeometry& g, std::span<const float> input,                \
                       std::span<const float> weight, std::span<const float> grad_output,  \
                       std::span<float> grad_input, std::span<float> grad_weight,          \
                       std::span<float> grad_bias);                                        \
  /* out[m,n] = sum_k a[m,k] * b[k,n] (row-major, overwrites out) */                        \
  void matmul(std::size_t m, std::size_t k, std::size_t n, std::span<const float> a,       \
              std::span<const float> b, std::span<float> out);                             \
  /* grad_a += grad_out * b^T, grad_b += a^T * grad_out; empty spans are skipped */          \
  void matmul_backward(std::size_t m, std::size_t k, std::size_t n,                        \
                       std::span<const float> a, std::span<const float> b,                 \
                       std::span<const float> grad_out, std::span<float> grad_a,           \
                       std::span<float> grad_b);

namespace serial {
ARA_KERNEL_DECLS
}  // namespace serial

namespace parallel {
ARA_KERNEL_DECLS
}  // namespace parallel

#undef ARA_KERNEL_DECLS

/// Number of worker threads the parallel kernels will use (1 without OpenMP).
int max_threads();
/// Caps the parallel kernels' worker count; n <= 0 restores the default.
void set_threads(int n);

}  // namespace ara::kernels
