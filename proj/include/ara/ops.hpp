#pragma once

#include <cstddef>
#include <vector>

#include "ara/tensor.hpp"

// Differentiable operations. Binary elementwise ops require identical
// shapes; the only broadcast is tensor-with-scalar via the *_scalar ops.
namespace ara::ops {

// Elementwise.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor add_scalar(const Tensor& a, float s);
Tensor mul_scalar(const Tensor& a, float s);
Tensor neg(const Tensor& a);
Tensor square(const Tensor& a);
Tensor abs(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
/// Clamps into [lo, hi]; gradient passes only where lo < x < hi.
Tensor clamp(const Tensor& a, float lo, float hi);
/// Elementwise sign in {-1, 0, 1}. Zero gradient everywhere.
Tensor sign(const Tensor& a);

// Reductions (64-bit accumulation).
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

/// 2-D matrix product [m,k] x [k,n] -> [m,n].
Tensor matmul(const Tensor& a, const Tensor& b);

/// Numerically stable softmax along `axis`.
Tensor softmax(const Tensor& a, std::size_t axis);

/// Normalises every slice along `channel_axis` to zero mean and unit
/// variance over the remaining axes: (x - mu_c) / sqrt(var_c + eps).
/// A constant channel maps to zeros.
Tensor layer_normalize_per_channel(const Tensor& a, std::size_t channel_axis, float eps = 1e-12f);

// Shape manipulation.
Tensor reshape(const Tensor& a, const Shape& shape);
Tensor permute(const Tensor& a, const std::vector<std::size_t>& order);
Tensor transpose(const Tensor& a);  // 2-D only
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);

// Convolutional building blocks, NCHW layout.

/// Cross-correlation. weight is [O,C,k,k]; bias is [O] or undefined.
Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, std::size_t stride,
              std::size_t padding);
/// Non-overlapping average pooling with window `k`; spatial dims rounded up
/// (partial windows average over their valid pixels).
Tensor avg_pool2d(const Tensor& input, std::size_t k);
/// Half-pixel (align_corners=false) bilinear interpolation to a size at
/// least as large as the input.
Tensor bilinear_upsample(const Tensor& input, std::size_t out_h, std::size_t out_w);

enum class CeMode {
  literal,  // -y log(p): background pixels contribute nothing
  full,     // -[y log(p) + (1-y) log(1-p)]
};

inline constexpr float kCeEpsilon = 1e-7f;

/// Per-element cross-entropy. `pred` is clamped to [eps, 1-eps] first;
/// `target` is treated as a constant.
Tensor binary_ce(const Tensor& pred, const Tensor& target, CeMode mode);

}  // namespace ara::ops
