#include <numeric>

#include "ara/ops.hpp"

namespace ara::ops {

using detail::make_result;

Tensor reshape(const Tensor& a, const Shape& shape) {
  if (shape_numel(shape) != a.numel()) {
    throw ShapeError("reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
  }
  auto x = a.data();
  auto ai = a.impl();
  return make_result("reshape", shape, std::vector<float>(x.begin(), x.end()), {a},
                     [ai](const TensorImpl& out) {
                       if (!ai->requires_grad) return;
                       float* g = ai->grad_buffer();
                       for (std::size_t i = 0; i < out.grad.size(); ++i) g[i] += out.grad[i];
                     });
}

Tensor permute(const Tensor& a, const std::vector<std::size_t>& order) {
  const auto& s = a.shape();
  const std::size_t r = s.size();
  if (order.size() != r) {
    throw ShapeError("permute: order has " + std::to_string(order.size()) + " axes, tensor has " +
                     std::to_string(r));
  }
  std::vector<bool> used(r, false);
  for (auto ax : order) {
    if (ax >= r || used[ax]) throw ShapeError("permute: order is not a permutation");
    used[ax] = true;
  }
  Shape out_shape(r);
  for (std::size_t i = 0; i < r; ++i) out_shape[i] = s[order[i]];

  std::vector<std::size_t> in_stride(r, 1);
  for (std::size_t i = r; i-- > 1;) in_stride[i - 1] = in_stride[i] * s[i];
  // Source offset for each output element.
  const std::size_t total = a.numel();
  std::vector<std::size_t> src(total);
  std::vector<std::size_t> idx(r, 0);
  for (std::size_t flat = 0; flat < total; ++flat) {
    std::size_t off = 0;
    for (std::size_t i = 0; i < r; ++i) off += idx[i] * in_stride[order[i]];
    src[flat] = off;
    for (std::size_t i = r; i-- > 0;) {
      if (++idx[i] < out_shape[i]) break;
      idx[i] = 0;
    }
  }
  auto x = a.data();
  std::vector<float> y(total);
  for (std::size_t i = 0; i < total; ++i) y[i] = x[src[i]];
  auto ai = a.impl();
  return make_result("permute", out_shape, std::move(y), {a},
                     [ai, src = std::move(src)](const TensorImpl& out) {
                       if (!ai->requires_grad) return;
                       float* g = ai->grad_buffer();
                       for (std::size_t i = 0; i < src.size(); ++i) g[src[i]] += out.grad[i];
                     });
}

Tensor transpose(const Tensor& a) {
  if (a.rank() != 2) throw ShapeError("transpose: expects a 2-D tensor, got " + shape_str(a.shape()));
  return permute(a, {1, 0});
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const Shape& first = parts.front().shape();
  if (axis >= first.size()) throw ShapeError("concat: axis out of range for " + shape_str(first));
  Shape out_shape = first;
  out_shape[axis] = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    if (s.size() != first.size()) throw ShapeError("concat: rank mismatch");
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (i != axis && s[i] != first[i]) {
        throw ShapeError("concat: dim " + std::to_string(i) + " mismatch (" + shape_str(s) +
                         " vs " + shape_str(first) + ")");
      }
    }
    out_shape[axis] += s[axis];
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= first[i];
  for (std::size_t i = axis + 1; i < first.size(); ++i) inner *= first[i];

  std::vector<float> y(shape_numel(out_shape));
  const std::size_t out_row = out_shape[axis] * inner;
  std::size_t col = 0;
  std::vector<std::size_t> offsets;
  std::vector<std::shared_ptr<TensorImpl>> impls;
  for (const auto& p : parts) {
    const std::size_t chunk = p.dim(axis) * inner;
    auto x = p.data();
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy(x.begin() + o * chunk, x.begin() + (o + 1) * chunk, y.begin() + o * out_row + col);
    }
    offsets.push_back(col);
    impls.push_back(p.impl());
    col += chunk;
  }
  return make_result("concat", out_shape, std::move(y), parts,
                     [impls, offsets, outer, inner, out_row, axis](const TensorImpl& out) {
                       for (std::size_t k = 0; k < impls.size(); ++k) {
                         auto& p = impls[k];
                         if (!p->requires_grad) continue;
                         float* g = p->grad_buffer();
                         const std::size_t chunk = p->shape[axis] * inner;
                         for (std::size_t o = 0; o < outer; ++o)
                           for (std::size_t i = 0; i < chunk; ++i)
                             g[o * chunk + i] += out.grad[o * out_row + offsets[k] + i];
                       }
                     });
}

}  // namespace ara::ops
