#include <algorithm>
#include <cmath>
#include <limits>

#include "ara/ops.hpp"

namespace ara::ops {

using detail::make_result;
using detail::require_same_shape;

namespace {

// out = f(a) with d(out)/d(a) = df(a, out) elementwise.
template <class F, class DF>
Tensor unary(const char* op, const Tensor& a, F f, DF df) {
  auto x = a.data();
  std::vector<float> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  auto ai = a.impl();
  return make_result(op, a.shape(), std::move(y), {a}, [ai, df](const TensorImpl& out) {
    if (!ai->requires_grad) return;
    float* g = ai->grad_buffer();
    for (std::size_t i = 0; i < out.data.size(); ++i) {
      g[i] += out.grad[i] * df(ai->data[i], out.data[i]);
    }
  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape("add", a, b);
  auto x = a.data(), z = b.data();
  std::vector<float> y(x.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = x[i] + z[i];
  auto ai = a.impl(), bi = b.impl();
  return make_result("add", a.shape(), std::move(y), {a, b}, [ai, bi](const TensorImpl& out) {
    for (auto* p : {ai.get(), bi.get()}) {
      if (!p->requires_grad) continue;
      float* g = p->grad_buffer();
      for (std::size_t i = 0; i < out.grad.size(); ++i) g[i] += out.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape("sub", a, b);
  auto x = a.data(), z = b.data();
  std::vector<float> y(x.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = x[i] - z[i];
  auto ai = a.impl(), bi = b.impl();
  return make_result("sub", a.shape(), std::move(y), {a, b}, [ai, bi](const TensorImpl& out) {
    if (ai->requires_grad) {
      float* g = ai->grad_buffer();
      for (std::size_t i = 0; i < out.grad.size(); ++i) g[i] += out.grad[i];
    }
    if (bi->requires_grad) {
      float* g = bi->grad_buffer();
      for (std::size_t i = 0; i < out.grad.size(); ++i) g[i] -= out.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape("mul", a, b);
  auto x = a.data(), z = b.data();
  std::vector<float> y(x.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = x[i] * z[i];
  auto ai = a.impl(), bi = b.impl();
  return make_result("mul", a.shape(), std::move(y), {a, b}, [ai, bi](const TensorImpl& out) {
    if (ai->requires_grad) {
      float* g = ai->grad_buffer();
      for (std::size_t i = 0; i < out.grad.size(); ++i) g[i] += out.grad[i] * bi->data[i];
    }
    if (bi->requires_grad) {
      float* g = bi->grad_buffer();
      for (std::size_t i = 0; i < out.grad.size(); ++i) g[i] += out.grad[i] * ai->data[i];
    }
  });
}

Tensor add_scalar(const Tensor& a, float s) {
  return unary("add_scalar", a, [s](float x) { return x + s; }, [](float, float) { return 1.0f; });
}

Tensor mul_scalar(const Tensor& a, float s) {
  return unary("mul_scalar", a, [s](float x) { return x * s; }, [s](float, float) { return s; });
}

Tensor neg(const Tensor& a) { return mul_scalar(a, -1.0f); }

Tensor square(const Tensor& a) {
  return unary("square", a, [](float x) { return x * x; }, [](float x, float) { return 2.0f * x; });
}

Tensor abs(const Tensor& a) {
  return unary(
      "abs", a, [](float x) { return std::fabs(x); },
      [](float x, float) { return x > 0.0f ? 1.0f : (x < 0.0f ? -1.0f : 0.0f); });
}

Tensor relu(const Tensor& a) {
  return unary(
      "relu", a, [](float x) { return x > 0.0f ? x : 0.0f; },
      [](float x, float) { return x > 0.0f ? 1.0f : 0.0f; });
}

Tensor sigmoid(const Tensor& a) {
  return unary(
      "sigmoid", a,
      [](float x) {
        // Branch on sign so exp never overflows; the final clamp keeps the
        // result strictly inside (0, 1) where float rounding would hit 0 or 1.
        constexpr float lo = std::numeric_limits<float>::min();
        constexpr float hi = 1.0f - std::numeric_limits<float>::epsilon() / 2.0f;
        float y;
        if (x >= 0.0f) {
          y = 1.0f / (1.0f + std::exp(-x));
        } else {
          float e = std::exp(x);
          y = e / (1.0f + e);
        }
        return std::clamp(y, lo, hi);
      },
      [](float, float y) { return y * (1.0f - y); });
}

Tensor clamp(const Tensor& a, float lo, float hi) {
  return unary(
      "clamp", a, [lo, hi](float x) { return x < lo ? lo : (x > hi ? hi : x); },
      [lo, hi](float x, float) { return (x > lo && x < hi) ? 1.0f : 0.0f; });
}

Tensor sign(const Tensor& a) {
  auto x = a.data();
  std::vector<float> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0.0f ? 1.0f : (x[i] < 0.0f ? -1.0f : 0.0f);
  // Piecewise constant: no node, so gradients stop here.
  return make_result("sign", a.shape(), std::move(y), {a}, nullptr);
}

Tensor sum(const Tensor& a) {
  double acc = 0.0;
  for (float v : a.data()) acc += v;
  auto ai = a.impl();
  return make_result("sum", {}, {static_cast<float>(acc)}, {a}, [ai](const TensorImpl& out) {
    if (!ai->requires_grad) return;
    float* g = ai->grad_buffer();
    for (std::size_t i = 0; i < ai->data.size(); ++i) g[i] += out.grad[0];
  });
}

Tensor mean(const Tensor& a) {
  if (a.numel() == 0) throw ShapeError("mean: empty tensor");
  return mul_scalar(sum(a), 1.0f / static_cast<float>(a.numel()));
}

Tensor binary_ce(const Tensor& pred, const Tensor& target, CeMode mode) {
  require_same_shape("binary_ce", pred, target);
  auto p = pred.data(), t = target.data();
  std::vector<float> y(p.size());
  const bool full = mode == CeMode::full;
  for (std::size_t i = 0; i < p.size(); ++i) {
    double pc = std::clamp(double(p[i]), double(kCeEpsilon), 1.0 - double(kCeEpsilon));
    double v = -double(t[i]) * std::log(pc);
    if (full) v -= (1.0 - double(t[i])) * std::log(1.0 - pc);
    y[i] = static_cast<float>(v);
  }
  auto pi = pred.impl(), ti = target.impl();
  return make_result("binary_ce", pred.shape(), std::move(y), {pred},
                     [pi, ti, full](const TensorImpl& out) {
                       if (!pi->requires_grad) return;
                       float* g = pi->grad_buffer();
                       const double lo = kCeEpsilon, hi = 1.0 - double(kCeEpsilon);
                       for (std::size_t i = 0; i < out.grad.size(); ++i) {
                         double p = pi->data[i];
                         if (p <= lo || p >= hi) continue;
                         double yv = ti->data[i];
                         double d = -yv / p;
                         if (full) d += (1.0 - yv) / (1.0 - p);
                         g[i] += static_cast<float>(out.grad[i] * d);
                       }
                     });
}

}  // namespace ara::ops
