#pragma once

#include <string>
#include <vector>

#include "gradcheck.hpp"

// One gradient-check case per differentiable op plus a three-layer conv
// network. Inputs avoid kinks (relu/abs at 0, clamp bounds) by a margin much
// larger than the finite-difference step; for the network this includes the
// hidden pre-activations.
namespace ara::testing {

struct OpCase {
  std::string name;
  Fn lib;
  RefFn ref;
  std::vector<Tensor> inputs;
  std::vector<bool> check;  // empty: all inputs
  std::size_t per_input = 8;
};

inline std::vector<OpCase> op_cases(Rng& rng) {
  using ref::DT;
  std::vector<OpCase> c;
  auto T = [&](const Shape& s, double lo = -1.0, double hi = 1.0, std::vector<double> kinks = {}) {
    return random_tensor(s, rng, lo, hi, std::move(kinks), 0.02);
  };
  const Tensor bin = Tensor::from_data({2, 5}, {1, 0, 1, 0, 1, 1, 0, 0, 1, 0});

  c.push_back({"add", [](auto& v) { return ops::add(v[0], v[1]); },
               [](auto& v) { return ref::add(v[0], v[1]); }, {T({3, 4}), T({3, 4})}});
  c.push_back({"sub", [](auto& v) { return ops::sub(v[0], v[1]); },
               [](auto& v) { return ref::sub(v[0], v[1]); }, {T({3, 4}), T({3, 4})}});
  c.push_back({"mul", [](auto& v) { return ops::mul(v[0], v[1]); },
               [](auto& v) { return ref::mul(v[0], v[1]); }, {T({3, 4}), T({3, 4})}});
  c.push_back({"add_scalar", [](auto& v) { return ops::add_scalar(v[0], 0.75f); },
               [](auto& v) { return ref::map(v[0], [](double x) { return x + 0.75; }); }, {T({3, 4})}});
  c.push_back({"mul_scalar", [](auto& v) { return ops::mul_scalar(v[0], -1.5f); },
               [](auto& v) { return ref::map(v[0], [](double x) { return -1.5 * x; }); }, {T({3, 4})}});
  c.push_back({"neg", [](auto& v) { return ops::neg(v[0]); },
               [](auto& v) { return ref::map(v[0], [](double x) { return -x; }); }, {T({3, 4})}});
  c.push_back({"square", [](auto& v) { return ops::square(v[0]); },
               [](auto& v) { return ref::map(v[0], [](double x) { return x * x; }); }, {T({3, 4})}});
  c.push_back({"abs", [](auto& v) { return ops::abs(v[0]); },
               [](auto& v) { return ref::map(v[0], [](double x) { return std::abs(x); }); }, {T({3, 4}, -1, 1, {0})}});
  c.push_back({"relu", [](auto& v) { return ops::relu(v[0]); }, [](auto& v) { return ref::relu(v[0]); },
               {T({3, 4}, -1, 1, {0})}});
  c.push_back({"sigmoid", [](auto& v) { return ops::sigmoid(v[0]); }, [](auto& v) { return ref::sigmoid(v[0]); },
               {T({3, 4}, -4, 4)}});
  c.push_back({"clamp", [](auto& v) { return ops::clamp(v[0], -0.5f, 0.5f); },
               [](auto& v) { return ref::map(v[0], [](double x) { return std::clamp(x, -0.5, 0.5); }); },
               {T({3, 4}, -1, 1, {-0.5, 0.5})}});
  c.push_back({"sign", [](auto& v) { return ops::sign(v[0]); },
               [](auto& v) { return ref::map(v[0], [](double x) { return double((x > 0) - (x < 0)); }); },
               {T({3, 4}, -1, 1, {0})}});
  c.push_back({"sum", [](auto& v) { return ops::sum(v[0]); }, [](auto& v) { return ref::sum(v[0]); },
               {T({5, 6})}});
  c.push_back({"mean", [](auto& v) { return ops::mean(v[0]); }, [](auto& v) { return ref::mean(v[0]); },
               {T({30, 30})}});
  c.push_back({"matmul", [](auto& v) { return ops::matmul(v[0], v[1]); },
               [](auto& v) { return ref::matmul(v[0], v[1]); }, {T({4, 6}), T({6, 5})}});
  c.push_back({"softmax", [](auto& v) { return ops::softmax(v[0], 1); },
               [](auto& v) { return ref::softmax(v[0], 1); }, {T({3, 7}, -2, 2)}});
  c.push_back({"layer_norm", [](auto& v) { return ops::layer_normalize_per_channel(v[0], 2); },
               [](auto& v) { return ref::layer_norm(v[0], 2); }, {T({5, 6, 3}, -2, 2)}});
  c.push_back({"reshape", [](auto& v) { return ops::reshape(v[0], {4, 3}); },
               [](auto& v) { DT r = v[0]; r.shape = {4, 3}; return r; }, {T({3, 4})}});
  c.push_back({"permute", [](auto& v) { return ops::permute(v[0], {2, 0, 1}); },
               [](auto& v) { return ref::permute(v[0], {2, 0, 1}); }, {T({2, 3, 4})}});
  c.push_back({"transpose", [](auto& v) { return ops::transpose(v[0]); },
               [](auto& v) { return ref::transpose(v[0]); }, {T({3, 5})}});
  c.push_back({"concat", [](auto& v) { return ops::concat({v[0], v[1]}, 1); },
               [](auto& v) { return ref::concat({v[0], v[1]}, 1); }, {T({2, 3, 2}), T({2, 1, 2})}});
  c.push_back({"conv2d", [](auto& v) { return ops::conv2d(v[0], v[1], v[2], 2, 1); },
               [](auto& v) { return ref::conv2d(v[0], v[1], &v[2], 2, 1); },
               {T({2, 3, 8, 8}), T({4, 3, 4, 4}), T({4})}});
  c.push_back({"avg_pool2d", [](auto& v) { return ops::avg_pool2d(v[0], 3); },
               [](auto& v) { return ref::avg_pool2d(v[0], 3); }, {T({1, 2, 7, 8})}});
  c.push_back({"bilinear", [](auto& v) { return ops::bilinear_upsample(v[0], 12, 10); },
               [](auto& v) { return ref::bilinear(v[0], 12, 10); }, {T({1, 2, 4, 5})}});
  c.push_back({"bce_full", [bin](auto& v) { return ops::binary_ce(v[0], bin, ops::CeMode::full); },
               [bin](auto& v) { return ref::binary_ce(v[0], ref::of(bin), true); }, {T({2, 5}, 0.05, 0.95)}});
  c.push_back({"bce_literal", [bin](auto& v) { return ops::binary_ce(v[0], bin, ops::CeMode::literal); },
               [bin](auto& v) { return ref::binary_ce(v[0], ref::of(bin), false); }, {T({2, 5}, 0.05, 0.95)}});

  // conv-relu-conv-relu-conv, upsampled and squashed, scored by BCE.
  const Tensor target = random_tensor({1, 1, 16, 16}, rng, 0.0, 1.0);
  std::vector<Tensor> net;
  for (;;) {
    net = {T({1, 3, 16, 16}, 0, 1), T({6, 3, 3, 3}, -0.5, 0.5), T({6}, -0.1, 0.1), T({6, 6, 4, 4}, -0.3, 0.3),
           T({6}, -0.1, 0.1), T({1, 6, 3, 3}, -0.3, 0.3), T({1}, -0.1, 0.1)};
    const DT h1 = ref::conv2d(ref::of(net[0]), ref::of(net[1]), nullptr, 1, 1);
    DT b1 = h1;
    for (std::size_t i = 0; i < b1.v.size(); ++i) b1.v[i] += net[2].data()[i / 256];
    const DT b2 = ref::conv2d(ref::relu(b1), ref::of(net[3]), nullptr, 2, 1);
    bool clear = true;
    for (std::size_t i = 0; i < b2.v.size(); ++i)
      clear = clear && std::abs(b2.v[i] + net[4].data()[i / 64]) >= 1e-3;
    for (double x : b1.v) clear = clear && std::abs(x) >= 1e-3;
    if (clear) break;
  }
  c.push_back(
      {"network3",
       [target](auto& v) {
         Tensor x = ops::relu(ops::conv2d(v[0], v[1], v[2], 1, 1));
         x = ops::relu(ops::conv2d(x, v[3], v[4], 2, 1));
         x = ops::sigmoid(ops::bilinear_upsample(ops::conv2d(x, v[5], v[6], 1, 1), 16, 16));
         return ops::binary_ce(x, target, ops::CeMode::full);
       },
       [target](auto& v) {
         DT x = ref::relu(ref::conv2d(v[0], v[1], &v[2], 1, 1));
         x = ref::relu(ref::conv2d(x, v[3], &v[4], 2, 1));
         x = ref::sigmoid(ref::bilinear(ref::conv2d(x, v[5], &v[6], 1, 1), 16, 16));
         return ref::binary_ce(x, ref::of(target), true);
       },
       net,
       {},
       16});
  return c;
}

}  // namespace ara::testing
