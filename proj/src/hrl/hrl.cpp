#include "ara/hrl.hpp"

#include <cmath>

#include "ara/serialize.hpp"

namespace ara::hrl {

namespace {

vos::ConvLayer kaiming(Rng& rng, std::size_t in, std::size_t out, std::size_t k, std::size_t stride,
                       std::size_t padding) {
  const double std_dev = std::sqrt(2.0 / double(in * k * k));
  std::vector<float> w(out * in * k * k);
  for (auto& v : w) v = static_cast<float>(rng.normal() * std_dev);
  vos::ConvLayer layer;
  layer.weight = Tensor::from_data({out, in, k, k}, std::move(w));
  layer.bias = Tensor::zeros({out});
  layer.stride = stride;
  layer.padding = padding;
  layer.weight.set_requires_grad(true);
  layer.bias.set_requires_grad(true);
  return layer;
}

void check_map(const char* op, const Tensor& t) {
  if (t.rank() != 3 || t.dim(2) != 3) {
    throw ShapeError(std::string(op) + ": gradient map must be [H,W,3], got " + shape_str(t.shape()));
  }
}

}  // namespace

HrlParams HrlParams::init(Rng& rng, std::size_t c1, std::size_t c2) {
  HrlParams p;
  p.layers = {kaiming(rng, 3, c1, 4, 2, 1), kaiming(rng, c1, c2, 4, 2, 1), kaiming(rng, c2, 1, 3, 1, 1)};
  return p;
}

std::vector<Tensor> HrlParams::tensors() const {
  std::vector<Tensor> out;
  for (const auto& l : layers) {
    out.push_back(l.weight);
    out.push_back(l.bias);
  }
  return out;
}

Tensor normalize_gradient(const Tensor& raw) {
  check_map("normalize_gradient", raw);
  return ops::layer_normalize_per_channel(raw, 2);
}

Tensor hardness_forward(const HrlParams& params, const Tensor& grad_map) {
  check_map("hardness_forward", grad_map);
  const std::size_t H = grad_map.dim(0), W = grad_map.dim(1);
  if (H % 4 != 0 || W % 4 != 0) {
    throw ShapeError("hardness_forward: " + std::to_string(H) + "x" + std::to_string(W) +
                     " is not a multiple of 4");
  }
  Tensor x = ops::reshape(ops::permute(grad_map, {2, 0, 1}), {1, 3, H, W});
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    x = params.layers[i].forward(x);
    if (i + 1 < params.layers.size()) x = ops::relu(x);
  }
  return ops::reshape(ops::sigmoid(ops::bilinear_upsample(x, H, W)), {H, W});
}

Tensor pseudo_labels(const Tensor& gt, const Tensor& pred, float alpha, ops::CeMode mode) {
  if (gt.shape() != pred.shape()) {
    throw ShapeError("pseudo_labels: " + shape_str(gt.shape()) + " vs " + shape_str(pred.shape()));
  }
  if (!(alpha > 0.0f)) throw std::invalid_argument("pseudo_labels: alpha must be positive");
  Shape out_shape = gt.shape();
  std::size_t objects = 1;
  if (gt.rank() == 3) {
    objects = gt.dim(0);
    out_shape = {gt.dim(1), gt.dim(2)};
  } else if (gt.rank() != 2) {
    throw ShapeError("pseudo_labels: expected [H,W] or [O,H,W]");
  }
  const Tensor ce = ops::binary_ce(pred.detach(), gt, mode);
  auto c = ce.data();
  const std::size_t plane = out_shape[0] * out_shape[1];
  std::vector<float> z(plane, 0.0f);
  for (std::size_t o = 0; o < objects; ++o)
    for (std::size_t i = 0; i < plane; ++i)
      if (c[o * plane + i] > alpha) z[i] = 1.0f;
  return Tensor::from_data(out_shape, std::move(z));
}

Tensor hardness_loss(const Tensor& pseudo, const Tensor& pred, HardnessLoss kind) {
  if (pseudo.shape() != pred.shape()) {
    throw ShapeError("hardness_loss: " + shape_str(pseudo.shape()) + " vs " + shape_str(pred.shape()));
  }
  switch (kind) {
    case HardnessLoss::mse:
      return ops::mean(ops::square(ops::sub(pseudo, pred)));
    case HardnessLoss::mae:
      return ops::mean(ops::abs(ops::sub(pseudo, pred)));
    case HardnessLoss::ce:
      return ops::mean(ops::binary_ce(pred, pseudo, ops::CeMode::full));
  }
  throw std::invalid_argument("hardness_loss: unknown kind");
}

HrlTrainer::HrlTrainer(HrlParams params, AdamConfig adam, HardnessLoss kind)
    : params_(std::move(params)), adam_(params_.tensors(), adam), kind_(kind) {}

HrlTrainer::StepResult HrlTrainer::step(const Tensor& grad_map, const Tensor& pseudo) {
  adam_.zero_grad();
  Tensor z = hardness_forward(params_, grad_map);
  Tensor loss = hardness_loss(pseudo, z, kind_);
  const double value = loss.item();
  if (!std::isfinite(value)) {
    throw HrlDiverged("hardness loss became " + std::to_string(value) + " at HRL step " +
                      std::to_string(steps_));
  }
  loss.backward();
  adam_.step();
  if (dump_dir_) {
    io::save_tensor(*dump_dir_ / ("hardness_" + std::to_string(steps_) + ".arat"), z);
    io::save_tensor(*dump_dir_ / ("pseudo_" + std::to_string(steps_) + ".arat"), pseudo);
  }
  ++steps_;
  return {z.detach(), value};
}

Tensor HrlTrainer::predict(const Tensor& grad_map) const {
  return hardness_forward(params_, grad_map).detach();
}

}  // namespace ara::hrl
