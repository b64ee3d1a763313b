#pragma once

#include <cmath>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <vector>

#include "ara/ops.hpp"
#include "ara/optim.hpp"
#include "ara/rng.hpp"
#include "ara/vos_model.hpp"

// Hard region learner: a small conv net from a normalized gradient map to a
// per-pixel hardness map, trained online against thresholded CE labels.
namespace ara::hrl {

inline const float kDefaultAlpha = static_cast<float>(-std::log(0.4));

struct HrlParams {
  // stride-2 k4 3->c1, stride-2 k4 c1->c2, then a 3x3 head c2->1
  std::vector<vos::ConvLayer> layers;

  static HrlParams init(Rng& rng, std::size_t c1 = 8, std::size_t c2 = 16);
  std::vector<Tensor> tensors() const;
};

enum class HardnessLoss { mse, mae, ce };

class HrlDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Per-channel layer normalization of a raw [H,W,3] gradient.
Tensor normalize_gradient(const Tensor& raw);

/// sigmoid(upsample(f(G))) as [H,W]; differentiable w.r.t. params.
Tensor hardness_forward(const HrlParams& params, const Tensor& grad_map);

/// z = 1 where the per-pixel CE of `pred` against `gt` exceeds alpha. With
/// [O,H,W] inputs the per-pixel loss is the max over objects.
Tensor pseudo_labels(const Tensor& gt, const Tensor& pred, float alpha = kDefaultAlpha,
                     ops::CeMode mode = ops::CeMode::literal);

/// Mean over the H*W pixels.
Tensor hardness_loss(const Tensor& pseudo, const Tensor& pred, HardnessLoss kind = HardnessLoss::mse);

/// Params plus their optimizer; one instance per attacked frame.
class HrlTrainer {
 public:
  struct StepResult {
    Tensor hardness;  // pre-step map, detached
    double loss;      // pre-step loss
  };

  HrlTrainer(HrlParams params, AdamConfig adam, HardnessLoss kind = HardnessLoss::mse);

  /// Forward, loss, one Adam step. Throws HrlDiverged on a non-finite loss.
  StepResult step(const Tensor& grad_map, const Tensor& pseudo);
  Tensor predict(const Tensor& grad_map) const;
  const HrlParams& params() const { return params_; }

  /// When set, every step writes hardness_<n>.arat and pseudo_<n>.arat here.
  void set_dump_dir(std::optional<std::filesystem::path> dir) { dump_dir_ = std::move(dir); }

 private:
  HrlParams params_;
  Adam adam_;
  HardnessLoss kind_;
  std::optional<std::filesystem::path> dump_dir_;
  std::size_t steps_ = 0;
};

inline AdamConfig default_hrl_optimizer() { return AdamConfig{.lr = 0.1f, .weight_decay = 0.01f}; }

}  // namespace ara::hrl
