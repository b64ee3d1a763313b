#pragma once

#include <vector>

#include "ara/tensor.hpp"

namespace ara {

struct AdamConfig {
  float lr = 1e-3f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
  /// Coupled L2 penalty: weight_decay * p is added to the gradient.
  float weight_decay = 0.0f;
};

/// Adam over a fixed list of leaf tensors. Parameters are updated in place;
/// a parameter without a gradient is skipped for that step.
class Adam {
 public:
  Adam(std::vector<Tensor> params, AdamConfig config);

  void step();
  void zero_grad();

  const AdamConfig& config() const { return config_; }
  long steps_taken() const { return t_; }

 private:
  std::vector<Tensor> params_;
  AdamConfig config_;
  std::vector<std::vector<double>> m_, v_;
  long t_ = 0;
};

}  // namespace ara
