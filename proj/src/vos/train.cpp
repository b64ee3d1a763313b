#include <algorithm>
#include <cmath>
#include <cstdio>

#include "ara/ops.hpp"
#include "ara/optim.hpp"
#include "ara/vos_model.hpp"

namespace ara::vos {

Tensor clip_loss(const VosParams& params, const synthvid::VideoSequence& video, std::size_t object,
                 std::size_t t2, std::size_t t3, const Tensor& first_frame) {
  if (!(0 < t2 && t2 < t3 && t3 < video.length())) {
    throw std::invalid_argument("clip_loss: need 0 < t2 < t3 < T");
  }
  const Tensor f0 = first_frame.defined() ? first_frame : video.frames[0];
  std::vector<EncodedMemory> memory{encode_memory(params, f0, video.object_mask(0, object))};

  Tensor p2 = segment(params, std::span<const EncodedMemory>(memory), video.frames[t2]);
  Tensor l2 = ops::mean(ops::binary_ce(p2, video.object_mask(t2, object), ops::CeMode::full));
  memory.push_back(encode_memory(params, video.frames[t2], p2));
  Tensor p3 = segment(params, std::span<const EncodedMemory>(memory), video.frames[t3]);
  Tensor l3 = ops::mean(ops::binary_ce(p3, video.object_mask(t3, object), ops::CeMode::full));
  return ops::mul_scalar(ops::add(l2, l3), 0.5f);
}

TrainResult train_from(const VosParams& start, const std::vector<synthvid::VideoSequence>& dataset,
                       const TrainConfig& config) {
  if (dataset.empty()) throw std::invalid_argument("train: dataset is empty");
  TrainResult result;
  result.params = start.copy(true);
  if (config.steps == 0) return result;

  Adam adam(result.params.tensors(), AdamConfig{.lr = config.lr});
  Rng rng = Rng::substream(config.seed, "train-sampling");
  for (std::size_t step = 0; step < config.steps; ++step) {
    const auto& video = dataset[rng.below(dataset.size())];
    const std::size_t T = video.length();
    if (T < 3) throw std::invalid_argument("train: video " + video.id + " has fewer than 3 frames");
    const std::size_t object = rng.below(video.object_count);
    const std::size_t t2 = 1 + rng.below(std::min(config.max_skip, T - 2));
    const std::size_t t3 = t2 + 1 + rng.below(std::min(config.max_skip, T - 1 - t2));

    adam.zero_grad();
    Tensor loss = clip_loss(result.params, video, object, t2, t3);
    const double value = loss.item();
    if (!std::isfinite(value)) {
      throw TrainingDiverged("train: loss became " + std::to_string(value) + " at step " +
                             std::to_string(step) + " (video " + video.id + ")");
    }
    loss.backward();
    adam.step();
    result.losses.push_back(value);
    if (config.log_every && (step + 1) % config.log_every == 0) {
      std::fprintf(stderr, "train step %zu loss %.4f\n", step + 1, value);
    }
  }
  const std::size_t tail = std::min<std::size_t>(100, result.losses.size());
  double acc = 0.0;
  for (std::size_t i = result.losses.size() - tail; i < result.losses.size(); ++i) acc += result.losses[i];
  result.final_loss = acc / double(tail);
  return result;
}

TrainResult train(const std::vector<synthvid::VideoSequence>& dataset, const TrainConfig& config,
                  const VosArch& arch) {
  Rng init = Rng::substream(config.seed, "init");
  return train_from(VosParams::init(arch, init), dataset, config);
}

}  // namespace ara::vos
